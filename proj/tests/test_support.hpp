#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "revcf/revcf.hpp"

namespace testing_support {

namespace fs = std::filesystem;

inline std::string fixture(const std::string& rel) { return std::string(REVCF_FIXTURE_DIR) + "/" + rel; }
inline std::string data_file(const std::string& rel) { return std::string(REVCF_DATA_DIR) + "/" + rel; }

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() / ("revcf-" + tag + "-" + std::to_string(::getpid()) + "-" +
                                         std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  std::string write(const std::string& name, const std::string& contents) const {
    std::ofstream(file(name), std::ios::binary) << contents;
    return file(name);
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

inline revcf::corpus::RawReview review(std::string id, std::string user, std::string item, int stars,
                                       std::string text = "", std::string date = "2020-01-01 00:00:00") {
  return {std::move(id), std::move(user), std::move(item), stars, std::move(text), std::move(date)};
}

// Dense matrix -> reviews with ids "u<row>", "i<col>" (zero padded so index
// order matches column order) and review ids "r<row>_<col>".
inline std::vector<revcf::corpus::RawReview> reviews_from_dense(const oracle::Dense& r) {
  std::vector<revcf::corpus::RawReview> out;
  for (std::size_t u = 0; u < r.size(); ++u)
    for (std::size_t i = 0; i < r[u].size(); ++i)
      if (!std::isnan(r[u][i]))
        out.push_back(review("r" + std::to_string(u) + "_" + std::to_string(i), "u" + std::to_string(10 + u),
                             "i" + std::to_string(10 + i), static_cast<int>(r[u][i])));
  return out;
}
inline std::string user_name(std::size_t u) { return "u" + std::to_string(10 + u); }
inline std::string item_name(std::size_t i) { return "i" + std::to_string(10 + i); }

// Users 1..4 by Items 1..4.
inline oracle::Dense worked_example() {
  const double NA = oracle::NA;
  return {{1, 3, NA, 4}, {4, NA, 2, 3}, {NA, 5, 5, 4}, {5, 2, 5, NA}};
}

inline std::vector<revcf::corpus::RawReview> worked_reviews() {
  const auto d = worked_example();
  std::vector<revcf::corpus::RawReview> out;
  for (std::size_t u = 0; u < d.size(); ++u)
    for (std::size_t i = 0; i < d[u].size(); ++i)
      if (!std::isnan(d[u][i]))
        out.push_back(review("t" + std::to_string(u + 1) + std::to_string(i + 1), "User" + std::to_string(u + 1),
                             "Item" + std::to_string(i + 1), static_cast<int>(d[u][i])));
  return out;
}

// Random users x items matrix with the given fill probability.
inline oracle::Dense random_dense(std::mt19937_64& rng, std::size_t users, std::size_t items, double fill) {
  std::uniform_int_distribution<int> star(1, 5);
  std::bernoulli_distribution present(fill);
  oracle::Dense d(users, std::vector<double>(items, oracle::NA));
  for (auto& row : d)
    for (auto& v : row)
      if (present(rng)) v = star(rng);
  return d;
}

inline std::string run_cli(const std::string& args) {
  return std::string(REVCF_CLI_PATH) + " " + args;
}

// Exit status of the CLI invoked with `args`, output discarded.
inline int cli_status(const std::string& args) {
  int rc = std::system((run_cli(args) + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace testing_support
