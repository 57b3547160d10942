#pragma once

// Ingestion of Yelp-style line-delimited dumps, threshold-driven sample
// selection and the seeded train/test split.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"
#include "revcf/error.hpp"
#include "revcf/io.hpp"

namespace revcf::corpus {

using json = nlohmann::json;

struct RawReview {
  std::string review_id;
  std::string user_id;
  std::string business_id;
  int stars = 0;
  std::string text;
  std::string date;  // "YYYY-MM-DD HH:MM:SS" in the Yelp dump; compared lexicographically

  bool operator==(const RawReview&) const = default;
};

struct Business {
  std::string business_id;
  std::optional<std::string> state;
  std::string categories;
};

struct UserRecord {
  std::string user_id;
  std::string name;
  std::int64_t review_count = 0;
};

enum class Schema { review, business, user };

struct LoadStats {
  std::size_t records = 0;
  std::size_t skipped = 0;
  std::vector<std::string> diagnostics;  // first few skip reasons, "line N: why"
};

template <class Record>
struct Loaded {
  std::vector<Record> records;
  LoadStats stats;
};

// ---------------------------------------------------------------------------
// Record parsing. Each returns false (with a reason) for a record that
// lacks required fields; callers skip it.

namespace detail {

inline bool get_string(const json& j, const char* key, std::string& out, std::string& why) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) {
    why = std::string("missing string field '") + key + "'";
    return false;
  }
  out = it->get<std::string>();
  return true;
}

}  // namespace detail

inline bool parse_record(const json& j, RawReview& r, std::string& why) {
  if (!detail::get_string(j, "review_id", r.review_id, why) || !detail::get_string(j, "user_id", r.user_id, why) ||
      !detail::get_string(j, "business_id", r.business_id, why) || !detail::get_string(j, "text", r.text, why))
    return false;
  auto stars = j.find("stars");
  if (stars == j.end() || !stars->is_number()) {
    why = "missing numeric field 'stars'";
    return false;
  }
  double s = stars->get<double>();
  if (s != std::floor(s) || s < 1 || s > 5) {
    why = "stars out of range 1..5";
    return false;
  }
  r.stars = static_cast<int>(s);
  auto date = j.find("date");
  r.date = (date != j.end() && date->is_string()) ? date->get<std::string>() : std::string();
  return true;
}

inline bool parse_record(const json& j, Business& b, std::string& why) {
  if (!detail::get_string(j, "business_id", b.business_id, why)) return false;
  auto state = j.find("state");
  b.state.reset();
  if (state != j.end() && state->is_string() && !state->get<std::string>().empty()) b.state = state->get<std::string>();
  auto cats = j.find("categories");
  b.categories = (cats != j.end() && cats->is_string()) ? cats->get<std::string>() : std::string();
  return true;
}

inline bool parse_record(const json& j, UserRecord& u, std::string& why) {
  if (!detail::get_string(j, "user_id", u.user_id, why)) return false;
  auto name = j.find("name");
  u.name = (name != j.end() && name->is_string()) ? name->get<std::string>() : std::string();
  auto count = j.find("review_count");
  u.review_count = (count != j.end() && count->is_number_integer()) ? count->get<std::int64_t>() : 0;
  return true;
}

// Streams records in file order to fn(Record&&). Malformed lines are counted
// and skipped; an unreadable file throws DataError.
template <class Record, class Fn>
LoadStats stream_records(const std::string& path, Fn&& fn) {
  auto in = io::open_input(path);
  LoadStats stats;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.find_first_not_of(" \t") == std::string::npos) return;
    std::string why;
    Record rec;
    json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      why = "malformed JSON";
    } else if (parse_record(j, rec, why)) {
      ++stats.records;
      fn(std::move(rec));
      return;
    }
    ++stats.skipped;
    if (stats.diagnostics.size() < 10) stats.diagnostics.push_back("line " + std::to_string(n) + ": " + why);
  });
  return stats;
}

template <class Record>
Loaded<Record> load_records(const std::string& path) {
  Loaded<Record> out;
  out.stats = stream_records<Record>(path, [&](Record&& r) { out.records.push_back(std::move(r)); });
  return out;
}

inline Loaded<RawReview> load_reviews(const std::string& path) { return load_records<RawReview>(path); }
inline Loaded<Business> load_businesses(const std::string& path) { return load_records<Business>(path); }
inline Loaded<UserRecord> load_users(const std::string& path) { return load_records<UserRecord>(path); }

// ---------------------------------------------------------------------------
// Sample selection

struct SampleThresholds {
  std::size_t min_user_reviews = 35;
  std::size_t min_business_reviews = 150;
  std::size_t min_review_words = 20;
  std::size_t sample_size = 125000;
  std::optional<std::string> region_filter = std::string("MA");
  bool restaurants_only = true;

  bool operator==(const SampleThresholds&) const = default;
};

struct BusinessInfo {
  std::optional<std::string> state;
  bool restaurant = false;
};

using BusinessIndex = std::unordered_map<std::string, BusinessInfo>;

// True if the comma-separated category list contains "Restaurants" exactly.
inline bool is_restaurant(std::string_view categories) {
  std::size_t i = 0;
  while (i <= categories.size()) {
    std::size_t end = categories.find(',', i);
    if (end == std::string_view::npos) end = categories.size();
    auto token = categories.substr(i, end - i);
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    if (token == "Restaurants") return true;
    i = end + 1;
  }
  return false;
}

inline BusinessIndex build_business_index(std::span<const Business> businesses) {
  BusinessIndex index;
  for (const auto& b : businesses) index[b.business_id] = BusinessInfo{b.state, is_restaurant(b.categories)};
  return index;
}

struct SampleSet {
  std::vector<RawReview> reviews;
  SampleThresholds thresholds;
  std::uint64_t seed = 0;
  std::size_t population = 0;  // survivors of the fixed-point filter before subsampling
};

struct Split {
  SampleSet train;
  SampleSet test;
  std::pair<std::size_t, std::size_t> ratio{4, 1};
};

// Uniform integer in [0, bound) from a 64-bit Mersenne Twister by rejection;
// independent of the standard library's distribution implementations.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do x = rng(); while (x >= limit);
  return x % bound;
}

// Fisher-Yates permutation of [0, n).
inline std::vector<std::size_t> seeded_permutation(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[uniform_below(rng, i)]);
  return p;
}

namespace detail {

// Drops reviews of users/businesses below their minimum counts until nothing changes.
inline void filter_counts_to_fixed_point(std::vector<std::size_t>& keep, std::span<const RawReview> reviews,
                                         const SampleThresholds& t) {
  for (;;) {
    std::unordered_map<std::string_view, std::size_t> per_user, per_business;
    for (auto i : keep) {
      ++per_user[reviews[i].user_id];
      ++per_business[reviews[i].business_id];
    }
    std::vector<std::size_t> next;
    next.reserve(keep.size());
    for (auto i : keep)
      if (per_user[reviews[i].user_id] >= t.min_user_reviews &&
          per_business[reviews[i].business_id] >= t.min_business_reviews)
        next.push_back(i);
    if (next.size() == keep.size()) return;
    keep = std::move(next);
  }
}

}  // namespace detail

// Applies the region/restaurant, word-count, per-user and per-business
// thresholds jointly (iterated to a fixed point), then subsamples uniformly
// without replacement to thresholds.sample_size and re-establishes the fixed
// point. `word_count` must count words after normalization. The business
// index is only consulted when a region or restaurant filter is active.
inline SampleSet filter_sample(std::span<const RawReview> reviews, const BusinessIndex& businesses,
                               const SampleThresholds& thresholds, std::uint64_t seed,
                               const std::function<std::size_t(const RawReview&)>& word_count) {
  const bool need_business = thresholds.region_filter.has_value() || thresholds.restaurants_only;
  std::vector<std::size_t> keep;
  keep.reserve(reviews.size());
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    const auto& r = reviews[i];
    if (need_business) {
      auto it = businesses.find(r.business_id);
      if (it == businesses.end()) continue;
      if (thresholds.restaurants_only && !it->second.restaurant) continue;
      if (thresholds.region_filter && (!it->second.state || *it->second.state != *thresholds.region_filter)) continue;
    }
    if (thresholds.min_review_words > 0 && word_count(r) < thresholds.min_review_words) continue;
    keep.push_back(i);
  }
  detail::filter_counts_to_fixed_point(keep, reviews, thresholds);
  if (keep.empty()) throw DataError("thresholds eliminate all data");

  SampleSet out;
  out.thresholds = thresholds;
  out.seed = seed;
  out.population = keep.size();
  if (keep.size() > thresholds.sample_size) {
    auto perm = seeded_permutation(keep.size(), seed);
    perm.resize(thresholds.sample_size);
    std::sort(perm.begin(), perm.end());
    std::vector<std::size_t> chosen;
    chosen.reserve(perm.size());
    for (auto p : perm) chosen.push_back(keep[p]);
    keep = std::move(chosen);
    detail::filter_counts_to_fixed_point(keep, reviews, thresholds);
    if (keep.empty()) throw DataError("thresholds eliminate all data");
  }
  out.reviews.reserve(keep.size());
  for (auto i : keep) out.reviews.push_back(reviews[i]);
  return out;
}

// Seeded, order-preserving split; the train share is rounded to nearest.
inline Split split_train_test(const SampleSet& sample, std::pair<std::size_t, std::size_t> ratio, std::uint64_t seed) {
  const auto [a, b] = ratio;
  if (a == 0 || b == 0) throw UsageError("split ratio components must be positive");
  const std::size_t n = sample.reviews.size();
  if (n < a + b)
    throw DataError("sample of " + std::to_string(n) + " reviews is smaller than the ratio sum " +
                    std::to_string(a + b));
  const std::size_t n_train = (n * a + (a + b) / 2) / (a + b);

  auto perm = seeded_permutation(n, seed);
  std::vector<char> in_train(n, 0);
  for (std::size_t k = 0; k < n_train; ++k) in_train[perm[k]] = 1;

  Split split;
  split.ratio = ratio;
  split.train.thresholds = split.test.thresholds = sample.thresholds;
  split.train.seed = split.test.seed = seed;
  split.train.population = split.test.population = sample.population;
  for (std::size_t i = 0; i < n; ++i) (in_train[i] ? split.train : split.test).reviews.push_back(sample.reviews[i]);
  return split;
}

inline std::pair<std::size_t, std::size_t> parse_ratio(std::string_view s) {
  auto colon = s.find(':');
  try {
    if (colon == std::string_view::npos) throw std::invalid_argument("no colon");
    std::size_t used_a = 0, used_b = 0;
    std::string sa(s.substr(0, colon)), sb(s.substr(colon + 1));
    auto a = std::stoul(sa, &used_a), b = std::stoul(sb, &used_b);
    if (used_a != sa.size() || used_b != sb.size() || a == 0 || b == 0) throw std::invalid_argument("bad");
    return {a, b};
  } catch (const std::exception&) {
    throw UsageError("ratio must look like '4:1', got '" + std::string(s) + "'");
  }
}

// ---------------------------------------------------------------------------
// Persistence: reviews as line-delimited records plus a "<path>.meta.json"
// sidecar holding thresholds, seed and counts.

inline json to_json(const RawReview& r) {
  return {{"review_id", r.review_id}, {"user_id", r.user_id}, {"business_id", r.business_id},
          {"stars", r.stars},         {"date", r.date},       {"text", r.text}};
}

inline json to_json(const SampleThresholds& t) {
  return {{"min_user_reviews", t.min_user_reviews},
          {"min_business_reviews", t.min_business_reviews},
          {"min_review_words", t.min_review_words},
          {"sample_size", t.sample_size},
          {"region_filter", t.region_filter ? json(*t.region_filter) : json(nullptr)},
          {"restaurants_only", t.restaurants_only}};
}

inline SampleThresholds thresholds_from_json(const json& j) {
  SampleThresholds t;
  t.min_user_reviews = j.at("min_user_reviews").get<std::size_t>();
  t.min_business_reviews = j.at("min_business_reviews").get<std::size_t>();
  t.min_review_words = j.at("min_review_words").get<std::size_t>();
  t.sample_size = j.at("sample_size").get<std::size_t>();
  t.region_filter.reset();
  if (j.contains("region_filter") && j["region_filter"].is_string()) t.region_filter = j["region_filter"].get<std::string>();
  t.restaurants_only = j.value("restaurants_only", true);
  return t;
}

inline std::string meta_path(const std::string& path) { return path + ".meta.json"; }

inline void write_sample(const std::string& path, const SampleSet& sample, std::string_view role) {
  io::write_file_atomic(path, [&](std::ostream& out) {
    for (const auto& r : sample.reviews) out << to_json(r).dump() << '\n';
  });
  json meta = {{"role", role},
               {"thresholds", to_json(sample.thresholds)},
               {"seed", sample.seed},
               {"population", sample.population},
               {"count", sample.reviews.size()}};
  io::write_file_atomic(meta_path(path), meta.dump(2) + "\n");
}

// Reads a persisted sample; the sidecar is optional. Malformed lines are
// data errors here, since these files are produced by write_sample.
inline SampleSet read_sample(const std::string& path) {
  SampleSet s;
  auto stats = stream_records<RawReview>(path, [&](RawReview&& r) { s.reviews.push_back(std::move(r)); });
  if (stats.skipped) throw DataError(path + ": " + stats.diagnostics.front());
  std::ifstream meta(meta_path(path));
  if (meta) {
    json j = json::parse(meta, nullptr, false);
    if (j.is_discarded()) throw DataError(meta_path(path) + ": malformed JSON");
    s.thresholds = thresholds_from_json(j.at("thresholds"));
    s.seed = j.value("seed", std::uint64_t{0});
    s.population = j.value("population", s.reviews.size());
  }
  return s;
}

}  // namespace revcf::corpus
