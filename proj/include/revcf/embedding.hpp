#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "revcf/error.hpp"
#include "revcf/io.hpp"
#include "revcf/textprep.hpp"

namespace revcf::embedding {

// A dense table of equal-length real vectors keyed by string. Tag
// distinguishes word-keyed from review-keyed stores at the type level.
template <class Tag>
class BasicVectorStore {
 public:
  BasicVectorStore() = default;
  BasicVectorStore(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {}

  const std::string& name() const { return name_; }
  void set_name(std::string name) { name_ = std::move(name); }
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  // Keys in insertion order.
  const std::vector<std::string>& keys() const { return keys_; }

  void insert(std::string key, std::span<const double> values) {
    if (values.size() != dim_)
      throw DataError("vector for '" + key + "' has " + std::to_string(values.size()) + " components, expected " +
                      std::to_string(dim_));
    for (double v : values)
      if (!std::isfinite(v)) throw DataError("vector for '" + key + "' has a non-finite component");
    auto [it, inserted] = index_.emplace(key, keys_.size());
    if (!inserted) throw DataError("duplicate key '" + key + "'");
    keys_.push_back(std::move(key));
    data_.insert(data_.end(), values.begin(), values.end());
  }

  std::optional<std::size_t> find_row(std::string_view key) const {
    auto it = index_.find(std::string(key));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::span<const double>> find(std::string_view key) const {
    auto row = find_row(key);
    if (!row) return std::nullopt;
    return at(*row);
  }

  std::span<const double> at(std::size_t row) const { return {data_.data() + row * dim_, dim_}; }

 private:
  std::string name_;
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::vector<double> data_;
  std::unordered_map<std::string, std::size_t> index_;
};

using VectorStore = BasicVectorStore<struct WordKeyTag>;
using SentenceVectorStore = BasicVectorStore<struct ReviewKeyTag>;

enum class PoolingMode { mean, max };

inline PoolingMode parse_pooling(std::string_view s) {
  if (s == "mean") return PoolingMode::mean;
  if (s == "max") return PoolingMode::max;
  throw UsageError("unknown pooling mode '" + std::string(s) + "' (expected mean or max)");
}

// ---------------------------------------------------------------------------
// Text format: "<count> <dim>" header, then "<key> <v1> ... <v_dim>" rows.

namespace detail {

inline std::vector<std::string_view> split_spaces(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& value) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size();
}

template <class Store>
Store load_store(const std::string& path, std::string name) {
  auto in = io::open_input(path);
  std::optional<Store> store;
  std::size_t declared = 0;
  std::vector<double> row;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    auto fields = split_spaces(line);
    if (!store) {
      std::size_t dim = 0;
      if (fields.size() != 2 || !parse_number(fields[0], declared) || !parse_number(fields[1], dim))
        throw DataError(at_line(path, n) + "expected header '<count> <dim>'");
      store.emplace(name, dim);
      return;
    }
    if (fields.empty()) return;
    if (fields.size() != store->dim() + 1)
      throw DataError(at_line(path, n) + "row has " + std::to_string(fields.size() - 1) + " values, header declares " +
                      std::to_string(store->dim()));
    row.resize(store->dim());
    for (std::size_t k = 0; k < row.size(); ++k)
      if (!parse_number(fields[k + 1], row[k]))
        throw DataError(at_line(path, n) + "bad number '" + std::string(fields[k + 1]) + "'");
    try {
      store->insert(std::string(fields[0]), row);
    } catch (const DataError& e) {
      throw DataError(at_line(path, n) + e.what());
    }
  });
  if (!store) throw DataError(path + ": missing header line");
  if (store->size() != declared)
    throw DataError(path + ": header declares " + std::to_string(declared) + " rows, found " +
                    std::to_string(store->size()));
  return std::move(*store);
}

}  // namespace detail

inline VectorStore load_word_vectors(const std::string& path, std::string name = {}) {
  return detail::load_store<VectorStore>(path, name.empty() ? path : std::move(name));
}

inline SentenceVectorStore load_sentence_vectors(const std::string& path, std::string name = {}) {
  return detail::load_store<SentenceVectorStore>(path, name.empty() ? path : std::move(name));
}

// Six significant digits per component.
template <class Tag>
void write_vectors(std::ostream& out, const BasicVectorStore<Tag>& store) {
  out << store.size() << ' ' << store.dim() << '\n';
  char buf[32];
  for (std::size_t r = 0; r < store.size(); ++r) {
    out << store.keys()[r];
    for (double v : store.at(r)) {
      std::snprintf(buf, sizeof buf, " %.6g", v);
      out << buf;
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------------------

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("cosine: length mismatch (" + std::to_string(a.size()) + " vs " +
                                std::to_string(b.size()) + ")");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    dot += a[k] * b[k];
    na += a[k] * a[k];
    nb += b[k] * b[k];
  }
  if (na == 0 || nb == 0) throw std::domain_error("cosine: undefined similarity for a zero-norm vector");
  double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, -1.0, 1.0);
}

// Pools the vectors of in-vocabulary tokens; nullopt when none are present.
// Rows are accumulated in store order, so the result does not depend on
// token order down to the last bit.
inline std::optional<std::vector<double>> compose_sentence(std::span<const std::string> tokens,
                                                           const VectorStore& store, PoolingMode pooling) {
  std::vector<std::size_t> rows;
  rows.reserve(tokens.size());
  for (const auto& token : tokens)
    if (auto row = store.find_row(token)) rows.push_back(*row);
  if (rows.empty()) return std::nullopt;
  std::sort(rows.begin(), rows.end());

  auto first = store.at(rows.front());
  std::vector<double> acc(first.begin(), first.end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    auto v = store.at(rows[r]);
    for (std::size_t k = 0; k < acc.size(); ++k)
      acc[k] = pooling == PoolingMode::mean ? acc[k] + v[k] : std::max(acc[k], v[k]);
  }
  if (pooling == PoolingMode::mean && rows.size() > 1)
    for (double& x : acc) x /= static_cast<double>(rows.size());
  return acc;
}

inline std::optional<std::vector<double>> compose_sentence(const textprep::TokenList& tokens,
                                                           const VectorStore& store, PoolingMode pooling) {
  return compose_sentence(std::span<const std::string>(tokens.tokens), store, pooling);
}

}  // namespace revcf::embedding
