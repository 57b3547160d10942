#pragma once

// Item-based collaborative filtering: Pearson item-item weights over
// co-raters, weight-ranked and review-similarity-ranked neighbor selection,
// and the normalized weighted-sum rating prediction.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <tuple>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"
#include "revcf/corpus.hpp"
#include "revcf/embedding.hpp"
#include "revcf/error.hpp"

namespace revcf::cf {

using ItemIndex = std::uint32_t;
using UserIndex = std::uint32_t;

inline constexpr double kMinRating = 1.0;
inline constexpr double kMaxRating = 5.0;

struct Rating {
  UserIndex user;
  ItemIndex item;
  int stars;
  std::string review_id;
};

// Sparse user x item star ratings. Users and items are indexed in
// lexicographic id order, so index order doubles as the id tie-break.
class RatingsMatrix {
 public:
  RatingsMatrix() = default;

  std::size_t user_count() const { return users_.size(); }
  std::size_t item_count() const { return items_.size(); }
  std::size_t rating_count() const { return ratings_.size(); }

  std::optional<UserIndex> user_index(std::string_view id) const { return lookup(user_index_, id); }
  std::optional<ItemIndex> item_index(std::string_view id) const { return lookup(item_index_, id); }
  const std::string& user_id(UserIndex u) const { return users_[u]; }
  const std::string& item_id(ItemIndex i) const { return items_[i]; }

  const Rating& rating_at(std::uint32_t k) const { return ratings_[k]; }
  // Indices into rating_at(), sorted by user.
  std::span<const std::uint32_t> item_ratings(ItemIndex i) const { return by_item_[i]; }
  // Indices into rating_at(), sorted by item.
  std::span<const std::uint32_t> user_ratings(UserIndex u) const { return by_user_[u]; }

  std::optional<int> rating(UserIndex u, ItemIndex i) const {
    auto k = find(u, i);
    if (!k) return std::nullopt;
    return ratings_[*k].stars;
  }
  const std::string* review_of(UserIndex u, ItemIndex i) const {
    auto k = find(u, i);
    return k ? &ratings_[*k].review_id : nullptr;
  }

  double item_mean(ItemIndex i) const { return item_mean_[i]; }
  double user_mean(UserIndex u) const { return user_mean_[u]; }
  std::optional<double> global_mean() const { return global_mean_; }

  friend RatingsMatrix build_matrix(std::span<const corpus::RawReview> train);

 private:
  template <class Map>
  static std::optional<std::uint32_t> lookup(const Map& m, std::string_view id) {
    auto it = m.find(std::string(id));
    if (it == m.end()) return std::nullopt;
    return it->second;
  }

  std::optional<std::uint32_t> find(UserIndex u, ItemIndex i) const {
    auto rows = by_user_[u];
    auto it = std::lower_bound(rows.begin(), rows.end(), i,
                               [&](std::uint32_t k, ItemIndex item) { return ratings_[k].item < item; });
    if (it == rows.end() || ratings_[*it].item != i) return std::nullopt;
    return *it;
  }

  std::vector<std::string> users_, items_;
  std::unordered_map<std::string, UserIndex> user_index_;
  std::unordered_map<std::string, ItemIndex> item_index_;
  std::vector<Rating> ratings_;  // sorted by (user, item)
  std::vector<std::vector<std::uint32_t>> by_item_, by_user_;
  std::vector<double> item_mean_, user_mean_;
  std::optional<double> global_mean_;
};

// Duplicate (user, item) reviews collapse to the latest by date; equal dates
// keep the later record in input order.
inline RatingsMatrix build_matrix(std::span<const corpus::RawReview> train) {
  RatingsMatrix m;
  std::map<std::pair<std::string_view, std::string_view>, std::size_t> latest;
  for (std::size_t k = 0; k < train.size(); ++k) {
    auto key = std::make_pair(std::string_view(train[k].user_id), std::string_view(train[k].business_id));
    auto [it, inserted] = latest.emplace(key, k);
    if (!inserted && train[k].date >= train[it->second].date) it->second = k;
  }

  for (const auto& [key, k] : latest) {
    m.users_.emplace_back(key.first);
    m.items_.emplace_back(key.second);
  }
  for (auto* ids : {&m.users_, &m.items_}) {
    std::sort(ids->begin(), ids->end());
    ids->erase(std::unique(ids->begin(), ids->end()), ids->end());
  }
  for (UserIndex u = 0; u < m.users_.size(); ++u) m.user_index_.emplace(m.users_[u], u);
  for (ItemIndex i = 0; i < m.items_.size(); ++i) m.item_index_.emplace(m.items_[i], i);

  m.ratings_.reserve(latest.size());
  for (const auto& [key, k] : latest)
    m.ratings_.push_back({m.user_index_.at(std::string(key.first)), m.item_index_.at(std::string(key.second)),
                          train[k].stars, train[k].review_id});
  std::sort(m.ratings_.begin(), m.ratings_.end(),
            [](const Rating& a, const Rating& b) { return std::tie(a.user, a.item) < std::tie(b.user, b.item); });

  m.by_user_.assign(m.users_.size(), {});
  m.by_item_.assign(m.items_.size(), {});
  for (std::uint32_t k = 0; k < m.ratings_.size(); ++k) {
    m.by_user_[m.ratings_[k].user].push_back(k);
    m.by_item_[m.ratings_[k].item].push_back(k);
  }

  auto mean_of = [&](std::span<const std::uint32_t> rows) {
    double s = 0;
    for (auto k : rows) s += m.ratings_[k].stars;
    return s / static_cast<double>(rows.size());
  };
  m.user_mean_.resize(m.users_.size());
  m.item_mean_.resize(m.items_.size());
  for (UserIndex u = 0; u < m.users_.size(); ++u) m.user_mean_[u] = mean_of(m.by_user_[u]);
  for (ItemIndex i = 0; i < m.items_.size(); ++i) m.item_mean_[i] = mean_of(m.by_item_[i]);
  if (!m.ratings_.empty()) {
    double s = 0;
    for (const auto& r : m.ratings_) s += r.stars;
    m.global_mean_ = s / static_cast<double>(m.ratings_.size());
  }
  return m;
}

// ---------------------------------------------------------------------------
// Item weights

// Which ratings the item means in the weight formula are taken over.
enum class MeanScope { co_raters, all_raters };

struct WeightOptions {
  MeanScope mean_scope = MeanScope::co_raters;
  std::size_t min_support = 1;
};

struct ItemWeight {
  ItemIndex i = 0;
  ItemIndex j = 0;
  double w = 0.0;
  std::size_t support = 0;  // number of co-raters
};

// Integer moment sums of the co-rated pairs (x = rating of i, y = rating of j).
struct CoRatingSums {
  std::int64_t n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;

  void add(int x, int y) {
    ++n;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
    sxy += x * y;
  }
};

// Pearson weight from moment sums. With co-rater means the sums give the
// numerator and variances exactly in integer arithmetic. Fewer than two
// co-raters or a zero-variance side yields 0.
inline double pearson_from_sums(const CoRatingSums& s, double mean_i_all, double mean_j_all, MeanScope scope) {
  if (s.n <= 1) return 0.0;
  double num = 0, var_x = 0, var_y = 0;
  if (scope == MeanScope::co_raters) {
    std::int64_t inum = s.n * s.sxy - s.sx * s.sy;
    std::int64_t ivx = s.n * s.sxx - s.sx * s.sx;
    std::int64_t ivy = s.n * s.syy - s.sy * s.sy;
    if (ivx == 0 || ivy == 0) return 0.0;
    if (inum == 0) return 0.0;
    // w^2 = inum^2 / (ivx * ivy) reduced to lowest terms, so equal weights
    // come out bit-identical and ties rank by support and index.
    using u128 = unsigned __int128;
    u128 a = static_cast<u128>(inum < 0 ? -inum : inum);
    a *= a;
    u128 b = static_cast<u128>(ivx) * static_cast<u128>(ivy);
    u128 x = a, y = b;
    while (y != 0) {
      u128 t = x % y;
      x = y;
      y = t;
    }
    a /= x;
    b /= x;
    double w = std::sqrt(static_cast<double>(a) / static_cast<double>(b));
    return std::min(w, 1.0) * (inum < 0 ? -1.0 : 1.0);
  } else {
    const double n = static_cast<double>(s.n), mx = mean_i_all, my = mean_j_all;
    num = s.sxy - my * s.sx - mx * s.sy + n * mx * my;
    var_x = s.sxx - 2 * mx * s.sx + n * mx * mx;
    var_y = s.syy - 2 * my * s.sy + n * my * my;
    if (var_x <= 1e-12 || var_y <= 1e-12) return 0.0;
  }
  return std::clamp(num / (std::sqrt(var_x) * std::sqrt(var_y)), -1.0, 1.0);
}

inline CoRatingSums co_rating_sums(const RatingsMatrix& m, ItemIndex i, ItemIndex j) {
  CoRatingSums s;
  auto a = m.item_ratings(i), b = m.item_ratings(j);
  std::size_t p = 0, q = 0;
  while (p < a.size() && q < b.size()) {
    const auto& ra = m.rating_at(a[p]);
    const auto& rb = m.rating_at(b[q]);
    if (ra.user < rb.user) {
      ++p;
    } else if (rb.user < ra.user) {
      ++q;
    } else {
      s.add(ra.stars, rb.stars);
      ++p;
      ++q;
    }
  }
  return s;
}

inline ItemWeight item_weight(ItemIndex i, ItemIndex j, const RatingsMatrix& m, const WeightOptions& opts = {}) {
  // Canonical argument order keeps the result bit-identical under swapping.
  ItemIndex lo = std::min(i, j), hi = std::max(i, j);
  auto sums = co_rating_sums(m, lo, hi);
  double w = pearson_from_sums(sums, m.item_mean(lo), m.item_mean(hi), opts.mean_scope);
  return ItemWeight{i, j, w, static_cast<std::size_t>(sums.n)};
}

// Weights for every co-rated item pair with support >= min_support,
// accumulated in one pass over users.
class WeightTable {
 public:
  struct Entry {
    ItemIndex other;
    double w;
    std::size_t support;
  };

  WeightTable() = default;
  explicit WeightTable(std::size_t items) : rows_(items) {}

  // Entries for item i, sorted by the other item's index.
  std::span<const Entry> row(ItemIndex i) const { return rows_[i]; }
  std::size_t item_count() const { return rows_.size(); }
  std::size_t pair_count() const { return pairs_; }

  std::optional<ItemWeight> find(ItemIndex i, ItemIndex j) const {
    if (i >= rows_.size()) return std::nullopt;
    const auto& r = rows_[i];
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, ItemIndex x) { return e.other < x; });
    if (it == r.end() || it->other != j) return std::nullopt;
    return ItemWeight{i, j, it->w, it->support};
  }

  // All unordered pairs (i < j).
  std::vector<ItemWeight> pairs() const {
    std::vector<ItemWeight> out;
    out.reserve(pairs_);
    for (ItemIndex i = 0; i < rows_.size(); ++i)
      for (const auto& e : rows_[i])
        if (i < e.other) out.push_back({i, e.other, e.w, e.support});
    return out;
  }

  void insert_symmetric(ItemIndex i, ItemIndex j, double w, std::size_t support) {
    rows_[i].push_back({j, w, support});
    rows_[j].push_back({i, w, support});
    ++pairs_;
  }

  void finalize() {
    for (auto& r : rows_) std::sort(r.begin(), r.end(), [](const Entry& a, const Entry& b) { return a.other < b.other; });
  }

 private:
  std::vector<std::vector<Entry>> rows_;
  std::size_t pairs_ = 0;
};

inline WeightTable precompute_weights(const RatingsMatrix& m, const WeightOptions& opts = {}) {
  std::vector<std::unordered_map<ItemIndex, CoRatingSums>> acc(m.item_count());
  for (UserIndex u = 0; u < m.user_count(); ++u) {
    auto rows = m.user_ratings(u);
    for (std::size_t p = 0; p < rows.size(); ++p) {
      const auto& a = m.rating_at(rows[p]);
      for (std::size_t q = p + 1; q < rows.size(); ++q) {
        const auto& b = m.rating_at(rows[q]);
        acc[a.item][b.item].add(a.stars, b.stars);  // a.item < b.item: rows are item-sorted
      }
    }
  }
  WeightTable table(m.item_count());
  const std::size_t min_support = std::max<std::size_t>(opts.min_support, 1);
  for (ItemIndex i = 0; i < acc.size(); ++i)
    for (const auto& [j, sums] : acc[i])
      if (static_cast<std::size_t>(sums.n) >= min_support)
        table.insert_symmetric(i, j, pearson_from_sums(sums, m.item_mean(i), m.item_mean(j), opts.mean_scope),
                               static_cast<std::size_t>(sums.n));
  table.finalize();
  return table;
}

// ---------------------------------------------------------------------------
// Neighbor selection

struct NeighborStrategy {
  enum class Kind { top_k, all, non_negative };
  Kind kind = Kind::top_k;
  std::size_t k = 10;

  static NeighborStrategy top(std::size_t k) {
    if (k == 0) throw UsageError("top-K strategy needs K >= 1");
    return {Kind::top_k, k};
  }
  static NeighborStrategy all() { return {Kind::all, 0}; }
  static NeighborStrategy non_negative() { return {Kind::non_negative, 0}; }

  std::string label() const {
    switch (kind) {
      case Kind::top_k: return "topk:" + std::to_string(k);
      case Kind::all: return "all";
      case Kind::non_negative: return "nonneg";
    }
    return {};
  }

  bool operator==(const NeighborStrategy&) const = default;
};

// The sweep: K in {5..30 step 5}, all weights, non-negative weights.
inline std::vector<NeighborStrategy> baseline_strategies() {
  std::vector<NeighborStrategy> out;
  for (std::size_t k = 5; k <= 30; k += 5) out.push_back(NeighborStrategy::top(k));
  out.push_back(NeighborStrategy::all());
  out.push_back(NeighborStrategy::non_negative());
  return out;
}

struct Neighbor {
  ItemIndex item;
  double w;               // item weight to the target, used by predict
  std::size_t support;    // co-raters behind w
  double score;           // selection score: w, or mean review cosine
};

struct NeighborSet {
  ItemIndex target = 0;
  std::vector<Neighbor> neighbors;
};

namespace detail {

// Descending score, then higher support, then smaller item id.
inline void rank(std::vector<Neighbor>& v) {
  std::sort(v.begin(), v.end(), [](const Neighbor& a, const Neighbor& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.support != b.support) return a.support > b.support;
    return a.item < b.item;
  });
}

inline NeighborSet apply_strategy(ItemIndex target, std::vector<Neighbor> candidates, const NeighborStrategy& s) {
  if (s.kind == NeighborStrategy::Kind::non_negative)
    std::erase_if(candidates, [](const Neighbor& n) { return n.w < 0; });
  rank(candidates);
  if (s.kind == NeighborStrategy::Kind::top_k && candidates.size() > s.k) candidates.resize(s.k);
  return NeighborSet{target, std::move(candidates)};
}

}  // namespace detail

// Candidates are the items sharing at least one rater with the target.
inline NeighborSet select_neighbors_weight(ItemIndex target, const RatingsMatrix& m, const NeighborStrategy& strategy,
                                           const WeightOptions& opts = {}) {
  std::vector<char> seen(m.item_count(), 0);
  std::vector<Neighbor> candidates;
  for (auto k : m.item_ratings(target))
    for (auto kk : m.user_ratings(m.rating_at(k).user)) {
      ItemIndex j = m.rating_at(kk).item;
      if (j == target || seen[j]) continue;
      seen[j] = 1;
      auto w = item_weight(target, j, m, opts);
      if (w.support < std::max<std::size_t>(opts.min_support, 1)) continue;
      candidates.push_back({j, w.w, w.support, w.w});
    }
  return detail::apply_strategy(target, std::move(candidates), strategy);
}

inline NeighborSet select_neighbors_weight(ItemIndex target, const WeightTable& table,
                                           const NeighborStrategy& strategy) {
  std::vector<Neighbor> candidates;
  if (target < table.item_count())
    for (const auto& e : table.row(target)) candidates.push_back({e.other, e.w, e.support, e.w});
  return detail::apply_strategy(target, std::move(candidates), strategy);
}

// Mean cosine between the two reviews of each co-rater of (i, j); only
// co-raters whose both reviews have non-zero vectors in `s` count.
inline std::optional<double> review_similarity(ItemIndex i, ItemIndex j, const RatingsMatrix& m,
                                               const embedding::SentenceVectorStore& s) {
  auto a = m.item_ratings(i), b = m.item_ratings(j);
  std::size_t p = 0, q = 0, used = 0;
  double total = 0;
  while (p < a.size() && q < b.size()) {
    const auto& ra = m.rating_at(a[p]);
    const auto& rb = m.rating_at(b[q]);
    if (ra.user < rb.user) {
      ++p;
      continue;
    }
    if (rb.user < ra.user) {
      ++q;
      continue;
    }
    ++p;
    ++q;
    auto va = s.find(ra.review_id), vb = s.find(rb.review_id);
    if (!va || !vb) continue;
    try {
      total += embedding::cosine(*va, *vb);
      ++used;
    } catch (const std::domain_error&) {
    }
  }
  if (used == 0) return std::nullopt;
  return total / static_cast<double>(used);
}

// Candidates are the other items the user rated, ranked by review
// similarity to the target; the K best keep their item weight for predict.
inline NeighborSet select_neighbors_review(std::string_view test_user, ItemIndex target, const RatingsMatrix& m,
                                           const embedding::SentenceVectorStore& s, std::size_t k,
                                           const WeightOptions& opts = {}) {
  if (k == 0) throw UsageError("review neighbor selection needs K >= 1");
  NeighborSet out{target, {}};
  auto u = m.user_index(test_user);
  if (!u) return out;
  std::vector<Neighbor> candidates;
  for (auto r : m.user_ratings(*u)) {
    ItemIndex j = m.rating_at(r).item;
    if (j == target) continue;
    auto sim = review_similarity(target, j, m, s);
    if (!sim) continue;
    auto w = item_weight(target, j, m, opts);
    candidates.push_back({j, w.w, w.support, *sim});
  }
  detail::rank(candidates);
  if (candidates.size() > k) candidates.resize(k);
  out.neighbors = std::move(candidates);
  return out;
}

// ---------------------------------------------------------------------------
// Prediction

enum class FallbackSource { none, item_mean, user_mean, global_mean, scale_midpoint };

struct Prediction {
  std::optional<double> raw;  // formula value before clamping; empty on fallback
  double value = 0.0;         // clamped to [1, 5]
  FallbackSource fallback = FallbackSource::none;
  std::size_t used = 0;       // neighbors the user actually rated

  bool is_fallback() const { return fallback != FallbackSource::none; }
};

inline Prediction fallback_prediction(std::optional<UserIndex> u, std::optional<ItemIndex> i, const RatingsMatrix& m) {
  Prediction p;
  if (i) {
    p.value = m.item_mean(*i);
    p.fallback = FallbackSource::item_mean;
  } else if (u) {
    p.value = m.user_mean(*u);
    p.fallback = FallbackSource::user_mean;
  } else if (auto g = m.global_mean()) {
    p.value = *g;
    p.fallback = FallbackSource::global_mean;
  } else {
    p.value = (kMinRating + kMaxRating) / 2;
    p.fallback = FallbackSource::scale_midpoint;
  }
  p.value = std::clamp(p.value, kMinRating, kMaxRating);
  return p;
}

// sum(r_un * w_in) / sum(|w_in|) over the neighbors the user rated.
inline Prediction predict(std::string_view user, std::string_view item, const NeighborSet& neighbors,
                          const RatingsMatrix& m) {
  auto u = m.user_index(user);
  auto i = m.item_index(item);
  if (u) {
    double num = 0, den = 0;
    std::size_t used = 0;
    for (const auto& n : neighbors.neighbors) {
      auto r = m.rating(*u, n.item);
      if (!r) continue;
      num += *r * n.w;
      den += std::abs(n.w);
      ++used;
    }
    if (used > 0 && den > 0) {
      Prediction p;
      p.raw = num / den;
      p.value = std::clamp(*p.raw, kMinRating, kMaxRating);
      p.used = used;
      return p;
    }
  }
  return fallback_prediction(u, i, m);
}

// ---------------------------------------------------------------------------
// Persistence: one {i, j, w, support} record per unordered pair.

inline void write_weights(std::ostream& out, const WeightTable& table, const RatingsMatrix& m) {
  for (const auto& p : table.pairs())
    out << nlohmann::json{{"i", m.item_id(p.i)}, {"j", m.item_id(p.j)}, {"w", p.w}, {"support", p.support}}.dump()
        << '\n';
}

// Rebuilds a table against `m`; pairs naming unknown items are a data error.
inline WeightTable load_weights(const std::string& path, const RatingsMatrix& m) {
  auto in = io::open_input(path);
  WeightTable table(m.item_count());
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.empty()) return;
    try {
      auto j = nlohmann::json::parse(line);
      auto a = m.item_index(j.at("i").get<std::string>());
      auto b = m.item_index(j.at("j").get<std::string>());
      if (!a || !b) throw DataError("pair names an item absent from the train matrix");
      table.insert_symmetric(*a, *b, j.at("w").get<double>(), j.at("support").get<std::size_t>());
    } catch (const nlohmann::json::exception& e) {
      throw DataError(at_line(path, n) + e.what());
    } catch (const DataError& e) {
      throw DataError(at_line(path, n) + e.what());
    }
  });
  table.finalize();
  return table;
}

}  // namespace revcf::cf
