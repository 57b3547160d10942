#pragma once

// Review text normalization, run-capping, restricted Damerau-Levenshtein spell
// correction against a frequency dictionary, and table-driven lemmatization.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <variant>
#include <vector>

#include "json.hpp"
#include "revcf/error.hpp"
#include "revcf/io.hpp"

namespace revcf::textprep {

struct TokenList {
  std::string review_id;
  std::vector<std::string> tokens;
  std::size_t dropped = 0;    // uncorrectable tokens removed
  std::size_t corrected = 0;  // tokens altered by run-capping or spell correction

  bool operator==(const TokenList&) const = default;
};

struct PrepOptions {
  bool lemmatize = false;
  std::unordered_set<std::string> stop_list;
  std::unordered_map<std::string, std::string> abbreviation_map;
  std::size_t max_edit_distance = 2;
  std::size_t min_token_length = 2;
};

inline bool is_lower_alpha(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= 'a' && c <= 'z'; });
}

// ---------------------------------------------------------------------------
// Resource files

class FrequencyDictionary {
 public:
  FrequencyDictionary() = default;

  // Throws DataError for keys outside [a-z]+, zero counts or duplicates.
  void add(std::string word, std::uint64_t count) {
    if (!is_lower_alpha(word)) throw DataError("dictionary word '" + word + "' is not lowercase alphabetic");
    if (count == 0) throw DataError("dictionary word '" + word + "' has zero frequency");
    auto [it, inserted] = entries_.emplace(word, count);
    if (!inserted) throw DataError("duplicate dictionary word '" + word + "'");
    words_.push_back(std::move(word));
  }

  bool contains(std::string_view w) const { return entries_.find(std::string(w)) != entries_.end(); }
  std::uint64_t frequency(std::string_view w) const {
    auto it = entries_.find(std::string(w));
    return it == entries_.end() ? 0 : it->second;
  }
  std::size_t size() const { return words_.size(); }
  // Insertion order.
  const std::vector<std::string>& words() const { return words_; }

 private:
  std::unordered_map<std::string, std::uint64_t> entries_;
  std::vector<std::string> words_;
};

class LemmaMap {
 public:
  LemmaMap() = default;

  void add(std::string inflected, std::string base) {
    if (inflected.empty() || base.empty()) throw DataError("empty lemma entry");
    auto [it, inserted] = entries_.emplace(std::move(inflected), std::move(base));
    if (!inserted) throw DataError("duplicate lemma entry '" + it->first + "'");
  }

  // Throws DataError unless every base form is absent as a key or maps to itself.
  void check_idempotent() const {
    for (const auto& [from, to] : entries_) {
      auto it = entries_.find(to);
      if (it != entries_.end() && it->second != to)
        throw DataError("lemma map is not idempotent: '" + from + "' -> '" + to + "' -> '" + it->second + "'");
    }
  }

  const std::string* find(std::string_view w) const {
    auto it = entries_.find(std::string(w));
    return it == entries_.end() ? nullptr : &it->second;
  }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

namespace detail {

inline std::pair<std::string, std::string> split_tab(const std::string& line, const std::string& path,
                                                     std::size_t n) {
  auto tab = line.find('\t');
  if (tab == std::string::npos) throw DataError(at_line(path, n) + "expected '<key>\\t<value>'");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

}  // namespace detail

// "word<TAB>count" per line.
inline FrequencyDictionary load_frequency_dictionary(const std::string& path) {
  auto in = io::open_input(path);
  FrequencyDictionary dict;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.empty()) return;
    auto [word, count] = detail::split_tab(line, path, n);
    std::uint64_t value = 0;
    try {
      std::size_t used = 0;
      value = std::stoull(count, &used);
      if (used != count.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(at_line(path, n) + "bad frequency '" + count + "'");
    }
    try {
      dict.add(std::move(word), value);
    } catch (const DataError& e) {
      throw DataError(at_line(path, n) + e.what());
    }
  });
  return dict;
}

// "inflected<TAB>base" per line.
inline LemmaMap load_lemma_map(const std::string& path) {
  auto in = io::open_input(path);
  LemmaMap map;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.empty()) return;
    auto [from, to] = detail::split_tab(line, path, n);
    try {
      map.add(std::move(from), std::move(to));
    } catch (const DataError& e) {
      throw DataError(at_line(path, n) + e.what());
    }
  });
  map.check_idempotent();
  return map;
}

// One word per line; '#' starts a comment line.
inline std::unordered_set<std::string> load_stop_list(const std::string& path) {
  auto in = io::open_input(path);
  std::unordered_set<std::string> words;
  io::for_each_line(in, [&](const std::string& line, std::size_t) {
    if (line.empty() || line.front() == '#') return;
    words.insert(line);
  });
  return words;
}

// "contracted<TAB>expansion" per line; '#' starts a comment line.
inline std::unordered_map<std::string, std::string> load_abbreviation_map(const std::string& path) {
  auto in = io::open_input(path);
  std::unordered_map<std::string, std::string> map;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.empty() || line.front() == '#') return;
    auto [from, to] = detail::split_tab(line, path, n);
    map[from] = to;
  });
  return map;
}

// ---------------------------------------------------------------------------
// Normalization

namespace detail {

inline bool is_word_char(char c) { return (c >= 'a' && c <= 'z') || c == '\''; }

// Appends the alphabetic fragments of `s`, splitting on anything else.
inline void emit_fragments(std::string_view s, const PrepOptions& options, std::vector<std::string>& out) {
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && !(s[i] >= 'a' && s[i] <= 'z')) ++i;
    std::size_t start = i;
    while (i < s.size() && s[i] >= 'a' && s[i] <= 'z') ++i;
    if (i - start < std::max<std::size_t>(options.min_token_length, 1)) continue;
    std::string word(s.substr(start, i - start));
    if (options.stop_list.count(word)) continue;
    out.push_back(std::move(word));
  }
}

}  // namespace detail

// Lowercases ASCII, expands abbreviations, splits on non-alphabetic
// characters and removes stop words. Order is preserved.
inline std::vector<std::string> normalize(std::string_view text, const PrepOptions& options) {
  std::string lower;
  lower.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    unsigned char c = static_cast<unsigned char>(text[i]);
    // U+2018 / U+2019 typographic apostrophes fold to '\''.
    if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
        (static_cast<unsigned char>(text[i + 2]) == 0x98 || static_cast<unsigned char>(text[i + 2]) == 0x99)) {
      lower.push_back('\'');
      i += 2;
      continue;
    }
    lower.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c));
  }

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < lower.size()) {
    if (!detail::is_word_char(lower[i])) {
      ++i;
      continue;
    }
    std::size_t start = i;
    while (i < lower.size() && detail::is_word_char(lower[i])) ++i;
    std::string_view chunk(lower.data() + start, i - start);
    while (!chunk.empty() && chunk.front() == '\'') chunk.remove_prefix(1);
    while (!chunk.empty() && chunk.back() == '\'') chunk.remove_suffix(1);
    if (chunk.empty()) continue;
    if (!options.abbreviation_map.empty()) {
      auto it = options.abbreviation_map.find(std::string(chunk));
      if (it != options.abbreviation_map.end()) {
        std::string expansion;
        for (char c : it->second) expansion.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
        detail::emit_fragments(expansion, options, out);
        continue;
      }
    }
    detail::emit_fragments(chunk, options, out);
  }
  return out;
}

// Caps every maximal run of one character at length 2.
inline std::string squash_repeats(std::string_view word) {
  std::string out;
  out.reserve(word.size());
  std::size_t run = 0;
  for (std::size_t i = 0; i < word.size(); ++i) {
    run = (i > 0 && word[i] == word[i - 1]) ? run + 1 : 1;
    if (run <= 2) out.push_back(word[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Edit distance

// Restricted Damerau-Levenshtein (optimal string alignment) distance:
// insertions, deletions, substitutions and transpositions of adjacent
// characters, no substring edited twice.
inline std::size_t damerau_levenshtein(std::string_view a, std::string_view b) {
  const std::size_t n = a.size(), m = b.size();
  if (n == 0) return m;
  if (m == 0) return n;
  std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      std::size_t best = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) best = std::min(best, prev2[j - 2] + 1);
      cur[j] = best;
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
  }
  return prev[m];
}

// Same distance, but gives up as soon as it must exceed `bound`; returns
// bound + 1 in that case.
inline std::size_t damerau_levenshtein_bounded(std::string_view a, std::string_view b, std::size_t bound) {
  const std::size_t n = a.size(), m = b.size();
  if ((n > m ? n - m : m - n) > bound) return bound + 1;
  if (n == 0 || m == 0) return std::max(n, m);
  std::vector<std::size_t> prev2(m + 1), prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = i;
    std::size_t row_min = cur[0];
    for (std::size_t j = 1; j <= m; ++j) {
      std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      std::size_t best = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) best = std::min(best, prev2[j - 2] + 1);
      cur[j] = best;
      row_min = std::min(row_min, best);
    }
    // A transposition can reach back two rows, so both must exceed the bound.
    if (row_min > bound && i > 1) {
      std::size_t prev_min = *std::min_element(prev.begin(), prev.end());
      if (prev_min > bound) return bound + 1;
    }
    std::swap(prev2, prev);
    std::swap(prev, cur);
  }
  return std::min(prev[m], bound + 1);
}

// ---------------------------------------------------------------------------
// Spell correction

struct Known {
  std::string word;
  bool operator==(const Known&) const = default;
};
struct Corrected {
  std::string replacement;
  std::size_t distance = 0;
  bool operator==(const Corrected&) const = default;
};
struct Removed {
  bool operator==(const Removed&) const = default;
};
using Correction = std::variant<Known, Corrected, Removed>;

namespace detail {

struct Candidate {
  const std::string* word = nullptr;
  std::size_t distance = 0;
  std::uint64_t frequency = 0;
};

// Minimal distance, then maximal frequency, then lexicographically smallest.
inline bool better(const Candidate& a, const Candidate& b) {
  if (a.distance != b.distance) return a.distance < b.distance;
  if (a.frequency != b.frequency) return a.frequency > b.frequency;
  return *a.word < *b.word;
}

}  // namespace detail

// Exhaustive dictionary scan. Only words whose length is within max_d of
// the input are examined, which loses nothing since the distance is at least
// the length difference.
inline Correction correct_word(std::string_view word, const FrequencyDictionary& dict, std::size_t max_d) {
  if (dict.contains(word)) return Known{std::string(word)};
  std::optional<detail::Candidate> best;
  for (const auto& w : dict.words()) {
    std::size_t lw = w.size(), lq = word.size();
    if ((lw > lq ? lw - lq : lq - lw) > max_d) continue;
    std::size_t d = damerau_levenshtein_bounded(word, w, max_d);
    if (d > max_d) continue;
    detail::Candidate c{&w, d, dict.frequency(w)};
    if (!best || detail::better(c, *best)) best = c;
  }
  if (!best) return Removed{};
  return Corrected{*best->word, best->distance};
}

// Symmetric-delete index over a dictionary. Two strings within restricted
// Damerau-Levenshtein distance k share a common string reachable from each by
// at most k deletions, so intersecting deletion neighborhoods finds every
// candidate; each is then verified with the exact distance. Results match
// correct_word exactly.
class SpellCorrector {
 public:
  SpellCorrector(const FrequencyDictionary& dict, std::size_t max_d) : dict_(&dict), max_d_(max_d) {
    const auto& words = dict.words();
    std::vector<std::string> variants;
    for (std::uint32_t id = 0; id < words.size(); ++id) {
      variants.clear();
      deletions(words[id], max_d_, variants);
      for (const auto& v : variants) index_.push_back({io::fnv1a64(v), id});
    }
    std::sort(index_.begin(), index_.end());
    index_.erase(std::unique(index_.begin(), index_.end()), index_.end());
  }

  std::size_t max_distance() const { return max_d_; }
  const FrequencyDictionary& dictionary() const { return *dict_; }

  Correction correct(std::string_view word) const {
    if (dict_->contains(word)) return Known{std::string(word)};
    std::vector<std::string> variants;
    deletions(word, max_d_, variants);
    std::vector<std::uint32_t> ids;
    for (const auto& v : variants) {
      std::uint64_t h = io::fnv1a64(v);
      auto lo = std::lower_bound(index_.begin(), index_.end(), Entry{h, 0});
      for (auto it = lo; it != index_.end() && it->hash == h; ++it) ids.push_back(it->id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::optional<detail::Candidate> best;
    const auto& words = dict_->words();
    for (auto id : ids) {
      const auto& w = words[id];
      std::size_t d = damerau_levenshtein_bounded(word, w, max_d_);
      if (d > max_d_) continue;
      detail::Candidate c{&w, d, dict_->frequency(w)};
      if (!best || detail::better(c, *best)) best = c;
    }
    if (!best) return Removed{};
    return Corrected{*best->word, best->distance};
  }

 private:
  struct Entry {
    std::uint64_t hash;
    std::uint32_t id;
    auto operator<=>(const Entry&) const = default;
  };

  // All distinct strings obtained from `word` by deleting up to `depth` characters.
  static void deletions(std::string_view word, std::size_t depth, std::vector<std::string>& out) {
    std::unordered_set<std::string> seen{std::string(word)};
    std::vector<std::string> frontier{std::string(word)};
    for (std::size_t level = 0; level < depth; ++level) {
      std::vector<std::string> next;
      for (const auto& s : frontier) {
        for (std::size_t i = 0; i < s.size(); ++i) {
          std::string d = s.substr(0, i) + s.substr(i + 1);
          if (seen.insert(d).second) next.push_back(std::move(d));
        }
      }
      frontier = std::move(next);
    }
    out.assign(seen.begin(), seen.end());
  }

  const FrequencyDictionary* dict_;
  std::size_t max_d_;
  std::vector<Entry> index_;
};

// ---------------------------------------------------------------------------
// Lemmatization and the composed pipeline

inline std::string lemmatize(std::string_view token, const LemmaMap& map) {
  if (const auto* base = map.find(token)) return *base;
  return std::string(token);
}

// normalize -> squash_repeats -> spell correction (Removed tokens deleted)
// -> lemmatize when options.lemmatize.
inline TokenList preprocess_review(std::string review_id, std::string_view text, const SpellCorrector& corrector,
                                   const LemmaMap& lemmas, const PrepOptions& options) {
  TokenList out;
  out.review_id = std::move(review_id);
  for (const auto& raw : normalize(text, options)) {
    std::string token = squash_repeats(raw);
    auto result = corrector.correct(token);
    if (std::holds_alternative<Removed>(result)) {
      ++out.dropped;
      continue;
    }
    if (auto* c = std::get_if<Corrected>(&result)) token = c->replacement;
    if (token != raw) ++out.corrected;
    if (options.lemmatize) token = lemmatize(token, lemmas);
    if (options.stop_list.count(token)) continue;
    out.tokens.push_back(std::move(token));
  }
  return out;
}

// Convenience overload; builds a deletion index per call, so prefer the
// SpellCorrector form for batches.
inline TokenList preprocess_review(std::string review_id, std::string_view text, const FrequencyDictionary& dict,
                                   const LemmaMap& lemmas, const PrepOptions& options) {
  SpellCorrector corrector(dict, options.max_edit_distance);
  return preprocess_review(std::move(review_id), text, corrector, lemmas, options);
}

// ---------------------------------------------------------------------------
// Persistence: one JSON object per line {review_id, tokens, dropped, corrected}.

inline nlohmann::json to_json(const TokenList& t) {
  return {{"review_id", t.review_id}, {"tokens", t.tokens}, {"dropped", t.dropped}, {"corrected", t.corrected}};
}

inline TokenList token_list_from_json(const nlohmann::json& j) {
  TokenList t;
  t.review_id = j.at("review_id").get<std::string>();
  t.tokens = j.at("tokens").get<std::vector<std::string>>();
  t.dropped = j.value("dropped", std::size_t{0});
  t.corrected = j.value("corrected", std::size_t{0});
  return t;
}

inline void write_token_lists(std::ostream& out, std::span<const TokenList> lists) {
  for (const auto& t : lists) out << to_json(t).dump() << '\n';
}

inline std::vector<TokenList> load_token_lists(const std::string& path) {
  auto in = io::open_input(path);
  std::vector<TokenList> out;
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (line.empty()) return;
    try {
      out.push_back(token_list_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(at_line(path, n) + e.what());
    }
  });
  return out;
}

}  // namespace revcf::textprep
