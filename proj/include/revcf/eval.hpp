#pragma once

// RMSE evaluation of the weight-ranked baseline sweep and review-ranked CF,
// and the report table built from their rows.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "revcf/cf.hpp"
#include "revcf/corpus.hpp"
#include "revcf/embedding.hpp"
#include "revcf/error.hpp"
#include "revcf/parallel.hpp"

namespace revcf::eval {

struct PredictionRecord {
  std::string user_id;
  std::string item_id;
  std::string review_id;
  int truth = 0;
  std::optional<double> raw_prediction;  // empty when the fallback chain answered
  double clamped_prediction = 0.0;
  std::string strategy;
  std::size_t neighbor_count = 0;

  bool is_fallback() const { return !raw_prediction.has_value(); }
};

enum class RowKind { weight, review };

inline const char* to_string(RowKind k) { return k == RowKind::weight ? "weight" : "review"; }

struct ReportRow {
  std::string label;     // configuration, e.g. "bert lemma" or "baseline"
  std::string strategy;  // neighbor mode, e.g. "topk:10" or "review:10"
  RowKind kind = RowKind::weight;
  double rmse = 0.0;
  double raw_rmse = 0.0;
  double fallback_rate = 0.0;
  double mean_neighbor_count = 0.0;
  std::size_t cases = 0;
  std::size_t fallbacks = 0;
};

struct Report {
  std::vector<ReportRow> rows;
  std::optional<ReportRow> baseline;  // best weight-mode row
};

struct EvalResult {
  ReportRow row;
  std::vector<PredictionRecord> records;
};

// Root mean squared error of the clamped predictions.
inline double rmse(std::span<const PredictionRecord> records) {
  if (records.empty()) throw DataError("rmse of an empty prediction list");
  double s = 0;
  for (const auto& r : records) {
    double d = r.clamped_prediction - r.truth;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(records.size()));
}

// Same, on raw formula values where they exist (fallbacks use their value).
inline double raw_rmse(std::span<const PredictionRecord> records) {
  if (records.empty()) throw DataError("rmse of an empty prediction list");
  double s = 0;
  for (const auto& r : records) {
    double d = r.raw_prediction.value_or(r.clamped_prediction) - r.truth;
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(records.size()));
}

inline ReportRow summarize(std::string label, std::string strategy, RowKind kind,
                           std::span<const PredictionRecord> records) {
  ReportRow row;
  row.label = std::move(label);
  row.strategy = std::move(strategy);
  row.kind = kind;
  row.cases = records.size();
  if (records.empty()) return row;
  row.rmse = rmse(records);
  row.raw_rmse = raw_rmse(records);
  double neighbors = 0;
  for (const auto& r : records) {
    row.fallbacks += r.is_fallback() ? 1 : 0;
    neighbors += static_cast<double>(r.neighbor_count);
  }
  row.fallback_rate = static_cast<double>(row.fallbacks) / static_cast<double>(records.size());
  row.mean_neighbor_count = neighbors / static_cast<double>(records.size());
  return row;
}

namespace detail {

inline PredictionRecord make_record(const corpus::RawReview& test, const cf::Prediction& p, const std::string& strategy) {
  PredictionRecord rec;
  rec.user_id = test.user_id;
  rec.item_id = test.business_id;
  rec.review_id = test.review_id;
  rec.truth = test.stars;
  rec.raw_prediction = p.raw;
  rec.clamped_prediction = p.value;
  rec.strategy = strategy;
  rec.neighbor_count = p.used;
  return rec;
}

}  // namespace detail

struct RunOptions {
  std::string label = "baseline";
  std::size_t threads = 1;
  cf::WeightOptions weights;
};

// Evaluates one weight-ranked strategy over the test reviews. Test cases
// whose item is not in the train matrix go straight to the fallback chain.
inline EvalResult run_weight_strategy(const cf::RatingsMatrix& m, const cf::WeightTable& table,
                                      std::span<const corpus::RawReview> test, const cf::NeighborStrategy& strategy,
                                      const RunOptions& opts = {}) {
  const std::string name = strategy.label();
  std::vector<PredictionRecord> records(test.size());
  parallel_for(test.size(), opts.threads, [&](std::size_t c) {
    const auto& t = test[c];
    cf::NeighborSet neighbors;
    if (auto i = m.item_index(t.business_id)) neighbors = cf::select_neighbors_weight(*i, table, strategy);
    records[c] = detail::make_record(t, cf::predict(t.user_id, t.business_id, neighbors, m), name);
  });
  auto row = summarize(opts.label, name, RowKind::weight, records);
  return {std::move(row), std::move(records)};
}

// One row per strategy, in the given order.
inline std::vector<EvalResult> run_baseline(const cf::RatingsMatrix& m, std::span<const corpus::RawReview> test,
                                            std::span<const cf::NeighborStrategy> strategies,
                                            const RunOptions& opts = {}) {
  auto table = cf::precompute_weights(m, opts.weights);
  std::vector<EvalResult> out;
  out.reserve(strategies.size());
  for (const auto& s : strategies) out.push_back(run_weight_strategy(m, table, test, s, opts));
  return out;
}

inline EvalResult run_review_cf(const cf::RatingsMatrix& m, std::span<const corpus::RawReview> test,
                                const embedding::SentenceVectorStore& vectors, std::size_t k = 10,
                                const RunOptions& opts = {}) {
  if (k == 0) throw UsageError("review neighbor selection needs K >= 1");
  const std::string name = "review:" + std::to_string(k);
  std::vector<PredictionRecord> records(test.size());
  parallel_for(test.size(), opts.threads, [&](std::size_t c) {
    const auto& t = test[c];
    cf::NeighborSet neighbors;
    if (auto i = m.item_index(t.business_id))
      neighbors = cf::select_neighbors_review(t.user_id, *i, m, vectors, k, opts.weights);
    records[c] = detail::make_record(t, cf::predict(t.user_id, t.business_id, neighbors, m), name);
  });
  auto row = summarize(opts.label, name, RowKind::review, records);
  return {std::move(row), std::move(records)};
}

// ---------------------------------------------------------------------------
// Report

inline bool row_order(const ReportRow& a, const ReportRow& b) {
  if (a.rmse != b.rmse) return a.rmse < b.rmse;
  if (a.label != b.label) return a.label < b.label;
  return a.strategy < b.strategy;
}

// Rows sorted by RMSE (ties by label, then strategy); the baseline is the
// best weight-mode row.
inline Report make_report(std::vector<ReportRow> rows) {
  Report report;
  std::sort(rows.begin(), rows.end(), row_order);
  for (const auto& r : rows)
    if (r.kind == RowKind::weight && (!report.baseline || row_order(r, *report.baseline))) report.baseline = r;
  report.rows = std::move(rows);
  return report;
}

enum class ReportFormat { tsv, markdown };

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "tsv") return ReportFormat::tsv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw UsageError("unknown report format '" + std::string(s) + "' (expected tsv or markdown)");
}

inline std::string fixed6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

inline std::string render_report(const Report& report, ReportFormat format) {
  std::ostringstream out;
  auto line = [&](const ReportRow& r, const std::string& kind, const std::string& label) {
    if (format == ReportFormat::tsv) {
      out << label << '\t' << r.strategy << '\t' << kind << '\t' << fixed6(r.rmse) << '\t' << fixed6(r.raw_rmse) << '\t'
          << fixed6(r.fallback_rate) << '\t' << fixed6(r.mean_neighbor_count) << '\t' << r.cases << '\t' << r.fallbacks
          << '\n';
    } else {
      out << "| " << label << " | " << r.strategy << " | " << fixed6(r.rmse) << " | " << fixed6(r.raw_rmse) << " | "
          << fixed6(r.fallback_rate) << " | " << fixed6(r.mean_neighbor_count) << " | " << r.cases << " |\n";
    }
  };
  if (format == ReportFormat::tsv) {
    out << "label\tstrategy\tkind\trmse\traw_rmse\tfallback_rate\tmean_neighbors\tcases\tfallbacks\n";
  } else {
    out << "| Configuration | Neighbors | RMSE | Raw RMSE | Fallback rate | Mean neighbors | Cases |\n"
        << "|---|---|---|---|---|---|---|\n";
  }
  for (const auto& r : report.rows) line(r, to_string(r.kind), r.label);
  if (report.baseline) {
    if (format == ReportFormat::tsv)
      line(*report.baseline, "best-baseline", report.baseline->label);
    else
      line(*report.baseline, "", "**Original Item CF** (" + report.baseline->label + ")");
  }
  return out.str();
}

// Reads rows back from render_report's TSV; the best-baseline line is
// recomputed by make_report, so it is skipped here.
inline std::vector<ReportRow> parse_report_tsv(const std::string& text, const std::string& origin = "report") {
  std::vector<ReportRow> rows;
  std::istringstream in(text);
  io::for_each_line(in, [&](const std::string& line, std::size_t n) {
    if (n == 1 || line.empty()) return;
    std::vector<std::string> f;
    std::size_t start = 0;
    for (;;) {
      auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 9) throw DataError(at_line(origin, n) + "expected 9 tab-separated fields");
    if (f[2] == "best-baseline") return;
    if (f[2] != "weight" && f[2] != "review") throw DataError(at_line(origin, n) + "unknown row kind '" + f[2] + "'");
    try {
      ReportRow r;
      r.label = f[0];
      r.strategy = f[1];
      r.kind = f[2] == "weight" ? RowKind::weight : RowKind::review;
      r.rmse = std::stod(f[3]);
      r.raw_rmse = std::stod(f[4]);
      r.fallback_rate = std::stod(f[5]);
      r.mean_neighbor_count = std::stod(f[6]);
      r.cases = std::stoul(f[7]);
      r.fallbacks = std::stoul(f[8]);
      rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError(at_line(origin, n) + "bad numeric field");
    }
  });
  return rows;
}

// ---------------------------------------------------------------------------
// Prediction dump: one JSON object per line.

inline nlohmann::json to_json(const PredictionRecord& r) {
  return {{"user_id", r.user_id},
          {"item_id", r.item_id},
          {"review_id", r.review_id},
          {"truth", r.truth},
          {"raw_prediction", r.raw_prediction ? nlohmann::json(*r.raw_prediction) : nlohmann::json(nullptr)},
          {"clamped_prediction", r.clamped_prediction},
          {"fallback", r.is_fallback()},
          {"strategy", r.strategy},
          {"neighbor_count", r.neighbor_count}};
}

inline void write_predictions(std::ostream& out, std::span<const PredictionRecord> records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

}  // namespace revcf::eval
