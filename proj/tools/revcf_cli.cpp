// revcf: stage-oriented frontend. Every stage reads milestone files,
// writes its outputs atomically and leaves a <stage>.manifest.json beside them.
//
//   sample      reviews + businesses -> sample.jsonl, train.jsonl, test.jsonl
//   preprocess  sample -> tokens.jsonl / tokens.lemma.jsonl
//   compose     tokens + word vectors -> sentence vectors (or validate a precomputed file)
//   weights     train -> item-item weight records
//   evaluate    train + test (+ sentence vectors) -> report.tsv, predictions.jsonl
//   report      several report.tsv -> one table

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "revcf/revcf.hpp"

namespace fs = std::filesystem;
using namespace revcf;
using nlohmann::json;

namespace {

struct Common {
  std::size_t threads = 1;
  bool force = false;
  std::string data_dir;
};

std::string default_data_dir() {
  if (const char* env = std::getenv("REVCF_DATA_DIR"); env && *env) return env;
#ifdef REVCF_DEFAULT_DATA_DIR
  return REVCF_DEFAULT_DATA_DIR;
#else
  return "data";
#endif
}

std::string resource(const Common& c, const std::string& given, const char* file) {
  return given.empty() ? (fs::path(c.data_dir) / file).string() : given;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw DataError(std::string(what) + " '" + path + "' does not exist");
}

std::string out_file(const std::string& dir, const char* name) { return (fs::path(dir) / name).string(); }

textprep::PrepOptions prep_options(const Common& c, const std::string& stop_path, const std::string& abbrev_path) {
  textprep::PrepOptions opts;
  auto stops = resource(c, stop_path, "stopwords_en.txt");
  auto abbrev = resource(c, abbrev_path, "abbreviations_en.tsv");
  require_file(stops, "stop list");
  require_file(abbrev, "abbreviation map");
  opts.stop_list = textprep::load_stop_list(stops);
  opts.abbreviation_map = textprep::load_abbreviation_map(abbrev);
  return opts;
}

cf::MeanScope parse_scope(const std::string& s) {
  if (s == "corater") return cf::MeanScope::co_raters;
  if (s == "all") return cf::MeanScope::all_raters;
  throw UsageError("--mean-scope must be corater or all");
}

// ---------------------------------------------------------------------------

struct SampleArgs {
  std::string reviews, businesses, users, out, state = "MA", ratio = "4:1", stop_list, abbreviations;
  std::size_t min_user = 35, min_business = 150, min_words = 20, sample_size = 125000;
  std::uint64_t seed = 7;
  bool any_state = false, all_businesses = false;
};

void cmd_sample(const Common& c, const SampleArgs& a) {
  const auto ratio = corpus::parse_ratio(a.ratio);
  require_file(a.reviews, "reviews file");
  if (!a.businesses.empty()) require_file(a.businesses, "businesses file");
  if (!a.users.empty()) require_file(a.users, "users file");

  corpus::SampleThresholds t;
  t.min_user_reviews = a.min_user;
  t.min_business_reviews = a.min_business;
  t.min_review_words = a.min_words;
  t.sample_size = a.sample_size;
  t.region_filter = a.any_state ? std::nullopt : std::optional<std::string>(a.state);
  t.restaurants_only = !a.all_businesses;
  if ((t.region_filter || t.restaurants_only) && a.businesses.empty())
    throw UsageError("--businesses is required unless both --any-state and --all-businesses are given");

  auto opts = prep_options(c, a.stop_list, a.abbreviations);
  auto manifest_inputs = manifest::check_inputs(
      [&] {
        std::vector<std::string> v{a.reviews};
        if (!a.businesses.empty()) v.push_back(a.businesses);
        if (!a.users.empty()) v.push_back(a.users);
        return v;
      }(),
      c.force);

  auto reviews = corpus::load_reviews(a.reviews);
  std::cerr << "reviews: " << reviews.stats.records << " loaded, " << reviews.stats.skipped << " skipped\n";
  for (const auto& d : reviews.stats.diagnostics) std::cerr << "  " << d << "\n";
  corpus::BusinessIndex index;
  if (!a.businesses.empty()) {
    auto biz = corpus::load_businesses(a.businesses);
    std::cerr << "businesses: " << biz.stats.records << " loaded, " << biz.stats.skipped << " skipped\n";
    index = corpus::build_business_index(biz.records);
  }
  if (!a.users.empty()) {
    auto users = corpus::load_users(a.users);
    std::cerr << "users: " << users.stats.records << " loaded, " << users.stats.skipped << " skipped\n";
  }

  auto word_count = [&](const corpus::RawReview& r) { return textprep::normalize(r.text, opts).size(); };
  auto sample = corpus::filter_sample(reviews.records, index, t, a.seed, word_count);
  auto split = corpus::split_train_test(sample, ratio, a.seed);

  const auto sample_path = out_file(a.out, "sample.jsonl");
  const auto train_path = out_file(a.out, "train.jsonl");
  const auto test_path = out_file(a.out, "test.jsonl");
  corpus::write_sample(sample_path, sample, "sample");
  corpus::write_sample(train_path, split.train, "train");
  corpus::write_sample(test_path, split.test, "test");
  std::cout << "population " << sample.population << ", sampled " << sample.reviews.size() << ", train "
            << split.train.reviews.size() << ", test " << split.test.reviews.size() << "\n";

  manifest::StageManifest m;
  m.stage = "sample";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"thresholds", corpus::to_json(t)}, {"seed", a.seed}, {"ratio", a.ratio}};
  m.outputs = {{sample_path, ""}, {train_path, ""}, {test_path, ""}};
  manifest::write_manifest(a.out, std::move(m));
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
  std::string input, dict, lemma, out, stop_list, abbreviations;
  bool lemmatize = false, both = false;
  std::size_t max_d = 2;
};

std::size_t distinct(const std::vector<textprep::TokenList>& lists) {
  std::set<std::string> vocab;
  for (const auto& l : lists) vocab.insert(l.tokens.begin(), l.tokens.end());
  return vocab.size();
}

void cmd_preprocess(const Common& c, const PreprocessArgs& a) {
  if ((a.lemmatize || a.both) && a.lemma.empty()) throw UsageError("--lemmatize/--both-lemma need --lemma");
  require_file(a.input, "input sample");
  require_file(a.dict, "frequency dictionary");
  if (!a.lemma.empty()) require_file(a.lemma, "lemma map");
  auto opts = prep_options(c, a.stop_list, a.abbreviations);
  opts.max_edit_distance = a.max_d;
  std::vector<std::string> inputs{a.input, a.dict};
  if (!a.lemma.empty()) inputs.push_back(a.lemma);
  auto manifest_inputs = manifest::check_inputs(inputs, c.force);

  auto sample = corpus::read_sample(a.input);
  auto dict = textprep::load_frequency_dictionary(a.dict);
  textprep::LemmaMap lemmas = a.lemma.empty() ? textprep::LemmaMap{} : textprep::load_lemma_map(a.lemma);
  textprep::SpellCorrector corrector(dict, a.max_d);

  const auto& reviews = sample.reviews;
  auto run = [&](bool lemmatize) {
    auto o = opts;
    o.lemmatize = lemmatize;
    std::vector<textprep::TokenList> lists(reviews.size());
    parallel_for(reviews.size(), c.threads, [&](std::size_t k) {
      lists[k] = textprep::preprocess_review(reviews[k].review_id, reviews[k].text, corrector, lemmas, o);
    });
    return lists;
  };

  // Vocabulary after normalization alone, for the summary line.
  std::set<std::string> normalized;
  for (const auto& r : reviews) {
    auto toks = textprep::normalize(r.text, opts);
    normalized.insert(toks.begin(), toks.end());
  }

  manifest::StageManifest m;
  m.stage = "preprocess";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"max_edit_distance", a.max_d}, {"lemmatize", a.lemmatize}, {"both_lemma", a.both}};

  std::cout << "vocabulary: normalized " << normalized.size();
  if (!a.lemmatize || a.both) {
    auto plain = run(false);
    auto path = out_file(a.out, "tokens.jsonl");
    io::write_file_atomic(path, [&](std::ostream& out) { textprep::write_token_lists(out, plain); });
    m.outputs.push_back({path, ""});
    std::cout << ", corrected " << distinct(plain);
  }
  if (a.lemmatize || a.both) {
    auto lem = run(true);
    auto path = out_file(a.out, "tokens.lemma.jsonl");
    io::write_file_atomic(path, [&](std::ostream& out) { textprep::write_token_lists(out, lem); });
    m.outputs.push_back({path, ""});
    std::cout << ", lemmatized " << distinct(lem);
  }
  std::cout << "\n";
  manifest::write_manifest(a.out, std::move(m));
}

// ---------------------------------------------------------------------------

struct ComposeArgs {
  std::string tokens, word_vectors, sentence_vectors, out, pooling = "mean", name;
};

void cmd_compose(const Common& c, const ComposeArgs& a) {
  const bool bypass = !a.sentence_vectors.empty();
  if (bypass == (!a.tokens.empty() || !a.word_vectors.empty()))
    throw UsageError("give either --sentence-vectors, or --tokens with --word-vectors");
  if (!bypass && (a.tokens.empty() || a.word_vectors.empty()))
    throw UsageError("--tokens and --word-vectors go together");
  std::vector<std::string> inputs = bypass ? std::vector<std::string>{a.sentence_vectors}
                                           : std::vector<std::string>{a.tokens, a.word_vectors};
  for (const auto& p : inputs) require_file(p, "input");
  auto manifest_inputs = manifest::check_inputs(inputs, c.force);

  embedding::SentenceVectorStore store;
  std::size_t absent = 0;
  if (bypass) {
    store = embedding::load_sentence_vectors(a.sentence_vectors, a.name);
  } else {
    auto pooling = embedding::parse_pooling(a.pooling);
    auto words = embedding::load_word_vectors(a.word_vectors);
    auto lists = textprep::load_token_lists(a.tokens);
    store = embedding::SentenceVectorStore(a.name.empty() ? "pooled-" + a.pooling : a.name, words.dim());
    for (const auto& l : lists) {
      auto v = embedding::compose_sentence(l, words, pooling);
      if (!v) {
        ++absent;
        continue;
      }
      store.insert(l.review_id, *v);
    }
  }
  io::write_file_atomic(a.out, [&](std::ostream& out) { embedding::write_vectors(out, store); });
  std::cout << store.size() << " sentence vectors, dim " << store.dim();
  if (absent) std::cout << " (" << absent << " reviews without in-vocabulary tokens)";
  std::cout << "\n";

  manifest::StageManifest m;
  m.stage = "compose";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"pooling", bypass ? "precomputed" : a.pooling}, {"name", store.name()}};
  m.outputs = {{a.out, ""}};
  auto dir = fs::path(a.out).parent_path().string();
  manifest::write_manifest(dir.empty() ? "." : dir, std::move(m));
}

// ---------------------------------------------------------------------------

struct WeightsArgs {
  std::string train, out, mean_scope = "corater";
  std::size_t min_support = 1;
};

void cmd_weights(const Common& c, const WeightsArgs& a) {
  require_file(a.train, "train split");
  auto manifest_inputs = manifest::check_inputs({a.train}, c.force);
  cf::WeightOptions wo{parse_scope(a.mean_scope), a.min_support};
  auto train = corpus::read_sample(a.train);
  auto matrix = cf::build_matrix(train.reviews);
  auto table = cf::precompute_weights(matrix, wo);
  io::write_file_atomic(a.out, [&](std::ostream& out) { cf::write_weights(out, table, matrix); });
  std::cout << table.pair_count() << " item pairs\n";

  manifest::StageManifest m;
  m.stage = "weights";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"mean_scope", a.mean_scope}, {"min_support", a.min_support}};
  m.outputs = {{a.out, ""}};
  auto dir = fs::path(a.out).parent_path().string();
  manifest::write_manifest(dir.empty() ? "." : dir, std::move(m));
}

// ---------------------------------------------------------------------------

struct EvaluateArgs {
  std::string train, test, sentence_vectors, weights, out, label, format = "markdown", mean_scope = "corater";
  std::vector<std::string> modes{"baseline"};
  std::size_t min_support = 1;
};

struct Mode {
  bool review = false;
  std::size_t k = 10;
  cf::NeighborStrategy strategy;
};

std::vector<Mode> parse_modes(const std::vector<std::string>& specs) {
  std::vector<Mode> modes;
  auto parse_k = [](const std::string& spec, std::size_t prefix) {
    try {
      std::size_t used = 0;
      auto k = std::stoul(spec.substr(prefix), &used);
      if (used != spec.size() - prefix || k == 0) throw std::invalid_argument("k");
      return static_cast<std::size_t>(k);
    } catch (const std::exception&) {
      throw UsageError("bad neighbor mode '" + spec + "' (K must be a positive integer)");
    }
  };
  for (const auto& s : specs) {
    if (s == "baseline") {
      for (const auto& st : cf::baseline_strategies()) modes.push_back({false, 0, st});
    } else if (s == "all") {
      modes.push_back({false, 0, cf::NeighborStrategy::all()});
    } else if (s == "nonneg") {
      modes.push_back({false, 0, cf::NeighborStrategy::non_negative()});
    } else if (s.rfind("topk:", 0) == 0) {
      modes.push_back({false, 0, cf::NeighborStrategy::top(parse_k(s, 5))});
    } else if (s.rfind("review:", 0) == 0) {
      modes.push_back({true, parse_k(s, 7), {}});
    } else {
      throw UsageError("unknown neighbor mode '" + s + "' (topk:K, all, nonneg, review:K, baseline)");
    }
  }
  return modes;
}

void cmd_evaluate(const Common& c, const EvaluateArgs& a) {
  auto modes = parse_modes(a.modes);
  bool any_review = std::any_of(modes.begin(), modes.end(), [](const Mode& m) { return m.review; });
  if (any_review && a.sentence_vectors.empty()) throw UsageError("review neighbor mode needs --sentence-vectors");
  if (!any_review && !a.sentence_vectors.empty()) throw UsageError("--sentence-vectors given without a review mode");
  auto format = eval::parse_report_format(a.format);
  std::vector<std::string> inputs{a.train, a.test};
  if (!a.sentence_vectors.empty()) inputs.push_back(a.sentence_vectors);
  if (!a.weights.empty()) inputs.push_back(a.weights);
  for (const auto& p : inputs) require_file(p, "input");
  auto manifest_inputs = manifest::check_inputs(inputs, c.force);

  auto train = corpus::read_sample(a.train);
  auto test = corpus::read_sample(a.test);
  auto matrix = cf::build_matrix(train.reviews);
  eval::RunOptions run;
  run.threads = c.threads;
  run.weights = {parse_scope(a.mean_scope), a.min_support};

  std::optional<embedding::SentenceVectorStore> vectors;
  if (any_review)
    vectors = embedding::load_sentence_vectors(a.sentence_vectors, fs::path(a.sentence_vectors).stem().string());
  std::optional<cf::WeightTable> table;
  auto weight_table = [&]() -> const cf::WeightTable& {
    if (!table) table = a.weights.empty() ? cf::precompute_weights(matrix, run.weights) : cf::load_weights(a.weights, matrix);
    return *table;
  };

  std::vector<eval::ReportRow> rows;
  std::vector<eval::PredictionRecord> records;
  for (const auto& mode : modes) {
    eval::EvalResult result;
    if (mode.review) {
      run.label = a.label.empty() ? vectors->name() : a.label;
      result = eval::run_review_cf(matrix, test.reviews, *vectors, mode.k, run);
    } else {
      run.label = a.label.empty() ? "baseline" : a.label;
      result = eval::run_weight_strategy(matrix, weight_table(), test.reviews, mode.strategy, run);
    }
    rows.push_back(result.row);
    records.insert(records.end(), result.records.begin(), result.records.end());
  }
  auto report = eval::make_report(rows);

  const auto report_path = out_file(a.out, "report.tsv");
  const auto predictions_path = out_file(a.out, "predictions.jsonl");
  io::write_file_atomic(report_path, eval::render_report(report, eval::ReportFormat::tsv));
  io::write_file_atomic(predictions_path, [&](std::ostream& out) { eval::write_predictions(out, records); });
  std::cout << eval::render_report(report, format);

  manifest::StageManifest m;
  m.stage = "evaluate";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"modes", a.modes}, {"label", a.label}, {"mean_scope", a.mean_scope}, {"min_support", a.min_support}};
  m.outputs = {{report_path, ""}, {predictions_path, ""}};
  manifest::write_manifest(a.out, std::move(m));
}

// ---------------------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string format = "markdown", out;
};

void cmd_report(const Common& c, const ReportArgs& a) {
  auto format = eval::parse_report_format(a.format);
  for (const auto& p : a.inputs) require_file(p, "report");
  auto manifest_inputs = manifest::check_inputs(a.inputs, c.force);
  std::vector<eval::ReportRow> rows;
  for (const auto& p : a.inputs) {
    auto r = eval::parse_report_tsv(io::read_file(p), p);
    rows.insert(rows.end(), r.begin(), r.end());
  }
  auto text = eval::render_report(eval::make_report(std::move(rows)), format);
  if (a.out.empty()) {
    std::cout << text;
    return;
  }
  io::write_file_atomic(a.out, text);
  manifest::StageManifest m;
  m.stage = "report";
  m.started_at = manifest::utc_now();
  m.inputs = std::move(manifest_inputs);
  m.config = {{"format", a.format}};
  m.outputs = {{a.out, ""}};
  auto dir = fs::path(a.out).parent_path().string();
  manifest::write_manifest(dir.empty() ? "." : dir, std::move(m));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Review-aware item-based collaborative filtering pipeline"};
  app.require_subcommand(1);
  Common common;
  common.data_dir = default_data_dir();
  app.add_option("--threads", common.threads, "Worker threads (0 = all cores)")->capture_default_str();
  app.add_flag("--force", common.force, "Run even if an input changed since its producing stage");
  app.add_option("--data-dir", common.data_dir, "Directory with stopwords_en.txt and abbreviations_en.tsv (env REVCF_DATA_DIR)")
      ->capture_default_str();

  SampleArgs sa;
  auto* sample = app.add_subcommand("sample", "Select the experiment sample and split it");
  sample->add_option("--reviews", sa.reviews, "Review records (one JSON object per line)")->required();
  sample->add_option("--businesses", sa.businesses, "Business records");
  sample->add_option("--users", sa.users, "User records (loaded for diagnostics only)");
  sample->add_option("--out", sa.out, "Output directory")->required();
  sample->add_option("--state", sa.state, "Region filter on the business state")->capture_default_str();
  sample->add_flag("--any-state", sa.any_state, "Disable the region filter");
  sample->add_flag("--all-businesses", sa.all_businesses, "Do not require the Restaurants category");
  sample->add_option("--min-user-reviews", sa.min_user)->capture_default_str();
  sample->add_option("--min-business-reviews", sa.min_business)->capture_default_str();
  sample->add_option("--min-words", sa.min_words, "Minimum words after normalization")->capture_default_str();
  sample->add_option("--sample-size", sa.sample_size)->capture_default_str();
  sample->add_option("--seed", sa.seed)->capture_default_str();
  sample->add_option("--ratio", sa.ratio, "train:test")->capture_default_str();
  sample->add_option("--stop-list", sa.stop_list);
  sample->add_option("--abbreviations", sa.abbreviations);

  PreprocessArgs pa;
  auto* preprocess = app.add_subcommand("preprocess", "Normalize, spell-correct and optionally lemmatize reviews");
  preprocess->add_option("--input", pa.input, "Sample file from 'sample'")->required();
  preprocess->add_option("--dict", pa.dict, "Frequency dictionary (word<TAB>count)")->required();
  preprocess->add_option("--lemma", pa.lemma, "Lemma map (inflected<TAB>base)");
  preprocess->add_flag("--lemmatize", pa.lemmatize, "Write only the lemmatized variant");
  preprocess->add_flag("--both-lemma", pa.both, "Write both variants");
  preprocess->add_option("--max-edit-distance", pa.max_d)->capture_default_str();
  preprocess->add_option("--out", pa.out, "Output directory")->required();
  preprocess->add_option("--stop-list", pa.stop_list);
  preprocess->add_option("--abbreviations", pa.abbreviations);

  ComposeArgs ca;
  auto* compose = app.add_subcommand("compose", "Build review vectors by pooling word vectors");
  compose->add_option("--tokens", ca.tokens, "Token lists from 'preprocess'");
  compose->add_option("--word-vectors", ca.word_vectors, "Word-vector text file");
  compose->add_option("--sentence-vectors", ca.sentence_vectors, "Precomputed review vectors to validate and pass through");
  compose->add_option("--pooling", ca.pooling, "mean or max")->capture_default_str();
  compose->add_option("--name", ca.name, "Source label stored with the vectors");
  compose->add_option("--out", ca.out, "Output vector file")->required();

  WeightsArgs wa;
  auto* weights = app.add_subcommand("weights", "Precompute item-item weights");
  weights->add_option("--train", wa.train)->required();
  weights->add_option("--out", wa.out)->required();
  weights->add_option("--min-support", wa.min_support)->capture_default_str();
  weights->add_option("--mean-scope", wa.mean_scope, "corater or all")->capture_default_str();

  EvaluateArgs ea;
  auto* evaluate = app.add_subcommand("evaluate", "Predict the test split and report RMSE");
  evaluate->add_option("--train", ea.train)->required();
  evaluate->add_option("--test", ea.test)->required();
  evaluate->add_option("--neighbor-mode", ea.modes, "topk:K, all, nonneg, review:K or baseline (the 8-strategy sweep)")
      ->delimiter(',')
      ->capture_default_str();
  evaluate->add_option("--sentence-vectors", ea.sentence_vectors);
  evaluate->add_option("--weights", ea.weights, "Precomputed weights from 'weights'");
  evaluate->add_option("--label", ea.label, "Configuration label for the report rows");
  evaluate->add_option("--min-support", ea.min_support)->capture_default_str();
  evaluate->add_option("--mean-scope", ea.mean_scope, "corater or all")->capture_default_str();
  evaluate->add_option("--format", ea.format, "Stdout format: markdown or tsv")->capture_default_str();
  evaluate->add_option("--out", ea.out, "Output directory")->required();

  ReportArgs ra;
  auto* report = app.add_subcommand("report", "Merge report.tsv files into one table");
  report->add_option("--inputs", ra.inputs)->required();
  report->add_option("--format", ra.format)->capture_default_str();
  report->add_option("--out", ra.out, "Write to a file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*sample) cmd_sample(common, sa);
    else if (*preprocess) cmd_preprocess(common, pa);
    else if (*compose) cmd_compose(common, ca);
    else if (*weights) cmd_weights(common, wa);
    else if (*evaluate) cmd_evaluate(common, ea);
    else if (*report) cmd_report(common, ra);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
