#include "adaptcp/cli.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#include "CLI11.hpp"

#include "adaptcp/binning.hpp"
#include "adaptcp/calibration.hpp"
#include "adaptcp/dataset.hpp"
#include "adaptcp/error.hpp"
#include "adaptcp/experiments.hpp"
#include "adaptcp/metrics.hpp"
#include "adaptcp/parallel.hpp"
#include "adaptcp/random.hpp"
#include "adaptcp/serialize.hpp"
#include "adaptcp/synth.hpp"

namespace adaptcp::cli {

namespace {

namespace fs = std::filesystem;

struct Output {
  std::ostream& out;
  bool pretty = false;

  void text(const std::string& path, const std::string& content) const {
    if (path.empty() || path == "-") {
      out << content;
      return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + path);
    f << content;
    if (!f) throw IoError("write failed: " + path);
  }

  void json(const std::string& path, const Json& doc) const {
    text(path, (pretty ? doc.dump(2) : doc.dump()) + "\n");
  }
};

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Json read_json(const std::string& path) {
  const auto text = read_text(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("invalid JSON in " + path + ": " + e.what());
  }
}

Json header(const std::string& command, Json config) {
  Json doc;
  doc["tool"] = tool_json();
  doc["command"] = command;
  doc["config"] = std::move(config);
  return doc;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream ss(text);
  while (std::getline(ss, cur, sep)) parts.push_back(cur);
  if (!text.empty() && text.back() == sep) parts.emplace_back();
  return parts;
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    if (t == "inf") return std::numeric_limits<double>::infinity();
    throw ValidationError("bad number for " + what + ": '" + text + "'");
  }
  return v;
}

std::uint64_t parse_uint(const std::string& text, const std::string& what) {
  const auto t = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty()) {
    throw ValidationError("bad integer for " + what + ": '" + text + "'");
  }
  return v;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& what) {
  std::vector<double> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_double(p, what));
  if (out.empty()) throw ValidationError("empty list for " + what);
  return out;
}

std::vector<std::size_t> parse_size_list(const std::string& text, const std::string& what) {
  std::vector<std::size_t> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_uint(p, what));
  if (out.empty()) throw ValidationError("empty list for " + what);
  return out;
}

std::vector<AlgorithmKind> parse_algorithms(const std::string& text) {
  std::vector<AlgorithmKind> out;
  for (const auto& p : split(text, ',')) out.push_back(parse_algorithm(trim(p)));
  if (out.empty()) throw ValidationError("no algorithms given");
  return out;
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
}

/// Ease when the dataset carries it, otherwise empty.
template <class D>
std::vector<double> optional_ease(const D& ds) {
  if (ds.has_ease() || ds.has_transformed()) return resolve_ease(ds);
  return {};
}

/// --data plus zero or more --variant name=path files with the same examples.
ExperimentData load_experiment(const std::string& data_path, const std::vector<std::string>& variant_args) {
  auto ed = ExperimentData::from_dataset(load_score_dataset(data_path), fs::path(data_path).stem().string());
  for (const auto& arg : variant_args) {
    std::string name, path;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      name = arg.substr(0, eq);
      path = arg.substr(eq + 1);
    } else {
      path = arg;
      name = fs::path(arg).stem().string();
    }
    const auto v = load_score_dataset(path);
    if (v.n != ed.data.n || v.labels != ed.data.labels) {
      throw ValidationError("variant " + name + " does not describe the same examples as " + data_path);
    }
    ed.variants.push_back({name, resolve_ease(v)});
  }
  return ed;
}

Json variant_names(const ExperimentData& ed) {
  Json names = Json::array();
  for (const auto& v : ed.variants) names.push_back(v.name);
  return names;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::size_t n = 20000, k = 100, l = 10;
  double accuracy = 0.8, spread = 1.0, coupling = 1.0;
  std::uint64_t seed = 0;
  bool regression = false, with_transformed = false;
  std::string format, output;
};

void cmd_synth(const SynthArgs& a) {
  FileFormat fmt = format_from_path(a.output);
  if (a.format == "csv") fmt = FileFormat::csv;
  if (a.format == "binary") fmt = FileFormat::binary;
  if (a.regression) {
    SynthRegressionConfig c;
    c.n = a.n;
    c.l = a.l;
    c.difficulty_spread = a.spread;
    c.noise_coupling = a.coupling;
    c.seed = a.seed;
    c.keep_transformed = a.with_transformed;
    write_dataset(generate_regression(c), a.output, fmt);
  } else {
    SynthConfig c;
    c.n = a.n;
    c.k = a.k;
    c.l = a.l;
    c.target_accuracy = a.accuracy;
    c.difficulty_spread = a.spread;
    c.noise_coupling = a.coupling;
    c.seed = a.seed;
    c.keep_transformed = a.with_transformed;
    write_dataset(generate(c), a.output, fmt);
  }
}

struct CalibrateArgs {
  std::string data, score = "lac", mode = "global", output;
  double alpha = 0.1, lambda = 0.0, w = 0.0;
  std::uint32_t kreg = 0;
  bool has_lambda = false, has_kreg = false, has_w = false;
  std::size_t bins = 10, min_bin_count = 20;
  bool split_binning = false, deterministic = false;
  std::uint64_t seed = 0;
};

void cmd_calibrate(const CalibrateArgs& a, const Output& out) {
  check_alpha(a.alpha);
  ScoreSpec spec;
  spec.kind = parse_score_kind(a.score);
  if (a.has_lambda) spec.raps_lambda = a.lambda;
  if (a.has_kreg) spec.raps_kreg = a.kreg;
  if (a.has_w) spec.saps_w = a.w;
  spec.randomized = !a.deterministic;
  spec.seed = a.seed;
  spec.check();
  if (a.mode != "global" && a.mode != "mondrian") throw ValidationError("--mode must be global or mondrian");
  const bool mondrian = a.mode == "mondrian";
  MondrianOptions opts{a.bins, a.split_binning, a.min_bin_count};

  const auto data = load_dataset(a.data);
  ConformalModel model;
  if (const auto* ds = std::get_if<ScoreDataset>(&data)) {
    if (is_regression(spec.kind)) throw ValidationError("score " + a.score + " needs a regression dataset");
    model = mondrian ? fit_mondrian(*ds, resolve_ease(*ds), spec, a.alpha, opts) : fit_global(*ds, spec, a.alpha);
  } else {
    const auto& rs = std::get<RegressionDataset>(data);
    if (!is_regression(spec.kind)) throw ValidationError("score " + a.score + " needs a classification dataset");
    model = mondrian ? fit_mondrian(rs, resolve_ease(rs), spec, a.alpha, opts) : fit_global(rs, spec, a.alpha);
  }

  Json config;
  config["data"] = a.data;
  config["score"] = a.score;
  config["alpha"] = a.alpha;
  config["mode"] = a.mode;
  if (mondrian) {
    config["bins"] = a.bins;
    config["split_binning"] = a.split_binning;
    config["min_bin_count"] = a.min_bin_count;
  }
  config["randomized"] = spec.randomized;
  auto doc = header("calibrate", config);
  doc["seed"] = a.seed;
  const auto model_doc = to_json(model);
  for (const auto& [key, value] : model_doc.items()) doc[key] = value;
  out.json(a.output, doc);
}

struct PredictArgs {
  std::string model, data, output;
};

void cmd_predict(const PredictArgs& a, const Output& out) {
  const auto model = model_from_json(read_json(a.model));
  const auto data = load_dataset(a.data);
  const bool mondrian = model.mode == CalibrationMode::mondrian;
  std::ostringstream csv;
  if (const auto* ds = std::get_if<ScoreDataset>(&data)) {
    if (is_regression(model.spec.kind)) throw ValidationError("model expects a regression dataset");
    const auto ease = mondrian ? resolve_ease(*ds) : std::vector<double>{};
    const auto pred = predict(model, *ds, ease);
    csv << "index,label,covered,size,bin,set\n";
    for (std::size_t i = 0; i < pred.n(); ++i) {
      csv << i << ',' << ds->labels[i] << ',' << int(pred.covered[i]) << ',' << pred.sets[i].size() << ','
          << pred.bin[i] << ',';
      for (std::size_t j = 0; j < pred.sets[i].size(); ++j) csv << (j ? " " : "") << pred.sets[i][j];
      csv << '\n';
    }
  } else {
    const auto& rs = std::get<RegressionDataset>(data);
    if (!is_regression(model.spec.kind)) throw ValidationError("model expects a classification dataset");
    const auto ease = mondrian ? resolve_ease(rs) : std::vector<double>{};
    const auto pred = predict(model, rs, ease);
    csv << "index,target,lo,hi,covered,width,bin\n";
    for (std::size_t i = 0; i < pred.n(); ++i) {
      const auto& iv = pred.intervals[i];
      csv << i << ',' << format_number(rs.targets[i]) << ',' << format_number(iv.lo) << ',' << format_number(iv.hi)
          << ',' << int(pred.covered[i]) << ',' << format_number(iv.width()) << ',' << pred.bin[i] << '\n';
    }
  }
  out.text(a.output, csv.str());
}

/// Rebuilds a prediction output from a predictions CSV, recomputing coverage
/// from the dataset.
PredictionOutput read_predictions(const std::string& path, const Dataset& data) {
  std::istringstream in(read_text(path));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("empty predictions file: " + path);
  const auto head = trim(line);
  const bool regression = std::holds_alternative<RegressionDataset>(data);
  const std::string expected = regression ? "index,target,lo,hi,covered,width,bin" : "index,label,covered,size,bin,set";
  if (head != expected) throw ValidationError("predictions header mismatch in " + path + ": expected '" + expected + "'");
  const std::size_t n = regression ? std::get<RegressionDataset>(data).n : std::get<ScoreDataset>(data).n;

  PredictionOutput out;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto f = split(line, ',');
    const std::string where = path + " row " + std::to_string(row + 1);
    if (row >= n) throw ValidationError("more predictions than examples in " + path);
    if (f.size() != (regression ? 7u : 6u)) throw ValidationError("wrong column count at " + where);
    if (parse_uint(f[0], "index") != row) throw ValidationError("index out of order at " + where);
    if (regression) {
      const auto& rs = std::get<RegressionDataset>(data);
      Interval iv{parse_double(f[2], "lo"), parse_double(f[3], "hi")};
      if (iv.hi < iv.lo) throw ValidationError("interval with hi < lo at " + where);
      out.intervals.push_back(iv);
      out.covered.push_back(iv.contains(rs.targets[row]) ? 1 : 0);
      out.size.push_back(iv.width());
      out.bin.push_back(static_cast<std::uint32_t>(parse_uint(f[6], "bin")));
    } else {
      const auto& ds = std::get<ScoreDataset>(data);
      if (parse_uint(f[1], "label") != ds.labels[row]) throw ValidationError("label mismatch at " + where);
      std::vector<std::uint32_t> set;
      std::istringstream ss(f[5]);
      std::string tok;
      while (ss >> tok) {
        const auto c = parse_uint(tok, "set");
        if (c >= ds.k) throw ValidationError("class index out of range at " + where);
        set.push_back(static_cast<std::uint32_t>(c));
      }
      std::sort(set.begin(), set.end());
      if (std::adjacent_find(set.begin(), set.end()) != set.end()) {
        throw ValidationError("duplicate class in set at " + where);
      }
      const bool covered = std::binary_search(set.begin(), set.end(), ds.labels[row]);
      out.covered.push_back(covered ? 1 : 0);
      out.size.push_back(static_cast<double>(set.size()));
      out.bin.push_back(static_cast<std::uint32_t>(parse_uint(f[4], "bin")));
      out.sets.push_back(std::move(set));
    }
    ++row;
  }
  if (row != n) {
    throw ValidationError(path + " has " + std::to_string(row) + " predictions for " + std::to_string(n) + " examples");
  }
  return out;
}

struct EvaluateArgs {
  std::string predictions, data, strata, output, csv, name = "run";
  double alpha = 0.1;
  std::size_t eval_bins = 50, escv_min_count = 1;
};

void cmd_evaluate(const EvaluateArgs& a, const Output& out) {
  check_alpha(a.alpha);
  const auto data = load_dataset(a.data);
  const auto pred = read_predictions(a.predictions, data);
  EvaluationOptions opts;
  opts.alpha = a.alpha;
  opts.eval_bins = a.eval_bins;
  opts.escv_min_count = a.escv_min_count;
  if (!a.strata.empty()) opts.strata = parse_strata(a.strata);

  MetricReport report;
  if (const auto* ds = std::get_if<ScoreDataset>(&data)) {
    const RankTable table(*ds);
    const auto ranks = ground_truth_ranks(*ds, table);
    report = evaluate(*ds, ranks, pred, optional_ease(*ds), opts);
  } else {
    const auto& rs = std::get<RegressionDataset>(data);
    report = evaluate(rs, pred, optional_ease(rs), opts);
  }

  Json config;
  config["predictions"] = a.predictions;
  config["data"] = a.data;
  config["alpha"] = a.alpha;
  config["eval_bins"] = a.eval_bins;
  config["strata"] = a.strata.empty() ? Json("default") : Json(a.strata);
  config["escv_min_count"] = a.escv_min_count;
  auto doc = header("evaluate", config);
  doc["seed"] = nullptr;
  doc["metrics"] = to_json(report);
  out.json(a.output, doc);
  if (!a.csv.empty()) out.text(a.csv, metric_csv_header() + "\n" + metric_csv_row(a.name, report) + "\n");
}

struct GridArgs {
  std::string bins, w, lambda;

  TuneGrid grid() const {
    TuneGrid g;
    if (!bins.empty()) g.bins = parse_size_list(bins, "--bins-grid");
    if (!w.empty()) g.saps_w = parse_double_list(w, "--w-grid");
    if (!lambda.empty()) g.raps_lambda = parse_double_list(lambda, "--lambda-grid");
    return g;
  }
};

Json grid_json(const TuneGrid& g) {
  Json j;
  j["bins"] = g.bins;
  j["saps_w"] = g.saps_w;
  j["raps_lambda"] = g.raps_lambda;
  return j;
}

struct TuneArgs {
  std::string data, family = "o-lac", objective = "auto", output;
  std::vector<std::string> variants;
  GridArgs grid;
  double alpha = 0.1;
  std::size_t eval_bins = 50, min_bin_count = 20;
  bool deterministic = false;
  std::uint64_t seed = 0;
};

void cmd_tune(const TuneArgs& a, const Output& out) {
  check_alpha(a.alpha);
  const auto family = parse_algorithm(a.family);
  if (!needs_tuning(family)) throw ValidationError("algorithm " + a.family + " has no hyperparameters to tune");
  TuneObjective objective = default_objective(family);
  if (a.objective == "t_ss") {
    objective = TuneObjective::t_ss;
  } else if (a.objective == "sscv") {
    objective = TuneObjective::sscv;
  } else if (a.objective != "auto") {
    throw ValidationError("--objective must be auto, t_ss or sscv");
  }
  const auto ed = load_experiment(a.data, a.variants);
  if (ed.data.n < 2) throw ValidationError("tuning needs at least two examples");

  // Seeded permutation; first half fits, second half scores the objective.
  std::vector<std::size_t> perm(ed.data.n);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  auto eng = keyed_engine({a.seed, streams::split, 0});
  for (std::size_t i = perm.size() - 1; i > 0; --i) {
    std::swap(perm[i], perm[std::uniform_int_distribution<std::size_t>(0, i)(eng)]);
  }
  const std::size_t half = perm.size() / 2;
  const std::vector<std::size_t> first(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(half));
  const std::vector<std::size_t> second(perm.begin() + static_cast<std::ptrdiff_t>(half), perm.end());

  TuneOptions opts;
  opts.alpha = a.alpha;
  opts.eval_bins = a.eval_bins;
  opts.randomized = !a.deterministic;
  opts.min_bin_count = a.min_bin_count;
  opts.seed = a.seed;
  const auto grid = a.grid.grid();
  const auto result = tune(family, subset(ed, first), subset(ed, second), grid, objective, opts);

  Json config;
  config["data"] = a.data;
  config["variants"] = variant_names(ed);
  config["family"] = a.family;
  config["objective"] = std::string(to_string(objective));
  config["alpha"] = a.alpha;
  config["eval_bins"] = a.eval_bins;
  config["min_bin_count"] = a.min_bin_count;
  config["randomized"] = opts.randomized;
  config["grid"] = grid_json(grid);
  auto doc = header("tune", config);
  doc["seed"] = a.seed;
  doc["result"] = to_json(result);
  out.json(a.output, doc);
}

struct CompareArgs {
  std::string data, alphas = "0.1", algorithms, output, csv, tables;
  std::vector<std::string> variants;
  GridArgs grid;
  std::size_t repeats = 1, n_val = 20000, n_test = 20000, eval_bins = 50, min_bin_count = 20;
  bool deterministic = false;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

void cmd_compare(const CompareArgs& a, const Output& out) {
  const auto ed = load_experiment(a.data, a.variants);
  CompareConfig c;
  if (!a.algorithms.empty()) c.algorithms = parse_algorithms(a.algorithms);
  c.alphas = parse_double_list(a.alphas, "--alphas");
  for (double alpha : c.alphas) check_alpha(alpha);
  if (a.repeats == 0) throw ValidationError("--repeats must be >= 1");
  c.repeats = a.repeats;
  c.n_val = a.n_val;
  c.n_test = a.n_test;
  c.eval_bins = a.eval_bins;
  c.grid = a.grid.grid();
  c.randomized = !a.deterministic;
  c.min_bin_count = a.min_bin_count;
  c.seed = a.seed;
  c.threads = a.threads ? a.threads : default_threads();
  const auto report = compare_run(ed, c);

  Json config;
  config["data"] = a.data;
  config["variants"] = variant_names(ed);
  Json algs = Json::array();
  for (auto k : c.algorithms) algs.push_back(std::string(to_string(k)));
  config["algorithms"] = algs;
  config["alphas"] = c.alphas;
  config["repeats"] = c.repeats;
  config["n_val"] = c.n_val;
  config["n_test"] = c.n_test;
  config["eval_bins"] = c.eval_bins;
  config["min_bin_count"] = c.min_bin_count;
  config["randomized"] = c.randomized;
  config["grid"] = grid_json(c.grid);
  auto doc = header("compare", config);
  doc["seed"] = a.seed;
  doc["rows"] = to_json(report);
  out.json(a.output, doc);
  if (!a.csv.empty()) out.text(a.csv, compare_csv(report));
  if (!a.tables.empty()) out.text(a.tables, compare_table_csv(report));
}

struct PropertyArgs {
  std::string data, algorithms = "lac,aps,raps,saps", output;
  std::vector<std::string> variants;
  std::size_t trials = 50, trial_size = 1000, subset_size = 50, draws = 1000, eval_bins = 50;
  bool full_scale = false, overlap = false, deterministic = false;
  double alpha = 0.1, lambda = 0.01, w = 0.1;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

void cmd_property(const PropertyArgs& a, const Output& out) {
  check_alpha(a.alpha);
  const auto ed = load_experiment(a.data, a.variants);
  PropertyConfig c;
  if (a.full_scale) {
    c = PropertyConfig::full_scale();
  } else {
    c.trials = a.trials;
    c.trial_size = a.trial_size;
    c.subset_size = a.subset_size;
    c.draws = a.draws;
  }
  c.overlap = a.overlap;
  c.alpha = a.alpha;
  c.eval_bins = a.eval_bins;
  c.seed = a.seed;
  c.threads = a.threads ? a.threads : default_threads();

  std::vector<AlgorithmConfig> algs;
  for (auto kind : parse_algorithms(a.algorithms)) {
    AlgorithmConfig ac;
    ac.kind = kind;
    ac.raps_lambda = a.lambda;
    ac.saps_w = a.w;
    ac.randomized = !a.deterministic;
    algs.push_back(ac);
  }
  const auto report = metric_validation(ed, algs, c);

  Json config;
  config["data"] = a.data;
  config["variants"] = variant_names(ed);
  Json names = Json::array();
  for (const auto& ac : algs) names.push_back(to_json(ac));
  config["algorithms"] = names;
  config["trials"] = c.trials;
  config["trial_size"] = c.trial_size;
  config["subset_size"] = c.subset_size;
  config["draws"] = c.draws;
  config["overlap"] = c.overlap;
  config["alpha"] = c.alpha;
  config["eval_bins"] = c.eval_bins;
  config["randomized"] = !a.deterministic;
  auto doc = header("property-exp", config);
  doc["seed"] = a.seed;
  doc["report"] = to_json(report);
  out.json(a.output, doc);
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Transformation-based adaptive conformal prediction"};
  app.name("adaptcp");
  app.require_subcommand(1);
  app.fallthrough();
  bool pretty = false;
  app.add_flag("--pretty", pretty, "Indent JSON output");
  app.set_version_flag("--version", kToolVersion);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--n", synth.n, "Examples")->capture_default_str();
  s->add_option("--k", synth.k, "Classes")->capture_default_str();
  s->add_option("--l", synth.l, "Transformations per example")->capture_default_str();
  s->add_option("--accuracy", synth.accuracy, "Target top-1 accuracy")->capture_default_str();
  s->add_option("--spread", synth.spread, "Latent difficulty std-dev")->capture_default_str();
  s->add_option("--coupling", synth.coupling, "Transformation noise scale")->capture_default_str();
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_flag("--regression", synth.regression, "Gaussian regression outputs");
  s->add_flag("--with-transformed", synth.with_transformed, "Store the transformed block");
  s->add_option("--format", synth.format, "binary or csv (default: by extension)")
      ->check(CLI::IsMember({"binary", "csv"}));
  s->add_option("-o,--output", synth.output)->required();

  CalibrateArgs cal;
  auto* c = app.add_subcommand("calibrate", "Fit conformal thresholds");
  c->add_option("--data", cal.data)->required();
  c->add_option("--score", cal.score, "lac, aps, raps, saps, cp, cpa")->capture_default_str();
  c->add_option("--alpha", cal.alpha)->capture_default_str();
  c->add_option("--mode", cal.mode, "global or mondrian")->capture_default_str();
  c->add_option("--bins", cal.bins)->capture_default_str();
  c->add_flag("--split-binning", cal.split_binning, "Fit bin edges and thresholds on disjoint halves");
  c->add_option("--min-bin-count", cal.min_bin_count)->capture_default_str();
  auto* lambda_opt = c->add_option("--lambda", cal.lambda, "RAPS penalty");
  auto* kreg_opt = c->add_option("--kreg", cal.kreg, "RAPS k_reg");
  auto* w_opt = c->add_option("--w", cal.w, "SAPS rank weight");
  c->add_flag("--deterministic", cal.deterministic, "Disable randomized tie-breaking (u = 1)");
  c->add_option("--seed", cal.seed)->capture_default_str();
  c->add_option("-o,--output", cal.output, "Model JSON (default stdout)");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "Build prediction sets or intervals");
  p->add_option("--model", pred.model)->required();
  p->add_option("--data", pred.data)->required();
  p->add_option("-o,--output", pred.output, "Predictions CSV (default stdout)");

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Compute coverage and adaptiveness metrics");
  e->add_option("--predictions", ev.predictions)->required();
  e->add_option("--data", ev.data)->required();
  e->add_option("--alpha", ev.alpha)->capture_default_str();
  e->add_option("--eval-bins", ev.eval_bins)->capture_default_str();
  e->add_option("--strata", ev.strata, "Size strata, e.g. 1,2-3,4-10");
  e->add_option("--escv-min-count", ev.escv_min_count)->capture_default_str();
  e->add_option("-o,--output", ev.output, "Report JSON (default stdout)");
  e->add_option("--csv", ev.csv, "Also write a one-row CSV");
  e->add_option("--name", ev.name, "Algorithm label for the CSV row")->capture_default_str();

  auto add_grid = [](CLI::App* sub, GridArgs& g) {
    sub->add_option("--bins-grid", g.bins, "Bin counts, e.g. 10,20,30");
    sub->add_option("--w-grid", g.w, "SAPS weights");
    sub->add_option("--lambda-grid", g.lambda, "RAPS penalties");
  };

  TuneArgs tn;
  auto* t = app.add_subcommand("tune", "Grid-search hyperparameters on a validation set");
  t->add_option("--data", tn.data)->required();
  t->add_option("--variant", tn.variants, "Extra ease variant as name=path");
  t->add_option("--family", tn.family, "raps, saps, o-lac, o-saps")->capture_default_str();
  t->add_option("--objective", tn.objective, "auto, t_ss or sscv")->capture_default_str();
  t->add_option("--alpha", tn.alpha)->capture_default_str();
  t->add_option("--eval-bins", tn.eval_bins)->capture_default_str();
  t->add_option("--min-bin-count", tn.min_bin_count)->capture_default_str();
  t->add_flag("--deterministic", tn.deterministic);
  t->add_option("--seed", tn.seed)->capture_default_str();
  add_grid(t, tn.grid);
  t->add_option("-o,--output", tn.output);

  CompareArgs cmp;
  auto* m = app.add_subcommand("compare", "Repeated split comparison of all algorithms");
  m->add_option("--data", cmp.data)->required();
  m->add_option("--variant", cmp.variants, "Extra ease variant as name=path");
  m->add_option("--algorithms", cmp.algorithms, "Comma list (default all)");
  m->add_option("--alphas", cmp.alphas)->capture_default_str();
  m->add_option("--repeats", cmp.repeats)->capture_default_str();
  m->add_option("--n-val", cmp.n_val)->capture_default_str();
  m->add_option("--n-test", cmp.n_test)->capture_default_str();
  m->add_option("--eval-bins", cmp.eval_bins)->capture_default_str();
  m->add_option("--min-bin-count", cmp.min_bin_count)->capture_default_str();
  m->add_flag("--deterministic", cmp.deterministic);
  m->add_option("--seed", cmp.seed)->capture_default_str();
  m->add_option("--threads", cmp.threads, "Worker threads (0 = hardware)")->capture_default_str();
  add_grid(m, cmp.grid);
  m->add_option("-o,--output", cmp.output);
  m->add_option("--csv", cmp.csv, "Median metrics as CSV");
  m->add_option("--tables", cmp.tables, "T-CV and T-SS per algorithm, one row per alpha");

  PropertyArgs prop;
  auto* x = app.add_subcommand("property-exp", "Correlate metrics with the difficulty / size property");
  x->add_option("--data", prop.data)->required();
  x->add_option("--variant", prop.variants, "Extra ease variant as name=path");
  x->add_option("--algorithms", prop.algorithms)->capture_default_str();
  x->add_option("--trials,--R", prop.trials)->capture_default_str();
  x->add_option("--trial-size,--M", prop.trial_size)->capture_default_str();
  x->add_option("--subset-size,--m", prop.subset_size)->capture_default_str();
  x->add_option("--draws,--T", prop.draws)->capture_default_str();
  x->add_flag("--full-scale", prop.full_scale, "R=1000, M=2000, m=100, T=10000");
  x->add_flag("--overlap", prop.overlap, "Draw the two subsets independently");
  x->add_option("--alpha", prop.alpha)->capture_default_str();
  x->add_option("--lambda", prop.lambda, "RAPS penalty")->capture_default_str();
  x->add_option("--w", prop.w, "SAPS rank weight")->capture_default_str();
  x->add_option("--eval-bins", prop.eval_bins)->capture_default_str();
  x->add_flag("--deterministic", prop.deterministic);
  x->add_option("--seed", prop.seed)->capture_default_str();
  x->add_option("--threads", prop.threads, "Worker threads (0 = hardware)")->capture_default_str();
  x->add_option("-o,--output", prop.output);

  std::vector<std::string> storage;
  storage.reserve(args.size() + 1);
  storage.emplace_back("adaptcp");
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::CallForVersion&) {
    out << kToolVersion << '\n';
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }

  const Output output{out, pretty};
  try {
    if (*s) {
      cmd_synth(synth);
    } else if (*c) {
      cal.has_lambda = lambda_opt->count() > 0;
      cal.has_kreg = kreg_opt->count() > 0;
      cal.has_w = w_opt->count() > 0;
      cmd_calibrate(cal, output);
    } else if (*p) {
      cmd_predict(pred, output);
    } else if (*e) {
      cmd_evaluate(ev, output);
    } else if (*t) {
      cmd_tune(tn, output);
    } else if (*m) {
      cmd_compare(cmp, output);
    } else if (*x) {
      cmd_property(prop, output);
    }
  } catch (const IoError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + (argc > 0 ? 1 : 0), argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace adaptcp::cli
