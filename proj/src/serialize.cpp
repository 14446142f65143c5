#include "adaptcp/serialize.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <sstream>

#include "adaptcp/error.hpp"

namespace adaptcp {

namespace {

Json threshold_json(double v) {
  if (v == std::numeric_limits<double>::infinity()) return "inf";
  return v;
}

double threshold_from_json(const Json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return std::numeric_limits<double>::infinity();
    throw ValidationError("model JSON: unexpected string threshold");
  }
  if (!j.is_number()) throw ValidationError("model JSON: threshold is not a number");
  return j.get<double>();
}

template <class T>
Json optional_json(const std::optional<T>& v) {
  if (!v) return nullptr;
  return number_or_null(*v);
}

}  // namespace

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

Json number_or_null(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

Json tool_json() {
  Json j;
  j["name"] = kToolName;
  j["version"] = kToolVersion;
  return j;
}

Json to_json(const ScoreSpec& spec) {
  Json j;
  j["kind"] = std::string(to_string(spec.kind));
  j["raps_lambda"] = spec.raps_lambda ? Json(*spec.raps_lambda) : Json(nullptr);
  j["raps_kreg"] = spec.raps_kreg ? Json(*spec.raps_kreg) : Json(nullptr);
  j["saps_w"] = spec.saps_w ? Json(*spec.saps_w) : Json(nullptr);
  j["randomized"] = spec.randomized;
  j["seed"] = spec.seed;
  return j;
}

ScoreSpec spec_from_json(const Json& j) {
  try {
    ScoreSpec spec;
    spec.kind = parse_score_kind(j.at("kind").get<std::string>());
    if (j.contains("raps_lambda") && !j["raps_lambda"].is_null()) spec.raps_lambda = j["raps_lambda"].get<double>();
    if (j.contains("raps_kreg") && !j["raps_kreg"].is_null()) spec.raps_kreg = j["raps_kreg"].get<std::uint32_t>();
    if (j.contains("saps_w") && !j["saps_w"].is_null()) spec.saps_w = j["saps_w"].get<double>();
    spec.randomized = j.value("randomized", true);
    spec.seed = j.value("seed", std::uint64_t{0});
    spec.check();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model JSON: bad score spec: ") + e.what());
  }
}

Json to_json(const ConformalModel& model) {
  Json j;
  j["spec"] = to_json(model.spec);
  j["alpha"] = model.alpha;
  j["mode"] = model.mode == CalibrationMode::global ? "global" : "mondrian";
  Json thresholds = Json::array();
  for (double t : model.thresholds) thresholds.push_back(threshold_json(t));
  j["thresholds"] = thresholds;
  Json edges = Json::array();
  if (model.bins) {
    for (double e : bin_boundaries(*model.bins)) edges.push_back(threshold_json(e));
  }
  j["bin_edges"] = edges;
  return j;
}

ConformalModel model_from_json(const Json& j) {
  try {
    ConformalModel model;
    model.spec = spec_from_json(j.at("spec"));
    model.alpha = j.at("alpha").get<double>();
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "global") {
      model.mode = CalibrationMode::global;
    } else if (mode == "mondrian") {
      model.mode = CalibrationMode::mondrian;
    } else {
      throw ValidationError("model JSON: unknown mode '" + mode + "'");
    }
    for (const auto& t : j.at("thresholds")) model.thresholds.push_back(threshold_from_json(t));
    std::vector<double> edges;
    for (const auto& e : j.at("bin_edges")) edges.push_back(threshold_from_json(e));
    if (model.mode == CalibrationMode::mondrian) {
      model.bins = bin_model_from_boundaries(edges);
      if (model.bins->bins() != model.thresholds.size()) {
        throw ValidationError("model JSON: bin_edges and thresholds disagree in length");
      }
    } else if (model.thresholds.size() != 1) {
      throw ValidationError("model JSON: global model needs exactly one threshold");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model JSON: ") + e.what());
  }
}

Json to_json(const MetricReport& r) {
  Json j;
  j["alpha"] = r.alpha;
  j["coverage"] = number_or_null(r.coverage);
  j["avg_size"] = number_or_null(r.avg_size);
  j["t_cv"] = optional_json(r.t_cv);
  j["t_ss"] = optional_json(r.t_ss);
  j["sscv"] = optional_json(r.sscv);
  j["escv"] = optional_json(r.escv);
  j["deficit_mean"] = optional_json(r.deficit);
  j["excess_mean"] = optional_json(r.excess);
  if (r.width_error_r2 || r.width_error_tau) {
    j["width_error_r2"] = optional_json(r.width_error_r2);
    j["width_error_kendall_tau"] = optional_json(r.width_error_tau);
  }
  j["eval_bins"] = r.eval_bins;
  Json bins = Json::array();
  for (const auto& b : r.bins) {
    Json row;
    row["count"] = b.count;
    row["coverage"] = number_or_null(b.coverage);
    row["mean_difficulty"] = number_or_null(b.mean_difficulty);
    row["mean_size"] = number_or_null(b.mean_size);
    bins.push_back(row);
  }
  j["bins"] = bins;
  return j;
}

Json to_json(const AlgorithmConfig& c) {
  Json j;
  j["algorithm"] = std::string(to_string(c.kind));
  if (c.kind == AlgorithmKind::raps) {
    j["raps_lambda"] = c.raps_lambda;
    j["raps_kreg"] = c.raps_kreg;
  }
  if (c.kind == AlgorithmKind::saps || c.kind == AlgorithmKind::o_saps) j["saps_w"] = c.saps_w;
  if (is_mondrian(c.kind)) {
    j["bins"] = c.bins;
    j["variant"] = c.variant;
    j["split_binning"] = c.split_binning;
  }
  return j;
}

Json to_json(const RunMetrics& m) {
  Json j;
  j["coverage"] = number_or_null(m.coverage);
  j["avg_size"] = number_or_null(m.avg_size);
  j["t_cv"] = number_or_null(m.t_cv);
  j["t_ss"] = number_or_null(m.t_ss);
  j["sscv"] = number_or_null(m.sscv);
  j["escv"] = number_or_null(m.escv);
  j["deficit"] = number_or_null(m.deficit);
  j["excess"] = number_or_null(m.excess);
  return j;
}

Json to_json(const CompareReport& report) {
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json j;
    j["algorithm"] = std::string(to_string(row.algorithm));
    j["alpha"] = row.alpha;
    j["median"] = to_json(row.median);
    Json repeats = Json::array();
    for (std::size_t r = 0; r < row.repeats.size(); ++r) {
      Json rep = to_json(row.repeats[r]);
      rep["hyperparameters"] = to_json(row.chosen[r]);
      repeats.push_back(rep);
    }
    j["repeats"] = repeats;
    rows.push_back(j);
  }
  return rows;
}

Json to_json(const TuneResult& result) {
  Json j;
  j["objective"] = std::string(to_string(result.kind));
  j["best"] = to_json(result.best);
  j["best_objective"] = number_or_null(result.objective);
  Json points = Json::array();
  for (const auto& p : result.points) {
    Json pj = to_json(p.config);
    pj["objective"] = number_or_null(p.objective);
    points.push_back(pj);
  }
  j["grid"] = points;
  return j;
}

Json to_json(const ValidationReport& report) {
  Json j;
  Json algs = Json::array();
  for (const auto& a : report.algorithms) {
    Json aj;
    aj["algorithm"] = std::string(to_string(a.algorithm));
    Json corr = Json::array();
    for (const auto& c : a.correlations) {
      Json cj;
      cj["metric"] = c.metric;
      cj["rho"] = number_or_null(c.rho);
      cj["p_value"] = number_or_null(c.p_value);
      cj["rank"] = c.rank;
      corr.push_back(cj);
    }
    aj["correlations"] = corr;
    Json rates = Json::array();
    for (double r : a.rates) rates.push_back(r);
    aj["satisfaction_rates"] = rates;
    algs.push_back(aj);
  }
  j["algorithms"] = algs;
  Json summary = Json::array();
  for (std::size_t m = 0; m < report.rank_counts.size(); ++m) {
    Json sj;
    sj["metric"] = std::string(kValidatedMetrics[m]);
    sj["rank_counts"] = report.rank_counts[m];
    sj["average_rank"] = report.average_rank[m];
    summary.push_back(sj);
  }
  j["rank_summary"] = summary;
  return j;
}

std::string metric_csv_header() {
  return "algorithm,alpha,coverage,avg_size,t_cv,t_ss,sscv,escv,deficit,excess";
}

std::string metric_csv_row(const std::string& algorithm, const MetricReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::ostringstream out;
  out << algorithm << ',' << format_number(r.alpha) << ',' << format_number(r.coverage) << ','
      << format_number(r.avg_size) << ',' << opt(r.t_cv) << ',' << opt(r.t_ss) << ',' << opt(r.sscv) << ','
      << opt(r.escv) << ',' << opt(r.deficit) << ',' << opt(r.excess);
  return out.str();
}

std::string compare_csv(const CompareReport& report) {
  std::ostringstream out;
  out << metric_csv_header() << '\n';
  for (const auto& row : report.rows) {
    const auto& m = row.median;
    out << to_string(row.algorithm) << ',' << format_number(row.alpha) << ',' << format_number(m.coverage) << ','
        << format_number(m.avg_size) << ',' << format_number(m.t_cv) << ',' << format_number(m.t_ss) << ','
        << format_number(m.sscv) << ',' << format_number(m.escv) << ',' << format_number(m.deficit) << ','
        << format_number(m.excess) << '\n';
  }
  return out.str();
}

std::string compare_table_csv(const CompareReport& report) {
  std::vector<double> alphas;
  std::vector<AlgorithmKind> algs;
  for (const auto& row : report.rows) {
    if (std::find(alphas.begin(), alphas.end(), row.alpha) == alphas.end()) alphas.push_back(row.alpha);
    if (std::find(algs.begin(), algs.end(), row.algorithm) == algs.end()) algs.push_back(row.algorithm);
  }
  std::ostringstream out;
  out << "alpha";
  for (auto a : algs) out << ",T-CV " << to_string(a);
  for (auto a : algs) out << ",T-SS " << to_string(a);
  out << '\n';
  for (double alpha : alphas) {
    out << format_number(alpha);
    for (int pass = 0; pass < 2; ++pass) {
      for (auto a : algs) {
        for (const auto& row : report.rows) {
          if (row.alpha == alpha && row.algorithm == a) {
            out << ',' << format_number(pass == 0 ? row.median.t_cv : row.median.t_ss);
          }
        }
      }
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace adaptcp
