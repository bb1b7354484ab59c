#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pmnet/attention.hpp"
#include "pmnet/bayes.hpp"
#include "pmnet/csv.hpp"
#include "pmnet/distribution.hpp"
#include "pmnet/error.hpp"
#include "pmnet/probmatch.hpp"
#include "pmnet/snapshot.hpp"
#include "pmnet/svg.hpp"
#include "pmnet/training.hpp"

namespace pmnet {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr const char* kOutputDirEnv = "PMNET_OUTPUT_DIR";

class RuntimeCapExceeded : public Error {
 public:
  explicit RuntimeCapExceeded(double seconds)
      : Error("runtime cap of " + format_number(seconds) + " s exceeded") {}
};

class MissingArtifact : public Error {
 public:
  explicit MissingArtifact(const std::filesystem::path& p)
      : Error("missing artifact " + p.string()), path_(p) {}
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Configuration

enum class ExperimentKind { match, overweight, adapt, bayes_fit, pipeline, neglect };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::match: return "match";
    case ExperimentKind::overweight: return "overweight";
    case ExperimentKind::adapt: return "adapt";
    case ExperimentKind::bayes_fit: return "bayes-fit";
    case ExperimentKind::pipeline: return "pipeline";
    case ExperimentKind::neglect: return "neglect";
  }
  return "?";
}

inline std::optional<ExperimentKind> experiment_from_string(const std::string& s) {
  for (auto k : {ExperimentKind::match, ExperimentKind::overweight, ExperimentKind::adapt,
                 ExperimentKind::bayes_fit, ExperimentKind::pipeline, ExperimentKind::neglect}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

// Thresholds evaluated by `verify`.
struct Checks {
  double tolerance = 0.05;
  double rare_at_or_below = 0.0;  // these hypotheses must be learned at or above truth
  double tolerance_from = 0.0;    // hypotheses below this mass are not tolerance-checked
  double max_lag_ratio = 0.5;
  std::optional<double> min_reuse_fraction;
  double slope_lo = 0.9, slope_hi = 1.1;
  double max_abs_intercept = 0.05;
  double min_correlation = 0.98;
  double entropy_tolerance = 0.05;
  double max_entropy_drop = 0.05;
};

struct PipelineOptions {
  double prior1 = 0.9;
  std::size_t flips = 10;
  std::vector<double> coin_bias{0.5, 0.8};
  std::vector<std::size_t> observations{8, 7, 8, 9, 6};
  bool learned_bayes = true;
};

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::match;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  std::optional<DistributionSpec> spec;
  TrainConfig train;
  std::size_t replications = 1;
  std::size_t instances_per_hypothesis = 15;
  double init_range = 0.1;
  std::optional<double> runtime_cap_seconds;
  std::size_t train_size = 1000;
  std::size_t test_size = 500;
  double r = 0.8;
  std::uint64_t t_max = 60;
  PipelineOptions pipeline;
  Checks checks;
  std::string source_text;
  std::filesystem::path source_path;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& obj, const std::set<std::string>& known,
                           const std::string& path) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ParseError(join_path(path, key), "unknown field");
  }
}

inline std::size_t require_count(const nlohmann::json& obj, const std::string& key,
                                 const std::string& path) {
  const auto v = require_unsigned(obj, key, path);
  if (v == 0) throw ParseError(join_path(path, key), "must be strictly positive");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig cfg,
                                          const std::string& path = "train") {
  using namespace detail;
  if (!j.is_object()) throw ParseError(path, "expected an object");
  reject_unknown(j,
                 {"epsilon_c", "patience", "cessation_enabled", "hard_epoch_cap", "optimizer",
                  "learning_rate", "momentum", "quickprop_max_factor",
                  "max_output_epochs_per_phase", "stagnation_patience", "stagnation_threshold",
                  "pool_size", "max_candidate_epochs", "candidate_patience",
                  "candidate_learning_rate", "candidate_weight_range", "output_weight_range",
                  "max_hidden_units", "recruit_min_gain", "experience_horizon"},
                 path);
  if (j.contains("epsilon_c")) cfg.epsilon_c = require_number(j, "epsilon_c", path);
  if (j.contains("patience")) cfg.patience = require_count(j, "patience", path);
  if (j.contains("cessation_enabled")) {
    cfg.cessation_enabled = require_bool(j, "cessation_enabled", path);
  }
  if (j.contains("hard_epoch_cap")) {
    if (j["hard_epoch_cap"].is_null()) {
      cfg.hard_epoch_cap.reset();
    } else {
      cfg.hard_epoch_cap = require_count(j, "hard_epoch_cap", path);
    }
  }
  if (j.contains("optimizer")) {
    const auto name = require_string(j, "optimizer", path);
    const auto k = optimizer_from_string(name);
    if (!k) throw ParseError(path + ".optimizer", "expected momentum or quickprop");
    cfg.optimizer = *k;
  }
  if (j.contains("learning_rate")) cfg.learning_rate = require_number(j, "learning_rate", path);
  if (j.contains("momentum")) cfg.momentum = require_number(j, "momentum", path);
  if (j.contains("quickprop_max_factor")) {
    cfg.quickprop_max_factor = require_number(j, "quickprop_max_factor", path);
  }
  if (j.contains("max_output_epochs_per_phase")) {
    cfg.max_output_epochs_per_phase = require_count(j, "max_output_epochs_per_phase", path);
  }
  if (j.contains("stagnation_patience")) {
    cfg.stagnation_patience = require_count(j, "stagnation_patience", path);
  }
  if (j.contains("stagnation_threshold")) {
    cfg.stagnation_threshold = require_number(j, "stagnation_threshold", path);
  }
  if (j.contains("pool_size")) cfg.pool_size = require_count(j, "pool_size", path);
  if (j.contains("max_candidate_epochs")) {
    cfg.max_candidate_epochs = require_count(j, "max_candidate_epochs", path);
  }
  if (j.contains("candidate_patience")) {
    cfg.candidate_patience = require_count(j, "candidate_patience", path);
  }
  if (j.contains("candidate_learning_rate")) {
    cfg.candidate_learning_rate = require_number(j, "candidate_learning_rate", path);
  }
  if (j.contains("candidate_weight_range")) {
    cfg.candidate_weight_range = require_number(j, "candidate_weight_range", path);
  }
  if (j.contains("output_weight_range")) {
    cfg.output_weight_range = require_number(j, "output_weight_range", path);
  }
  if (j.contains("max_hidden_units")) {
    cfg.max_hidden_units = require_unsigned(j, "max_hidden_units", path);
  }
  if (j.contains("recruit_min_gain")) {
    cfg.recruit_min_gain = require_number(j, "recruit_min_gain", path);
  }
  if (j.contains("experience_horizon")) {
    cfg.experience_horizon = require_number(j, "experience_horizon", path);
  }
  try {
    cfg.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError(path, e.what());
  }
  return cfg;
}

inline nlohmann::json to_json(const TrainConfig& c) {
  nlohmann::json j = {{"epsilon_c", c.epsilon_c},
                      {"patience", c.patience},
                      {"cessation_enabled", c.cessation_enabled},
                      {"optimizer", to_string(c.optimizer)},
                      {"learning_rate", c.learning_rate},
                      {"momentum", c.momentum},
                      {"quickprop_max_factor", c.quickprop_max_factor},
                      {"max_output_epochs_per_phase", c.max_output_epochs_per_phase},
                      {"stagnation_patience", c.stagnation_patience},
                      {"stagnation_threshold", c.effective_stagnation_threshold()},
                      {"pool_size", c.pool_size},
                      {"max_candidate_epochs", c.max_candidate_epochs},
                      {"candidate_patience", c.candidate_patience},
                      {"candidate_learning_rate", c.candidate_learning_rate},
                      {"candidate_weight_range", c.candidate_weight_range},
                      {"output_weight_range", c.output_weight_range},
                      {"max_hidden_units", c.max_hidden_units},
                      {"recruit_min_gain", c.recruit_min_gain},
                      {"experience_horizon", c.experience_horizon}};
  j["hard_epoch_cap"] = c.hard_epoch_cap ? nlohmann::json(*c.hard_epoch_cap) : nlohmann::json();
  return j;
}

inline Checks checks_from_json(const nlohmann::json& j, Checks c, const std::string& path) {
  using namespace detail;
  if (!j.is_object()) throw ParseError(path, "expected an object");
  reject_unknown(j,
                 {"tolerance", "rare_at_or_below", "tolerance_from", "max_lag_ratio",
                  "min_reuse_fraction", "slope_range", "max_abs_intercept", "min_correlation",
                  "entropy_tolerance", "max_entropy_drop"},
                 path);
  if (j.contains("tolerance")) c.tolerance = require_number(j, "tolerance", path);
  if (j.contains("rare_at_or_below")) c.rare_at_or_below = require_number(j, "rare_at_or_below", path);
  if (j.contains("tolerance_from")) c.tolerance_from = require_number(j, "tolerance_from", path);
  if (j.contains("max_lag_ratio")) c.max_lag_ratio = require_number(j, "max_lag_ratio", path);
  if (j.contains("min_reuse_fraction")) {
    c.min_reuse_fraction = require_number(j, "min_reuse_fraction", path);
  }
  if (j.contains("slope_range")) {
    const auto& s = j["slope_range"];
    if (!s.is_array() || s.size() != 2 || !s[0].is_number() || !s[1].is_number()) {
      throw ParseError(path + ".slope_range", "expected [lo, hi]");
    }
    c.slope_lo = s[0].get<double>();
    c.slope_hi = s[1].get<double>();
  }
  if (j.contains("max_abs_intercept")) {
    c.max_abs_intercept = require_number(j, "max_abs_intercept", path);
  }
  if (j.contains("min_correlation")) c.min_correlation = require_number(j, "min_correlation", path);
  if (j.contains("entropy_tolerance")) {
    c.entropy_tolerance = require_number(j, "entropy_tolerance", path);
  }
  if (j.contains("max_entropy_drop")) c.max_entropy_drop = require_number(j, "max_entropy_drop", path);
  return c;
}

inline PipelineOptions pipeline_from_json(const nlohmann::json& j, PipelineOptions p,
                                          const std::string& path) {
  using namespace detail;
  if (!j.is_object()) throw ParseError(path, "expected an object");
  reject_unknown(j, {"prior1", "flips", "coin_bias", "observations", "bayes_module"}, path);
  if (j.contains("prior1")) p.prior1 = require_number(j, "prior1", path);
  if (!(p.prior1 > 0.0 && p.prior1 < 1.0)) throw ParseError(path + ".prior1", "must lie in (0, 1)");
  if (j.contains("flips")) p.flips = require_count(j, "flips", path);
  if (j.contains("coin_bias")) {
    const auto& b = j["coin_bias"];
    if (!b.is_array() || b.size() != 2) throw ParseError(path + ".coin_bias", "expected two numbers");
    p.coin_bias.clear();
    for (std::size_t i = 0; i < 2; ++i) {
      if (!b[i].is_number() || b[i].get<double>() < 0.0 || b[i].get<double>() > 1.0) {
        throw ParseError(path + ".coin_bias[" + std::to_string(i) + "]", "expected a number in [0, 1]");
      }
      p.coin_bias.push_back(b[i].get<double>());
    }
  }
  if (j.contains("observations")) {
    const auto& o = j["observations"];
    if (!o.is_array() || o.empty()) throw ParseError(path + ".observations", "expected a non-empty array");
    p.observations.clear();
    for (std::size_t i = 0; i < o.size(); ++i) {
      if (!o[i].is_number_integer() || o[i].get<std::int64_t>() < 0) {
        throw ParseError(path + ".observations[" + std::to_string(i) + "]", "expected a head count");
      }
      p.observations.push_back(o[i].get<std::size_t>());
    }
  }
  for (std::size_t i = 0; i < p.observations.size(); ++i) {
    if (p.observations[i] > p.flips) {
      throw ParseError(path + ".observations[" + std::to_string(i) + "]", "more heads than flips");
    }
  }
  if (j.contains("bayes_module")) {
    const auto m = require_string(j, "bayes_module", path);
    if (m != "learned" && m != "exact") {
      throw ParseError(path + ".bayes_module", "expected learned or exact");
    }
    p.learned_bayes = m == "learned";
  }
  return p;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// Parses and validates an experiment document. `base` resolves relative
// spec_file references.
inline ExperimentConfig parse_experiment(const std::string& text,
                                         const std::filesystem::path& base = {}) {
  using namespace detail;
  const auto j = parse_text(text);
  if (!j.is_object()) throw ParseError("document", "expected an object");
  reject_unknown(j,
                 {"experiment", "seed", "output_dir", "spec", "spec_file", "train", "replications",
                  "instances_per_hypothesis", "init_range", "runtime_cap_seconds", "train_size",
                  "test_size", "r", "t_max", "pipeline", "checks"},
                 "");
  ExperimentConfig cfg;
  cfg.source_text = text;
  const auto name = require_string(j, "experiment", "");
  const auto kind = experiment_from_string(name);
  if (!kind) throw ParseError("experiment", "unknown experiment '" + name + "'");
  cfg.experiment = *kind;
  cfg.seed = require_unsigned(j, "seed", "");
  cfg.output_dir = require_string(j, "output_dir", "");

  if (j.contains("spec") && j.contains("spec_file")) {
    throw ParseError("spec_file", "give either spec or spec_file, not both");
  }
  if (j.contains("spec")) {
    cfg.spec = distribution_from_json(j["spec"], "spec");
  } else if (j.contains("spec_file")) {
    const auto file = base / require_string(j, "spec_file", "");
    if (!std::filesystem::exists(file)) throw ParseError("spec_file", "file not found: " + file.string());
    cfg.spec = distribution_from_json(parse_text(read_text(file)), "spec_file");
  }
  const bool needs_spec = cfg.experiment == ExperimentKind::match ||
                          cfg.experiment == ExperimentKind::overweight ||
                          cfg.experiment == ExperimentKind::adapt ||
                          cfg.experiment == ExperimentKind::neglect;
  if (needs_spec && !cfg.spec) throw ParseError("spec", "missing field");
  if (cfg.experiment == ExperimentKind::adapt && cfg.spec->schedule.empty()) {
    throw ParseError("spec.schedule", "adapt needs at least one scheduled switch");
  }

  if (cfg.experiment == ExperimentKind::overweight) {
    cfg.train.cessation_enabled = false;
    cfg.train.hard_epoch_cap = 2000;
  }
  if (j.contains("train")) cfg.train = train_config_from_json(j["train"], cfg.train);
  try {
    cfg.train.validate();
  } catch (const InvalidArgument& e) {
    throw ParseError("train", e.what());
  }
  if (j.contains("replications")) cfg.replications = require_count(j, "replications", "");
  if (j.contains("instances_per_hypothesis")) {
    cfg.instances_per_hypothesis = require_count(j, "instances_per_hypothesis", "");
  }
  if (j.contains("init_range")) {
    cfg.init_range = require_number(j, "init_range", "");
    if (cfg.init_range < 0.0) throw ParseError("init_range", "must be non-negative");
  }
  if (j.contains("runtime_cap_seconds")) {
    cfg.runtime_cap_seconds = require_number(j, "runtime_cap_seconds", "");
    if (!(*cfg.runtime_cap_seconds > 0.0)) {
      throw ParseError("runtime_cap_seconds", "must be strictly positive");
    }
  }
  if (j.contains("train_size")) cfg.train_size = require_count(j, "train_size", "");
  if (j.contains("test_size")) cfg.test_size = require_count(j, "test_size", "");
  if (cfg.test_size < 2) throw ParseError("test_size", "need at least two test cases");
  if (j.contains("r")) cfg.r = require_number(j, "r", "");
  if (!(cfg.r >= 0.0 && cfg.r <= 1.0)) throw ParseError("r", "must lie in [0, 1]");
  if (j.contains("t_max")) cfg.t_max = require_unsigned(j, "t_max", "");
  if (j.contains("pipeline")) cfg.pipeline = pipeline_from_json(j["pipeline"], cfg.pipeline, "pipeline");

  Checks defaults;
  if (cfg.experiment == ExperimentKind::match && cfg.spec) {
    if (is_continuous(cfg.spec->kind)) {
      defaults.rare_at_or_below = 0.01;
      defaults.tolerance_from = 0.02;
    } else {
      defaults.rare_at_or_below = 0.1;
    }
  }
  if (cfg.experiment == ExperimentKind::overweight) defaults.tolerance = 0.03;
  cfg.checks = j.contains("checks") ? checks_from_json(j["checks"], defaults, "checks") : defaults;
  return cfg;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw ParseError("config", "cannot read " + path.string());
  }
  auto cfg = parse_experiment(text, path.parent_path());
  cfg.source_path = path;
  return cfg;
}

// Output directory, honouring the environment override.
inline std::filesystem::path output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv(kOutputDirEnv); env && *env) return env;
  return cfg.output_dir;
}

// ---------------------------------------------------------------------------
// Running

class Deadline {
 public:
  explicit Deadline(std::optional<double> seconds)
      : seconds_(seconds), start_(std::chrono::steady_clock::now()) {}
  void check() const {
    if (!seconds_) return;
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
    if (elapsed.count() > *seconds_) throw RuntimeCapExceeded(*seconds_);
  }

 private:
  std::optional<double> seconds_;
  std::chrono::steady_clock::time_point start_;
};

struct RunArtifacts {
  std::filesystem::path dir;
  std::vector<std::string> files;

  void csv(const std::string& name, const CsvTable& table) {
    write_csv(dir / name, table);
    files.push_back(name);
  }
  void text(const std::string& name, const std::string& content) {
    write_file_atomic(dir / name, content);
    files.push_back(name);
  }
};

namespace detail {

inline std::vector<double> iota_values(std::size_t n) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i);
  return v;
}

// Plots read their data back from the CSVs so that every figure can be
// regenerated from its CSV alone.
inline std::string report_plot(const std::filesystem::path& csv, const std::string& title,
                               bool bars) {
  const auto data = read_csv(csv);
  const auto h = data.numbers("hypothesis");
  svg::Chart c;
  c.title = title;
  c.x_label = "hypothesis";
  c.y_label = "probability";
  c.style = bars ? svg::Style::bars : svg::Style::line;
  c.series.push_back({"true", h, data.numbers("true_p")});
  c.series.push_back({"network (mean)", h, data.numbers("mean_output")});
  return svg::render(c);
}

inline std::string trace_plot(const std::filesystem::path& csv, const std::string& title) {
  const auto data = read_csv(csv);
  const auto epochs = data.numbers("epoch");
  svg::Chart c;
  c.title = title;
  c.x_label = "epoch";
  c.y_label = "output";
  for (std::size_t i = 1; i < data.header.size(); ++i) {
    c.series.push_back({data.header[i], epochs, data.numbers(data.header[i])});
  }
  return svg::render(c);
}

inline std::string fit_plot(const std::filesystem::path& csv) {
  const auto data = read_csv(csv);
  svg::Chart c;
  c.title = "Bayes module: network output vs exact posterior";
  c.x_label = "exact posterior";
  c.y_label = "network output";
  c.style = svg::Style::points;
  c.identity_line = true;
  c.series.push_back({"test cases", data.numbers("exact"), data.numbers("predicted")});
  return svg::render(c);
}

inline std::string entropy_plot(const std::filesystem::path& csv) {
  const auto data = read_csv(csv);
  svg::Chart c;
  c.title = "Prior entropy under disruption";
  c.x_label = "t";
  c.y_label = "entropy (bits)";
  c.series.push_back({"r = " + data.rows.at(0).at(0), data.numbers("t"), data.numbers("entropy_bits")});
  return svg::render(c);
}

inline std::string priors_plot(const std::filesystem::path& csv, std::uint64_t t_max) {
  const auto data = read_csv(csv);
  const auto ts = data.numbers("t");
  const auto hs = data.numbers("hypothesis");
  const auto ps = data.numbers("prior");
  std::set<std::uint64_t> shown{0, t_max / 8, t_max / 4, t_max / 2, t_max};
  svg::Chart c;
  c.title = "Normalized priors under disruption";
  c.x_label = "hypothesis";
  c.y_label = "prior";
  for (auto t : shown) {
    svg::Series s{"t = " + std::to_string(t), {}, {}};
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (static_cast<std::uint64_t>(ts[i]) == t) {
        s.x.push_back(hs[i]);
        s.y.push_back(ps[i]);
      }
    }
    c.series.push_back(std::move(s));
  }
  return svg::render(c);
}

inline CsvTable lag_table(const AdaptationLag& lag, const DistributionSpec& spec) {
  CsvTable t({"segment", "start_epoch", "lag_epochs", "reached"});
  auto row = [&](std::string name, std::size_t start, const std::optional<std::size_t>& l) {
    t.row({std::move(name), std::to_string(start), l ? std::to_string(*l) : "", l ? "1" : "0"});
  };
  row("initial", 0, lag.initial);
  for (std::size_t i = 0; i < lag.after.size(); ++i) {
    row("switch" + std::to_string(i + 1), spec.schedule[i].epoch, lag.after[i]);
  }
  return t;
}

}  // namespace detail

inline RunOptions run_options(const ExperimentConfig& cfg, const Deadline& deadline,
                              bool record_trace = false) {
  RunOptions opt;
  opt.instances_per_hypothesis = cfg.instances_per_hypothesis;
  opt.init_range = cfg.init_range;
  opt.record_trace = record_trace;
  opt.on_epoch = [&deadline](std::size_t) { deadline.check(); };
  return opt;
}

inline void run_match(const ExperimentConfig& cfg, RunArtifacts& out, const Deadline& deadline) {
  const auto report = run_replications(*cfg.spec, cfg.train, cfg.replications, cfg.seed,
                                       run_options(cfg, deadline));
  out.csv("report.csv", report_table(report));
  out.csv("summary.csv", summary_table(report));
  out.csv("history.csv", history_table(report.runs.front().history));
  const bool overweight = cfg.experiment == ExperimentKind::overweight;
  const std::string fig = overweight ? "fig2.svg" : "fig1.svg";
  const std::string title = overweight ? "Probability matching without cessation"
                                       : "Probability matching";
  out.text(fig, detail::report_plot(out.dir / "report.csv", title, !is_continuous(cfg.spec->kind)));
}

inline void run_adapt(const ExperimentConfig& cfg, RunArtifacts& out, const Deadline& deadline) {
  const auto report = run_replications(*cfg.spec, cfg.train, cfg.replications, cfg.seed,
                                       run_options(cfg, deadline, true));
  const auto trace = report.mean_trace();
  out.csv("report.csv", report_table(report));
  out.csv("summary.csv", summary_table(report));
  out.csv("trace.csv", trace_table(trace));
  out.csv("lag.csv", detail::lag_table(adaptation_lag(trace, *cfg.spec, cfg.checks.tolerance), *cfg.spec));
  CsvTable recruits({"replication", "boundary_epoch", "before", "after"});
  const std::size_t boundary = cfg.spec->schedule.front().epoch;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const auto split = recruits_around(report.runs[i].history, boundary);
    recruits.row({std::to_string(i), std::to_string(boundary), std::to_string(split.before),
                  std::to_string(split.after)});
  }
  out.csv("recruits.csv", recruits);
  out.csv("history.csv", history_table(report.runs.front().history));
  out.text("fig3.svg", detail::trace_plot(out.dir / "trace.csv", "Adaptation to a changed distribution"));
}

inline BayesTrainResult run_bayes_training(const ExperimentConfig& cfg, const Deadline& deadline) {
  const auto train = make_bayes_training_set(cfg.train_size, derive_seed(cfg.seed, 1));
  const auto test = make_bayes_training_set(cfg.test_size, derive_seed(cfg.seed, 2));
  TrainConfig tc = cfg.train;
  tc.rng_seed = derive_seed(cfg.seed, 3);
  return train_bayes_module(train, test, tc, cfg.init_range,
                            [&deadline](std::size_t, const Network&) { deadline.check(); });
}

inline void run_bayes_fit(const ExperimentConfig& cfg, RunArtifacts& out, const Deadline& deadline) {
  const auto result = run_bayes_training(cfg, deadline);
  out.csv("fit.csv", fit_table(result.report));
  CsvTable summary({"slope", "intercept", "correlation", "max_abs_error", "hidden_units", "epochs",
                    "halted_by"});
  summary.row({format_number(result.report.fit.slope), format_number(result.report.fit.intercept),
               format_number(result.report.fit.correlation),
               format_number(result.report.max_abs_error),
               std::to_string(result.training.net.hidden_count()),
               std::to_string(result.training.epochs), to_string(result.training.halted_by)});
  out.csv("fit_summary.csv", summary);
  out.csv("history.csv", history_table(result.training.history));
  out.text("bayes_module.json", serialize(result.training.net));
  out.text("fig5b.svg", detail::fit_plot(out.dir / "fit.csv"));
}

// The coin example: h1 "fair coin" and h2 "biased coin"; an observation is
// the number of heads in a short batch of flips.
inline Pipeline build_coin_pipeline(const ExperimentConfig& cfg, const Deadline& deadline) {
  const auto& po = cfg.pipeline;
  const auto opt = run_options(cfg, deadline);
  Pipeline p;
  p.observation_count = po.flips + 1;
  auto prior_spec = DistributionSpec::table({po.prior1, 1.0 - po.prior1});
  p.prior_module = run_probability_matching(prior_spec, cfg.train, derive_seed(cfg.seed, 10), opt)
                       .training.net;
  for (std::size_t i = 0; i < po.coin_bias.size(); ++i) {
    auto spec = DistributionSpec::binomial(po.flips, po.coin_bias[i]);
    p.likelihood_modules.push_back(
        run_probability_matching(spec, cfg.train, derive_seed(cfg.seed, 11 + i), opt).training.net);
  }
  if (po.learned_bayes) p.bayes_module = run_bayes_training(cfg, deadline).training.net;
  return p;
}

inline void run_pipeline(const ExperimentConfig& cfg, RunArtifacts& out, const Deadline& deadline) {
  auto p = build_coin_pipeline(cfg, deadline);
  std::vector<PipelineStep> steps;
  for (auto d : cfg.pipeline.observations) steps.push_back(pipeline_infer(p, d));
  const auto base = pipeline_trace_table(steps);
  auto header = base.header();
  header.push_back("exact_posterior1");
  CsvTable trace(header);
  for (std::size_t i = 0; i < steps.size(); ++i) {
    auto row = base.rows()[i];
    row.push_back(format_number(exact_posterior(steps[i].likelihood, steps[i].prior)[0]));
    trace.row(std::move(row));
  }
  out.csv("trace.csv", trace);
  std::vector<std::vector<double>> truth;
  for (auto b : cfg.pipeline.coin_bias) truth.push_back(pmf(DistributionSpec::binomial(cfg.pipeline.flips, b), 0));
  CsvTable lik({"observation", "lik1", "lik2", "true_lik1", "true_lik2"});
  for (std::size_t d = 0; d < p.observation_count; ++d) {
    const auto l = p.likelihoods(d);
    lik.row({std::to_string(d), format_number(l[0]), format_number(l[1]), format_number(truth[0][d]),
             format_number(truth[1][d])});
  }
  out.csv("likelihoods.csv", lik);
}

inline void run_neglect(const ExperimentConfig& cfg, RunArtifacts& out, const Deadline& deadline) {
  const auto run = run_probability_matching(*cfg.spec, cfg.train, cfg.seed, run_options(cfg, deadline));
  const std::size_t h = hypothesis_count(*cfg.spec);
  const auto sweep = neglect_sweep(run.training.net, cfg.r, cfg.t_max, h);
  out.csv("sweep.csv", sweep_table(sweep));
  out.csv("priors.csv", prior_dump_table(sweep));
  CsvTable truth({"hypothesis", "true_p", "learned_prior"});
  const auto p = pmf(*cfg.spec, 0);
  for (std::size_t i = 0; i < h; ++i) {
    truth.row({std::to_string(i), format_number(p[i]), format_number(sweep.readings.front().prior[i])});
  }
  out.csv("learned.csv", truth);
  out.csv("history.csv", history_table(run.training.history));
  out.text("prior_module.json", serialize(run.training.net));
  out.text("fig6a.svg", detail::entropy_plot(out.dir / "sweep.csv"));
  out.text("fig6b.svg", detail::priors_plot(out.dir / "priors.csv", cfg.t_max));
}

inline std::string manifest(const ExperimentConfig& cfg, const std::vector<std::string>& files) {
  nlohmann::json j = {{"experiment", to_string(cfg.experiment)},
                      {"config_hash", "fnv1a64:" + hex64(fnv1a64(cfg.source_text))},
                      {"seed", cfg.seed},
                      {"library_version", kVersion},
                      {"train", to_json(cfg.train)},
                      {"files", files}};
  return j.dump(2) + "\n";
}

inline RunArtifacts run_experiment(const ExperimentConfig& cfg) {
  RunArtifacts out;
  out.dir = output_dir(cfg);
  std::filesystem::create_directories(out.dir);
  const Deadline deadline(cfg.runtime_cap_seconds);
  switch (cfg.experiment) {
    case ExperimentKind::match:
    case ExperimentKind::overweight: run_match(cfg, out, deadline); break;
    case ExperimentKind::adapt: run_adapt(cfg, out, deadline); break;
    case ExperimentKind::bayes_fit: run_bayes_fit(cfg, out, deadline); break;
    case ExperimentKind::pipeline: run_pipeline(cfg, out, deadline); break;
    case ExperimentKind::neglect: run_neglect(cfg, out, deadline); break;
  }
  out.text("manifest.json", manifest(cfg, out.files));
  return out;
}

// ---------------------------------------------------------------------------
// Verification

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
  bool informational = false;  // reported, not gated
};

namespace detail {

inline CsvData artifact(const std::filesystem::path& dir, const std::string& name) {
  const auto p = dir / name;
  if (!std::filesystem::exists(p)) throw MissingArtifact(p);
  return read_csv(p);
}

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace detail

inline std::vector<CheckResult> verify_experiment(const ExperimentConfig& cfg) {
  using detail::artifact;
  using detail::fmt;
  const auto dir = output_dir(cfg);
  if (!std::filesystem::exists(dir / "manifest.json")) throw MissingArtifact(dir / "manifest.json");
  const auto& c = cfg.checks;
  std::vector<CheckResult> out;

  switch (cfg.experiment) {
    case ExperimentKind::match:
    case ExperimentKind::overweight: {
      const auto rep = artifact(dir, "report.csv");
      const auto truth = rep.numbers("true_p");
      const auto mean = rep.numbers("mean_output");
      for (std::size_t i = 0; i < truth.size(); ++i) {
        const std::string h = "h" + std::to_string(i);
        if (truth[i] <= c.rare_at_or_below) {
          out.push_back({h + " rare, learned >= true", mean[i] >= truth[i],
                         fmt(mean[i]) + " vs " + fmt(truth[i])});
        } else if (truth[i] >= c.tolerance_from) {
          const double d = std::abs(mean[i] - truth[i]);
          out.push_back({h + " within " + fmt(c.tolerance), d <= c.tolerance,
                         "|" + fmt(mean[i]) + " - " + fmt(truth[i]) + "| = " + fmt(d)});
        }
      }
      break;
    }
    case ExperimentKind::adapt: {
      const auto lag = artifact(dir, "lag.csv");
      const auto reached = lag.numbers("reached");
      bool all = true;
      for (auto r : reached) all = all && r == 1.0;
      out.push_back({"every segment reaches tolerance", all, ""});
      if (all && reached.size() >= 2) {
        const auto lags = lag.numbers("lag_epochs");
        const double initial = lags[0];
        for (std::size_t i = 1; i < lags.size(); ++i) {
          const double ratio = initial > 0.0 ? lags[i] / initial : std::numeric_limits<double>::infinity();
          out.push_back({lag.rows[i][0] + " lag ratio < " + fmt(c.max_lag_ratio),
                         ratio < c.max_lag_ratio,
                         fmt(lags[i]) + " / " + fmt(initial) + " = " + fmt(ratio)});
        }
      }
      if (c.min_reuse_fraction) {
        const auto rec = artifact(dir, "recruits.csv");
        const auto before = rec.numbers("before");
        const auto after = rec.numbers("after");
        std::size_t fewer = 0;
        for (std::size_t i = 0; i < before.size(); ++i) fewer += after[i] < before[i];
        const double frac = static_cast<double>(fewer) / static_cast<double>(before.size());
        out.push_back({"fewer recruits after the switch", frac >= *c.min_reuse_fraction,
                       std::to_string(fewer) + " of " + std::to_string(before.size()) + " runs"});
      }
      break;
    }
    case ExperimentKind::bayes_fit: {
      const auto s = artifact(dir, "fit_summary.csv");
      const double slope = s.numbers("slope").at(0);
      const double intercept = s.numbers("intercept").at(0);
      const double corr = s.numbers("correlation").at(0);
      out.push_back({"slope in range", slope >= c.slope_lo && slope <= c.slope_hi, fmt(slope)});
      out.push_back({"intercept near zero", std::abs(intercept) <= c.max_abs_intercept, fmt(intercept)});
      out.push_back({"correlation", corr > c.min_correlation, fmt(corr)});
      break;
    }
    case ExperimentKind::pipeline: {
      const auto t = artifact(dir, "trace.csv");
      const auto prior = t.numbers("prior1");
      const auto post = t.numbers("posterior1");
      const auto exact = t.numbers("exact_posterior1");
      bool valid = true, chained = true;
      double bayes_err = 0.0;
      for (std::size_t i = 0; i < post.size(); ++i) {
        valid = valid && post[i] >= 0.0 && post[i] <= 1.0 && prior[i] >= 0.0 && prior[i] <= 1.0;
        if (i > 0) chained = chained && std::abs(prior[i] - post[i - 1]) <= 1e-9;
        bayes_err = std::max(bayes_err, std::abs(post[i] - exact[i]));
      }
      out.push_back({"posteriors are probabilities", valid, ""});
      out.push_back({"posterior feeds the next prior", chained, ""});
      const auto lik = artifact(dir, "likelihoods.csv");
      double lik_err = 0.0;
      for (const char* k : {"1", "2"}) {
        const auto got = lik.numbers(std::string("lik") + k);
        const auto want = lik.numbers(std::string("true_lik") + k);
        for (std::size_t i = 0; i < got.size(); ++i) lik_err = std::max(lik_err, std::abs(got[i] - want[i]));
      }
      out.push_back({"likelihood modules within " + fmt(c.tolerance), lik_err <= c.tolerance, fmt(lik_err)});
      out.push_back({"Bayes step deviation from exact", true, fmt(bayes_err), true});
      break;
    }
    case ExperimentKind::neglect: {
      const auto s = artifact(dir, "sweep.csv");
      const auto e = s.numbers("entropy_bits");
      const double max_bits = std::log2(static_cast<double>(hypothesis_count(*cfg.spec)));
      double worst_drop = 0.0;
      for (std::size_t i = 1; i < e.size(); ++i) worst_drop = std::max(worst_drop, e[i - 1] - e[i]);
      out.push_back({"final entropy near log2 H", std::abs(e.back() - max_bits) <= c.entropy_tolerance,
                     fmt(e.back()) + " vs " + fmt(max_bits)});
      out.push_back({"entropy non-decreasing end to end", e.back() >= e.front(),
                     fmt(e.front()) + " -> " + fmt(e.back())});
      out.push_back({"per-step entropy drop bounded", worst_drop <= c.max_entropy_drop, fmt(worst_drop)});
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshot summary

inline std::string describe(const Network& net) {
  std::ostringstream s;
  std::size_t frozen = 0;
  for (const auto& c : net.connections()) frozen += c.frozen;
  s << "format_version: " << kFormatVersion << "\n";
  s << "rng_seed: " << net.seed() << "\n";
  s << "units: " << net.unit_count() << " (inputs " << net.input_count() << ", hidden "
    << net.hidden_count() << ", outputs " << net.output_count() << ", bias 1)\n";
  s << "hidden layers: " << net.deepest_hidden_layer() << "\n";
  s << "connections: " << net.connections().size() << " (frozen " << frozen << ")\n";
  for (auto id : net.hidden_ids()) {
    s << "  hidden " << id << " layer " << net.units()[id].layer << " fan-in "
      << net.incoming(id).size() << "\n";
  }
  return s.str();
}

}  // namespace pmnet
