#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pmnet/csv.hpp"
#include "pmnet/error.hpp"
#include "pmnet/network.hpp"
#include "pmnet/probmatch.hpp"
#include "pmnet/rng.hpp"
#include "pmnet/training.hpp"

namespace pmnet {

// posterior_i = lik_i prior_i / sum_j lik_j prior_j
inline std::vector<double> exact_posterior(std::span<const double> likelihoods,
                                           std::span<const double> priors) {
  if (likelihoods.size() != priors.size()) throw ShapeError("likelihood and prior sizes differ");
  if (likelihoods.empty()) throw InvalidArgument("need at least one hypothesis");
  double prior_sum = 0.0;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    if (!(likelihoods[i] >= 0.0 && likelihoods[i] <= 1.0)) {
      throw InvalidArgument("likelihoods must lie in [0, 1]");
    }
    if (!(priors[i] >= 0.0 && priors[i] <= 1.0)) throw InvalidArgument("priors must lie in [0, 1]");
    prior_sum += priors[i];
  }
  if (std::abs(prior_sum - 1.0) > 1e-9) throw InvalidArgument("priors must sum to 1");
  std::vector<double> joint(priors.size());
  double denominator = 0.0;
  for (std::size_t i = 0; i < priors.size(); ++i) {
    joint[i] = likelihoods[i] * priors[i];
    denominator += joint[i];
  }
  if (!(denominator > 0.0)) throw ImpossibleDataError("data has zero probability under every hypothesis");
  for (auto& v : joint) v /= denominator;
  return joint;
}

// Two-hypothesis query: P(d|h1), P(d|h2), P(h1).
struct BayesQuery {
  double lik1 = 0.5;
  double lik2 = 0.5;
  double prior1 = 0.5;

  double denominator() const { return lik1 * prior1 + lik2 * (1.0 - prior1); }

  double posterior1() const {
    const double lik[2] = {lik1, lik2};
    const double prior[2] = {prior1, 1.0 - prior1};
    return exact_posterior(lik, prior)[0];
  }

  std::vector<double> inputs() const { return {lik1, lik2, prior1}; }
};

struct BayesExample {
  BayesQuery query;
  double posterior1 = 0.0;
};

// Queries uniform over the unit cube, skipping near-impossible data.
inline std::vector<BayesExample> make_bayes_training_set(std::size_t n, std::uint64_t seed,
                                                         double min_denominator = 1e-6) {
  if (n == 0) throw InvalidArgument("training set size must be positive");
  Rng rng(seed);
  std::vector<BayesExample> out;
  out.reserve(n);
  while (out.size() < n) {
    BayesQuery q{rng.uniform(), rng.uniform(), rng.uniform()};
    if (q.denominator() < min_denominator) continue;
    out.push_back({q, q.posterior1()});
  }
  return out;
}

inline std::vector<Pattern> to_patterns(std::span<const BayesExample> examples) {
  std::vector<Pattern> out;
  out.reserve(examples.size());
  for (const auto& e : examples) out.push_back({e.query.inputs(), {e.posterior1}});
  return out;
}

inline double bayes_module_output(const Network& net, const BayesQuery& q) {
  if (net.input_count() != 3 || net.output_count() != 1) {
    throw ShapeError("a Bayes module has three inputs and one output");
  }
  return net.forward(q.inputs())[0];
}

// Least-squares line of predicted on exact.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double correlation = 0.0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidArgument("fit needs two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 0.0) throw InvalidArgument("fit needs spread in x");
  LinearFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  f.correlation = syy > 0.0 ? sxy / std::sqrt(sxx * syy) : 0.0;
  return f;
}

struct BayesFitRow {
  BayesQuery query;
  double exact = 0.0;
  double predicted = 0.0;
};

struct BayesFitReport {
  LinearFit fit;
  double max_abs_error = 0.0;
  std::vector<BayesFitRow> rows;
};

inline BayesFitReport evaluate_bayes_module(const Network& net,
                                            std::span<const BayesExample> test_set) {
  BayesFitReport report;
  std::vector<double> exact, predicted;
  for (const auto& e : test_set) {
    const double p = bayes_module_output(net, e.query);
    report.rows.push_back({e.query, e.posterior1, p});
    exact.push_back(e.posterior1);
    predicted.push_back(p);
    report.max_abs_error = std::max(report.max_abs_error, std::abs(p - e.posterior1));
  }
  report.fit = fit_line(exact, predicted);
  return report;
}

struct BayesTrainResult {
  TrainResult training;
  BayesFitReport report;
};

// SDCC-trains a 3-input/1-output network on the examples and reports its fit
// on a held-out test set.
inline BayesTrainResult train_bayes_module(std::span<const BayesExample> train_set,
                                           std::span<const BayesExample> test_set,
                                           const TrainConfig& cfg, double init_range = 0.1,
                                           const EpochObserver& observer = {}) {
  if (train_set.empty() || test_set.size() < 2) throw InvalidArgument("empty Bayes data set");
  FixedBatch batch(to_patterns(train_set));
  auto net = Network::minimal(3, 1, derive_seed(cfg.rng_seed, 3), init_range);
  BayesTrainResult result{train_sdcc(std::move(net), batch, cfg, observer), {}};
  result.report = evaluate_bayes_module(result.training.net, test_set);
  return result;
}

inline CsvTable fit_table(const BayesFitReport& report) {
  CsvTable t({"test_index", "lik1", "lik2", "prior1", "exact", "predicted"});
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const auto& r = report.rows[i];
    t.row({std::to_string(i), format_number(r.query.lik1), format_number(r.query.lik2),
           format_number(r.query.prior1), format_number(r.exact), format_number(r.predicted)});
  }
  return t;
}

// ---------------------------------------------------------------------------
// Two-module pipeline

// Probability-matching prior module, one likelihood module per hypothesis
// (each mapping an encoded observation to P(d|h_i)), and a Bayes module that
// is either a trained network or the exact rule. Posteriors are fed back as
// the next round's prior.
struct Pipeline {
  Network prior_module;
  std::vector<Network> likelihood_modules;
  std::size_t observation_count = 1;
  std::optional<Network> bayes_module;
  std::vector<double> feedback_state;

  std::size_t hypotheses() const { return likelihood_modules.size(); }

  // Prior vector read from the prior module, normalized.
  std::vector<double> module_prior() const {
    const auto raw = hypothesis_outputs(prior_module, hypotheses());
    double sum = 0.0;
    for (auto v : raw) sum += v;
    if (!(sum > 0.0)) throw InvalidArgument("prior module outputs sum to zero");
    std::vector<double> p(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) p[i] = raw[i] / sum;
    return p;
  }

  void reset_feedback() { feedback_state = module_prior(); }

  std::vector<double> likelihoods(std::size_t observation) const {
    const double x = encode_hypothesis(observation, observation_count);
    std::vector<double> lik;
    for (const auto& m : likelihood_modules) lik.push_back(m.forward_scalar(x));
    return lik;
  }
};

struct PipelineStep {
  std::size_t observation = 0;
  std::vector<double> prior;
  std::vector<double> likelihood;
  std::vector<double> posterior;
};

inline void validate_pipeline(const Pipeline& p) {
  if (p.likelihood_modules.empty()) throw InvalidArgument("pipeline needs likelihood modules");
  if (p.bayes_module && p.hypotheses() != 2) {
    throw InvalidArgument("a learned Bayes module handles exactly two hypotheses");
  }
  if (p.prior_module.input_count() != 1 || p.prior_module.output_count() != 1) {
    throw ShapeError("prior module must have one input and one output");
  }
}

// One round: query modules, apply Bayes, feed the posterior back.
inline PipelineStep pipeline_infer(Pipeline& p, std::size_t observation) {
  validate_pipeline(p);
  if (observation >= p.observation_count) throw InvalidArgument("observation out of range");
  if (p.feedback_state.empty()) p.reset_feedback();
  PipelineStep step;
  step.observation = observation;
  step.prior = p.feedback_state;
  step.likelihood = p.likelihoods(observation);
  double total = 0.0;
  for (std::size_t i = 0; i < step.likelihood.size(); ++i) total += step.likelihood[i] * step.prior[i];
  if (!(total > 0.0)) throw ImpossibleDataError("observation has zero likelihood under the prior");
  if (p.bayes_module) {
    const BayesQuery q{step.likelihood[0], step.likelihood[1], step.prior[0]};
    const double post = bayes_module_output(*p.bayes_module, q);
    step.posterior = {post, 1.0 - post};
  } else {
    step.posterior = exact_posterior(step.likelihood, step.prior);
  }
  double sum = 0.0;
  for (auto v : step.posterior) sum += v;
  for (auto& v : step.posterior) v /= sum;
  p.feedback_state = step.posterior;
  return step;
}

inline CsvTable pipeline_trace_table(std::span<const PipelineStep> steps) {
  CsvTable t({"round", "observation", "prior1", "lik1", "lik2", "posterior1"});
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    t.row({std::to_string(i), std::to_string(s.observation), format_number(s.prior[0]),
           format_number(s.likelihood[0]),
           format_number(s.likelihood.size() > 1 ? s.likelihood[1] : 0.0),
           format_number(s.posterior[0])});
  }
  return t;
}

}  // namespace pmnet
