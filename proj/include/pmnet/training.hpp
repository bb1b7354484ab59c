#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmnet/csv.hpp"
#include "pmnet/error.hpp"
#include "pmnet/network.hpp"
#include "pmnet/rng.hpp"

namespace pmnet {

// One supervised presentation: an input vector and one target per output.
struct Pattern {
  std::vector<double> inputs;
  std::vector<double> targets;
};

enum class OptimizerKind { momentum, quickprop };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::momentum ? "momentum" : "quickprop";
}

inline std::optional<OptimizerKind> optimizer_from_string(const std::string& s) {
  if (s == "momentum") return OptimizerKind::momentum;
  if (s == "quickprop") return OptimizerKind::quickprop;
  return std::nullopt;
}

struct TrainConfig {
  // Learning cessation (relative-change rule with patience).
  double epsilon_c = 0.01;
  std::size_t patience = 10;
  bool cessation_enabled = true;
  std::optional<std::size_t> hard_epoch_cap;

  // Output phase: one quickprop (or momentum) step per epoch.
  OptimizerKind optimizer = OptimizerKind::quickprop;
  double learning_rate = 2.0;
  double momentum = 0.9;
  double quickprop_max_factor = 1.75;
  std::size_t max_output_epochs_per_phase = 300;
  // Output-phase stagnation triggers a candidate phase. Threshold defaults to epsilon_c.
  std::size_t stagnation_patience = 8;
  std::optional<double> stagnation_threshold;

  // Candidate phase.
  std::size_t pool_size = 8;
  std::size_t max_candidate_epochs = 60;
  std::size_t candidate_patience = 8;
  double candidate_learning_rate = 2.0;
  double candidate_weight_range = 1.0;
  double output_weight_range = 0.1;
  std::size_t max_hidden_units = 32;

  // A recruit is only attempted when the part of the error that a better fit
  // could remove is at least this fraction of the total error.
  double recruit_min_gain = 0.03;

  // The error tracked by cessation and stagnation is computed over the
  // reinforcements experienced so far, exponentially forgotten with this
  // horizon (in epochs). 1 reduces it to the current epoch's batch.
  double experience_horizon = 50.0;

  std::uint64_t rng_seed = 0;

  double effective_stagnation_threshold() const {
    return stagnation_threshold.value_or(epsilon_c);
  }

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) {
        throw InvalidArgument(std::string(name) + " must be strictly positive");
      }
    };
    positive(epsilon_c, "epsilon_c");
    positive(learning_rate, "learning_rate");
    positive(candidate_learning_rate, "candidate_learning_rate");
    positive(candidate_weight_range, "candidate_weight_range");
    positive(output_weight_range, "output_weight_range");
    positive(experience_horizon, "experience_horizon");
    positive(quickprop_max_factor, "quickprop_max_factor");
    if (experience_horizon < 1.0) throw InvalidArgument("experience_horizon must be >= 1");
    if (effective_stagnation_threshold() <= 0.0) {
      throw InvalidArgument("stagnation_threshold must be strictly positive");
    }
    if (momentum < 0.0 || momentum >= 1.0) throw InvalidArgument("momentum must be in [0, 1)");
    if (recruit_min_gain < 0.0) throw InvalidArgument("recruit_min_gain must be >= 0");
    if (patience == 0) throw InvalidArgument("patience must be strictly positive");
    if (stagnation_patience == 0) throw InvalidArgument("stagnation_patience must be positive");
    if (candidate_patience == 0) throw InvalidArgument("candidate_patience must be positive");
    if (max_output_epochs_per_phase == 0) {
      throw InvalidArgument("max_output_epochs_per_phase must be strictly positive");
    }
    if (max_candidate_epochs == 0) throw InvalidArgument("max_candidate_epochs must be positive");
    if (pool_size < 2) throw InvalidArgument("pool_size must be at least 2");
    if (hard_epoch_cap && *hard_epoch_cap == 0) {
      throw InvalidArgument("hard_epoch_cap must be strictly positive");
    }
    if (!cessation_enabled && !hard_epoch_cap) {
      throw InvalidArgument("hard_epoch_cap is required when cessation is disabled");
    }
  }
};

// ---------------------------------------------------------------------------
// Error and the cessation rule

// E = 1/2 sum_p sum_o (o_p - t_p)^2 with outputs recomputed from current weights.
inline double epoch_error(const Network& net, std::span<const Pattern> batch) {
  if (batch.empty()) throw InvalidArgument("epoch_error needs a non-empty batch");
  double sum = 0.0;
  for (const auto& p : batch) {
    const auto out = net.forward(p.inputs);
    if (out.size() != p.targets.size()) throw ShapeError("pattern target count mismatch");
    for (std::size_t o = 0; o < out.size(); ++o) {
      const double d = out[o] - p.targets[o];
      sum += d * d;
    }
  }
  return 0.5 * sum;
}

struct CessationState {
  double epsilon_c = 0.01;
  std::size_t patience = 10;
  std::size_t counter = 0;
  std::optional<double> prev_error;
  std::size_t epoch = 0;

  static CessationState from(const TrainConfig& cfg) {
    return CessationState{cfg.epsilon_c, cfg.patience, 0, std::nullopt, 0};
  }
};

struct CessationStep {
  CessationState state;
  bool halt = false;
};

// |E(t) - E(t-1)| >= eps * |E(t)| resets the counter, anything smaller
// increments it; halting happens when the counter reaches patience. The first
// error only primes prev_error.
inline CessationStep cessation_step(CessationState state, double new_error) {
  if (!std::isfinite(new_error)) throw InvalidArgument("cessation_step needs a finite error");
  if (state.prev_error) {
    const double delta = std::abs(new_error - *state.prev_error);
    // A zero change is never a reset, even at zero error.
    if (delta > 0.0 && delta >= state.epsilon_c * std::abs(new_error)) {
      state.counter = 0;
    } else if (state.counter < state.patience) {
      ++state.counter;
    }
  }
  state.prev_error = new_error;
  ++state.epoch;
  return {state, state.counter == state.patience};
}

inline CessationStep cessation_step(const CessationState& state, double new_error,
                                    const TrainConfig& cfg) {
  CessationState s = state;
  s.epsilon_c = cfg.epsilon_c;
  s.patience = cfg.patience;
  return cessation_step(s, new_error);
}

// ---------------------------------------------------------------------------
// Output phase

// A pattern standing for `weight` presentations of the same input, with the
// mean target of those presentations.
struct WeightedPattern {
  std::vector<double> inputs;
  double weight = 1.0;
  std::vector<double> targets;
};

// Per-connection state of the output-side optimizer.
class OutputOptimizer {
 public:
  void reset() {
    velocity_.clear();
    prev_slope_.clear();
  }
  void resize(std::size_t connections) {
    velocity_.resize(connections, 0.0);
    prev_slope_.resize(connections, 0.0);
  }
  std::vector<double>& velocity() { return velocity_; }
  std::vector<double>& prev_slope() { return prev_slope_; }

 private:
  std::vector<double> velocity_;    // last step taken
  std::vector<double> prev_slope_;  // last descent slope (quickprop)
};

struct OutputSlope {
  std::vector<double> slope;  // -dE/dw per connection, per unit of weight
  double total_weight = 0.0;
};

// Mean descent direction of the SSE over weighted patterns, for every
// unfrozen connection into an output unit.
inline OutputSlope output_slope(const Network& net, std::span<const WeightedPattern> rows) {
  const auto conns = net.connections();
  const auto outputs = net.output_ids();
  OutputSlope result;
  result.slope.assign(conns.size(), 0.0);
  std::vector<double> act(net.unit_count(), 0.0);
  for (const auto& p : rows) {
    if (p.targets.size() != outputs.size()) throw ShapeError("pattern target count mismatch");
    net.activations(p.inputs, act);
    result.total_weight += p.weight;
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      const double out = act[outputs[k]];
      const double delta = p.weight * (p.targets[k] - out) * out * (1.0 - out);
      for (auto c : net.incoming(outputs[k])) {
        if (!conns[c].frozen) result.slope[c] += delta * act[conns[c].source];
      }
    }
  }
  if (result.total_weight > 0.0) {
    for (auto& g : result.slope) g /= result.total_weight;
  }
  return result;
}

namespace detail {

// Step for one weight given the current descent slope, the previous step and
// the previous slope.
inline double optimizer_step(const TrainConfig& cfg, double eps, double s, double last,
                             double prev) {
  if (cfg.optimizer == OptimizerKind::momentum) return cfg.momentum * last + eps * s;
  const double mu = cfg.quickprop_max_factor;
  const double shrink = mu / (1.0 + mu);
  double d = 0.0;
  if (last > 0.0) {
    if (s > 0.0) d += eps * s;
    d += s > shrink * prev ? mu * last : last * s / (prev - s);
  } else if (last < 0.0) {
    if (s < 0.0) d += eps * s;
    d += s < shrink * prev ? mu * last : last * s / (prev - s);
  } else {
    d = eps * s;
  }
  return d;
}

}  // namespace detail

// One optimizer step on the output-side weights.
inline void output_step(Network& net, std::span<const WeightedPattern> rows,
                        const TrainConfig& cfg, OutputOptimizer& optimizer) {
  if (rows.empty()) throw InvalidArgument("output step needs at least one pattern");
  const auto slope = output_slope(net, rows).slope;
  const auto conns = net.connections();
  optimizer.resize(conns.size());
  auto& step = optimizer.velocity();
  auto& prev = optimizer.prev_slope();
  for (std::size_t c = 0; c < conns.size(); ++c) {
    if (conns[c].frozen || net.units()[conns[c].target].kind != UnitKind::output) continue;
    const double s = slope[c];
    const double d = detail::optimizer_step(cfg, cfg.learning_rate, s, step[c], prev[c]);
    step[c] = d;
    prev[c] = s;
    net.set_weight(c, conns[c].weight + d);
  }
}

using OutputMap = std::map<std::vector<double>, std::vector<double>>;

// One pass over the batch followed by one optimizer step on the output-side
// weights. Returns the updated outputs for every distinct input in the batch.
inline OutputMap train_one_epoch(Network& net, std::span<const Pattern> batch,
                                 const TrainConfig& cfg, OutputOptimizer& optimizer) {
  if (batch.empty()) throw InvalidArgument("train_one_epoch needs a non-empty batch");
  std::vector<WeightedPattern> rows;
  rows.reserve(batch.size());
  for (const auto& p : batch) rows.push_back({p.inputs, 1.0, p.targets});
  output_step(net, rows, cfg, optimizer);
  OutputMap result;
  for (const auto& p : batch) {
    if (!result.contains(p.inputs)) result.emplace(p.inputs, net.forward(p.inputs));
  }
  return result;
}

inline OutputMap train_one_epoch(Network& net, std::span<const Pattern> batch,
                                 const TrainConfig& cfg) {
  OutputOptimizer optimizer;
  return train_one_epoch(net, batch, cfg, optimizer);
}

// ---------------------------------------------------------------------------
// Residuals and experience

// Weighted per-input residuals (output minus target) together with the
// activations of every network unit for that input.
struct ResidualRow {
  std::vector<double> activations;
  double weight = 1.0;
  std::vector<double> residuals;
};

using ResidualSet = std::vector<ResidualRow>;

inline ResidualSet residuals_from_batch(const Network& net, std::span<const Pattern> batch) {
  ResidualSet rows;
  rows.reserve(batch.size());
  for (const auto& p : batch) {
    ResidualRow row;
    row.activations = net.activations(p.inputs);
    row.weight = 1.0;
    for (std::size_t k = 0; k < net.output_count(); ++k) {
      row.residuals.push_back(row.activations[net.output_ids()[k]] - p.targets.at(k));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Exponentially forgotten summary of every pattern seen so far, grouped by
// input. For a batch replayed unchanged every epoch it is the batch itself,
// and error() equals epoch_error() on that batch.
class ExperienceMemory {
 public:
  explicit ExperienceMemory(double horizon = 50.0) : horizon_(horizon) {
    if (!(horizon >= 1.0)) throw InvalidArgument("experience horizon must be >= 1");
  }

  void absorb(std::span<const Pattern> batch) {
    ++epochs_;
    // Running mean until the horizon is reached, then exponential forgetting.
    const double alpha = std::max(1.0 / horizon_, 1.0 / static_cast<double>(epochs_));
    std::map<std::vector<double>, Entry> fresh;
    for (const auto& p : batch) {
      auto& e = fresh[p.inputs];
      if (e.sum.empty()) {
        e.sum.assign(p.targets.size(), 0.0);
        e.sum_sq.assign(p.targets.size(), 0.0);
      }
      e.count += 1.0;
      for (std::size_t k = 0; k < p.targets.size(); ++k) {
        e.sum[k] += p.targets[k];
        e.sum_sq[k] += p.targets[k] * p.targets[k];
      }
    }
    for (auto& [key, e] : entries_) {
      auto it = fresh.find(key);
      e.count = (1.0 - alpha) * e.count + alpha * (it == fresh.end() ? 0.0 : it->second.count);
      for (std::size_t k = 0; k < e.sum.size(); ++k) {
        const double s = it == fresh.end() ? 0.0 : it->second.sum[k];
        const double s2 = it == fresh.end() ? 0.0 : it->second.sum_sq[k];
        e.sum[k] = (1.0 - alpha) * e.sum[k] + alpha * s;
        e.sum_sq[k] = (1.0 - alpha) * e.sum_sq[k] + alpha * s2;
      }
    }
    for (auto& [key, e] : fresh) {
      if (entries_.contains(key)) continue;
      for (auto& v : e.sum) v *= alpha;
      for (auto& v : e.sum_sq) v *= alpha;
      e.count *= alpha;
      entries_.emplace(key, std::move(e));
    }
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  // Mean target per input.
  std::vector<double> mean(const std::vector<double>& input) const {
    const auto& e = entries_.at(input);
    std::vector<double> m(e.sum.size());
    for (std::size_t k = 0; k < m.size(); ++k) m[k] = e.sum[k] / e.count;
    return m;
  }

  // 1/2 sum_x n_x sum_o [(o - m)^2 + var]: the SSE of the current network over
  // the remembered patterns, scaled to one epoch.
  double error(const Network& net) const { return evaluate(net, true); }

  // The reducible part: 1/2 sum_x n_x sum_o (o - m)^2.
  double misfit(const Network& net) const { return evaluate(net, false); }

  // One weighted pattern per remembered input, carrying its mean target.
  std::vector<WeightedPattern> patterns() const {
    std::vector<WeightedPattern> rows;
    rows.reserve(entries_.size());
    for (const auto& [input, e] : entries_) {
      if (e.count <= 0.0) continue;
      WeightedPattern p{input, e.count, {}};
      for (auto v : e.sum) p.targets.push_back(v / e.count);
      rows.push_back(std::move(p));
    }
    return rows;
  }

  ResidualSet residuals(const Network& net) const {
    ResidualSet rows;
    rows.reserve(entries_.size());
    for (const auto& [input, e] : entries_) {
      if (e.count <= 0.0) continue;
      ResidualRow row;
      row.activations = net.activations(input);
      row.weight = e.count;
      for (std::size_t k = 0; k < e.sum.size(); ++k) {
        row.residuals.push_back(row.activations[net.output_ids()[k]] - e.sum[k] / e.count);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  }

 private:
  struct Entry {
    double count = 0.0;
    std::vector<double> sum;
    std::vector<double> sum_sq;
  };

  double evaluate(const Network& net, bool with_noise) const {
    double total = 0.0;
    for (const auto& [input, e] : entries_) {
      if (e.count <= 0.0) continue;
      const auto out = net.forward(input);
      for (std::size_t k = 0; k < out.size(); ++k) {
        const double m = e.sum[k] / e.count;
        const double d = out[k] - m;
        total += e.count * d * d;
        if (with_noise) total += std::max(0.0, e.sum_sq[k] - e.sum[k] * m);
      }
    }
    return 0.5 * total;
  }

  double horizon_;
  std::size_t epochs_ = 0;
  std::map<std::vector<double>, Entry> entries_;
};

// ---------------------------------------------------------------------------
// Candidate phase

enum class CandidateKind { sibling, descendant };

inline const char* to_string(CandidateKind kind) {
  return kind == CandidateKind::sibling ? "sibling" : "descendant";
}

struct Candidate {
  CandidateKind kind = CandidateKind::descendant;
  std::size_t layer = 1;
  std::vector<std::size_t> sources;
  std::vector<double> weights;
  std::vector<double> velocity;
  std::vector<double> prev_slope;
  double score = 0.0;
  // Covariance between this unit's activation and each output's residual.
  std::vector<double> covariances;
};

struct CandidatePool {
  std::vector<Candidate> candidates;

  // Highest score, lowest index on ties.
  std::size_t best() const {
    if (candidates.empty()) throw InvalidArgument("candidate pool is empty");
    std::size_t best = 0;
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (candidates[i].score > candidates[best].score) best = i;
    }
    return best;
  }
};

// Half siblings (deepest hidden layer) and half descendants (a new layer on
// top); all descendants while the network has no hidden layer. Every
// candidate reads from every non-output unit below its layer.
inline CandidatePool make_candidate_pool(const Network& net, const TrainConfig& cfg, Rng& rng) {
  const std::size_t deepest = net.deepest_hidden_layer();
  const std::size_t siblings = deepest == 0 ? 0 : cfg.pool_size / 2;
  CandidatePool pool;
  for (std::size_t i = 0; i < cfg.pool_size; ++i) {
    Candidate c;
    c.kind = i < siblings ? CandidateKind::sibling : CandidateKind::descendant;
    c.layer = c.kind == CandidateKind::sibling ? deepest : deepest + 1;
    for (const auto& u : net.units()) {
      if (u.kind != UnitKind::output && u.layer < c.layer) c.sources.push_back(u.id);
    }
    for (std::size_t s = 0; s < c.sources.size(); ++s) {
      c.weights.push_back(rng.uniform(-cfg.candidate_weight_range, cfg.candidate_weight_range));
    }
    c.velocity.assign(c.sources.size(), 0.0);
    c.prev_slope.assign(c.sources.size(), 0.0);
    c.covariances.assign(net.output_count(), 0.0);
    pool.candidates.push_back(std::move(c));
  }
  return pool;
}

namespace detail {

inline double candidate_activation(const Candidate& c, const std::vector<double>& act) {
  double net_input = 0.0;
  for (std::size_t i = 0; i < c.sources.size(); ++i) net_input += c.weights[i] * act[c.sources[i]];
  return logistic(net_input);
}

struct ResidualMoments {
  double total_weight = 0.0;
  std::vector<double> mean;  // per output
  double spread = 0.0;       // sqrt(sum_o weighted variance)
};

inline ResidualMoments residual_moments(const ResidualSet& rows, std::size_t outputs) {
  ResidualMoments m;
  m.mean.assign(outputs, 0.0);
  for (const auto& r : rows) {
    m.total_weight += r.weight;
    for (std::size_t k = 0; k < outputs; ++k) m.mean[k] += r.weight * r.residuals[k];
  }
  if (m.total_weight <= 0.0) return m;
  for (auto& v : m.mean) v /= m.total_weight;
  double var = 0.0;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < outputs; ++k) {
      const double d = r.residuals[k] - m.mean[k];
      var += r.weight * d * d;
    }
  }
  m.spread = std::sqrt(var / m.total_weight);
  return m;
}

// Scores one candidate: S = sum_o |sum_x w_x (v_x - vbar)(e_xo - ebar_o)|.
// When `gradient` is non-null it receives dS/dweights.
inline double score_candidate(Candidate& c, const ResidualSet& rows, const ResidualMoments& m,
                              std::vector<double>* gradient) {
  const std::size_t outputs = m.mean.size();
  std::vector<double> v(rows.size());
  double vbar = 0.0;
  for (std::size_t x = 0; x < rows.size(); ++x) {
    v[x] = candidate_activation(c, rows[x].activations);
    vbar += rows[x].weight * v[x];
  }
  if (m.total_weight > 0.0) vbar /= m.total_weight;
  c.covariances.assign(outputs, 0.0);
  for (std::size_t x = 0; x < rows.size(); ++x) {
    for (std::size_t k = 0; k < outputs; ++k) {
      c.covariances[k] += rows[x].weight * (v[x] - vbar) * (rows[x].residuals[k] - m.mean[k]);
    }
  }
  double score = 0.0;
  for (auto cov : c.covariances) score += std::abs(cov);
  c.score = score;
  if (gradient) {
    gradient->assign(c.sources.size(), 0.0);
    for (std::size_t x = 0; x < rows.size(); ++x) {
      double signal = 0.0;
      for (std::size_t k = 0; k < outputs; ++k) {
        const double sign = c.covariances[k] > 0.0 ? 1.0 : (c.covariances[k] < 0.0 ? -1.0 : 0.0);
        signal += sign * (rows[x].residuals[k] - m.mean[k]);
      }
      const double g = rows[x].weight * signal * v[x] * (1.0 - v[x]);
      for (std::size_t i = 0; i < c.sources.size(); ++i) {
        (*gradient)[i] += g * rows[x].activations[c.sources[i]];
      }
    }
  }
  return score;
}

}  // namespace detail

// Scores every candidate against the residuals without changing weights.
inline void score_pool(CandidatePool& pool, const ResidualSet& rows, std::size_t outputs) {
  const auto m = detail::residual_moments(rows, outputs);
  for (auto& c : pool.candidates) detail::score_candidate(c, rows, m, nullptr);
}

// One gradient-ascent step on every candidate's covariance score, followed by
// rescoring. The step is normalised by total weight and residual spread so the
// learning rate does not depend on batch size or error scale.
inline void candidate_epoch(CandidatePool& pool, const ResidualSet& rows, std::size_t outputs,
                            const TrainConfig& cfg) {
  const auto m = detail::residual_moments(rows, outputs);
  if (m.total_weight <= 0.0 || m.spread <= 0.0) {
    for (auto& c : pool.candidates) {
      c.score = 0.0;
      c.covariances.assign(outputs, 0.0);
    }
    return;
  }
  const double norm = 1.0 / (m.total_weight * m.spread);
  std::vector<double> grad;
  for (auto& c : pool.candidates) {
    detail::score_candidate(c, rows, m, &grad);
    for (std::size_t i = 0; i < c.weights.size(); ++i) {
      const double slope = grad[i] * norm;
      c.velocity[i] = detail::optimizer_step(cfg, cfg.candidate_learning_rate, slope,
                                             c.velocity[i], c.prev_slope[i]);
      c.prev_slope[i] = slope;
      c.weights[i] += c.velocity[i];
    }
    detail::score_candidate(c, rows, m, nullptr);
  }
}

// Trains a pool to completion on a fixed residual set: stops after
// max_candidate_epochs or when the best score stagnates. The network is not
// modified.
inline CandidatePool train_candidates(const Network& net, CandidatePool pool,
                                      const ResidualSet& residuals, const TrainConfig& cfg) {
  const std::size_t outputs = net.output_count();
  score_pool(pool, residuals, outputs);
  CessationState stall{cfg.effective_stagnation_threshold(), cfg.candidate_patience, 0,
                       std::nullopt, 0};
  for (std::size_t e = 0; e < cfg.max_candidate_epochs; ++e) {
    candidate_epoch(pool, residuals, outputs, cfg);
    const double best = pool.candidates[pool.best()].score;
    auto step = cessation_step(stall, best);
    stall = step.state;
    if (step.halt) break;
  }
  return pool;
}

struct RecruitInfo {
  CandidateKind kind = CandidateKind::descendant;
  std::size_t unit = 0;
  std::size_t layer = 0;
  double score = 0.0;
};

// Installs the best candidate with frozen incoming weights and wires it to
// every output with a small weight whose sign opposes its error covariance.
inline RecruitInfo recruit(Network& net, const CandidatePool& pool, const TrainConfig& cfg,
                           Rng& rng) {
  const auto& best = pool.candidates.at(pool.best());
  std::vector<std::pair<std::size_t, double>> incoming;
  for (std::size_t i = 0; i < best.sources.size(); ++i) {
    incoming.emplace_back(best.sources[i], best.weights[i]);
  }
  const std::size_t id = net.add_hidden_unit(best.layer, incoming);
  const std::vector<std::size_t> outputs(net.output_ids().begin(), net.output_ids().end());
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const double magnitude = rng.uniform(-cfg.output_weight_range, cfg.output_weight_range);
    const double cov = k < best.covariances.size() ? best.covariances[k] : 0.0;
    const double w = cov > 0.0 ? -std::abs(magnitude) : (cov < 0.0 ? std::abs(magnitude) : magnitude);
    net.add_connection({id, outputs[k], w, false});
  }
  return {best.kind, id, best.layer, best.score};
}

inline RecruitInfo recruit(Network& net, const CandidatePool& pool) {
  Rng rng(net.seed() ^ 0x5eedULL);
  return recruit(net, pool, TrainConfig{}, rng);
}

// ---------------------------------------------------------------------------
// Full SDCC loop

enum class EpochEvent { none, recruit_sibling, recruit_descendant, cessation };

inline const char* to_string(EpochEvent e) {
  switch (e) {
    case EpochEvent::none: return "none";
    case EpochEvent::recruit_sibling: return "recruit_sibling";
    case EpochEvent::recruit_descendant: return "recruit_descendant";
    case EpochEvent::cessation: return "cessation";
  }
  return "?";
}

struct EpochRecord {
  std::size_t epoch = 0;
  double error = 0.0;
  std::size_t hidden_units = 0;
  EpochEvent event = EpochEvent::none;
};

// Tracked error at the end of each output phase (output-phase stagnation).
struct PlateauRecord {
  std::size_t epoch = 0;
  double error = 0.0;
  std::size_t hidden_units = 0;
  bool recruited_after = false;
};

enum class HaltReason { cessation, epoch_cap };

inline const char* to_string(HaltReason r) {
  return r == HaltReason::cessation ? "cessation" : "epoch_cap";
}

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::vector<PlateauRecord> plateaus;
  std::vector<RecruitInfo> recruits;
};

struct TrainResult {
  Network net;
  TrainHistory history;
  HaltReason halted_by = HaltReason::epoch_cap;
  std::size_t epochs = 0;

  bool reached_cap_without_cessation() const { return halted_by == HaltReason::epoch_cap; }
};

// Anything that produces the patterns for a given epoch.
template <typename S>
concept BatchSource = requires(S& s, std::size_t epoch) {
  { s.next_epoch_batch(epoch) } -> std::convertible_to<std::vector<Pattern>>;
};

// Replays the same patterns every epoch.
class FixedBatch {
 public:
  explicit FixedBatch(std::vector<Pattern> patterns) : patterns_(std::move(patterns)) {
    if (patterns_.empty()) throw InvalidArgument("fixed batch is empty");
  }
  const std::vector<Pattern>& next_epoch_batch(std::size_t) const { return patterns_; }

 private:
  std::vector<Pattern> patterns_;
};

using EpochObserver = std::function<void(std::size_t epoch, const Network& net)>;

// Sibling-descendant cascade-correlation with learning cessation.
//
// Output phases take one gradient step per epoch. When the tracked error
// stagnates (or the phase runs max_output_epochs_per_phase epochs) and the
// reducible part of the error is at least recruit_min_gain of the total, a
// candidate phase trains a pool against the current residuals, one step per
// epoch, and the best candidate is installed. Candidate epochs consume data
// but do not touch the output weights and are not seen by the cessation rule.
template <BatchSource Source>
TrainResult train_sdcc(Network net, Source& source, const TrainConfig& cfg,
                       const EpochObserver& observer = {}) {
  cfg.validate();
  Rng rng(cfg.rng_seed);
  ExperienceMemory memory(cfg.experience_horizon);
  OutputOptimizer optimizer;
  auto cessation = CessationState::from(cfg);
  const CessationState stall_template{cfg.effective_stagnation_threshold(),
                                      cfg.stagnation_patience, 0, std::nullopt, 0};
  auto stall = stall_template;
  std::size_t phase_epochs = 0;

  bool in_candidate_phase = false;
  CandidatePool pool;
  CessationState candidate_stall = stall_template;
  std::size_t candidate_epochs = 0;

  TrainResult result;
  std::size_t epoch = 0;
  while (true) {
    if (cfg.hard_epoch_cap && epoch >= *cfg.hard_epoch_cap) {
      result.halted_by = HaltReason::epoch_cap;
      break;
    }
    const std::vector<Pattern> batch = source.next_epoch_batch(epoch);
    if (batch.empty()) throw InvalidArgument("batch source produced an empty batch");
    memory.absorb(batch);

    EpochRecord record;
    record.epoch = epoch;
    bool halt = false;

    if (!in_candidate_phase) {
      output_step(net, memory.patterns(), cfg, optimizer);
      const double error = memory.error(net);
      record.error = error;
      ++phase_epochs;
      if (cfg.cessation_enabled) {
        auto step = cessation_step(cessation, error);
        cessation = step.state;
        if (step.halt) {
          record.event = EpochEvent::cessation;
          halt = true;
        }
      }
      if (!halt) {
        auto step = cessation_step(stall, error);
        stall = step.state;
        if (step.halt || phase_epochs >= cfg.max_output_epochs_per_phase) {
          PlateauRecord plateau{epoch, error, net.hidden_count(), false};
          stall = stall_template;
          phase_epochs = 0;
          const double misfit = memory.misfit(net);
          if (net.hidden_count() < cfg.max_hidden_units &&
              misfit >= cfg.recruit_min_gain * error && misfit > 0.0) {
            pool = make_candidate_pool(net, cfg, rng);
            in_candidate_phase = true;
            candidate_stall = CessationState{cfg.effective_stagnation_threshold(),
                                             cfg.candidate_patience, 0, std::nullopt, 0};
            candidate_epochs = 0;
            plateau.recruited_after = true;
          }
          result.history.plateaus.push_back(plateau);
        }
      }
    } else {
      const auto rows = memory.residuals(net);
      candidate_epoch(pool, rows, net.output_count(), cfg);
      ++candidate_epochs;
      record.error = memory.error(net);
      auto step = cessation_step(candidate_stall, pool.candidates[pool.best()].score);
      candidate_stall = step.state;
      if (step.halt || candidate_epochs >= cfg.max_candidate_epochs) {
        const auto info = recruit(net, pool, cfg, rng);
        result.history.recruits.push_back(info);
        record.event = info.kind == CandidateKind::sibling ? EpochEvent::recruit_sibling
                                                           : EpochEvent::recruit_descendant;
        in_candidate_phase = false;
        optimizer.reset();
        // A new unit restarts the cessation count.
        cessation.counter = 0;
      }
    }

    record.hidden_units = net.hidden_count();
    result.history.epochs.push_back(record);
    if (observer) observer(epoch, net);
    ++epoch;
    if (halt) {
      result.halted_by = HaltReason::cessation;
      break;
    }
  }
  result.epochs = epoch;
  result.net = std::move(net);
  return result;
}

inline CsvTable history_table(const TrainHistory& history) {
  CsvTable table({"epoch", "error", "hidden_units", "event"});
  for (const auto& r : history.epochs) {
    table.row({std::to_string(r.epoch), format_number(r.error), std::to_string(r.hidden_units),
               to_string(r.event)});
  }
  return table;
}

}  // namespace pmnet
