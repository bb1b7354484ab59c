#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmnet/bayes.hpp"
#include "pmnet/csv.hpp"
#include "pmnet/error.hpp"
#include "pmnet/network.hpp"
#include "pmnet/probmatch.hpp"

namespace pmnet {

enum class DisruptionTarget { prior, likelihood };

inline const char* to_string(DisruptionTarget t) {
  return t == DisruptionTarget::prior ? "prior" : "likelihood";
}

struct DisruptionConfig {
  double r = 1.0;
  std::uint64_t t = 1;
  DisruptionTarget target = DisruptionTarget::prior;

  void validate() const {
    if (!(r >= 0.0 && r <= 1.0)) throw InvalidArgument("attention factor r must lie in [0, 1]");
  }
};

// Returns a copy with every connection weight (frozen ones and the bias
// included) scaled by r^t. Repeated disruption with the same r composes by
// adding exponents, so disrupt(disrupt(n, r, a), r, b) == disrupt(n, r, a + b).
inline Network disrupt(const Network& net, double r, std::uint64_t t) {
  DisruptionConfig{r, t}.validate();
  DisruptionRecord record;
  const auto& prev = net.disruption();
  if (prev && prev->factor == r) {
    record = *prev;
    record.count += t;
  } else {
    for (const auto& c : net.connections()) record.base_weights.push_back(c.weight);
    record.factor = r;
    record.count = t;
  }
  const double scale = std::pow(r, static_cast<double>(record.count));
  std::vector<double> weights(record.base_weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = record.base_weights[i] * scale;
  Network out = net;
  out.assign_disrupted_weights(weights, std::move(record));
  return out;
}

inline Network disrupt(const Network& net, const DisruptionConfig& cfg) {
  return disrupt(net, cfg.r, cfg.t);
}

// Network outputs over all H hypothesis encodings, divided by their sum.
inline std::vector<double> normalized_prior(const Network& net, std::size_t hypotheses) {
  auto p = hypothesis_outputs(net, hypotheses);
  double sum = 0.0;
  for (auto v : p) {
    if (!std::isfinite(v)) throw InvalidArgument("network output is not finite");
    sum += v;
  }
  if (!(sum > 0.0)) throw InvalidArgument("cannot normalize all-zero outputs");
  for (auto& v : p) v /= sum;
  return p;
}

// Shannon entropy in bits, with 0 log 0 = 0.
inline double entropy(std::span<const double> p) {
  double h = 0.0;
  for (auto v : p) {
    if (v < 0.0 || !std::isfinite(v)) throw InvalidArgument("probabilities must be non-negative");
    if (v > 0.0) h -= v * std::log2(v);
  }
  return h;
}

inline double tv_distance_to_uniform(std::span<const double> p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double d = 0.0;
  for (auto v : p) d += std::abs(v - u);
  return 0.5 * d;
}

struct EntropyReading {
  std::uint64_t t = 0;
  double entropy_bits = 0.0;
  double max_entropy_bits = 0.0;
  double tv_to_uniform = 0.0;
  std::vector<double> prior;
};

struct NeglectSweep {
  double r = 1.0;
  std::vector<EntropyReading> readings;  // t = 0..t_max
};

inline NeglectSweep neglect_sweep(const Network& net, double r, std::uint64_t t_max,
                                  std::size_t hypotheses) {
  DisruptionConfig{r, 1}.validate();
  NeglectSweep sweep;
  sweep.r = r;
  const double max_bits = std::log2(static_cast<double>(hypotheses));
  for (std::uint64_t t = 0; t <= t_max; ++t) {
    const Network n = t == 0 ? net : disrupt(net, r, t);
    EntropyReading reading;
    reading.t = t;
    reading.prior = normalized_prior(n, hypotheses);
    reading.entropy_bits = entropy(reading.prior);
    reading.max_entropy_bits = max_bits;
    reading.tv_to_uniform = tv_distance_to_uniform(reading.prior);
    sweep.readings.push_back(std::move(reading));
  }
  return sweep;
}

inline CsvTable sweep_table(const NeglectSweep& sweep) {
  CsvTable t({"r", "t", "entropy_bits", "tv_distance_to_uniform"});
  for (const auto& r : sweep.readings) {
    t.row({format_number(sweep.r), std::to_string(r.t), format_number(r.entropy_bits),
           format_number(r.tv_to_uniform)});
  }
  return t;
}

// Long format: one row per (t, hypothesis).
inline CsvTable prior_dump_table(const NeglectSweep& sweep) {
  CsvTable t({"t", "hypothesis", "prior"});
  for (const auto& r : sweep.readings) {
    for (std::size_t i = 0; i < r.prior.size(); ++i) {
      t.row({std::to_string(r.t), std::to_string(i), format_number(r.prior[i])});
    }
  }
  return t;
}

// Posterior under a disrupted prior module: disrupt, normalize, apply Bayes.
inline std::vector<double> neglected_posterior(std::span<const double> likelihoods,
                                               const Network& prior_net,
                                               const DisruptionConfig& cfg) {
  cfg.validate();
  const Network n = disrupt(prior_net, cfg);
  const auto prior = normalized_prior(n, likelihoods.size());
  return exact_posterior(likelihoods, prior);
}

}  // namespace pmnet
