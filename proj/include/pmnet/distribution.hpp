#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>
#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "json.hpp"
#include "pmnet/error.hpp"
#include "pmnet/snapshot.hpp"

namespace pmnet {

enum class DistributionKind { table, binomial, poisson, gaussian, gamma, beta };

inline const char* to_string(DistributionKind k) {
  switch (k) {
    case DistributionKind::table: return "table";
    case DistributionKind::binomial: return "binomial";
    case DistributionKind::poisson: return "poisson";
    case DistributionKind::gaussian: return "gaussian";
    case DistributionKind::gamma: return "gamma";
    case DistributionKind::beta: return "beta";
  }
  return "?";
}

inline std::optional<DistributionKind> distribution_kind_from_string(const std::string& s) {
  for (auto k : {DistributionKind::table, DistributionKind::binomial, DistributionKind::poisson,
                 DistributionKind::gaussian, DistributionKind::gamma, DistributionKind::beta}) {
    if (s == to_string(k)) return k;
  }
  return std::nullopt;
}

inline bool is_continuous(DistributionKind k) {
  return k == DistributionKind::gaussian || k == DistributionKind::gamma ||
         k == DistributionKind::beta;
}

// Kind-specific parameters:
//   table     probabilities
//   binomial  n, p            (hypotheses k = 0..n)
//   poisson   lambda, count   (hypotheses k = 0..count-1, renormalised)
//   gaussian  mean, sd
//   gamma     shape, scale
//   beta      alpha, beta
struct DistributionParams {
  std::vector<double> probabilities;
  std::map<std::string, double> values;

  // Keys present in `other` replace ours.
  void override_with(const DistributionParams& other) {
    if (!other.probabilities.empty()) probabilities = other.probabilities;
    for (const auto& [k, v] : other.values) values[k] = v;
  }
};

struct Support {
  double lo = -4.0;
  double hi = 4.0;
  std::size_t bins = 33;
};

struct ScheduleEntry {
  std::size_t epoch = 0;
  DistributionParams params;
};

// Declarative target pmf over a hypothesis space, possibly changing at fixed
// epochs. Continuous kinds are cut into equal-width bins over the support,
// each bin carrying its cdf mass, renormalised over the support.
struct DistributionSpec {
  DistributionKind kind = DistributionKind::table;
  DistributionParams params;
  Support support;
  std::vector<ScheduleEntry> schedule;

  static DistributionSpec table(std::vector<double> probabilities) {
    DistributionSpec s;
    s.kind = DistributionKind::table;
    s.params.probabilities = std::move(probabilities);
    return s;
  }

  static DistributionSpec gaussian(double mean, double sd, Support support = {}) {
    DistributionSpec s;
    s.kind = DistributionKind::gaussian;
    s.params.values = {{"mean", mean}, {"sd", sd}};
    s.support = support;
    return s;
  }

  static DistributionSpec binomial(std::size_t n, double p) {
    DistributionSpec s;
    s.kind = DistributionKind::binomial;
    s.params.values = {{"n", static_cast<double>(n)}, {"p", p}};
    return s;
  }

  DistributionSpec& switch_at(std::size_t epoch, DistributionParams replacement) {
    schedule.push_back({epoch, std::move(replacement)});
    return *this;
  }

  DistributionParams params_at(std::size_t epoch) const {
    DistributionParams p = params;
    for (const auto& e : schedule) {
      if (e.epoch <= epoch) p.override_with(e.params);
    }
    return p;
  }
};

namespace detail {

inline double param(const DistributionParams& p, const char* key) {
  auto it = p.values.find(key);
  if (it == p.values.end()) throw InvalidArgument(std::string("missing parameter ") + key);
  if (!std::isfinite(it->second)) throw InvalidArgument(std::string("parameter not finite: ") + key);
  return it->second;
}

inline std::size_t count_param(const DistributionParams& p, const char* key) {
  const double v = param(p, key);
  if (v < 0.0 || v != std::floor(v)) {
    throw InvalidArgument(std::string(key) + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

inline std::vector<double> renormalise(std::vector<double> masses) {
  double total = 0.0;
  for (auto m : masses) total += m;
  if (!(total > 0.0)) throw InvalidArgument("distribution has no mass on its support");
  for (auto& m : masses) m /= total;
  return masses;
}

template <typename Dist>
std::vector<double> binned(const Dist& dist, const Support& s, double domain_lo, double domain_hi) {
  std::vector<double> masses(s.bins);
  const double width = (s.hi - s.lo) / static_cast<double>(s.bins);
  auto cdf_at = [&](double x) {
    x = std::clamp(x, domain_lo, domain_hi);
    return boost::math::cdf(dist, x);
  };
  for (std::size_t b = 0; b < s.bins; ++b) {
    const double a = s.lo + width * static_cast<double>(b);
    const double c = b + 1 == s.bins ? s.hi : s.lo + width * static_cast<double>(b + 1);
    masses[b] = std::max(0.0, cdf_at(c) - cdf_at(a));
  }
  return renormalise(std::move(masses));
}

// Mirror-exact Gaussian binning: mass of [a, c] computed from the nearer tail
// so that symmetric bins agree to rounding.
inline std::vector<double> binned_gaussian(double mean, double sd, const Support& s) {
  boost::math::normal_distribution<double> dist(mean, sd);
  std::vector<double> masses(s.bins);
  const double width = (s.hi - s.lo) / static_cast<double>(s.bins);
  for (std::size_t b = 0; b < s.bins; ++b) {
    const double a = s.lo + width * static_cast<double>(b);
    const double c = b + 1 == s.bins ? s.hi : s.lo + width * static_cast<double>(b + 1);
    const double mid = 0.5 * (a + c);
    double m = 0.0;
    if (mid <= mean) {
      m = boost::math::cdf(dist, c) - boost::math::cdf(dist, a);
    } else {
      m = boost::math::cdf(boost::math::complement(dist, a)) -
          boost::math::cdf(boost::math::complement(dist, c));
    }
    masses[b] = std::max(0.0, m);
  }
  return renormalise(std::move(masses));
}

}  // namespace detail

inline void validate_support(const Support& s) {
  if (!(s.hi > s.lo)) throw InvalidArgument("support needs hi > lo");
  if (s.bins == 0) throw InvalidArgument("support needs at least one bin");
}

inline std::vector<double> pmf_for(DistributionKind kind, const DistributionParams& p,
                                   const Support& support) {
  using namespace boost::math;
  switch (kind) {
    case DistributionKind::table: {
      if (p.probabilities.empty()) throw InvalidArgument("table needs probabilities");
      double total = 0.0;
      for (auto v : p.probabilities) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw InvalidArgument("table probabilities must be non-negative");
        }
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("table probabilities must sum to 1");
      return p.probabilities;
    }
    case DistributionKind::binomial: {
      const auto n = detail::count_param(p, "n");
      const double prob = detail::param(p, "p");
      if (prob < 0.0 || prob > 1.0) throw InvalidArgument("binomial p must be in [0, 1]");
      binomial_distribution<double> dist(static_cast<double>(n), prob);
      std::vector<double> masses(n + 1);
      for (std::size_t k = 0; k <= n; ++k) masses[k] = pdf(dist, static_cast<double>(k));
      return detail::renormalise(std::move(masses));
    }
    case DistributionKind::poisson: {
      const double lambda = detail::param(p, "lambda");
      const auto count = detail::count_param(p, "count");
      if (!(lambda > 0.0)) throw InvalidArgument("poisson lambda must be positive");
      if (count == 0) throw InvalidArgument("poisson count must be positive");
      poisson_distribution<double> dist(lambda);
      std::vector<double> masses(count);
      for (std::size_t k = 0; k < count; ++k) masses[k] = pdf(dist, static_cast<double>(k));
      return detail::renormalise(std::move(masses));
    }
    case DistributionKind::gaussian: {
      validate_support(support);
      const double sd = detail::param(p, "sd");
      if (!(sd > 0.0)) throw InvalidArgument("gaussian sd must be positive");
      return detail::binned_gaussian(detail::param(p, "mean"), sd, support);
    }
    case DistributionKind::gamma: {
      validate_support(support);
      const double shape = detail::param(p, "shape");
      const double scale = detail::param(p, "scale");
      if (!(shape > 0.0) || !(scale > 0.0)) throw InvalidArgument("gamma needs shape, scale > 0");
      gamma_distribution<double> dist(shape, scale);
      return detail::binned(dist, support, 0.0, std::numeric_limits<double>::max());
    }
    case DistributionKind::beta: {
      validate_support(support);
      const double a = detail::param(p, "alpha");
      const double b = detail::param(p, "beta");
      if (!(a > 0.0) || !(b > 0.0)) throw InvalidArgument("beta needs alpha, beta > 0");
      beta_distribution<double> dist(a, b);
      return detail::binned(dist, support, 0.0, 1.0);
    }
  }
  throw InvalidArgument("unknown distribution kind");
}

// Target probabilities in force at `epoch`.
inline std::vector<double> pmf(const DistributionSpec& spec, std::size_t epoch = 0) {
  return pmf_for(spec.kind, spec.params_at(epoch), spec.support);
}

inline std::size_t hypothesis_count(const DistributionSpec& spec) { return pmf(spec, 0).size(); }

inline void validate(const DistributionSpec& spec) {
  const auto h = pmf(spec, 0).size();
  for (std::size_t i = 0; i < spec.schedule.size(); ++i) {
    if (i > 0 && spec.schedule[i].epoch <= spec.schedule[i - 1].epoch) {
      throw InvalidArgument("schedule switch epochs must be strictly increasing");
    }
    if (pmf(spec, spec.schedule[i].epoch).size() != h) {
      throw InvalidArgument("schedule must not change the number of hypotheses");
    }
  }
}

// ---------------------------------------------------------------------------
// Structured-text form
//
// {"kind": "gaussian", "parameters": {"mean": 0, "sd": 1},
//  "support": {"lo": -4, "hi": 4, "bins": 33},
//  "schedule": [{"epoch": 800, "parameters": {"mean": 1}}]}

namespace detail {

inline DistributionParams params_from_json(const nlohmann::json& j, const std::string& path) {
  if (!j.is_object()) throw ParseError(path, "expected an object");
  DistributionParams p;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string field = path + "." + it.key();
    if (it.key() == "probabilities") {
      if (!it->is_array()) throw ParseError(field, "expected an array of numbers");
      for (std::size_t i = 0; i < it->size(); ++i) {
        if (!(*it)[i].is_number()) {
          throw ParseError(field + "[" + std::to_string(i) + "]", "expected a number");
        }
        p.probabilities.push_back((*it)[i].get<double>());
      }
    } else if (it->is_number()) {
      p.values[it.key()] = it->get<double>();
    } else {
      throw ParseError(field, "expected a number");
    }
  }
  return p;
}

inline nlohmann::json params_to_json(const DistributionParams& p) {
  nlohmann::json j = nlohmann::json::object();
  if (!p.probabilities.empty()) j["probabilities"] = p.probabilities;
  for (const auto& [k, v] : p.values) j[k] = v;
  return j;
}

}  // namespace detail

inline DistributionSpec distribution_from_json(const nlohmann::json& j,
                                               const std::string& path = "spec") {
  using namespace detail;
  DistributionSpec spec;
  const auto kind_name = require_string(j, "kind", path);
  const auto kind = distribution_kind_from_string(kind_name);
  if (!kind) throw ParseError(path + ".kind", "unknown distribution kind '" + kind_name + "'");
  spec.kind = *kind;
  spec.params = params_from_json(require(j, "parameters", path), path + ".parameters");
  if (j.contains("support")) {
    const auto& s = j["support"];
    const std::string sp = path + ".support";
    spec.support.lo = require_number(s, "lo", sp);
    spec.support.hi = require_number(s, "hi", sp);
    spec.support.bins = require_unsigned(s, "bins", sp);
  } else if (is_continuous(spec.kind)) {
    throw ParseError(path + ".support", "continuous kinds need a support");
  }
  if (j.contains("schedule")) {
    const auto& sched = j["schedule"];
    if (!sched.is_array()) throw ParseError(path + ".schedule", "expected an array");
    for (std::size_t i = 0; i < sched.size(); ++i) {
      const std::string ep = path + ".schedule[" + std::to_string(i) + "]";
      ScheduleEntry e;
      e.epoch = require_unsigned(sched[i], "epoch", ep);
      e.params = params_from_json(require(sched[i], "parameters", ep), ep + ".parameters");
      spec.schedule.push_back(std::move(e));
    }
  }
  try {
    validate(spec);
  } catch (const InvalidArgument& e) {
    throw ParseError(path, e.what());
  }
  return spec;
}

inline nlohmann::json to_json(const DistributionSpec& spec) {
  nlohmann::json j = {{"kind", to_string(spec.kind)},
                      {"parameters", detail::params_to_json(spec.params)}};
  if (is_continuous(spec.kind)) {
    j["support"] = {{"lo", spec.support.lo}, {"hi", spec.support.hi}, {"bins", spec.support.bins}};
  }
  if (!spec.schedule.empty()) {
    nlohmann::json sched = nlohmann::json::array();
    for (const auto& e : spec.schedule) {
      sched.push_back({{"epoch", e.epoch}, {"parameters", detail::params_to_json(e.params)}});
    }
    j["schedule"] = std::move(sched);
  }
  return j;
}

}  // namespace pmnet
