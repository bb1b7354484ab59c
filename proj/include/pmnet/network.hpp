#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pmnet/error.hpp"
#include "pmnet/rng.hpp"

namespace pmnet {

enum class UnitKind { input, bias, hidden, output };

inline const char* to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::input: return "input";
    case UnitKind::bias: return "bias";
    case UnitKind::hidden: return "hidden";
    case UnitKind::output: return "output";
  }
  return "?";
}

inline std::optional<UnitKind> unit_kind_from_string(const std::string& s) {
  if (s == "input") return UnitKind::input;
  if (s == "bias") return UnitKind::bias;
  if (s == "hidden") return UnitKind::hidden;
  if (s == "output") return UnitKind::output;
  return std::nullopt;
}

struct Unit {
  std::size_t id = 0;
  std::size_t layer = 0;
  UnitKind kind = UnitKind::input;

  friend bool operator==(const Unit&, const Unit&) = default;
};

struct Connection {
  std::size_t source = 0;
  std::size_t target = 0;
  double weight = 0.0;
  bool frozen = false;

  friend bool operator==(const Connection&, const Connection&) = default;
};

inline double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Accumulated attention disruption: effective weights are base * factor^count.
// Kept so that repeated disruption with the same factor composes exactly.
struct DisruptionRecord {
  std::vector<double> base_weights;
  double factor = 1.0;
  std::uint64_t count = 0;
};

// Cascade-topology feed-forward network of logistic units.
//
// Units are identified by their index. Layer 0 holds the inputs and the bias;
// hidden units live in layers 1..L; output units sit at layer L+1. Every
// connection runs from a strictly lower to a strictly higher layer, so the
// graph is acyclic and evaluating units in layer order is exact.
//
// Evaluation is const and touches no shared state, so a single network can be
// evaluated from many threads at once. Mutation needs exclusive access.
class Network {
 public:
  Network() = default;

  // Inputs, one bias and outputs, with every input and the bias wired to every
  // output. Initial output weights are uniform in [-init_range, init_range].
  static Network minimal(std::size_t inputs, std::size_t outputs, std::uint64_t seed,
                         double init_range = 0.0) {
    if (inputs == 0 || outputs == 0) {
      throw InvalidArgument("network needs at least one input and one output unit");
    }
    Network net;
    net.seed_ = seed;
    for (std::size_t i = 0; i < inputs; ++i) net.units_.push_back({i, 0, UnitKind::input});
    net.units_.push_back({inputs, 0, UnitKind::bias});
    for (std::size_t o = 0; o < outputs; ++o) {
      net.units_.push_back({inputs + 1 + o, 1, UnitKind::output});
    }
    Rng rng(seed);
    for (std::size_t o = 0; o < outputs; ++o) {
      for (std::size_t s = 0; s <= inputs; ++s) {
        const double w = init_range > 0.0 ? rng.uniform(-init_range, init_range) : 0.0;
        net.connections_.push_back({s, inputs + 1 + o, w, false});
      }
    }
    net.rebuild();
    return net;
  }

  // Builds a network from explicit parts, rejecting any invariant violation.
  static Network from_parts(std::vector<Unit> units, std::vector<Connection> connections,
                            std::uint64_t seed) {
    Network net;
    net.units_ = std::move(units);
    net.connections_ = std::move(connections);
    net.seed_ = seed;
    net.validate();
    net.rebuild();
    return net;
  }

  std::span<const Unit> units() const { return units_; }
  std::span<const Connection> connections() const { return connections_; }
  std::span<const std::size_t> input_ids() const { return inputs_; }
  std::span<const std::size_t> output_ids() const { return outputs_; }
  std::span<const std::size_t> hidden_ids() const { return hidden_; }

  std::size_t unit_count() const { return units_.size(); }
  std::size_t input_count() const { return inputs_.size(); }
  std::size_t output_count() const { return outputs_.size(); }
  std::size_t hidden_count() const { return hidden_.size(); }
  std::size_t bias_id() const { return bias_; }
  std::uint64_t seed() const { return seed_; }

  // 0 when the network has no hidden units.
  std::size_t deepest_hidden_layer() const {
    std::size_t deepest = 0;
    for (auto id : hidden_) deepest = std::max(deepest, units_[id].layer);
    return deepest;
  }

  // Connection indices whose target is `unit`.
  std::span<const std::size_t> incoming(std::size_t unit) const { return incoming_.at(unit); }

  // Activation of every unit, indexed by unit id.
  void activations(std::span<const double> input, std::span<double> out) const {
    if (input.size() != inputs_.size()) {
      throw ShapeError("expected " + std::to_string(inputs_.size()) + " inputs, got " +
                       std::to_string(input.size()));
    }
    if (out.size() != units_.size()) throw ShapeError("activation buffer has wrong size");
    for (std::size_t i = 0; i < inputs_.size(); ++i) out[inputs_[i]] = input[i];
    out[bias_] = 1.0;
    for (auto id : order_) {
      double net_input = 0.0;
      for (auto c : incoming_[id]) {
        const auto& conn = connections_[c];
        net_input += conn.weight * out[conn.source];
      }
      out[id] = logistic(net_input);
    }
  }

  std::vector<double> activations(std::span<const double> input) const {
    std::vector<double> out(units_.size(), 0.0);
    activations(input, out);
    return out;
  }

  std::vector<double> forward(std::span<const double> input) const {
    const auto act = activations(input);
    std::vector<double> result;
    result.reserve(outputs_.size());
    for (auto id : outputs_) result.push_back(act[id]);
    return result;
  }

  double forward_scalar(double input) const {
    const double in[1] = {input};
    return forward(in).at(0);
  }

  void set_weight(std::size_t connection, double weight) {
    connections_.at(connection).weight = weight;
    disruption_.reset();
  }

  // Installs a hidden unit at `layer` with frozen incoming weights. Output
  // units are moved above it if needed. Returns the new unit id.
  std::size_t add_hidden_unit(std::size_t layer,
                              std::span<const std::pair<std::size_t, double>> incoming) {
    if (layer == 0) throw InvalidArgument("hidden units need layer >= 1");
    const std::size_t id = units_.size();
    for (const auto& [source, weight] : incoming) {
      if (source >= units_.size()) throw InvalidArgument("unknown source unit");
      if (units_[source].kind == UnitKind::output) {
        throw InvalidArgument("hidden units cannot read from output units");
      }
      if (units_[source].layer >= layer) throw InvalidArgument("connection must go up a layer");
    }
    units_.push_back({id, layer, UnitKind::hidden});
    for (const auto& [source, weight] : incoming) {
      connections_.push_back({source, id, weight, true});
    }
    for (auto out : outputs_) units_[out].layer = std::max(units_[out].layer, layer + 1);
    disruption_.reset();
    rebuild();
    return id;
  }

  std::size_t add_connection(const Connection& connection) {
    if (connection.source >= units_.size() || connection.target >= units_.size()) {
      throw InvalidArgument("connection endpoint does not exist");
    }
    if (units_[connection.source].layer >= units_[connection.target].layer) {
      throw InvalidArgument("connection must go up a layer");
    }
    connections_.push_back(connection);
    disruption_.reset();
    rebuild();
    return connections_.size() - 1;
  }

  const std::optional<DisruptionRecord>& disruption() const { return disruption_; }

  // Replaces every weight; used by attention disruption only.
  void assign_disrupted_weights(std::span<const double> weights, DisruptionRecord record) {
    if (weights.size() != connections_.size()) throw ShapeError("weight vector has wrong size");
    for (std::size_t i = 0; i < weights.size(); ++i) connections_[i].weight = weights[i];
    disruption_ = std::move(record);
  }

  friend bool operator==(const Network& a, const Network& b) {
    return a.units_ == b.units_ && a.connections_ == b.connections_ && a.seed_ == b.seed_;
  }

 private:
  void validate() const {
    std::size_t bias_count = 0;
    std::size_t input_count = 0;
    std::size_t output_count = 0;
    std::size_t max_layer = 0;
    for (std::size_t i = 0; i < units_.size(); ++i) {
      const auto& u = units_[i];
      const std::string where = "units[" + std::to_string(i) + "]";
      if (u.id != i) throw ParseError(where + ".id", "unit ids must equal their position");
      max_layer = std::max(max_layer, u.layer);
      switch (u.kind) {
        case UnitKind::bias:
          ++bias_count;
          if (u.layer != 0) throw ParseError(where + ".layer", "bias unit must be at layer 0");
          break;
        case UnitKind::input:
          ++input_count;
          if (u.layer != 0) throw ParseError(where + ".layer", "input units must be at layer 0");
          break;
        case UnitKind::hidden:
          if (u.layer == 0) throw ParseError(where + ".layer", "hidden units need layer >= 1");
          break;
        case UnitKind::output: ++output_count; break;
      }
    }
    if (bias_count != 1) throw ParseError("units", "exactly one bias unit is required");
    if (input_count == 0) throw ParseError("units", "at least one input unit is required");
    if (output_count == 0) throw ParseError("units", "at least one output unit is required");
    for (const auto& u : units_) {
      if (u.kind == UnitKind::output && u.layer != max_layer) {
        throw ParseError("units[" + std::to_string(u.id) + "].layer",
                         "output units must occupy the maximal layer");
      }
      if (u.kind == UnitKind::hidden && u.layer >= max_layer) {
        throw ParseError("units[" + std::to_string(u.id) + "].layer",
                         "hidden units must lie below the output layer");
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (std::size_t i = 0; i < connections_.size(); ++i) {
      const auto& c = connections_[i];
      const std::string where = "connections[" + std::to_string(i) + "]";
      if (c.source >= units_.size()) throw ParseError(where + ".source", "unknown unit");
      if (c.target >= units_.size()) throw ParseError(where + ".target", "unknown unit");
      const auto& src = units_[c.source];
      const auto& dst = units_[c.target];
      if (dst.kind == UnitKind::input || dst.kind == UnitKind::bias) {
        throw ParseError(where + ".target", "inputs and bias take no incoming connections");
      }
      if (src.kind == UnitKind::output) {
        throw ParseError(where + ".source", "output units have no outgoing connections");
      }
      if (src.layer >= dst.layer) {
        throw ParseError(where, "connection does not go up a layer (cycle or lateral link)");
      }
      if (dst.kind == UnitKind::output && c.frozen) {
        throw ParseError(where + ".frozen", "connections into output units are never frozen");
      }
      if (!std::isfinite(c.weight)) throw ParseError(where + ".weight", "weight is not finite");
      if (!seen.emplace(c.source, c.target).second) {
        throw ParseError(where, "duplicate connection");
      }
    }
  }

  void rebuild() {
    inputs_.clear();
    outputs_.clear();
    hidden_.clear();
    order_.clear();
    for (const auto& u : units_) {
      switch (u.kind) {
        case UnitKind::input: inputs_.push_back(u.id); break;
        case UnitKind::bias: bias_ = u.id; break;
        case UnitKind::hidden:
          hidden_.push_back(u.id);
          order_.push_back(u.id);
          break;
        case UnitKind::output:
          outputs_.push_back(u.id);
          order_.push_back(u.id);
          break;
      }
    }
    std::stable_sort(order_.begin(), order_.end(), [this](std::size_t a, std::size_t b) {
      return units_[a].layer < units_[b].layer;
    });
    incoming_.assign(units_.size(), {});
    for (std::size_t c = 0; c < connections_.size(); ++c) {
      incoming_[connections_[c].target].push_back(c);
    }
  }

  std::vector<Unit> units_;
  std::vector<Connection> connections_;
  std::uint64_t seed_ = 0;

  std::vector<std::size_t> inputs_;
  std::vector<std::size_t> outputs_;
  std::vector<std::size_t> hidden_;
  std::size_t bias_ = 0;
  std::vector<std::size_t> order_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::optional<DisruptionRecord> disruption_;
};

}  // namespace pmnet
