#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "pmnet/error.hpp"
#include "pmnet/network.hpp"

namespace pmnet {

inline constexpr int kFormatVersion = 1;

namespace detail {

inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key,
                                     const std::string& path) {
  if (!obj.is_object()) throw ParseError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(path.empty() ? key : path + "." + key, "missing field");
  return *it;
}

inline std::string join_path(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

inline double require_number(const nlohmann::json& obj, const std::string& key,
                             const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number()) throw ParseError(join_path(path, key), "expected a number");
  return v.get<double>();
}

inline std::uint64_t require_unsigned(const nlohmann::json& obj, const std::string& key,
                                      const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw ParseError(join_path(path, key), "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline bool require_bool(const nlohmann::json& obj, const std::string& key,
                         const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_boolean()) throw ParseError(join_path(path, key), "expected true or false");
  return v.get<bool>();
}

inline std::string require_string(const nlohmann::json& obj, const std::string& key,
                                  const std::string& path) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) throw ParseError(join_path(path, key), "expected a string");
  return v.get<std::string>();
}

inline void check_format_version(const nlohmann::json& doc) {
  const auto version = require_unsigned(doc, "format_version", "");
  if (version != static_cast<std::uint64_t>(kFormatVersion)) {
    throw ParseError("format_version", "unsupported version " + std::to_string(version));
  }
}

inline nlohmann::json parse_text(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("document", e.what());
  }
}

}  // namespace detail

// Snapshot document. Doubles are written in shortest round-trip form, so
// reading a snapshot back reproduces every weight bit for bit.
inline nlohmann::json to_json(const Network& net) {
  nlohmann::json units = nlohmann::json::array();
  for (const auto& u : net.units()) {
    units.push_back({{"id", u.id}, {"layer", u.layer}, {"kind", to_string(u.kind)}});
  }
  nlohmann::json connections = nlohmann::json::array();
  for (const auto& c : net.connections()) {
    connections.push_back(
        {{"source", c.source}, {"target", c.target}, {"weight", c.weight}, {"frozen", c.frozen}});
  }
  return {{"format_version", kFormatVersion},
          {"rng_seed", net.seed()},
          {"units", std::move(units)},
          {"connections", std::move(connections)}};
}

inline Network network_from_json(const nlohmann::json& doc) {
  using namespace detail;
  check_format_version(doc);
  const auto seed = require_unsigned(doc, "rng_seed", "");
  const auto& units_json = require(doc, "units", "");
  if (!units_json.is_array()) throw ParseError("units", "expected an array");
  std::vector<Unit> units;
  for (std::size_t i = 0; i < units_json.size(); ++i) {
    const std::string path = "units[" + std::to_string(i) + "]";
    const auto& u = units_json[i];
    Unit unit;
    unit.id = require_unsigned(u, "id", path);
    unit.layer = require_unsigned(u, "layer", path);
    const auto kind = unit_kind_from_string(require_string(u, "kind", path));
    if (!kind) throw ParseError(path + ".kind", "unknown unit kind");
    unit.kind = *kind;
    units.push_back(unit);
  }
  const auto& conns_json = require(doc, "connections", "");
  if (!conns_json.is_array()) throw ParseError("connections", "expected an array");
  std::vector<Connection> connections;
  for (std::size_t i = 0; i < conns_json.size(); ++i) {
    const std::string path = "connections[" + std::to_string(i) + "]";
    const auto& c = conns_json[i];
    Connection conn;
    conn.source = require_unsigned(c, "source", path);
    conn.target = require_unsigned(c, "target", path);
    conn.weight = require_number(c, "weight", path);
    conn.frozen = require_bool(c, "frozen", path);
    connections.push_back(conn);
  }
  return Network::from_parts(std::move(units), std::move(connections), seed);
}

inline std::string serialize(const Network& net) { return to_json(net).dump(2) + "\n"; }

inline Network deserialize(const std::string& text) {
  return network_from_json(detail::parse_text(text));
}

inline void save_snapshot(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  out << serialize(net);
}

inline Network load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return deserialize(text.str());
}

}  // namespace pmnet
