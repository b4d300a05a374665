#pragma once

#include <toml.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gradflow/errors.hpp"
#include "gradflow/harness.hpp"

// TOML run configuration:
//
//   [model]   type, eps2, M, scale, C, s, dealias
//   [scheme]  name (sav | gsav | pssav | rpssav), order (1 | 2), relaxed
//   [grid]    n, L
//   [time]    dt, T, bootstrap (auto | first-order | exact)
//   [initial] type (manufactured | star | circles | random | constant), case, lo, hi, seed, value, alpha, epsilon
//   [output]  record_every, snapshot_times
//
// Unknown sections or keys are errors. Overrides ("time.dt=1e-3") replace
// values after parsing and before validation.

namespace gradflow::config {

namespace detail {

inline const std::map<std::string, std::set<std::string>>& schema() {
  static const std::map<std::string, std::set<std::string>> s = {
      {"model", {"type", "eps2", "M", "scale", "C", "s", "dealias"}},
      {"scheme", {"name", "order", "relaxed"}},
      {"grid", {"n", "L"}},
      {"time", {"dt", "T", "bootstrap"}},
      {"initial", {"type", "case", "lo", "hi", "seed", "value", "alpha", "epsilon"}},
      {"output", {"record_every", "snapshot_times"}},
  };
  return s;
}

inline void check_keys(const toml::table& doc) {
  for (const auto& [section, node] : doc) {
    const std::string name(section.str());
    const auto it = schema().find(name);
    if (it == schema().end()) throw ConfigError("unknown section [" + name + "]");
    const toml::table* tbl = node.as_table();
    if (!tbl) throw ConfigError("[" + name + "] must be a table");
    for (const auto& [key, v] : *tbl) {
      if (!it->second.count(std::string(key.str()))) {
        throw ConfigError("unknown key '" + name + "." + std::string(key.str()) + "'");
      }
    }
  }
}

class Reader {
 public:
  explicit Reader(const toml::table& doc) : doc_(doc) {}

  const toml::node* find(const std::string& section, const std::string& key) const {
    const toml::table* tbl = doc_[section].as_table();
    return tbl ? tbl->get(key) : nullptr;
  }

  std::optional<double> number(const std::string& section, const std::string& key) const {
    const toml::node* n = find(section, key);
    if (!n) return std::nullopt;
    if (auto v = n->value<double>()) return *v;
    throw ConfigError(section + "." + key + " must be a number");
  }

  std::optional<long long> integer(const std::string& section, const std::string& key) const {
    const toml::node* n = find(section, key);
    if (!n) return std::nullopt;
    if (n->is_integer()) return n->as_integer()->get();
    throw ConfigError(section + "." + key + " must be an integer");
  }

  std::optional<std::string> string(const std::string& section, const std::string& key) const {
    const toml::node* n = find(section, key);
    if (!n) return std::nullopt;
    if (n->is_string()) return n->as_string()->get();
    throw ConfigError(section + "." + key + " must be a string");
  }

  std::optional<bool> boolean(const std::string& section, const std::string& key) const {
    const toml::node* n = find(section, key);
    if (!n) return std::nullopt;
    if (n->is_boolean()) return n->as_boolean()->get();
    throw ConfigError(section + "." + key + " must be true or false");
  }

  std::vector<double> numbers(const std::string& section, const std::string& key) const {
    const toml::node* n = find(section, key);
    std::vector<double> out;
    if (!n) return out;
    const toml::array* arr = n->as_array();
    if (!arr) throw ConfigError(section + "." + key + " must be an array of numbers");
    for (const auto& e : *arr) {
      auto v = e.value<double>();
      if (!v) throw ConfigError(section + "." + key + " must be an array of numbers");
      out.push_back(*v);
    }
    return out;
  }

  template <class T>
  T require(std::optional<T> v, const std::string& name) const {
    if (!v) throw ConfigError("missing required key '" + name + "'");
    return *v;
  }

 private:
  const toml::table& doc_;
};

/// Parses the right-hand side of an override as a TOML value; bare words become strings.
inline void apply_override(toml::table& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string path = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  const auto dot = path.find('.');
  if (dot == std::string::npos) throw ConfigError("override key '" + path + "' must be section.key");
  const std::string section = path.substr(0, dot);
  const std::string key = path.substr(dot + 1);

  if (!doc.contains(section)) doc.insert(section, toml::table{});
  toml::table* tbl = doc[section].as_table();
  if (!tbl) throw ConfigError("[" + section + "] must be a table");
  try {
    toml::table parsed = toml::parse("v = " + raw);
    tbl->insert_or_assign(key, std::move(*parsed.get("v")));
  } catch (const toml::parse_error&) {
    tbl->insert_or_assign(key, raw);
  }
}

inline SchemeKind parse_scheme(const Reader& r) {
  const std::string name = r.require(r.string("scheme", "name"), "scheme.name");
  SchemeKind k;
  if (name == "sav") {
    k.family = Family::Sav;
  } else if (name == "gsav") {
    k.family = Family::Gsav;
  } else if (name == "pssav") {
    k.family = Family::Pssav;
  } else if (name == "rpssav") {
    k.family = Family::Pssav;
    k.relaxed = true;
  } else {
    throw ConfigError("unknown scheme '" + name + "'");
  }
  const long long order = r.integer("scheme", "order").value_or(1);
  if (order != 1 && order != 2) throw ConfigError("scheme.order must be 1 or 2");
  k.order = order == 1 ? Order::First : Order::Second;
  if (auto relaxed = r.boolean("scheme", "relaxed")) k.relaxed = k.relaxed || *relaxed;
  return k;
}

inline ModelSpec parse_model(const Reader& r) {
  const std::string type = r.require(r.string("model", "type"), "model.type");
  ModelSpec m;
  if (type == "allen-cahn") {
    m.flow = FlowKind::L2;
  } else if (type == "cahn-hilliard") {
    m.flow = FlowKind::Hm1;
  } else if (type == "mbe-slope" || type == "mbe-noslope") {
    m.a_kind = OperatorKind::Bilaplacian;
    m.potential = type == "mbe-slope" ? Potential::mbe_slope() : Potential::mbe_no_slope();
  } else {
    throw ConfigError("unknown model type '" + type + "'");
  }
  m.eps2 = r.require(r.number("model", "eps2"), "model.eps2");
  m.mobility = r.number("model", "M").value_or(1.0);
  if (auto scale = r.number("model", "scale")) {
    if (m.potential.acts_on_gradient()) throw ConfigError("model.scale applies to the double-well potential only");
    m.potential.scale = *scale;
  }
  if (auto c = r.number("model", "C")) m.energy_shift = *c;
  m.stabilizer = r.number("model", "s").value_or(1.0);
  m.dealias = r.boolean("model", "dealias").value_or(false);
  return m;
}

inline InitialCondition parse_initial(const Reader& r, std::uint64_t& seed) {
  InitialCondition ic;
  const std::string type = r.string("initial", "type").value_or("constant");
  if (type == "manufactured") {
    const std::string c = r.require(r.string("initial", "case"), "initial.case");
    if (c != "ac-a" && c != "ch-a") throw ConfigError("initial.case must be ac-a or ch-a");
    ic = InitialCondition::manufactured(c == "ac-a" ? ManufacturedCase::AcCaseA : ManufacturedCase::ChCaseA);
  } else if (type == "star") {
    ic = InitialCondition::star(r.number("initial", "alpha").value_or(1e-4));
  } else if (type == "circles") {
    ic = InitialCondition::circles(r.number("initial", "epsilon").value_or(0.0079));
  } else if (type == "random") {
    ic = InitialCondition::random_uniform(r.number("initial", "lo").value_or(-1e-3),
                                          r.number("initial", "hi").value_or(1e-3));
  } else if (type == "constant") {
    ic = InitialCondition::constant(r.number("initial", "value").value_or(0.0));
  } else {
    throw ConfigError("unknown initial type '" + type + "'");
  }
  if (auto s = r.integer("initial", "seed")) {
    if (*s < 0) throw ConfigError("initial.seed must be non-negative");
    seed = static_cast<std::uint64_t>(*s);
  }
  return ic;
}

inline RunConfig build(const toml::table& doc) {
  check_keys(doc);
  const Reader r(doc);
  RunConfig cfg;
  cfg.model = parse_model(r);
  cfg.scheme = parse_scheme(r);

  const long long n = r.require(r.integer("grid", "n"), "grid.n");
  const double length = r.require(r.number("grid", "L"), "grid.L");
  if (n < 4 || (n & (n - 1)) != 0) throw ConfigError("grid.n must be a power of two >= 4");
  if (!(length > 0.0)) throw ConfigError("grid.L must be positive");
  cfg.grid = Grid(static_cast<std::size_t>(n), length);

  cfg.dt = r.require(r.number("time", "dt"), "time.dt");
  cfg.t_final = r.require(r.number("time", "T"), "time.T");
  const std::string boot = r.string("time", "bootstrap").value_or("auto");
  if (boot == "auto") {
    cfg.bootstrap = Bootstrap::Auto;
  } else if (boot == "first-order") {
    cfg.bootstrap = Bootstrap::FirstOrder;
  } else if (boot == "exact") {
    cfg.bootstrap = Bootstrap::Exact;
  } else {
    throw ConfigError("time.bootstrap must be auto, first-order or exact");
  }

  cfg.initial = parse_initial(r, cfg.seed);
  if (auto every = r.integer("output", "record_every")) cfg.record_every = static_cast<long>(*every);
  cfg.snapshot_times = r.numbers("output", "snapshot_times");
  cfg.validate();
  return cfg;
}

inline toml::table parse_document(const std::string& text, const std::string& source) {
  try {
    return toml::parse(text, source);
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << source << ":" << e.source().begin.line << ":" << e.source().begin.column << ": " << e.description();
    throw ConfigError(msg.str());
  }
}

}  // namespace detail

inline RunConfig parse_config_string(const std::string& text, const std::vector<std::string>& overrides = {},
                                     const std::string& source = "<config>") {
  toml::table doc = detail::parse_document(text, source);
  for (const auto& o : overrides) detail::apply_override(doc, o);
  return detail::build(doc);
}

inline RunConfig parse_config(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_string(ss.str(), overrides, path.string());
}

}  // namespace gradflow::config
