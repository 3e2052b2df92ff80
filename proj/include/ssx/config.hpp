#pragma once

// Run configuration: a sectioned "key = value" text format.  Every key is
// declared once in a schema table that drives parsing, unknown-key
// rejection and the resolved-config echo.

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssx/error.hpp"
#include "ssx/grid.hpp"
#include "ssx/harness.hpp"

#ifndef SSX_VERSION
#define SSX_VERSION "0.0.0"
#endif

namespace ssx {

inline constexpr std::string_view kVersion = SSX_VERSION;
inline constexpr int kSchemaVersion = 1;

struct SimulateConfig {
  std::size_t paths = 8;
  std::string output = "ensemble";  // ensemble | sup | sojourn
  double u = 2.0;                   // level for sup / sojourn samples
};

struct ThetaSection {
  bool present = false;  // set by a [theta] header unless 'enabled = false'
  std::size_t r = 0;  // 0: experiment r
  std::vector<double> x_grid = {0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0};
  std::size_t draws = 100000;
  std::size_t batch = 4096;
  double step = 0.0;
  double horizon = 0.0;
  std::size_t pilot = 20000;
  double beyond_tol = 1e-3;
  bool refine = false;
  bool closed_form = false;  // prop2: use e^{-kappa r x} instead of sampling
};

struct ConditionsSection {
  std::vector<std::string> which = {"A", "B"};
  std::size_t samples = 20000;
  std::size_t batch = 2000;
  std::vector<double> a_levels = {3.0, 4.0, 5.0};
  std::vector<double> lags = {1.0};
  double u = 4.0;
  double d = 4.0;
  double a = 0.5;
  double sigma = 1.0;
  std::vector<double> t = {0.1, 0.2, 0.5, 1.0};
  std::vector<double> lambda = {0.3, 0.5, 1.0, 2.0};
  double v = 0.0;
  double rho = 0.0;  // 0: alpha / 2
  double lambda0 = 1.0;
};

struct RunConfig {
  int schema = kSchemaVersion;
  ExperimentSpec experiment;
  std::string prediction = "thm3";
  std::optional<double> theta_prime;
  double theta_prime_stderr = 0.0;
  SimulateConfig simulate;
  ThetaSection theta;
  ConditionsSection conditions;
  std::string out = "ssx-out";
};

namespace config_detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::string format(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <class T>
T parse_number(const std::string& v, int line, std::string_view key) {
  T out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) {
    throw ConfigError("invalid value '" + v + "' for key '" + std::string(key) + "'", line);
  }
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline std::vector<double> parse_doubles(const std::string& v, int line, std::string_view key) {
  std::vector<double> out;
  for (const auto& s : split_list(v)) out.push_back(parse_number<double>(s, line, key));
  if (out.empty()) throw ConfigError("key '" + std::string(key) + "' needs at least one value", line);
  return out;
}

inline bool parse_bool(const std::string& v, int line, std::string_view key) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError("invalid boolean '" + v + "' for key '" + std::string(key) + "'", line);
}

inline std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + format(xs[i]);
  return out;
}

inline std::string join(const std::vector<std::string>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? ", " : "") + xs[i];
  return out;
}

struct Key {
  std::string section;
  std::string name;
  std::function<void(RunConfig&, const std::string&, int)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <class T, class Get>
Key number_key(std::string section, std::string name, Get field) {
  return {section, name,
          [field, name](RunConfig& c, const std::string& v, int line) {
            field(c) = parse_number<T>(v, line, name);
          },
          [field](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>) {
              return format(field(c));
            } else {
              return std::to_string(field(c));
            }
          }};
}

template <class Get>
Key list_key(std::string section, std::string name, Get field) {
  return {section, name,
          [field, name](RunConfig& c, const std::string& v, int line) {
            field(c) = parse_doubles(v, line, name);
          },
          [field](const RunConfig& c) { return join(field(c)); }};
}

template <class Get>
Key string_key(std::string section, std::string name, Get field) {
  return {section, name,
          [field](RunConfig& c, const std::string& v, int) { field(c) = v; },
          [field](const RunConfig& c) { return field(c); }};
}

template <class Get>
Key bool_key(std::string section, std::string name, Get field) {
  return {section, name,
          [field, name](RunConfig& c, const std::string& v, int line) {
            field(c) = parse_bool(v, line, name);
          },
          [field](const RunConfig& c) {
            return std::string(field(c) ? "true" : "false");
          }};
}

inline const std::vector<Key>& schema() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    // [run]
    k.push_back(number_key<int>("run", "schema", [](auto& c) -> auto& { return c.schema; }));
    k.push_back(number_key<std::uint64_t>("run", "seed",
                                          [](auto& c) -> auto& { return c.experiment.seed; }));
    k.push_back(number_key<unsigned>("run", "workers",
                                     [](auto& c) -> auto& { return c.experiment.workers; }));
    k.push_back(string_key("run", "out", [](auto& c) -> auto& { return c.out; }));
    // [process]
    k.push_back(string_key("process", "kernel",
                           [](auto& c) -> auto& { return c.experiment.process.kernel; }));
    k.push_back(number_key<double>("process", "h",
                                   [](auto& c) -> auto& { return c.experiment.process.p1; }));
    k.push_back(number_key<double>("process", "k",
                                   [](auto& c) -> auto& { return c.experiment.process.p2; }));
    k.push_back(number_key<double>("process", "delta",
                                   [](auto& c) -> auto& { return c.experiment.process.delta; }));
    k.push_back(number_key<int>("process", "m",
                                [](auto& c) -> auto& { return c.experiment.process.m; }));
    // [experiment]
    k.push_back(number_key<std::size_t>("experiment", "n",
                                        [](auto& c) -> auto& { return c.experiment.n; }));
    k.push_back(number_key<std::size_t>("experiment", "r",
                                        [](auto& c) -> auto& { return c.experiment.r; }));
    k.push_back(list_key("experiment", "u",
                         [](auto& c) -> auto& { return c.experiment.u; }));
    k.push_back({"experiment", "layout",
                 [](RunConfig& c, const std::string& v, int line) {
                   try {
                     c.experiment.layout = parse_layout(v);
                   } catch (const Error& e) {
                     throw ConfigError(e.what(), line);
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.experiment.layout)); }});
    k.push_back(number_key<std::size_t>("experiment", "grid_n",
                                        [](auto& c) -> auto& { return c.experiment.grid_N; }));
    k.push_back(number_key<double>("experiment", "t_min",
                                   [](auto& c) -> auto& { return c.experiment.t_min; }));
    k.push_back(number_key<double>("experiment", "horizon",
                                   [](auto& c) -> auto& { return c.experiment.T; }));
    k.push_back({"experiment", "functional",
                 [](RunConfig& c, const std::string& v, int line) {
                   try {
                     c.experiment.functional = parse_functional(v);
                   } catch (const Error& e) {
                     throw ConfigError(e.what(), line);
                   }
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.experiment.functional)); }});
    k.push_back({"experiment", "estimator",
                 [](RunConfig& c, const std::string& v, int line) {
                   try {
                     c.experiment.estimator = parse_estimator(v);
                   } catch (const Error& e) {
                     throw ConfigError(e.what(), line);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.experiment.estimator == EstimatorKind::palm ? "palm" : "plain");
                 }});
    k.push_back(list_key("experiment", "x_grid",
                         [](auto& c) -> auto& { return c.experiment.x_grid; }));
    k.push_back(number_key<std::size_t>("experiment", "batches",
                                        [](auto& c) -> auto& { return c.experiment.batches; }));
    k.push_back(number_key<std::size_t>("experiment", "batch_size",
                                        [](auto& c) -> auto& { return c.experiment.batch_size; }));
    k.push_back(number_key<std::size_t>("experiment", "memory_limit",
                                        [](auto& c) -> auto& { return c.experiment.memory_limit; }));
    k.push_back({"experiment", "prediction",
                 [](RunConfig& c, const std::string& v, int line) {
                   try {
                     parse_prediction(v);
                   } catch (const Error& e) {
                     throw ConfigError(e.what(), line);
                   }
                   c.prediction = v;
                 },
                 [](const RunConfig& c) { return c.prediction; }});
    k.push_back({"experiment", "theta_prime",
                 [](RunConfig& c, const std::string& v, int line) {
                   c.theta_prime = parse_number<double>(v, line, "theta_prime");
                 },
                 [](const RunConfig& c) { return c.theta_prime ? format(*c.theta_prime) : std::string(); }});
    k.push_back(number_key<double>("experiment", "theta_prime_stderr",
                                   [](auto& c) -> auto& { return c.theta_prime_stderr; }));
    // [simulate]
    k.push_back(number_key<std::size_t>("simulate", "paths",
                                        [](auto& c) -> auto& { return c.simulate.paths; }));
    k.push_back({"simulate", "output",
                 [](RunConfig& c, const std::string& v, int line) {
                   if (v != "ensemble" && v != "sup" && v != "sojourn") {
                     throw ConfigError("output must be ensemble, sup or sojourn, not '" + v + "'", line);
                   }
                   c.simulate.output = v;
                 },
                 [](const RunConfig& c) { return c.simulate.output; }});
    k.push_back(number_key<double>("simulate", "u", [](auto& c) -> auto& { return c.simulate.u; }));
    // [theta]
    k.push_back(bool_key("theta", "enabled", [](auto& c) -> auto& { return c.theta.present; }));
    k.push_back(number_key<std::size_t>("theta", "r", [](auto& c) -> auto& { return c.theta.r; }));
    k.push_back(list_key("theta", "x_grid", [](auto& c) -> auto& { return c.theta.x_grid; }));
    k.push_back(number_key<std::size_t>("theta", "draws",
                                        [](auto& c) -> auto& { return c.theta.draws; }));
    k.push_back(number_key<std::size_t>("theta", "batch",
                                        [](auto& c) -> auto& { return c.theta.batch; }));
    k.push_back(number_key<double>("theta", "step", [](auto& c) -> auto& { return c.theta.step; }));
    k.push_back(number_key<double>("theta", "horizon", [](auto& c) -> auto& { return c.theta.horizon; }));
    k.push_back(number_key<std::size_t>("theta", "pilot",
                                        [](auto& c) -> auto& { return c.theta.pilot; }));
    k.push_back(number_key<double>("theta", "beyond_tol",
                                   [](auto& c) -> auto& { return c.theta.beyond_tol; }));
    k.push_back(bool_key("theta", "refine", [](auto& c) -> auto& { return c.theta.refine; }));
    k.push_back(bool_key("theta", "closed_form", [](auto& c) -> auto& { return c.theta.closed_form; }));
    // [conditions]
    k.push_back({"conditions", "which",
                 [](RunConfig& c, const std::string& v, int line) {
                   auto items = split_list(v);
                   for (const auto& s : items) {
                     if (s != "A" && s != "B" && s != "C" && s != "C*") {
                       throw ConfigError("unknown condition '" + s + "' (expected A, B, C or C*)", line);
                     }
                   }
                   if (items.empty()) throw ConfigError("key 'which' needs at least one condition", line);
                   c.conditions.which = std::move(items);
                 },
                 [](const RunConfig& c) { return join(c.conditions.which); }});
    k.push_back(number_key<std::size_t>("conditions", "samples",
                                        [](auto& c) -> auto& { return c.conditions.samples; }));
    k.push_back(number_key<std::size_t>("conditions", "batch",
                                        [](auto& c) -> auto& { return c.conditions.batch; }));
    k.push_back(list_key("conditions", "a_levels",
                         [](auto& c) -> auto& { return c.conditions.a_levels; }));
    k.push_back(list_key("conditions", "lags",
                         [](auto& c) -> auto& { return c.conditions.lags; }));
    k.push_back(number_key<double>("conditions", "u", [](auto& c) -> auto& { return c.conditions.u; }));
    k.push_back(number_key<double>("conditions", "d", [](auto& c) -> auto& { return c.conditions.d; }));
    k.push_back(number_key<double>("conditions", "a", [](auto& c) -> auto& { return c.conditions.a; }));
    k.push_back(number_key<double>("conditions", "sigma",
                                   [](auto& c) -> auto& { return c.conditions.sigma; }));
    k.push_back(list_key("conditions", "t", [](auto& c) -> auto& { return c.conditions.t; }));
    k.push_back(list_key("conditions", "lambda",
                         [](auto& c) -> auto& { return c.conditions.lambda; }));
    k.push_back(number_key<double>("conditions", "v", [](auto& c) -> auto& { return c.conditions.v; }));
    k.push_back(number_key<double>("conditions", "rho", [](auto& c) -> auto& { return c.conditions.rho; }));
    k.push_back(number_key<double>("conditions", "lambda0",
                                   [](auto& c) -> auto& { return c.conditions.lambda0; }));
    return k;
  }();
  return keys;
}

}  // namespace config_detail

/// Parses the config text.  Errors name the offending line.
inline RunConfig parse_config(std::istream& in) {
  using namespace config_detail;
  RunConfig cfg;
  std::string section;
  std::map<std::string, int> seen;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find_first_of("#;");
    const std::string text = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError("malformed section header '" + text + "'", line);
      section = trim(std::string_view(text).substr(1, text.size() - 2));
      const bool known = std::any_of(schema().begin(), schema().end(),
                                     [&](const Key& k) { return k.section == section; });
      if (!known) throw ConfigError("unknown section [" + section + "]", line);
      if (section == "theta") cfg.theta.present = true;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError("expected 'key = value', got '" + text + "'", line);
    const std::string key = trim(std::string_view(text).substr(0, eq));
    const std::string value = trim(std::string_view(text).substr(eq + 1));
    if (section.empty()) throw ConfigError("key '" + key + "' appears before any section header", line);
    const auto it = std::find_if(schema().begin(), schema().end(),
                                 [&](const Key& k) { return k.section == section && k.name == key; });
    if (it == schema().end()) {
      throw ConfigError("unknown key '" + key + "' in section [" + section + "]", line);
    }
    const std::string id = section + "." + key;
    if (const auto prev = seen.find(id); prev != seen.end()) {
      throw ConfigError("duplicate key '" + key + "' (first set on line " +
                            std::to_string(prev->second) + ")",
                        line);
    }
    seen[id] = line;
    if (value.empty()) throw ConfigError("key '" + key + "' has no value", line);
    it->set(cfg, value, line);
  }
  if (cfg.schema != kSchemaVersion) {
    throw ConfigError("unsupported schema version " + std::to_string(cfg.schema) + " (expected " +
                      std::to_string(kSchemaVersion) + ")", seen.count("run.schema") ? seen["run.schema"] : 0);
  }
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  try {
    return parse_config(in);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

/// Every key with its resolved value, defaults included, plus the version.
inline void write_resolved_config(const RunConfig& cfg, std::ostream& os) {
  using namespace config_detail;
  os << "# resolved configuration, ssx " << kVersion << '\n';
  std::string section;
  for (const auto& k : schema()) {
    if (k.section != section) {
      os << (section.empty() ? "" : "\n") << '[' << k.section << "]\n";
      section = k.section;
    }
    const std::string v = k.get(cfg);
    if (v.empty()) {
      os << "# " << k.name << " = (unset)\n";
    } else {
      os << k.name << " = " << v << '\n';
    }
  }
}

}  // namespace ssx
