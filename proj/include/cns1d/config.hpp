#pragma once

// Run configuration: a flat JSON object with strict parsing (duplicate and
// unknown keys rejected), typed validation with field-level messages,
// repeatable key=value overrides, and a canonical digest so every artifact
// can be traced back to the exact resolved configuration that produced it.

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "field.hpp"
#include "noise.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace cns1d {

using nlohmann::json;

struct RunConfig {
  // model / grid / stepping
  double A = 1.0;
  int n_cells = 0;
  double dt = 0.0;
  double cfl_max = 0.5;
  // noise
  int K = 4;
  double p = 3.0;
  double sigma0 = 0.0;       // resolved: if sigma_sup_sq was given, this is
                             // the tuned amplitude
  bool sigma_from_target = false;
  double sigma_sup_sq_target = 0.0;
  // ensemble
  int M = 1;
  double T = 0.0;
  double T0 = 0.0;
  double stride = 0.0;       // resolved to a positive multiple of dt
  std::uint64_t seed = 0;
  // initial data
  InitSpec init;
  // output
  std::string out_dir = "out";
  double snapshot_stride = 0.0;  // 0: no intermediate snapshots
  // scan / report parameters
  std::vector<double> A_list{1.0, 2.0, 4.0, 8.0};
  double eta = 1.0;
  std::vector<double> R_list;  // empty: subcommand default

  std::string canonical;     // canonical resolved JSON text
  std::string config_hash;   // FNV-1a 64 digest of `canonical`, hex
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys{
      "A",        "n_cells",       "dt",           "cfl_max",
      "K",        "p",             "sigma0",       "sigma_sup_sq",
      "M",        "T",             "T0",           "stride",
      "seed",     "init_kind",     "init_rho_amp", "init_rho_waves",
      "init_u_amp", "init_u_waves", "out_dir",     "snapshot_stride",
      "A_list",   "eta",           "R_list",
  };
  return keys;
}

// Strict parse: rejects duplicate keys, which nlohmann otherwise resolves
// silently (last value wins).
inline json parse_strict_json(const std::string& text,
                              const std::string& where) {
  std::vector<std::set<std::string>> stack;
  auto cb = [&stack, &where](int /*depth*/, json::parse_event_t event,
                             json& parsed) -> bool {
    switch (event) {
      case json::parse_event_t::object_start:
        stack.emplace_back();
        break;
      case json::parse_event_t::object_end:
        stack.pop_back();
        break;
      case json::parse_event_t::key: {
        const std::string key = parsed.get<std::string>();
        if (!stack.back().insert(key).second) {
          throw ConfigError(where + ": duplicate key \"" + key + "\"");
        }
        break;
      }
      default:
        break;
    }
    return true;
  };
  try {
    return json::parse(text, cb, /*allow_exceptions=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError(where + ": invalid JSON: " + e.what());
  }
}

inline double require_number(const json& j, const std::string& key) {
  if (!j.at(key).is_number()) {
    throw ConfigError("config: \"" + key + "\" must be a number");
  }
  return j.at(key).get<double>();
}

inline int require_int(const json& j, const std::string& key) {
  if (!j.at(key).is_number_integer()) {
    throw ConfigError("config: \"" + key + "\" must be an integer");
  }
  return j.at(key).get<int>();
}

inline std::uint64_t require_u64(const json& j, const std::string& key) {
  const json& v = j.at(key);
  if (!(v.is_number_unsigned() ||
        (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
    throw ConfigError("config: \"" + key +
                      "\" must be a nonnegative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::vector<double> require_number_array(const json& j,
                                                const std::string& key) {
  const json& v = j.at(key);
  if (!v.is_array() || v.empty()) {
    throw ConfigError("config: \"" + key +
                      "\" must be a nonempty array of numbers");
  }
  std::vector<double> out;
  for (const auto& e : v) {
    if (!e.is_number()) {
      throw ConfigError("config: \"" + key +
                        "\" must be a nonempty array of numbers");
    }
    out.push_back(e.get<double>());
  }
  return out;
}

// Snap `value` to the nearest multiple of dt; reject if it is not within
// relative tolerance of one.
inline double snap_to_dt(double value, double dt, const std::string& key) {
  const long long k = std::llround(value / dt);
  if (k < 1 || std::abs(k * dt - value) > 1e-9 * std::max(1.0, value)) {
    throw ConfigError("config: \"" + key + "\" (" + std::to_string(value) +
                      ") must be a positive multiple of dt");
  }
  return static_cast<double>(k) * dt;
}

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[v & 0xF];
    v >>= 4;
  }
  return s;
}

}  // namespace detail

// Parse "key=value" override; the value is interpreted as JSON when it
// parses as a scalar or array, and as a plain string otherwise.
inline void apply_override(json& j, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override \"" + assignment +
                      "\" is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string value = assignment.substr(eq + 1);
  if (!detail::known_config_keys().count(key)) {
    throw ConfigError("override: unknown key \"" + key + "\"");
  }
  json parsed = json::parse(value, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded() || parsed.is_object()) {
    j[key] = value;  // treat as string
  } else {
    j[key] = parsed;
  }
}

inline RunConfig resolve_config(const json& raw) {
  if (!raw.is_object()) {
    throw ConfigError("config: top level must be a JSON object");
  }
  for (const auto& item : raw.items()) {
    if (!detail::known_config_keys().count(item.key())) {
      throw ConfigError("config: unknown key \"" + item.key() + "\"");
    }
  }
  for (const char* req : {"A", "n_cells", "dt", "M", "T", "seed"}) {
    if (!raw.contains(req)) {
      throw ConfigError(std::string("config: missing required key \"") + req +
                        "\"");
    }
  }

  RunConfig c;
  c.A = detail::require_number(raw, "A");
  if (!(c.A > 0.0)) throw ConfigError("config: \"A\" must be positive");
  c.n_cells = detail::require_int(raw, "n_cells");
  if (c.n_cells < 8) {
    throw ConfigError("config: \"n_cells\" must be at least 8");
  }
  c.dt = detail::require_number(raw, "dt");
  if (!(c.dt > 0.0)) throw ConfigError("config: \"dt\" must be positive");
  c.M = detail::require_int(raw, "M");
  if (c.M < 1) throw ConfigError("config: \"M\" must be at least 1");
  c.T = detail::require_number(raw, "T");
  if (!(c.T > 0.0)) throw ConfigError("config: \"T\" must be positive");
  c.seed = detail::require_u64(raw, "seed");

  if (raw.contains("cfl_max")) {
    c.cfl_max = detail::require_number(raw, "cfl_max");
  }
  if (!(c.cfl_max > 0.0 && c.cfl_max <= 1.0)) {
    throw ConfigError("config: \"cfl_max\" must be in (0, 1]");
  }
  if (raw.contains("K")) c.K = detail::require_int(raw, "K");
  if (c.K < 1) throw ConfigError("config: \"K\" must be at least 1");
  if (raw.contains("p")) c.p = detail::require_number(raw, "p");
  if (!(c.p >= 3.0)) {
    throw ConfigError(
        "config: \"p\" must be at least 3 (mode amplitudes l^-p need p >= 3 "
        "for a forcing with two square-integrable derivatives)");
  }

  const bool has_sigma0 = raw.contains("sigma0");
  const bool has_target = raw.contains("sigma_sup_sq");
  if (has_sigma0 && has_target) {
    throw ConfigError(
        "config: \"sigma0\" and \"sigma_sup_sq\" are mutually exclusive");
  }
  if (has_target) {
    c.sigma_sup_sq_target = detail::require_number(raw, "sigma_sup_sq");
    if (!(c.sigma_sup_sq_target > 0.0)) {
      throw ConfigError("config: \"sigma_sup_sq\" must be positive");
    }
    c.sigma_from_target = true;
    c.sigma0 = tune_sigma0(make_grid(c.n_cells), c.K, c.p,
                           c.sigma_sup_sq_target);
  } else if (has_sigma0) {
    c.sigma0 = detail::require_number(raw, "sigma0");
    if (c.sigma0 < 0.0) {
      throw ConfigError("config: \"sigma0\" must be nonnegative");
    }
  }

  if (raw.contains("T0")) c.T0 = detail::require_number(raw, "T0");
  if (c.T0 < 0.0 || c.T0 >= c.T) {
    throw ConfigError("config: \"T0\" must satisfy 0 <= T0 < T");
  }
  const double stride_req =
      raw.contains("stride") ? detail::require_number(raw, "stride") : 0.0;
  if (stride_req < 0.0) {
    throw ConfigError("config: \"stride\" must be nonnegative");
  }
  c.stride = stride_req > 0.0
                 ? detail::snap_to_dt(stride_req, c.dt, "stride")
                 : static_cast<double>(stride_steps_for(0.0, c.T, c.dt)) * c.dt;
  {
    // the horizon must land on a step and T0 on a sampling point
    (void)detail::snap_to_dt(c.T, c.dt, "T");
    if (c.T0 > 0.0) {
      const double q = c.T0 / c.stride;
      if (std::abs(q - std::llround(q)) > 1e-9) {
        throw ConfigError(
            "config: \"T0\" must be a multiple of the sampling stride");
      }
    }
  }

  std::string kind = "uniform";
  if (raw.contains("init_kind")) {
    if (!raw.at("init_kind").is_string()) {
      throw ConfigError("config: \"init_kind\" must be a string");
    }
    kind = raw.at("init_kind").get<std::string>();
  }
  if (kind == "uniform") {
    c.init.kind = InitSpec::Kind::Uniform;
  } else if (kind == "sine") {
    c.init.kind = InitSpec::Kind::Sine;
  } else {
    throw ConfigError("config: \"init_kind\" must be \"uniform\" or \"sine\"");
  }
  if (raw.contains("init_rho_amp")) {
    c.init.rho_amp = detail::require_number(raw, "init_rho_amp");
  }
  if (std::abs(c.init.rho_amp) >= 1.0) {
    throw ConfigError("config: \"init_rho_amp\" must lie in (-1, 1)");
  }
  if (raw.contains("init_rho_waves")) {
    c.init.rho_waves = detail::require_int(raw, "init_rho_waves");
  }
  if (c.init.rho_waves < 1) {
    throw ConfigError("config: \"init_rho_waves\" must be at least 1");
  }
  if (raw.contains("init_u_amp")) {
    c.init.u_amp = detail::require_number(raw, "init_u_amp");
  }
  if (raw.contains("init_u_waves")) {
    c.init.u_waves = detail::require_int(raw, "init_u_waves");
  }
  if (c.init.u_waves < 1) {
    throw ConfigError("config: \"init_u_waves\" must be at least 1");
  }

  if (raw.contains("out_dir")) {
    if (!raw.at("out_dir").is_string()) {
      throw ConfigError("config: \"out_dir\" must be a string");
    }
    c.out_dir = raw.at("out_dir").get<std::string>();
  }
  if (raw.contains("snapshot_stride")) {
    c.snapshot_stride = detail::require_number(raw, "snapshot_stride");
    if (c.snapshot_stride < 0.0) {
      throw ConfigError("config: \"snapshot_stride\" must be nonnegative");
    }
    if (c.snapshot_stride > 0.0) {
      c.snapshot_stride =
          detail::snap_to_dt(c.snapshot_stride, c.dt, "snapshot_stride");
    }
  }
  if (raw.contains("A_list")) {
    c.A_list = detail::require_number_array(raw, "A_list");
  }
  for (double a : c.A_list) {
    if (!(a > 0.0)) {
      throw ConfigError("config: \"A_list\" entries must be positive");
    }
  }
  if (raw.contains("eta")) c.eta = detail::require_number(raw, "eta");
  if (raw.contains("R_list")) {
    c.R_list = detail::require_number_array(raw, "R_list");
    for (double r : c.R_list) {
      if (!(r > 0.0)) {
        throw ConfigError("config: \"R_list\" entries must be positive");
      }
    }
  }

  // Canonical resolved form: every key that affects computed results is
  // explicit; keys steering only where artifacts land (out_dir,
  // snapshot_stride) are excluded so relocating a run does not change its
  // identity. Object keys are sorted by nlohmann's std::map representation.
  json canon;
  canon["A"] = c.A;
  canon["n_cells"] = c.n_cells;
  canon["dt"] = c.dt;
  canon["cfl_max"] = c.cfl_max;
  canon["K"] = c.K;
  canon["p"] = c.p;
  canon["sigma0"] = c.sigma0;
  canon["sigma_from_target"] = c.sigma_from_target;
  canon["sigma_sup_sq_target"] = c.sigma_sup_sq_target;
  canon["M"] = c.M;
  canon["T"] = c.T;
  canon["T0"] = c.T0;
  canon["stride"] = c.stride;
  canon["seed"] = c.seed;
  canon["init_kind"] = kind;
  canon["init_rho_amp"] = c.init.rho_amp;
  canon["init_rho_waves"] = c.init.rho_waves;
  canon["init_u_amp"] = c.init.u_amp;
  canon["init_u_waves"] = c.init.u_waves;
  canon["A_list"] = c.A_list;
  canon["eta"] = c.eta;
  canon["R_list"] = c.R_list;
  c.canonical = canon.dump();
  c.config_hash = detail::hex64(detail::fnv1a64(c.canonical));
  return c;
}

inline RunConfig load_config(const std::string& path,
                             const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open \"" + path + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  json raw = detail::parse_strict_json(buf.str(), "config " + path);
  for (const auto& ov : overrides) apply_override(raw, ov);
  return resolve_config(raw);
}

inline RunConfig config_from_text(const std::string& text,
                                  const std::vector<std::string>& overrides =
                                      {}) {
  json raw = detail::parse_strict_json(text, "config");
  for (const auto& ov : overrides) apply_override(raw, ov);
  return resolve_config(raw);
}

// Ensemble view of a resolved config; `workers` comes from the CLI.
inline EnsembleConfig make_ensemble_config(const RunConfig& c,
                                           int workers = 0) {
  EnsembleConfig e;
  e.grid = make_grid(c.n_cells);
  e.params.A = c.A;
  e.step.dt = c.dt;
  e.step.cfl_max = c.cfl_max;
  e.noise.K = c.K;
  e.noise.sigma0 = c.sigma0;
  e.noise.p = c.p;
  e.init = c.init;
  e.M = c.M;
  e.T = c.T;
  e.T0 = c.T0;
  e.stride = c.stride;
  e.seed = c.seed;
  e.workers = workers;
  e.snapshot_stride_steps =
      c.snapshot_stride > 0.0 ? std::llround(c.snapshot_stride / c.dt) : 0;
  return e;
}

}  // namespace cns1d
