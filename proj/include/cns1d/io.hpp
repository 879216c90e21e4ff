#pragma once

// Artifact persistence. Everything written here is deterministic for a
// fixed resolved configuration and seed: no timestamps, no machine state,
// locale-independent number formatting. Every artifact embeds the config
// digest so downstream tooling can refuse to mix runs.
//
// Trajectory CSV column order is part of the external contract:
//   t, H, E, grad_u_sq, grad_logrho_sq, diss_u_cum, diss_logrho_cum,
//   psi, psi_sup, mass, min_rho, max_rho
// Values use 17 significant digits, so binary64 round-trips exactly.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "config.hpp"
#include "field.hpp"
#include "solver.hpp"
#include "stats.hpp"

namespace cns1d {

inline std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string fmt10(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

// Exponential tail rate of the compensated Psi supremum; infinite without
// forcing (the unforced statistic never exceeds zero).
inline double gamma_rate(double A, double sigma_sup_sq) {
  if (sigma_sup_sq <= 0.0) return std::numeric_limits<double>::infinity();
  return std::min(1.0, 4.0 * A * A) / (2.0 * sigma_sup_sq);
}

// Metadata block embedded in every artifact.
inline json make_meta(const RunConfig& c) {
  const NoiseBasis basis = build_noise(make_grid(c.n_cells), c.K, c.sigma0,
                                       c.p);
  const double g0 = gamma_rate(c.A, basis.sup_sq);
  json m;
  m["config_hash"] = c.config_hash;
  m["seed"] = c.seed;
  m["sigma_sup_sq"] = basis.sup_sq;
  m["gamma0"] = std::isfinite(g0) ? json(g0) : json(nullptr);
  m["A"] = c.A;
  m["n_cells"] = c.n_cells;
  m["dx"] = make_grid(c.n_cells).dx;
  m["dt"] = c.dt;
  m["cfl_max"] = c.cfl_max;
  m["K"] = c.K;
  m["p"] = c.p;
  m["sigma0"] = c.sigma0;
  m["M"] = c.M;
  m["T"] = c.T;
  m["T0"] = c.T0;
  m["stride"] = c.stride;
  return m;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open \"" + path.string() + "\" for writing");
  out << text;
  if (!out) throw Error("write failed for \"" + path.string() + "\"");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open \"" + path.string() + "\"");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_config_artifact(const std::filesystem::path& dir,
                                  const RunConfig& c) {
  json doc;
  doc["config_hash"] = c.config_hash;
  doc["config"] = json::parse(c.canonical);
  write_text_file(dir / "config.json", doc.dump(2) + "\n");
}

// ============================================================================
// Trajectory CSV
// ============================================================================

inline std::string csv_preamble(const RunConfig& c, int trajectory_id) {
  const json meta = make_meta(c);
  std::string s;
  s += "# config_hash: " + c.config_hash + "\n";
  s += "# trajectory_id: " + std::to_string(trajectory_id) + "\n";
  s += "# seed: " + std::to_string(c.seed) + "\n";
  s += "# sigma_sup_sq: " + fmt17(meta.at("sigma_sup_sq").get<double>()) +
       "\n";
  s += "# gamma0: " +
       (meta.at("gamma0").is_null() ? std::string("inf")
                                    : fmt17(meta.at("gamma0").get<double>())) +
       "\n";
  s += "# A: " + fmt17(c.A) + "\n";
  s += "# n_cells: " + std::to_string(c.n_cells) + "\n";
  s += "# dt: " + fmt17(c.dt) + "\n";
  s += "# stride: " + fmt17(c.stride) + "\n";
  s += "t,H,E,grad_u_sq,grad_logrho_sq,diss_u_cum,diss_logrho_cum,psi,"
       "psi_sup,mass,min_rho,max_rho\n";
  return s;
}

inline std::string csv_row(const Sample& s) {
  std::string r;
  r += fmt17(s.t);
  r += ',';
  r += fmt17(s.f.H);
  r += ',';
  r += fmt17(s.f.E);
  r += ',';
  r += fmt17(s.f.grad_u_sq);
  r += ',';
  r += fmt17(s.f.grad_logrho_sq);
  r += ',';
  r += fmt17(s.diss_u_cum);
  r += ',';
  r += fmt17(s.diss_logrho_cum);
  r += ',';
  r += fmt17(s.psi);
  r += ',';
  r += fmt17(s.psi_sup);
  r += ',';
  r += fmt17(s.mass);
  r += ',';
  r += fmt17(s.f.min_rho);
  r += ',';
  r += fmt17(s.f.max_rho);
  r += '\n';
  return r;
}

// ============================================================================
// State snapshots
// ============================================================================

inline json state_to_json(const State& s) {
  json j;
  j["time"] = s.time;
  j["n_cells"] = s.grid.n_cells;
  j["rho"] = s.rho;
  j["u"] = s.u;
  return j;
}

inline State state_from_json(const json& j) {
  State s;
  s.grid = make_grid(j.at("n_cells").get<int>());
  s.rho = j.at("rho").get<std::vector<double>>();
  s.u = j.at("u").get<std::vector<double>>();
  s.time = j.at("time").get<double>();
  validate_state(s);
  return s;
}

inline void write_snapshot(const std::filesystem::path& path, const State& s,
                           const std::string& config_hash) {
  json j = state_to_json(s);
  j["config_hash"] = config_hash;
  write_text_file(path, j.dump() + "\n");
}

inline State read_snapshot(const std::filesystem::path& path,
                           std::string* config_hash = nullptr) {
  const json j = json::parse(read_text_file(path));
  if (config_hash) *config_hash = j.at("config_hash").get<std::string>();
  return state_from_json(j);
}

// ============================================================================
// Checkpoints
// ============================================================================

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string config_hash;
  int trajectory_id = 0;
  std::uint64_t seed = 0;
  long long step_index = 0;
  State state;
  double diss_u_cum = 0.0;
  double diss_logrho_cum = 0.0;
  double psi_sup = 0.0;
  double mart_sup = 0.0;
  double max_mass_dev = 0.0;
  double min_rho_seen = 0.0;
  double H0 = 0.0;
  double E0 = 0.0;
  long long csv_rows = 0;  // data rows already written at this point
};

inline void write_checkpoint(const std::filesystem::path& path,
                             const Checkpoint& c) {
  json j;
  j["checkpoint_version"] = kCheckpointVersion;
  j["config_hash"] = c.config_hash;
  j["trajectory_id"] = c.trajectory_id;
  j["seed"] = c.seed;
  j["step_index"] = c.step_index;
  j["state"] = state_to_json(c.state);
  j["diss_u_cum"] = c.diss_u_cum;
  j["diss_logrho_cum"] = c.diss_logrho_cum;
  j["psi_sup"] = c.psi_sup;
  j["mart_sup"] = c.mart_sup;
  j["max_mass_dev"] = c.max_mass_dev;
  j["min_rho_seen"] = c.min_rho_seen;
  j["H0"] = c.H0;
  j["E0"] = c.E0;
  j["csv_rows"] = c.csv_rows;
  write_text_file(path, j.dump() + "\n");
}

inline Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const json j = json::parse(read_text_file(path));
  const int version = j.at("checkpoint_version").get<int>();
  if (version != kCheckpointVersion) {
    throw ConfigError("checkpoint \"" + path.string() + "\": version " +
                      std::to_string(version) + " unsupported (expected " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  Checkpoint c;
  c.config_hash = j.at("config_hash").get<std::string>();
  c.trajectory_id = j.at("trajectory_id").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.step_index = j.at("step_index").get<long long>();
  c.state = state_from_json(j.at("state"));
  c.diss_u_cum = j.at("diss_u_cum").get<double>();
  c.diss_logrho_cum = j.at("diss_logrho_cum").get<double>();
  c.psi_sup = j.at("psi_sup").get<double>();
  c.mart_sup = j.at("mart_sup").get<double>();
  c.max_mass_dev = j.at("max_mass_dev").get<double>();
  c.min_rho_seen = j.at("min_rho_seen").get<double>();
  c.H0 = j.at("H0").get<double>();
  c.E0 = j.at("E0").get<double>();
  c.csv_rows = j.at("csv_rows").get<long long>();
  return c;
}

// ============================================================================
// Verdict tables
// ============================================================================

struct VerdictRow {
  std::string name;    // what is being checked
  std::string anchor;  // stable internal identifier of the inequality
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;  // lhs - rhs (or a named margin; <= 0 passes)
  bool pass = false;
};

inline json verdicts_to_json(const std::vector<VerdictRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json j;
    j["name"] = r.name;
    j["anchor"] = r.anchor;
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["slack"] = r.slack;
    j["pass"] = r.pass;
    arr.push_back(j);
  }
  return arr;
}

inline std::string render_table(const std::vector<std::string>& header,
                                const std::vector<std::vector<std::string>>&
                                    rows) {
  std::vector<size_t> w(header.size());
  for (size_t c = 0; c < header.size(); ++c) w[c] = header[c].size();
  for (const auto& row : rows) {
    for (size_t c = 0; c < row.size() && c < w.size(); ++c) {
      w[c] = std::max(w[c], row[c].size());
    }
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string s;
    for (size_t c = 0; c < cells.size(); ++c) {
      s += cells[c];
      if (c + 1 < cells.size()) {
        s += std::string(w[c] - cells[c].size() + 2, ' ');
      }
    }
    while (!s.empty() && s.back() == ' ') s.pop_back();
    return s + "\n";
  };
  std::string out = line(header);
  size_t total = 0;
  for (size_t c = 0; c < w.size(); ++c) total += w[c] + (c + 1 < w.size() ? 2 : 0);
  out += std::string(total, '-') + "\n";
  for (const auto& row : rows) out += line(row);
  return out;
}

inline std::string verdicts_to_text(const std::vector<VerdictRow>& rows) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& r : rows) {
    cells.push_back({r.name, r.anchor, fmt10(r.lhs), fmt10(r.rhs),
                     fmt10(r.slack), r.pass ? "PASS" : "FAIL"});
  }
  return render_table({"name", "anchor", "lhs", "rhs", "slack", "verdict"},
                      cells);
}

inline std::string meta_preamble(const json& meta) {
  std::string s;
  s += "# config_hash: " + meta.at("config_hash").get<std::string>() + "\n";
  s += "# seed: " + std::to_string(meta.at("seed").get<std::uint64_t>()) +
       "\n";
  s += "# sigma_sup_sq: " + fmt17(meta.at("sigma_sup_sq").get<double>()) +
       "\n";
  s += "# gamma0: " +
       (meta.at("gamma0").is_null() ? std::string("inf")
                                    : fmt17(meta.at("gamma0").get<double>())) +
       "\n";
  s += "# A: " + fmt17(meta.at("A").get<double>()) +
       ", n_cells: " + std::to_string(meta.at("n_cells").get<int>()) +
       ", dt: " + fmt17(meta.at("dt").get<double>()) + "\n";
  return s;
}

// ============================================================================
// Report serialization
// ============================================================================

inline json ensemble_summary_to_json(const EnsembleSummary& s) {
  json j;
  j["M"] = s.M;
  j["H0"] = s.H0;
  j["E0"] = s.E0;
  j["sigma_sup_sq"] = s.sigma_sup_sq;
  j["slack_sigmas"] = s.slack_sigmas;
  j["entropy_holds"] = s.entropy_holds;
  j["energy_holds"] = s.energy_holds;
  j["psi_sup_moment1"] = s.psi_sup_moment1;
  j["psi_sup_moment2"] = s.psi_sup_moment2;
  j["psi_sup_moment4"] = s.psi_sup_moment4;
  auto rows = [](const std::vector<MeanBoundRow>& v) {
    json arr = json::array();
    for (const auto& r : v) {
      json e;
      e["t"] = r.t;
      e["lhs_mean"] = r.lhs_mean;
      e["lhs_se"] = r.lhs_se;
      e["rhs"] = r.rhs;
      e["pass"] = r.holds;
      arr.push_back(e);
    }
    return arr;
  };
  j["entropy_rows"] = rows(s.entropy);
  j["energy_rows"] = rows(s.energy);
  return j;
}

inline std::string ensemble_summary_to_text(const EnsembleSummary& s) {
  std::vector<std::vector<std::string>> cells;
  auto add = [&](const char* which, const MeanBoundRow& r) {
    cells.push_back({which, fmt10(r.t), fmt10(r.lhs_mean), fmt10(r.lhs_se),
                     fmt10(r.rhs), r.holds ? "PASS" : "FAIL"});
  };
  for (const auto& r : s.entropy) add("entropy-dissipation", r);
  for (const auto& r : s.energy) add("energy-dissipation", r);
  std::string out = render_table(
      {"inequality", "t", "lhs_mean", "stderr", "rhs", "verdict"}, cells);
  out += "psi_sup moments: m1 " + fmt10(s.psi_sup_moment1) + ", m2 " +
         fmt10(s.psi_sup_moment2) + ", m4 " + fmt10(s.psi_sup_moment4) + "\n";
  return out;
}

inline json tightness_to_json(const TightnessReport& r) {
  json j;
  j["sigma_sup_sq"] = r.sigma_sup_sq;
  j["A"] = r.A;
  j["n_samples"] = r.n_samples;
  json arr = json::array();
  for (const auto& row : r.rows) {
    json e;
    e["R"] = row.R;
    e["S_R"] = row.S_R;
    e["mu_K"] = row.mu_K;
    e["mu_C"] = row.mu_C;
    e["lower_bound"] = row.lower_bound;
    arr.push_back(e);
  }
  j["rows"] = arr;
  return j;
}

inline std::string tightness_to_text(const TightnessReport& r) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : r.rows) {
    cells.push_back({fmt10(row.R), fmt10(row.S_R), fmt10(row.mu_K),
                     fmt10(row.mu_C), fmt10(row.lower_bound)});
  }
  return render_table({"R", "S_R", "mu(K_R)", "mu(C_S_R)", "lower_bound"},
                      cells);
}

inline json martingale_to_json(const MartingaleReport& r) {
  json j;
  j["gamma0"] = r.gamma0;
  j["M"] = r.M;
  json arr = json::array();
  for (const auto& row : r.rows) {
    json e;
    e["R"] = row.R;
    e["freq"] = row.freq;
    e["se"] = row.se;
    e["bound"] = row.bound;
    arr.push_back(e);
  }
  j["rows"] = arr;
  return j;
}

inline std::string martingale_to_text(const MartingaleReport& r) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : r.rows) {
    cells.push_back(
        {fmt10(row.R), fmt10(row.freq), fmt10(row.se), fmt10(row.bound)});
  }
  std::string out = "gamma0: " + fmt10(r.gamma0) + ", trajectories: " +
                    std::to_string(r.M) + "\n";
  out += render_table({"R", "exceedance", "stderr", "e^{-gamma0 R}"}, cells);
  return out;
}

inline json lowmach_to_json(const LowMachReport& r) {
  json j;
  j["eta"] = r.eta;
  json arr = json::array();
  for (const auto& row : r.rows) {
    json e;
    e["A"] = row.A;
    e["sigma0"] = row.sigma0;
    e["sigma_sup_sq"] = row.sigma_sup_sq;
    e["rho_dev_mean"] = row.rho_dev_mean;
    e["rho_dev_se"] = row.rho_dev_se;
    e["u_mean"] = row.u_mean;
    e["u_se"] = row.u_se;
    arr.push_back(e);
  }
  j["rows"] = arr;
  return j;
}

inline std::string lowmach_to_text(const LowMachReport& r) {
  std::vector<std::vector<std::string>> cells;
  for (const auto& row : r.rows) {
    cells.push_back({fmt10(row.A), fmt10(row.sigma0),
                     fmt10(row.sigma_sup_sq), fmt10(row.rho_dev_mean),
                     fmt10(row.rho_dev_se), fmt10(row.u_mean),
                     fmt10(row.u_se)});
  }
  std::string out = "eta: " + fmt10(r.eta) + "\n";
  out += render_table({"A", "sigma0", "sigma_sup_sq", "||rho-1|| mean",
                       "stderr", "||u|| mean", "stderr"},
                      cells);
  return out;
}

}  // namespace cns1d
