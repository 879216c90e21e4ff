#pragma once

// Staggered 1D grid on the unit interval. Density lives at the n cell
// centers x_j = (j + 1/2) dx, velocity at the n+1 cell faces x_i = i dx,
// with homogeneous Dirichlet velocity at both walls. Quadratures over
// centers are midpoint sums. Quadratures over interior faces close the two
// boundary half-cells with the nearest interior value, which keeps them
// second order for smooth integrands that do not vanish at the walls.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cns1d {

// ============================================================================
// Errors
// ============================================================================

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid inputs or broken state invariants.
struct ValidationError : Error {
  using Error::Error;
};

// Bad run configuration (config file / CLI level).
struct ConfigError : Error {
  using Error::Error;
};

// Time-step failure. Carries the step index once known and the offending
// cell for positivity violations (-1 when not applicable).
struct StepError : Error {
  StepError(const std::string& msg, long long step = -1, int cell = -1)
      : Error(msg), step_index(step), cell(cell) {}
  long long step_index;
  int cell;
};

// ============================================================================
// Grid
// ============================================================================

struct GridSpec {
  int n_cells = 0;
  double dx = 0.0;

  int n_faces() const { return n_cells + 1; }
  double x_center(int j) const { return (j + 0.5) * dx; }
  double x_face(int i) const { return i * dx; }

  bool operator==(const GridSpec& o) const {
    return n_cells == o.n_cells && dx == o.dx;
  }
};

inline GridSpec make_grid(int n_cells) {
  if (n_cells < 8) {
    throw ValidationError("make_grid: n_cells must be at least 8, got " +
                          std::to_string(n_cells));
  }
  return GridSpec{n_cells, 1.0 / n_cells};
}

// ============================================================================
// Model parameters
// ============================================================================

// Pressure law p(rho) = A^2 rho; unit viscosity.
struct ModelParams {
  double A = 1.0;
};

// ============================================================================
// State
// ============================================================================

struct State {
  GridSpec grid;
  std::vector<double> rho;  // n_cells values at centers, strictly positive
  std::vector<double> u;    // n_cells + 1 values at faces, u[0] == u[n] == 0
  double time = 0.0;
};

// ============================================================================
// Discrete calculus
// ============================================================================

// Midpoint quadrature over cell centers: dx * sum.
inline double integrate_centers(const GridSpec& g, std::span<const double> v) {
  if (static_cast<int>(v.size()) != g.n_cells) {
    throw ValidationError("integrate_centers: expected " +
                          std::to_string(g.n_cells) + " center values, got " +
                          std::to_string(v.size()));
  }
  double s = 0.0;
  for (double x : v) s += x;
  return g.dx * s;
}

// Quadrature for a field on the n-1 interior faces: dx * sum, plus the two
// half-cell edge strips closed with the nearest interior value. The edge
// extension is what keeps gradient functionals second order when the
// integrand is nonzero at the walls.
inline double integrate_interior_faces(const GridSpec& g,
                                       std::span<const double> v) {
  if (static_cast<int>(v.size()) != g.n_cells - 1) {
    throw ValidationError("integrate_interior_faces: expected " +
                          std::to_string(g.n_cells - 1) + " values, got " +
                          std::to_string(v.size()));
  }
  double s = 0.0;
  for (double x : v) s += x;
  return g.dx * s + 0.5 * g.dx * (v.front() + v.back());
}

// Face field (n+1 values) -> centered derivative at the n cells.
inline std::vector<double> ddx_face_to_center(const GridSpec& g,
                                              std::span<const double> f) {
  if (static_cast<int>(f.size()) != g.n_faces()) {
    throw ValidationError("ddx_face_to_center: expected " +
                          std::to_string(g.n_faces()) + " face values, got " +
                          std::to_string(f.size()));
  }
  std::vector<double> out(g.n_cells);
  for (int j = 0; j < g.n_cells; ++j) out[j] = (f[j + 1] - f[j]) / g.dx;
  return out;
}

// Center field (n values) -> centered derivative at the n-1 interior faces.
inline std::vector<double> ddx_center_to_face(const GridSpec& g,
                                              std::span<const double> c) {
  if (static_cast<int>(c.size()) != g.n_cells) {
    throw ValidationError("ddx_center_to_face: expected " +
                          std::to_string(g.n_cells) + " center values, got " +
                          std::to_string(c.size()));
  }
  std::vector<double> out(g.n_cells - 1);
  for (int i = 1; i < g.n_cells; ++i) out[i - 1] = (c[i] - c[i - 1]) / g.dx;
  return out;
}

// ============================================================================
// State construction and validation
// ============================================================================

inline double mass(const State& s) {
  return integrate_centers(s.grid, s.rho);
}

inline void validate_state(const State& s) {
  if (static_cast<int>(s.rho.size()) != s.grid.n_cells ||
      static_cast<int>(s.u.size()) != s.grid.n_faces()) {
    throw ValidationError("state: field sizes do not match grid (rho " +
                          std::to_string(s.rho.size()) + ", u " +
                          std::to_string(s.u.size()) + ", n_cells " +
                          std::to_string(s.grid.n_cells) + ")");
  }
  for (int j = 0; j < s.grid.n_cells; ++j) {
    if (!(s.rho[j] > 0.0)) {
      throw ValidationError("state: non-positive (or non-finite) density " +
                            std::to_string(s.rho[j]) + " in cell " +
                            std::to_string(j));
    }
  }
  if (s.u.front() != 0.0 || s.u.back() != 0.0) {
    throw ValidationError("state: boundary velocity must be exactly zero");
  }
  const double m = mass(s);
  if (!(std::abs(m - 1.0) <= 1e-12)) {
    throw ValidationError("state: mass " + std::to_string(m) +
                          " deviates from 1 by more than 1e-12");
  }
}

struct NewStateResult {
  State state;
  double rescale;  // factor applied to the density so the mass quadrature is 1
};

inline NewStateResult new_state(const GridSpec& g,
                                std::span<const double> rho_init,
                                std::span<const double> u_init) {
  if (static_cast<int>(rho_init.size()) != g.n_cells ||
      static_cast<int>(u_init.size()) != g.n_faces()) {
    throw ValidationError("new_state: field sizes do not match grid");
  }
  for (int j = 0; j < g.n_cells; ++j) {
    if (!(rho_init[j] > 0.0)) {
      throw ValidationError("new_state: non-positive density in cell " +
                            std::to_string(j));
    }
  }
  if (u_init.front() != 0.0 || u_init.back() != 0.0) {
    throw ValidationError("new_state: boundary velocity must be exactly zero");
  }
  for (double v : u_init) {
    if (!std::isfinite(v)) {
      throw ValidationError("new_state: non-finite velocity");
    }
  }
  const double m0 = integrate_centers(g, rho_init);
  const double rescale = 1.0 / m0;
  State s;
  s.grid = g;
  s.rho.assign(rho_init.begin(), rho_init.end());
  for (double& r : s.rho) r *= rescale;
  s.u.assign(u_init.begin(), u_init.end());
  s.time = 0.0;
  validate_state(s);
  return NewStateResult{std::move(s), rescale};
}

inline double min_density(const State& s) {
  double m = s.rho[0];
  for (double r : s.rho) m = std::min(m, r);
  return m;
}

inline double max_density(const State& s) {
  double m = s.rho[0];
  for (double r : s.rho) m = std::max(m, r);
  return m;
}

// sup |1/rho| = 1 / min rho
inline double sup_inv_density(const State& s) { return 1.0 / min_density(s); }

}  // namespace cns1d
