#pragma once

// Discrete entropy and energy functionals on the staggered grid, plus the
// inequality verdicts built from them.
//
// Conventions that make the discrete inequalities close exactly:
//  * kinetic terms use the face-average of squares at each center,
//    (u_i^2 + u_{i+1}^2)/2, which equals a plain interior-face sum for
//    fields vanishing at the walls and makes the weighted Poincare
//    inequality provable cell by cell;
//  * face densities are arithmetic means of the adjacent centers;
//  * gradient quadratures over interior faces carry the half-cell edge
//    extension from integrate_interior_faces.

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "field.hpp"

namespace cns1d {

// ============================================================================
// Reports and verdicts
// ============================================================================

struct FunctionalReport {
  double H = 0.0;              // int (1/2) rho u^2 + A^2 rho log rho
  double E = 0.0;              // H + (1/2) int rho_x u / rho + (1/4) int rho_x^2 / rho^3
  double grad_u_sq = 0.0;      // int u_x^2, centers
  double grad_logrho_sq = 0.0; // int ((log rho)_x)^2, interior faces
  double weighted_h2_u = 0.0;  // int u_xx^2 / rho, interior faces
  double min_rho = 0.0;
  double max_rho = 0.0;
};

struct SandwichVerdict {
  double lower = 0.0;
  double value = 0.0;
  double upper = 0.0;
  double slack = 0.0;  // worst relative violation, negative means margin
  bool holds = true;
};

// Relative slack of the one-sided requirement lhs <= rhs. Zero right-hand
// sides only pass with lhs <= 0.
inline double one_sided_slack(double lhs, double rhs) {
  if (rhs != 0.0) return lhs / rhs - 1.0;
  if (lhs <= 0.0) return 0.0;
  return std::numeric_limits<double>::infinity();
}

// ============================================================================
// Internal pieces
// ============================================================================

namespace detail {

// dx * sum over interior faces of u_i^2; identical to the center quadrature
// of the face-average of squares when u vanishes at the walls.
inline double l2_u_sq(const State& s) {
  double acc = 0.0;
  for (int i = 1; i < s.grid.n_cells; ++i) acc += s.u[i] * s.u[i];
  return s.grid.dx * acc;
}

inline double kinetic(const State& s) {
  double acc = 0.0;
  for (int j = 0; j < s.grid.n_cells; ++j) {
    const double usq = 0.5 * (s.u[j] * s.u[j] + s.u[j + 1] * s.u[j + 1]);
    acc += s.rho[j] * usq;
  }
  return 0.5 * s.grid.dx * acc;
}

inline double internal(const State& s, double A) {
  double acc = 0.0;
  for (double r : s.rho) acc += r * std::log(r);
  return A * A * s.grid.dx * acc;
}

}  // namespace detail

// ============================================================================
// Entropy and energy
// ============================================================================

inline double entropy_H(const State& s, const ModelParams& mp) {
  return detail::kinetic(s) + detail::internal(s, mp.A);
}

inline double energy_E(const State& s, const ModelParams& mp) {
  const int n = s.grid.n_cells;
  const double dx = s.grid.dx;
  double cross = 0.0;  // rho_x u / rho vanishes at the walls: plain sum
  double grad = 0.0;   // rho_x^2 / rho^3 does not: edge-extended sum
  double grad_edge = 0.0;
  for (int i = 1; i < n; ++i) {
    const double drho = (s.rho[i] - s.rho[i - 1]) / dx;
    const double rf = 0.5 * (s.rho[i - 1] + s.rho[i]);
    cross += drho * s.u[i] / rf;
    const double gterm = drho * drho / (rf * rf * rf);
    grad += gterm;
    if (i == 1 || i == n - 1) grad_edge += gterm;
  }
  const double cross_int = dx * cross;
  const double grad_int = dx * grad + 0.5 * dx * grad_edge;
  return entropy_H(s, mp) + 0.5 * cross_int + 0.25 * grad_int;
}

inline double grad_u_sq(const State& s) {
  double acc = 0.0;
  const double dx = s.grid.dx;
  for (int j = 0; j < s.grid.n_cells; ++j) {
    const double d = (s.u[j + 1] - s.u[j]) / dx;
    acc += d * d;
  }
  return dx * acc;
}

inline double grad_logrho_sq(const State& s) {
  const int n = s.grid.n_cells;
  const double dx = s.grid.dx;
  double acc = 0.0, edge = 0.0;
  double prev_log = std::log(s.rho[0]);
  for (int i = 1; i < n; ++i) {
    const double cur_log = std::log(s.rho[i]);
    const double d = (cur_log - prev_log) / dx;
    prev_log = cur_log;
    acc += d * d;
    if (i == 1 || i == n - 1) edge += d * d;
  }
  return dx * acc + 0.5 * dx * edge;
}

// The two dissipation integrands of the energy balance as a pair.
inline std::pair<double, double> dissipation_norms(const State& s) {
  return {grad_u_sq(s), grad_logrho_sq(s)};
}

// int rho_x^2 (raw density gradient), edge-extended.
inline double grad_rho_sq(const State& s) {
  const int n = s.grid.n_cells;
  const double dx = s.grid.dx;
  double acc = 0.0, edge = 0.0;
  for (int i = 1; i < n; ++i) {
    const double d = (s.rho[i] - s.rho[i - 1]) / dx;
    acc += d * d;
    if (i == 1 || i == n - 1) edge += d * d;
  }
  return dx * acc + 0.5 * dx * edge;
}

// int u_xx^2 / rho over interior faces, edge-extended; the second
// difference uses the homogeneous wall values.
inline double weighted_h2_u(const State& s) {
  const int n = s.grid.n_cells;
  const double dx = s.grid.dx;
  double acc = 0.0, edge = 0.0;
  for (int i = 1; i < n; ++i) {
    const double uxx = (s.u[i + 1] - 2.0 * s.u[i] + s.u[i - 1]) / (dx * dx);
    const double rf = 0.5 * (s.rho[i - 1] + s.rho[i]);
    const double t = uxx * uxx / rf;
    acc += t;
    if (i == 1 || i == n - 1) edge += t;
  }
  return dx * acc + 0.5 * dx * edge;
}

// int (rho - 1)^2 at centers.
inline double l2_rho_dev_sq(const State& s) {
  double acc = 0.0;
  for (double r : s.rho) acc += (r - 1.0) * (r - 1.0);
  return s.grid.dx * acc;
}

inline double l2_u_norm_sq(const State& s) { return detail::l2_u_sq(s); }

inline FunctionalReport functional_report(const State& s,
                                          const ModelParams& mp) {
  FunctionalReport r;
  r.H = entropy_H(s, mp);
  r.E = energy_E(s, mp);
  r.grad_u_sq = grad_u_sq(s);
  r.grad_logrho_sq = grad_logrho_sq(s);
  r.weighted_h2_u = weighted_h2_u(s);
  r.min_rho = min_density(s);
  r.max_rho = max_density(s);
  return r;
}

// ============================================================================
// Relative entropy
// ============================================================================

// H_r(rho,u | r,v) = int (1/2) rho (u-v)^2 + A^2 [rho log(rho/r) - (rho-r)].
// The subtracted linear term vanishes after integration for two unit-mass
// densities, and written this way every cell contributes a nonnegative
// Bregman term, so the value is nonnegative to round-off and exactly zero
// for coinciding fields.
inline double relative_entropy(const State& a, const State& b,
                               const ModelParams& mp) {
  if (!(a.grid == b.grid)) {
    throw ValidationError("relative_entropy: states live on different grids");
  }
  const int n = a.grid.n_cells;
  double kin = 0.0;
  for (int j = 0; j < n; ++j) {
    const double dl = a.u[j] - b.u[j];
    const double dr = a.u[j + 1] - b.u[j + 1];
    kin += a.rho[j] * 0.5 * (dl * dl + dr * dr);
  }
  double breg = 0.0;
  for (int j = 0; j < n; ++j) {
    breg += a.rho[j] * (std::log(a.rho[j]) - std::log(b.rho[j])) -
            (a.rho[j] - b.rho[j]);
  }
  return a.grid.dx * (0.5 * kin + mp.A * mp.A * breg);
}

// Two-sided comparison of H_r against weighted L2 distances.
//   lower:  (min{1,A^2}/2) * min{ min rho, 1/max(max rho, max r) }
//           * (||u-v||^2 + ||rho-r||^2)
//   upper:  (1/2)||rho||_inf ||u-v||^2
//           + (A^2/2) max{ sup 1/rho, sup 1/r } ||rho-r||^2
// The lower weight is the exact cell-wise Taylor constant; both sides hold
// to round-off on the discrete fields.
inline SandwichVerdict relative_entropy_bounds(const State& a, const State& b,
                                               const ModelParams& mp,
                                               double tol = 1e-6) {
  if (!(a.grid == b.grid)) {
    throw ValidationError(
        "relative_entropy_bounds: states live on different grids");
  }
  const int n = a.grid.n_cells;
  const double dx = a.grid.dx;
  double du_sq = 0.0;
  for (int i = 1; i < n; ++i) {
    const double d = a.u[i] - b.u[i];
    du_sq += d * d;
  }
  du_sq *= dx;
  double drho_sq = 0.0;
  for (int j = 0; j < n; ++j) {
    const double d = a.rho[j] - b.rho[j];
    drho_sq += d * d;
  }
  drho_sq *= dx;

  const double min_a = min_density(a);
  const double max_ab = std::max(max_density(a), max_density(b));
  const double minA2 = std::min(1.0, mp.A * mp.A);
  const double w_lower = std::min(min_a, 1.0 / max_ab);
  const double lower = 0.5 * minA2 * w_lower * (du_sq + drho_sq);

  const double sup_inv = std::max(sup_inv_density(a), sup_inv_density(b));
  const double upper = 0.5 * max_density(a) * du_sq +
                       0.5 * mp.A * mp.A * sup_inv * drho_sq;

  SandwichVerdict v;
  v.lower = lower;
  v.value = relative_entropy(a, b, mp);
  v.upper = upper;
  v.slack = std::max(one_sided_slack(lower, v.value),
                     one_sided_slack(v.value, upper));
  v.holds = v.slack <= tol;
  return v;
}

// ============================================================================
// Energy-derived a priori bounds
// ============================================================================

struct EnboundsReport {
  double E = 0.0;
  double H = 0.0;
  SandwichVerdict rho_range;  // e^-sqrt(8E) <= min rho, max rho <= e^sqrt(8E)
  SandwichVerdict rho_grad;   // ||rho_x||^2 <= 8E e^{3 sqrt(8E)}
  SandwichVerdict u_l2;       // ||u||^2 <= 2H e^{sqrt(8E)}
  double worst_slack = 0.0;
  bool holds = true;
};

inline EnboundsReport enbounds_check(const State& s, const ModelParams& mp,
                                     double tol = 1e-6) {
  EnboundsReport rep;
  rep.E = energy_E(s, mp);
  rep.H = entropy_H(s, mp);
  const double root = std::sqrt(8.0 * std::max(rep.E, 0.0));
  const double lo = std::exp(-root);
  const double hi = std::exp(root);

  const double mn = min_density(s);
  const double mx = max_density(s);
  rep.rho_range.lower = lo;
  rep.rho_range.value = mn;
  rep.rho_range.upper = hi;
  rep.rho_range.slack =
      std::max(one_sided_slack(lo, mn), one_sided_slack(mx, hi));
  rep.rho_range.holds = rep.rho_range.slack <= tol;

  const double gr = grad_rho_sq(s);
  rep.rho_grad.lower = 0.0;
  rep.rho_grad.value = gr;
  rep.rho_grad.upper = 8.0 * rep.E * std::exp(3.0 * root);
  rep.rho_grad.slack = one_sided_slack(gr, rep.rho_grad.upper);
  rep.rho_grad.holds = rep.rho_grad.slack <= tol;

  const double usq = detail::l2_u_sq(s);
  rep.u_l2.lower = 0.0;
  rep.u_l2.value = usq;
  rep.u_l2.upper = 2.0 * rep.H * hi;
  rep.u_l2.slack = one_sided_slack(usq, rep.u_l2.upper);
  rep.u_l2.holds = rep.u_l2.slack <= tol;

  rep.worst_slack = std::max({rep.rho_range.slack, rep.rho_grad.slack,
                              rep.u_l2.slack});
  rep.holds = rep.worst_slack <= tol;
  return rep;
}

// int rho u^2 <= ||u_x||^2 for unit-mass density and wall-pinned velocity.
inline bool weighted_poincare_check(const State& s, double tol = 1e-6,
                                    double* slack_out = nullptr) {
  double lhs = 0.0;
  for (int j = 0; j < s.grid.n_cells; ++j) {
    const double usq = 0.5 * (s.u[j] * s.u[j] + s.u[j + 1] * s.u[j + 1]);
    lhs += s.rho[j] * usq;
  }
  lhs *= s.grid.dx;
  const double rhs = grad_u_sq(s);
  const double slack = one_sided_slack(lhs, rhs);
  if (slack_out) *slack_out = slack;
  return slack <= tol;
}

// ============================================================================
// Psi and the pathwise growth coefficient
// ============================================================================

// Psi(t) = E(t) + weighted dissipation integral; the caller supplies the
// already-weighted running integral.
inline double psi_value(double energy_now, double weighted_dissipation_cum) {
  return energy_now + weighted_dissipation_cum;
}

// Growth coefficient for the relative-entropy envelope:
//   (1 + 2/min{1,A^2} * max{1, sup(1/r) / sup(1/rho_other)})
//     * int |v_xx|^2 / r
// evaluated on the reference state (r, v); the comparison state enters only
// through its sup 1/rho.
inline double gronwall_coefficient(const State& reference,
                                   const ModelParams& mp,
                                   double other_sup_inv_rho) {
  if (!(other_sup_inv_rho > 0.0)) {
    throw ValidationError(
        "gronwall_coefficient: sup 1/rho of the comparison state must be "
        "positive");
  }
  const double ref_sup_inv = sup_inv_density(reference);
  const double ratio = ref_sup_inv / other_sup_inv_rho;
  const double factor =
      1.0 + 2.0 / std::min(1.0, mp.A * mp.A) * std::max(1.0, ratio);
  return factor * weighted_h2_u(reference);
}

}  // namespace cns1d
