#pragma once

// Shared test utilities: deterministic random smooth states and a
// high-precision inverse-CDF reference implementation.

#include <cmath>
#include <cstdint>
#include <vector>

#include "cns1d/field.hpp"
#include "cns1d/noise.hpp"

namespace testutil {

// Uniform draw in (lo, hi) from the library's counter generator, so the
// "random" states in property tests are reproducible.
inline double uniform(std::uint64_t seed, std::uint64_t idx, double lo,
                      double hi) {
  const double u = cns1d::bits_to_unit_open(
      cns1d::counter_bits(cns1d::RngKey{seed, 0, 0}, idx));
  return lo + (hi - lo) * u;
}

// Smooth positive-density state: rho ~ exp(sum_k a_k sin(k pi x)) rescaled
// to unit mass, u = sum_k b_k sin(k pi x) with exact zeros at the walls.
inline cns1d::State random_smooth_state(const cns1d::GridSpec& g,
                                        std::uint64_t seed,
                                        double rho_scale = 0.5,
                                        double u_scale = 0.3) {
  const double pi = 3.14159265358979323846;
  constexpr int K = 4;
  double a[K], b[K];
  for (int k = 0; k < K; ++k) {
    a[k] = uniform(seed, 2 * k + 1, -rho_scale, rho_scale) / (k + 1);
    b[k] = uniform(seed, 2 * k + 2, -u_scale, u_scale) / (k + 1);
  }
  std::vector<double> rho(g.n_cells), u(g.n_faces(), 0.0);
  for (int j = 0; j < g.n_cells; ++j) {
    double w = 0.0;
    for (int k = 0; k < K; ++k) w += a[k] * std::sin((k + 1) * pi * g.x_center(j));
    rho[j] = std::exp(w);
  }
  for (int i = 1; i < g.n_cells; ++i) {
    double w = 0.0;
    for (int k = 0; k < K; ++k) w += b[k] * std::sin((k + 1) * pi * g.x_face(i));
    u[i] = w;
  }
  return cns1d::new_state(g, rho, u).state;
}

// Bisection inverse of p = 0.5 erfc(-x/sqrt(2)), accurate to the last bit of
// the bracket; independent of the library implementation.
inline double inv_normal_cdf_reference(double p) {
  // Bisect in the left half only: near p -> 1 the CDF is quantized at
  // ulp(1), which smears the root over a plateau of width ulp(1)/pdf(x).
  // The complement 1 - p is exact for p > 0.5, so reduce by symmetry.
  if (p > 0.5) return -inv_normal_cdf_reference(1.0 - p);
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double val = 0.5 * std::erfc(-mid / 1.4142135623730951);
    if (val < p) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace testutil
