#pragma once

// Spectral forcing acting on the velocity faces. Mode l carries the shape
// sigma0 * l^-p * sin(l pi x); the decay exponent p >= 3 keeps the forcing
// twice differentiable in space with summable tails. Increments are sampled
// by a counter-based generator keyed on (seed, trajectory, step, mode), so a
// given key always yields the same Gaussian regardless of thread schedule or
// call order. Boundary faces carry exactly zero noise.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "field.hpp"

namespace cns1d {

// ============================================================================
// Counter-based uniform bits
// ============================================================================

// SplitMix64 finalizer; chained over the key words it acts as a stateless
// counter hash.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct RngKey {
  std::uint64_t seed = 0;
  std::uint64_t trajectory = 0;
  std::uint64_t step = 0;
};

inline std::uint64_t counter_bits(const RngKey& k, std::uint64_t idx) {
  std::uint64_t h = mix64(k.seed);
  h = mix64(h ^ k.trajectory);
  h = mix64(h ^ k.step);
  h = mix64(h ^ idx);
  return mix64(h);
}

// Map 64 bits to the open interval (0,1): 53-bit mantissa, half-ulp offset.
inline double bits_to_unit_open(std::uint64_t h) {
  // 52 payload bits with a half-step offset: every value of
  // k * 2^-52 + 2^-53 is exactly representable, so the result lies in
  // [2^-53, 1 - 2^-53] without any rounding to the endpoints. (A 53-bit
  // payload would make the top value 1 - 2^-54, which rounds to 1.0 and
  // would poison the inverse-CDF transform.)
  return static_cast<double>(h >> 12) * 0x1.0p-52 + 0x1.0p-53;
}

// ============================================================================
// Inverse normal CDF
// ============================================================================

// Rational approximation (Acklam) refined by two Halley steps through
// erfc, giving full double accuracy. Branches only on p, so equal inputs
// give bitwise equal outputs.
inline double inv_normal_cdf(double p) {
  static constexpr double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                  -2.759285104469687e+02, 1.383577518672690e+02,
                                  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                  -1.556989798598866e+02, 6.680131188771972e+01,
                                  -1.328068155288572e+01};
  static constexpr double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                  -2.400758277161838e+00, -2.549732539343734e+00,
                                  4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                                  2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  if (!(p > 0.0 && p < 1.0)) {
    throw ValidationError("inv_normal_cdf: p must lie strictly inside (0,1)");
  }

  // Work in the left half only: 1 - p is exact for p in (0.5, 1), and the
  // residual 0.5 erfc(-x/sqrt 2) - p below never cancels catastrophically
  // the way the complementary form near p -> 1 does.
  if (p > 0.5) return -inv_normal_cdf(1.0 - p);

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }

  constexpr double sqrt2 = 1.4142135623730951;
  constexpr double sqrt2pi = 2.5066282746310002;
  for (int it = 0; it < 2; ++it) {
    const double e = 0.5 * std::erfc(-x / sqrt2) - p;
    const double u = e * sqrt2pi * std::exp(0.5 * x * x);
    x = x - u / (1.0 + 0.5 * x * u);
  }
  return x;
}

// Standard normal draw for one (key, index) pair.
inline double counter_normal(const RngKey& k, std::uint64_t idx) {
  return inv_normal_cdf(bits_to_unit_open(counter_bits(k, idx)));
}

// ============================================================================
// Forcing basis
// ============================================================================

struct NoiseBasis {
  GridSpec grid;
  int n_modes = 0;   // K
  double sigma0 = 0.0;
  double p = 3.0;
  // modes[l][i] = sigma0 (l+1)^-p sin((l+1) pi x_i) sampled at faces,
  // boundary entries forced to exactly zero.
  std::vector<std::vector<double>> modes;
  double sup_sq = 0.0;  // max over faces of sum_l sigma_l(x)^2
  double h2_sq = 0.0;   // sum_l |sigma0 l^-p|^2 (l pi)^4 / 2, closed form
};

inline NoiseBasis build_noise(const GridSpec& g, int n_modes, double sigma0,
                              double p) {
  if (n_modes < 1) {
    throw ValidationError("build_noise: need at least one mode, got " +
                          std::to_string(n_modes));
  }
  if (!(sigma0 >= 0.0)) {
    throw ValidationError("build_noise: sigma0 must be nonnegative");
  }
  if (!(p >= 3.0)) {
    throw ValidationError(
        "build_noise: mode decay exponent p must be at least 3, got " +
        std::to_string(p) + " (forcing would not be twice differentiable)");
  }
  NoiseBasis b;
  b.grid = g;
  b.n_modes = n_modes;
  b.sigma0 = sigma0;
  b.p = p;
  b.modes.assign(n_modes, std::vector<double>(g.n_faces(), 0.0));
  const double pi = 3.14159265358979323846;
  for (int l = 1; l <= n_modes; ++l) {
    auto& m = b.modes[l - 1];
    const double amp = sigma0 * std::pow(static_cast<double>(l), -p);
    for (int i = 1; i < g.n_cells; ++i) {
      m[i] = amp * std::sin(l * pi * g.x_face(i));
    }
    m[0] = 0.0;
    m[g.n_cells] = 0.0;
    b.h2_sq += 0.5 * amp * amp * std::pow(l * pi, 4.0);
  }
  for (int i = 0; i < g.n_faces(); ++i) {
    double s = 0.0;
    for (int l = 0; l < n_modes; ++l) s += b.modes[l][i] * b.modes[l][i];
    b.sup_sq = std::max(b.sup_sq, s);
  }
  return b;
}

inline double sigma_sup_norm_sq(const NoiseBasis& b) { return b.sup_sq; }

// sigma0 that hits a requested sup-norm square; the sup scales exactly as
// sigma0^2.
inline double tune_sigma0(const GridSpec& g, int n_modes, double p,
                          double target_sup_sq) {
  if (!(target_sup_sq >= 0.0)) {
    throw ValidationError("tune_sigma0: target must be nonnegative");
  }
  if (target_sup_sq == 0.0) return 0.0;
  const NoiseBasis unit = build_noise(g, n_modes, 1.0, p);
  return std::sqrt(target_sup_sq / unit.sup_sq);
}

// ============================================================================
// Increments
// ============================================================================

struct NoiseIncrement {
  double dt = 0.0;
  std::vector<double> dw;  // face field, exactly zero at the walls
};

// dW(x_i) = sqrt(dt) sum_l sigma_l(x_i) xi_l with xi_l = N(0,1) drawn from
// (key, mode index). Pure function of its arguments.
inline NoiseIncrement sample_increment(const NoiseBasis& b, const RngKey& key,
                                       double dt) {
  if (!(dt > 0.0)) {
    throw ValidationError("sample_increment: dt must be positive");
  }
  NoiseIncrement inc;
  inc.dt = dt;
  inc.dw.assign(b.grid.n_faces(), 0.0);
  if (b.sigma0 == 0.0) return inc;
  const double root_dt = std::sqrt(dt);
  for (int l = 0; l < b.n_modes; ++l) {
    const double xi = counter_normal(key, static_cast<std::uint64_t>(l) + 1);
    const double w = root_dt * xi;
    const auto& m = b.modes[l];
    for (int i = 1; i < b.grid.n_cells; ++i) inc.dw[i] += w * m[i];
  }
  return inc;
}

}  // namespace cns1d
