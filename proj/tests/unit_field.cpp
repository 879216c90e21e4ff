// Grid construction, quadratures, difference stencils, and state validation.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "cns1d/field.hpp"
#include "helpers.hpp"

using namespace cns1d;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("grid spacing is the reciprocal cell count") {
  CHECK(make_grid(8).dx == 0.125);
  CHECK(make_grid(128).dx == 1.0 / 128.0);
  CHECK(make_grid(128).n_faces() == 129);
  CHECK_THROWS_AS(make_grid(4), ValidationError);
  CHECK_THROWS_AS(make_grid(0), ValidationError);
}

TEST_CASE("grid node coordinates") {
  const GridSpec g = make_grid(64);
  CHECK(g.x_face(0) == 0.0);
  CHECK(g.x_face(64) == 1.0);
  CHECK(g.x_center(0) == Catch::Approx(0.5 * g.dx).margin(1e-18));
  CHECK(g.x_face(32) == 0.5);
  CHECK(g == make_grid(64));
  CHECK_FALSE(g == make_grid(128));
}

TEST_CASE("center quadrature: constants, linears, and sine squared") {
  const GridSpec g = make_grid(128);
  std::vector<double> ones(128, 1.0), lin(128), sinsq(128);
  for (int j = 0; j < 128; ++j) {
    lin[j] = g.x_center(j);
    sinsq[j] = std::sin(kPi * g.x_center(j)) * std::sin(kPi * g.x_center(j));
  }
  CHECK(integrate_centers(g, ones) == 1.0);
  CHECK(integrate_centers(g, lin) == Catch::Approx(0.5).margin(1e-14));
  CHECK(integrate_centers(g, sinsq) == Catch::Approx(0.5).margin(1e-12));
}

TEST_CASE("interior-face quadrature reproduces unit weight") {
  const GridSpec g = make_grid(64);
  std::vector<double> ones(63, 1.0);
  CHECK(integrate_interior_faces(g, ones) == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("difference stencils are exact on constants and linears") {
  const GridSpec g = make_grid(32);
  std::vector<double> cf(g.n_faces(), 3.25), cc(g.n_cells, -1.5);
  for (double v : ddx_face_to_center(g, cf)) CHECK(v == 0.0);
  for (double v : ddx_center_to_face(g, cc)) CHECK(v == 0.0);

  std::vector<double> lf(g.n_faces()), lc(g.n_cells);
  for (int i = 0; i < g.n_faces(); ++i) lf[i] = 2.0 * g.x_face(i) + 1.0;
  for (int j = 0; j < g.n_cells; ++j) lc[j] = -3.0 * g.x_center(j) + 0.5;
  for (double v : ddx_face_to_center(g, lf)) {
    CHECK(v == Catch::Approx(2.0).margin(1e-12));
  }
  for (double v : ddx_center_to_face(g, lc)) {
    CHECK(v == Catch::Approx(-3.0).margin(1e-12));
  }
}

TEST_CASE("difference stencils converge at second order") {
  auto max_err_f2c = [](int n) {
    const GridSpec g = make_grid(n);
    std::vector<double> f(g.n_faces());
    for (int i = 0; i < g.n_faces(); ++i) f[i] = std::sin(kPi * g.x_face(i));
    const auto d = ddx_face_to_center(g, f);
    double e = 0.0;
    for (int j = 0; j < g.n_cells; ++j) {
      e = std::max(e, std::abs(d[j] - kPi * std::cos(kPi * g.x_center(j))));
    }
    return e;
  };
  auto max_err_c2f = [](int n) {
    const GridSpec g = make_grid(n);
    std::vector<double> c(g.n_cells);
    for (int j = 0; j < g.n_cells; ++j) {
      c[j] = std::cos(2.0 * kPi * g.x_center(j));
    }
    const auto d = ddx_center_to_face(g, c);
    double e = 0.0;
    for (int i = 1; i < g.n_cells; ++i) {
      e = std::max(e, std::abs(d[i - 1] +
                               2.0 * kPi * std::sin(2.0 * kPi * g.x_face(i))));
    }
    return e;
  };
  const double r1 = max_err_f2c(128) / max_err_f2c(256);
  const double r2 = max_err_c2f(128) / max_err_c2f(256);
  CHECK(r1 > 3.6);
  CHECK(r1 < 4.4);
  CHECK(r2 > 3.6);
  CHECK(r2 < 4.4);
}

TEST_CASE("adjoint stencil pair telescopes to pure boundary terms") {
  const GridSpec g = make_grid(96);
  std::vector<double> f(g.n_faces()), gc(g.n_cells);
  for (int i = 0; i < g.n_faces(); ++i) {
    f[i] = testutil::uniform(11, 100 + i, -1.0, 1.0);
  }
  for (int j = 0; j < g.n_cells; ++j) {
    gc[j] = testutil::uniform(12, 300 + j, -1.0, 1.0);
  }
  const auto df = ddx_face_to_center(g, f);
  const auto dg = ddx_center_to_face(g, gc);
  double lhs = 0.0;
  for (int j = 0; j < g.n_cells; ++j) lhs += g.dx * df[j] * gc[j];
  for (int i = 1; i < g.n_cells; ++i) lhs += g.dx * f[i] * dg[i - 1];
  const double boundary = f[g.n_cells] * gc[g.n_cells - 1] - f[0] * gc[0];
  CHECK(lhs == Catch::Approx(boundary).margin(1e-12));
}

TEST_CASE("mass quadrature on plain states") {
  const GridSpec g = make_grid(128);
  State s;
  s.grid = g;
  s.u.assign(g.n_faces(), 0.0);
  s.rho.assign(g.n_cells, 1.0);
  CHECK(mass(s) == 1.0);
  s.rho.assign(g.n_cells, 2.0);
  CHECK(mass(s) == 2.0);
  for (int j = 0; j < g.n_cells; ++j) {
    s.rho[j] = 1.0 + 0.3 * std::sin(2.0 * kPi * g.x_center(j));
  }
  CHECK(mass(s) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("state construction rescales to unit mass") {
  const GridSpec g = make_grid(64);
  std::vector<double> rho(g.n_cells, 1.0), u(g.n_faces(), 0.0);

  SECTION("uniform density keeps rescale one") {
    const NewStateResult r = new_state(g, rho, u);
    CHECK(r.rescale == 1.0);
    CHECK(mass(r.state) == 1.0);
    CHECK(r.state.time == 0.0);
  }

  SECTION("sine perturbation has unit mass to round-off") {
    for (int j = 0; j < g.n_cells; ++j) {
      rho[j] = 1.0 + 0.5 * std::sin(2.0 * kPi * g.x_center(j));
    }
    const NewStateResult r = new_state(g, rho, u);
    CHECK(std::abs(r.rescale - 1.0) < 1e-12);
    CHECK(mass(r.state) == Catch::Approx(1.0).margin(1e-13));
  }

  SECTION("doubled density is rescaled back") {
    std::vector<double> rho2(g.n_cells, 2.0);
    const NewStateResult r = new_state(g, rho2, u);
    CHECK(r.rescale == Catch::Approx(0.5).margin(1e-15));
    CHECK(mass(r.state) == Catch::Approx(1.0).margin(1e-14));
  }

  SECTION("non-positive density is rejected") {
    rho[17] = -0.25;
    CHECK_THROWS_AS(new_state(g, rho, u), ValidationError);
    rho[17] = 0.0;
    CHECK_THROWS_AS(new_state(g, rho, u), ValidationError);
  }

  SECTION("size mismatches are rejected") {
    std::vector<double> bad_rho(g.n_cells + 1, 1.0);
    CHECK_THROWS_AS(new_state(g, bad_rho, u), ValidationError);
    std::vector<double> bad_u(g.n_faces() - 1, 0.0);
    CHECK_THROWS_AS(new_state(g, rho, bad_u), ValidationError);
  }

  SECTION("nonzero wall velocity is rejected") {
    u[0] = 1e-300;
    CHECK_THROWS_AS(new_state(g, rho, u), ValidationError);
    u[0] = 0.0;
    u[g.n_cells] = -1e-12;
    CHECK_THROWS_AS(new_state(g, rho, u), ValidationError);
  }
}

TEST_CASE("state validation checks the mass budget") {
  const GridSpec g = make_grid(64);
  State s;
  s.grid = g;
  s.rho.assign(g.n_cells, 1.0 + 1e-10);
  s.u.assign(g.n_faces(), 0.0);
  CHECK_THROWS_AS(validate_state(s), ValidationError);
  s.rho.assign(g.n_cells, 1.0);
  CHECK_NOTHROW(validate_state(s));
}

TEST_CASE("density extrema helpers") {
  const GridSpec g = make_grid(64);
  const State s = testutil::random_smooth_state(g, 5);
  double mn = s.rho[0], mx = s.rho[0];
  for (double r : s.rho) {
    mn = std::min(mn, r);
    mx = std::max(mx, r);
  }
  CHECK(min_density(s) == mn);
  CHECK(max_density(s) == mx);
  CHECK(sup_inv_density(s) == 1.0 / mn);
}
