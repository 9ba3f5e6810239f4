#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "errors.hpp"
#include "operators.hpp"
#include "solvers.hpp"

using namespace reslab;

namespace {

PotentialSpec reference() {
  return PotentialSpec::from_text(
      "core = poly 2.5 0.45 -5 0 2.5\nglue_radius = 1.1\ntail.a = 0.25\ntail.coeff = 7\n"
      "tail.offset = -5.645\ngrad_weight = 0.25\nlapl_weight = 0.5\n");
}

double harmonic_level(int n, double eps) { return eps * (std::sqrt(2.0) * (n + 0.5) - 0.5); }

}  // namespace

TEST_CASE("three-point Dirichlet Laplacian") {
  Grid1D g = Grid1D::box(0, 1, 3);
  auto op = assemble_fd({0, 0, 0}, 1.0, g);
  for (auto d : op.diag) CHECK(d == cplx(32, 0));
  for (auto o : op.offdiag) CHECK(o == cplx(-16, 0));
  auto sr = lowest_eigs(op, 1);
  CHECK(sr.eigenvalues[0] == doctest::Approx(32 * (1 - std::cos(M_PI / 4))).epsilon(1e-13));
}

TEST_CASE("harmonic interior spectrum, both schemes") {
  auto s = PotentialSpec::from_text("core = poly 0 0 0.5\n");
  for (Scheme sc : {Scheme::Fitted, Scheme::FD}) {
    AssemblyOptions o;
    o.scheme = sc;
    auto op = assemble_interior(s, 0.1, 6, 4001, o);
    auto sr = lowest_eigs(op, 2);
    for (int n = 0; n < 2; ++n)
      CHECK(std::fabs(sr.eigenvalues[n] / harmonic_level(n, 0.1) - 1) <= 1e-4);
  }
}

TEST_CASE("second-order convergence of the plain scheme") {
  auto s = PotentialSpec::from_text("core = poly 0 0 0.5\n");
  AssemblyOptions o;
  o.scheme = Scheme::FD;
  double prev = 0;
  for (int M : {100, 200, 400}) {
    auto op = assemble_box(s, 0.1, Grid1D::symmetric(6.0 / M, M), o);
    double err = std::fabs(lowest_eigs(op, 1).eigenvalues[0] - harmonic_level(0, 0.1));
    if (prev > 0) CHECK(prev / err >= 3.7);
    prev = err;
  }
}

TEST_CASE("coarse grid is refused") {
  auto s = PotentialSpec::from_text("core = poly 0 0 50\n");
  try {
    assemble_interior(s, 0.1, 6, 8);
    FAIL("expected GridTooCoarse");
  } catch (const Error& e) {
    CHECK(e.code() == Err::GridTooCoarse);
  }
}

TEST_CASE("interior grid is a sub-grid of the full one") {
  auto s = reference();
  auto in = assemble_interior(s, 0.1, 4.0, 3199);
  Grid1D full = Grid1D::symmetric(in.grid.h, 6400);
  for (int k = 0; k < in.grid.N; k += 50) {
    double x = in.grid.node(k);
    long j = std::lround(x / full.h) - full.first;
    CHECK(full.node(j) == x);
  }
}

TEST_CASE("contour map") {
  ScalingContour c0{10, 0.0};
  for (double r : {1.0, 10.0, 25.0}) {
    auto p = contour_map(c0, r);
    CHECK(p.z == cplx(r, 0));
    CHECK(p.dz == cplx(1, 0));
  }
  ScalingContour c{10, 0.3};
  auto p = contour_map(c, 20);
  CHECK(p.z.real() == doctest::Approx(19.5534).epsilon(1e-5));
  CHECK(p.z.imag() == doctest::Approx(2.9552).epsilon(1e-4));
  CHECK(std::abs(p.dz - std::polar(1.0, 0.3)) < 1e-15);
  // Continuous at r0.
  CHECK(std::abs(contour_map(c, 10 + 1e-12).z - 10.0) < 1e-11);
  // Smooth and sharp Jacobians agree up to O(e^{-2 s/w}); positions differ by the fixed shift w (e^{i beta} - 1).
  ScalingContour sm{10, 0.3, ContourMode::Smooth, 0.2};
  auto q = contour_map(sm, 10 + 10 * 0.2);
  auto ps = contour_map(c, 10 + 10 * 0.2);
  CHECK(std::abs(q.dz - ps.dz) <= 5 * std::exp(-20.0));
  CHECK(std::abs((ps.z - q.z) - 0.2 * (std::polar(1.0, 0.3) - 1.0)) <= 1e-8);
}

TEST_CASE("scaled operator structure") {
  auto s = reference();
  double eps = 0.12, h = 0.0025;
  long M = 1600;  // r0 = 4
  Grid1D g = Grid1D::symmetric(h, 4 * M);
  AssemblyOptions fd;
  fd.scheme = Scheme::FD;
  ScalingContour flat{M * h, 0.0};
  auto a = assemble_full_scaled(s, eps, flat, g, fd);
  auto b = assemble_box(s, eps, g, fd);
  CHECK(a.diag == b.diag);
  CHECK(a.offdiag == b.offdiag);

  ScalingContour c{M * h, 0.3};
  auto r = assemble_full_scaled(s, eps, c, g, fd);
  CHECK(r.kind == DiscretizedOperator::ComplexSym);
  // Not Hermitian: some diagonal entry is non-real.
  double im = 0;
  for (auto d : r.diag) im = std::max(im, std::fabs(d.imag()));
  CHECK(im > 0);
  // Inside the ball nothing changes; outside the kinetic couplings rotate by e^{-2 i beta}.
  cplx rot = std::polar(1.0, -0.6);
  for (int k = 0; k + 1 < g.N; ++k) {
    double m = 0.5 * (g.node(k) + g.node(k + 1));
    if (std::fabs(m) < c.r0)
      CHECK(r.offdiag[k] == b.offdiag[k]);
    else
      CHECK(std::abs(r.offdiag[k] - rot * b.offdiag[k]) <= 1e-14 * std::abs(b.offdiag[k]));
  }

  try {
    assemble_full_scaled(s, eps, ScalingContour{M * h, 0.7}, g);
    FAIL("cone");
  } catch (const Error& e) {
    CHECK(e.code() == Err::ConeViolation);
  }
  try {
    assemble_full_scaled(s, eps, ScalingContour{1.5, 0.3}, g);
    FAIL("core");
  } catch (const Error& e) {
    CHECK(e.code() == Err::InsideCore);
  }
}

TEST_CASE("truncation guard") {
  auto s = reference();
  AssemblyOptions o;
  o.truncation_guard = true;
  o.check_coarse = false;
  // V decays like r^-1.5; a box only twice r0 is far too short for |V| <= 1e-3 eps.
  CHECK_THROWS_AS(assemble_full_scaled(s, 0.1, ScalingContour{4, 0.3}, Grid1D::symmetric(0.0025, 3200), o), Error);
}

TEST_CASE("exterior operator") {
  auto s = reference();
  ScalingContour c{4, 0.3};
  auto e1 = assemble_exterior_dirichlet_scaled(s, 0.1, c, 0.01, 16);
  auto e2 = assemble_exterior_dirichlet_scaled(s, 0.1, c, 0.01, 32);
  // Two half-lines, decoupled.
  REQUIRE(e1.block_breaks.size() == 1);
  CHECK(e1.offdiag[e1.block_breaks[0]] == cplx(0, 0));
  // Locality: entries next to r0 do not depend on R_max.
  int n1 = e1.size() / 2, n2 = e2.size() / 2;
  for (int k = 0; k < 20; ++k) {
    CHECK(e1.diag[n1 + k] == e2.diag[n2 + k]);
    CHECK(e1.diag[n1 - 1 - k] == e2.diag[n2 - 1 - k]);
  }
}

TEST_CASE("matrix market export") {
  auto op = assemble_fd({1, 2, 3}, 1.0, Grid1D::box(0, 1, 3));
  auto txt = export_matrix_market(op);
  CHECK(txt.rfind("%%MatrixMarket matrix coordinate complex symmetric", 0) == 0);
  CHECK(txt.find("3 3 5") != std::string::npos);
}
