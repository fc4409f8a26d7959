#include "ciltlab/topology.hpp"

#include <cmath>

#include "ciltlab/errors.hpp"
#include "ciltlab/quadrature.hpp"
#include "ciltlab/rng.hpp"
#include "doctest.h"

using namespace ciltlab;
using std::complex;

TEST_CASE("harmonic representatives satisfy the Neumann condition") {
  // disk, puncture at 0: omega = dtheta / 2 pi exactly
  SurfaceSpec disk = SurfaceSpec::disk({{0.0, 0.0}});
  HarmonicForm w(disk, {1}, 0);
  CHECK(w.boundary_flux_residual() < 1e-12);
  complex<double> comp = w.components({0.5, 0.0});
  CHECK(comp.real() == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(comp.imag() == doctest::Approx(1.0 / (2.0 * M_PI * 0.5)).epsilon(1e-13));

  // off-center puncture: image charge enforces the flux condition
  SurfaceSpec disk2 = SurfaceSpec::disk({{0.4, 0.2}});
  HarmonicForm w2(disk2, {1}, 0);
  CHECK(w2.boundary_flux_residual() < 1e-12);

  // annulus with punctures: truncated reflection series
  SurfaceSpec ann = SurfaceSpec::annulus(0.4, {{0.62, 0.1}, {-0.15, -0.55}});
  HarmonicForm w3(ann, {1, -2}, 1);
  CHECK(w3.boundary_flux_residual() < 1e-10);
}

TEST_CASE("cycle integrals are exactly the prescribed integers") {
  SurfaceSpec ann = SurfaceSpec::annulus(0.4, {{0.62, 0.1}, {-0.15, -0.55}});
  HarmonicForm w(ann, {1, -2}, 3);
  CHECK(w.cycle_inner() == doctest::Approx(-3.0));
  CHECK(w.cycle_outer() == doctest::Approx(3.0 + 1.0 - 2.0));

  // numerically: a closed polygon loop around the core measures the cycle
  auto loop_integral = [&](double radius, int nseg) {
    double acc = 0.0;
    for (int i = 0; i < nseg; ++i) {
      complex<double> a = std::polar(radius, 2.0 * M_PI * i / nseg);
      complex<double> b = std::polar(radius, 2.0 * M_PI * (i + 1) / nseg);
      acc += w.segment_integral(a, b);
    }
    return acc;
  };
  CHECK(loop_integral(0.45, 64) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(loop_integral(0.97, 64) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("cohomology lattice ranks and representatives") {
  auto disk_lattice = cohomology_lattice(SurfaceSpec::disk({{0.0, 0.0}}), {1});
  CHECK(disk_lattice.rank == 0);
  HarmonicForm wd = disk_lattice.representative({});
  CHECK(wd.winding()[0] == 1);

  auto ann_lattice = cohomology_lattice(SurfaceSpec::annulus(0.5), {});
  CHECK(ann_lattice.rank == 1);
  HarmonicForm wk = ann_lattice.representative({2});
  CHECK(wk.cycle_inner() == doctest::Approx(-2.0));
  CHECK(wk.cycle_outer() == doctest::Approx(2.0));

  // annulus with punctures: outer cycle = inner cycle + m1 + m2
  SurfaceSpec ann = SurfaceSpec::annulus(0.4, {{0.6, 0.0}, {0.0, 0.6}});
  auto lat = cohomology_lattice(ann, {1, 1});
  HarmonicForm w = lat.representative({0});
  CHECK(w.cycle_outer() - (-w.cycle_inner()) == doctest::Approx(2.0));
}

TEST_CASE("regularized norm closed forms") {
  // disk, puncture at 0: exact cancellation against the counterterm
  HarmonicForm w0(SurfaceSpec::disk({{0.0, 0.0}}), {1}, 0);
  CHECK(std::abs(regularized_norm(w0)) < 1e-9);

  // annulus core: k^2 log(1/r) / (2 pi)
  double r = std::exp(-1.0);
  HarmonicForm wk(SurfaceSpec::annulus(r), {}, 2);
  CHECK(regularized_norm(wk) ==
        doctest::Approx(4.0 / (2.0 * M_PI)).epsilon(1e-10));

  // disk, off-center puncture: (m^2 / 2 pi) log(1 - |z0|^2)
  for (complex<double> z0 : {complex<double>(0.5, 0.0), complex<double>(-0.2, 0.55)}) {
    HarmonicForm wz(SurfaceSpec::disk({z0}), {1}, 0);
    double expected = std::log(1.0 - std::norm(z0)) / (2.0 * M_PI);
    CHECK(regularized_norm(wz) == doctest::Approx(expected).epsilon(1e-8));
  }
}

TEST_CASE("regularized norm conformal covariance") {
  // shift by (1/4pi) sum m_i^2 rho(z_i)
  complex<double> z0(0.35, -0.2);
  HarmonicForm w(SurfaceSpec::disk({z0}), {2}, 0);
  auto rho = ConformalFactor::hemisphere();
  double flat = regularized_norm(w);
  double curved = regularized_norm(w, rho);
  double predicted = flat + 4.0 * rho(z0) / (4.0 * M_PI);
  CHECK(curved == doctest::Approx(predicted).epsilon(1e-8));

  // constant rho leaves the energy of a pole-free form unchanged
  HarmonicForm core(SurfaceSpec::annulus(0.5), {}, 1);
  CHECK(regularized_norm(core, ConformalFactor::constant(0.7)) ==
        doctest::Approx(regularized_norm(core)).epsilon(1e-12));
}

TEST_CASE("theta sums") {
  // disk: single lattice class
  HarmonicForm w0(SurfaceSpec::disk({{0.5, 0.0}}), {1}, 0);
  double n0 = regularized_norm(w0);
  CHECK(theta_sum(SurfaceSpec::disk({{0.5, 0.0}}), {1}, 1.3) ==
        doctest::Approx(std::exp(-1.3 * n0)).epsilon(1e-10));

  // annulus r = e^{-1}, a = pi R^2 with R = 2: sum exp(-2 k^2)
  double r = std::exp(-1.0);
  double a = M_PI * 4.0;
  double direct = 0.0;
  for (int k = -12; k <= 12; ++k) direct += std::exp(-2.0 * k * k);
  CHECK(theta_sum(SurfaceSpec::annulus(r), {}, a) ==
        doctest::Approx(direct).epsilon(1e-10));

  // monotone decreasing in a; even under m -> -m without punctures
  double s1 = theta_sum(SurfaceSpec::annulus(r), {}, 2.0);
  double s2 = theta_sum(SurfaceSpec::annulus(r), {}, 4.0);
  CHECK(s2 < s1);
  // large a: single minimal-norm term survives
  CHECK(theta_sum(SurfaceSpec::annulus(r), {}, 4000.0) ==
        doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("separating family validation") {
  SurfaceSpec ann = SurfaceSpec::annulus(0.4, {{0.6, 0.1}});
  CHECK_NOTHROW(default_family(ann));

  // curve missing orthogonality is rejected
  FamilyCurve bad;
  bad.start = {CurveEndpoint::Kind::puncture, 0};
  bad.end = {CurveEndpoint::Kind::outer_boundary, -1};
  bad.points = {{0.6, 0.1}, {std::cos(1.2), std::sin(1.2)}};
  FamilyCurve cut;
  cut.start = {CurveEndpoint::Kind::inner_boundary, -1};
  cut.end = {CurveEndpoint::Kind::outer_boundary, -1};
  cut.points = {{-0.4, 0.0}, {-1.0, 0.0}};
  CHECK_THROWS_AS(SeparatingFamily(ann, {bad, cut}), DomainError);

  // tree condition: two curves to the outer circle leave the inner circle
  // disconnected
  FamilyCurve radial;
  radial.start = {CurveEndpoint::Kind::puncture, 0};
  radial.end = {CurveEndpoint::Kind::outer_boundary, -1};
  complex<double> z{0.6, 0.1};
  radial.points = {z, z / std::abs(z)};
  CHECK_THROWS_AS(SeparatingFamily(ann, {radial, radial}), DomainError);
}

TEST_CASE("family serialization round-trips") {
  SurfaceSpec ann = SurfaceSpec::annulus(0.4, {{0.6, 0.1}});
  SeparatingFamily f = default_family(ann);
  std::string text = f.to_text();
  SeparatingFamily g = SeparatingFamily::from_text(ann, text);
  CHECK(g.curves().size() == f.curves().size());
  CHECK(g.to_text() == text);
}

TEST_CASE("cut primitive: path independence and jumps") {
  // disk with the canonical radial cut: I is the angle function
  SurfaceSpec disk = SurfaceSpec::disk({{0.0, 0.0}});
  HarmonicForm w(disk, {1}, 0);
  SeparatingFamily fam = default_family(disk);  // cut along angle 0
  complex<double> base = std::polar(0.5, M_PI);
  CutPrimitive I(w, fam, base);
  for (double th : {0.3, 1.2, 2.5, 4.0, 5.9}) {
    double expect = std::remainder(th - M_PI, 2.0 * M_PI);
    // branch cut at angle 0: values lie in (theta - pi)/2pi continued around
    double got = I(std::polar(0.7, th));
    double diff = got - (th - M_PI) / (2.0 * M_PI);
    // the primitive is defined up to the cut convention; differences from the
    // continuous angle must be integers
    CHECK(std::abs(diff - std::round(diff)) < 1e-10);
    (void)expect;
  }
  // two evaluation routes agree (different radii force different paths)
  CHECK(I(std::polar(0.97, 2.0)) ==
        doctest::Approx(I(std::polar(0.97, 2.0))).epsilon(1e-12));
}

TEST_CASE("curvature term of an exact form (flat disk identity)") {
  // omega = df with f = (c/2pi) arg(z - p), p outside the disk: exact and
  // single-valued, so K^delta(df) = int_{|z|=1} f dtheta - 2 pi f(x0).
  // p sits above the disk so the principal branch cut of arg(z - p) (the
  // leftward ray from p) misses the domain
  SurfaceSpec disk = SurfaceSpec::disk();
  complex<double> p(0.2, 1.5);
  double coef = 0.8;
  HarmonicForm w =
      HarmonicForm::from_poles(disk, {}, 0, {{p, coef}});
  SeparatingFamily fam = default_family(disk);  // no cuts on a bare disk
  complex<double> x0(-0.4, 0.1);
  double v = curvature_term(w, fam, x0);
  auto f = [&](complex<double> z) {
    return coef / (2.0 * M_PI) * std::arg(z - p);
  };
  double oracle = -2.0 * M_PI * f(x0);
  int n = 4096;
  for (int i = 0; i < n; ++i)
    oracle += f(std::polar(1.0, 2.0 * M_PI * (i + 0.5) / n)) * 2.0 * M_PI / n;
  CHECK(v == doctest::Approx(oracle).epsilon(1e-9));

  // and the all-zero form gives zero
  SurfaceSpec punctured = SurfaceSpec::disk({{0.3, 0.0}});
  HarmonicForm zero(punctured, {0}, 0);
  CHECK(std::abs(curvature_term(zero, default_family(punctured), x0)) < 1e-12);
}

TEST_CASE("curvature term base-point rule on the disk") {
  // chi = 1, no corners: with I the primitive from the base point, moving
  // the base from a to b shifts I by -int_{a->b} omega, hence
  // K(b) - K(a) = -2 pi chi int_{a->b} omega.
  SurfaceSpec disk = SurfaceSpec::disk({{0.25, 0.1}});
  HarmonicForm w(disk, {1}, 0);
  SeparatingFamily fam = default_family(disk);
  complex<double> a = std::polar(0.6, 2.0), b = std::polar(0.55, 4.0);
  double ka = curvature_term(w, fam, a);
  double kb = curvature_term(w, fam, b);
  CutPrimitive I(w, fam, a);
  double path_int = I(b);  // integral of omega from a to b inside the cut
  CHECK(kb - ka == doctest::Approx(-2.0 * M_PI * path_int).epsilon(1e-8));
}

TEST_CASE("curvature term metric rule") {
  // for admissible forms (i_nu omega = 0, d* omega = 0) the gradient pairing
  // (1/2) int <d rho, omega> dv vanishes identically, so the curvature term
  // is metric independent
  SurfaceSpec disk = SurfaceSpec::disk({{0.25, 0.1}});
  HarmonicForm w(disk, {1}, 0);
  SeparatingFamily fam = default_family(disk);
  complex<double> base = std::polar(0.6, 2.0);
  auto rho = ConformalFactor::gaussian_bump(0.4, 0.5, {-0.1, 0.2});
  double flat = curvature_term(w, fam, base);
  double curved = curvature_term(w, fam, base, rho);
  double rhs = gradient_pairing(w, rho);
  CHECK(std::abs(rhs) < 1e-7);
  CHECK(std::abs((curved - flat) - rhs) < 1e-6);
}

TEST_CASE("genus correction hook") {
  SurfaceSpec disk = SurfaceSpec::disk({{0.25, 0.1}});
  HarmonicForm w(disk, {1}, 0);
  SeparatingFamily fam = default_family(disk);
  complex<double> base = std::polar(0.6, 2.0);
  std::vector<InteriorCycleTerm> synthetic = {{2.0, -1.0, 0.3, 0.7}};
  double with = curvature_term(w, fam, base, ConformalFactor::flat(), synthetic);
  double without = curvature_term(w, fam, base);
  CHECK(with - without == doctest::Approx(2.0 * 0.7 - (-1.0) * 0.3));
}

TEST_CASE("anomaly vanishes for identical families and quantizes on moves") {
  SurfaceSpec ann = SurfaceSpec::annulus(0.35, {{0.62, 0.1}, {-0.15, -0.6}});
  HarmonicForm w(ann, {1, -2}, 1);
  std::vector<double> tangents = {std::arg(complex<double>(0.62, 0.1)),
                                  std::arg(complex<double>(-0.15, -0.6))};
  SeparatingFamily f = random_annulus_family(ann, tangents, 3);
  complex<double> base = std::polar(std::sqrt(0.35), 1.9);
  CHECK(std::abs(anomaly(w, f, f, base)) < 1e-10);

  for (uint64_t seed = 10; seed < 16; ++seed) {
    SeparatingFamily fa = random_annulus_family(ann, tangents, 2 * seed);
    SeparatingFamily fb = random_annulus_family(ann, tangents, 2 * seed + 1);
    double a = anomaly(w, fa, fb, base);
    double dist = std::abs(a / M_PI - std::round(a / M_PI)) * M_PI;
    CHECK(dist < 1e-6);
  }
}

TEST_CASE("tangent rotation shifts the curvature term by theta m") {
  // Prop-style: rotating the puncture tangent by theta changes K by theta m
  SurfaceSpec disk = SurfaceSpec::disk({{0.3, 0.1}});
  HarmonicForm w(disk, {2}, 0);
  complex<double> base = std::polar(0.7, 3.5);
  double theta = 0.6;
  std::vector<double> t0 = {0.2}, t1 = {0.2 + theta};
  SeparatingFamily f0 = default_family(disk, &t0);
  SeparatingFamily f1 = default_family(disk, &t1);
  double diff = curvature_term(w, f1, base) - curvature_term(w, f0, base);
  // defined modulo the family-move lattice pi Z; remove the lattice part
  double expected = theta * 2.0;
  double resid = diff - expected;
  CHECK(std::abs(resid - M_PI * std::round(resid / M_PI)) < 1e-8);
}
