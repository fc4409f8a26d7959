#include "ciltlab/geometry.hpp"

#include <cmath>

#include "ciltlab/errors.hpp"
#include "doctest.h"

using namespace ciltlab;
using std::complex;

TEST_CASE("flat curvature fields") {
  SurfaceSpec disk = SurfaceSpec::disk();
  auto flat = ConformalFactor::flat();
  auto interior = curvature_fields(disk, flat, {0.3, 0.2}, false);
  CHECK(interior.scalar_curvature == doctest::Approx(0.0));
  auto bdry = curvature_fields(disk, flat, {1.0, 0.0}, true);
  CHECK(*bdry.geodesic_curvature == doctest::Approx(1.0));

  SurfaceSpec ann = SurfaceSpec::annulus(0.5);
  auto inner = curvature_fields(ann, flat, {0.5, 0.0}, true);
  CHECK(*inner.geodesic_curvature == doctest::Approx(-2.0));

  CHECK_THROWS_AS(curvature_fields(disk, flat, {2.0, 0.0}, false), DomainError);
}

TEST_CASE("hemisphere factor: scalar curvature 2, geodesic equator") {
  // rho = log(4 / (1+|z|^2)^2) is the round metric; the transformation law
  // e^{-rho} Delta_flat rho gives the scalar curvature (twice the Gaussian).
  SurfaceSpec disk = SurfaceSpec::disk();
  auto rho = ConformalFactor::hemisphere();
  for (complex<double> z : {complex<double>(0.0, 0.0), complex<double>(0.4, 0.1),
                            complex<double>(-0.2, 0.6)}) {
    auto c = curvature_fields(disk, rho, z, false);
    CHECK(c.scalar_curvature == doctest::Approx(2.0).epsilon(1e-10));
  }
  auto b = curvature_fields(disk, rho, {std::cos(0.7), std::sin(0.7)}, true);
  CHECK(*b.geodesic_curvature == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("finite-difference fallback matches analytic derivatives") {
  auto analytic = ConformalFactor::gaussian_bump(0.4, 0.6, {0.1, -0.2});
  ConformalFactor numeric([](complex<double> z) {
    complex<double> c(0.1, -0.2);
    return 0.4 * std::exp(-std::norm(z - c) / (2.0 * 0.36));
  });
  for (complex<double> z : {complex<double>(0.2, 0.3), complex<double>(-0.5, 0.1)}) {
    CHECK(numeric.laplacian(z) ==
          doctest::Approx(analytic.laplacian(z)).epsilon(1e-5));
    CHECK(std::abs(numeric.gradient(z) - analytic.gradient(z)) < 1e-8);
  }
}

TEST_CASE("pointwise transformation law K e^rho = Delta_flat rho") {
  SurfaceSpec disk = SurfaceSpec::disk();
  auto rho = ConformalFactor::gaussian_bump(0.3, 0.5);
  for (complex<double> z : {complex<double>(0.0, 0.0), complex<double>(0.3, -0.4)}) {
    auto c = curvature_fields(disk, rho, z, false);
    CHECK(c.scalar_curvature * std::exp(rho(z)) ==
          doctest::Approx(rho.laplacian(z)).epsilon(1e-12));
  }
}

TEST_CASE("Gauss-Bonnet audits vanish on flat reference surfaces") {
  auto flat = ConformalFactor::flat();
  CHECK(std::abs(gauss_bonnet_defect(SurfaceSpec::disk(), flat, 8)) < 1e-12);
  CHECK(std::abs(gauss_bonnet_defect(SurfaceSpec::half_disk(), flat, 8)) < 1e-12);
  CHECK(std::abs(gauss_bonnet_defect(SurfaceSpec::annulus(0.5), flat, 8)) < 1e-12);
}

TEST_CASE("Gauss-Bonnet on curved factors converges with quadrature order") {
  auto hemi = ConformalFactor::hemisphere();
  double coarse = std::abs(gauss_bonnet_defect(SurfaceSpec::disk(), hemi, 6));
  double fine = std::abs(gauss_bonnet_defect(SurfaceSpec::disk(), hemi, 24));
  CHECK(fine < 1e-10);
  CHECK(fine <= coarse + 1e-14);

  auto bump = ConformalFactor::gaussian_bump(0.5, 0.4, {0.2, 0.1});
  CHECK(std::abs(gauss_bonnet_defect(SurfaceSpec::disk(), bump, 32)) < 1e-8);
  CHECK(std::abs(gauss_bonnet_defect(SurfaceSpec::annulus(0.4), bump, 32)) <
        1e-8);
}

TEST_CASE("gauss_bonnet_defect validates input") {
  CHECK_THROWS_AS(gauss_bonnet_defect(SurfaceSpec::disk(),
                                      ConformalFactor::flat(), 2),
                  DomainError);
}
