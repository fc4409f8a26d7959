#include "ciltlab/gff.hpp"

#include <algorithm>
#include <cmath>

#include "ciltlab/errors.hpp"
#include "ciltlab/rng.hpp"
#include "doctest.h"

using namespace ciltlab;
using std::complex;

TEST_CASE("green kernel closed forms") {
  CHECK(green_kernel(KernelKind::neumann_disk, {0.0, 0.0}, {0.5, 0.0}) ==
        doctest::Approx(std::log(2.0) / (2.0 * M_PI)).epsilon(1e-14));
  // Dirichlet kernel vanishes at the boundary
  CHECK(green_kernel(KernelKind::dirichlet_disk, {0.3, 0.2},
                     {0.99999999, 0.0}) == doctest::Approx(0.0).epsilon(1e-6));
  // boundary restriction: 2 pi G = -2 log|x-y| at angular gap pi
  complex<double> x{1.0, 0.0}, y{-1.0, 0.0};
  CHECK(2.0 * M_PI * green_kernel(KernelKind::neumann_disk, x, y) ==
        doctest::Approx(-2.0 * std::log(2.0)).epsilon(1e-13));
  CHECK_THROWS_AS(green_kernel(KernelKind::neumann_disk, x, x),
                  SingularityError);
}

TEST_CASE("doubling identity: Neumann = Dirichlet + reflected part") {
  Rng rng(42);
  for (int t = 0; t < 32; ++t) {
    complex<double> x = std::polar(0.95 * std::sqrt(rng.uniform()),
                                   rng.uniform(0.0, 2.0 * M_PI));
    complex<double> y = std::polar(0.95 * std::sqrt(rng.uniform()),
                                   rng.uniform(0.0, 2.0 * M_PI));
    if (std::abs(x - y) < 1e-3) continue;
    double n = green_kernel(KernelKind::neumann_disk, x, y);
    double d = green_kernel(KernelKind::dirichlet_disk, x, y);
    double refl = -std::log(std::abs(1.0 - x * std::conj(y))) / M_PI;
    CHECK(std::abs(n - (d + refl)) < 1e-12);
  }
}

TEST_CASE("regularized covariance closed forms and quadrature agreement") {
  CovarianceKernel k(KernelKind::neumann_disk);

  // eps = 0 on both slots reproduces the plain kernel
  Site a = Site::bulk({0.3, 0.1}), b = Site::bulk({-0.2, 0.4});
  CHECK(k.regularized(a, b) ==
        doctest::Approx(k(a.point, b.point)).epsilon(1e-14));

  // away from the singularity the one-sided average is exactly unregularized
  Site areg = Site::bulk({0.3, 0.1}, 0.01);
  CHECK(k.regularized(areg, b) ==
        doctest::Approx(k(a.point, b.point)).epsilon(1e-13));

  // diagonal: C_eps(x,x) = -log eps + W(x), W(x) = -log(1-|x|^2)
  Site x = Site::bulk({0.3, 0.0}, 0.01);
  CHECK(k.regularized(x, x) ==
        doctest::Approx(-std::log(0.01) - std::log(1.0 - 0.09)).epsilon(1e-12));

  // overlap branch agrees with a direct double angular average (oracle)
  Site u = Site::bulk({0.10, 0.0}, 0.05);
  Site v = Site::bulk({0.13, 0.02}, 0.04);
  double direct = 0.0;
  int n = 2000;
  for (int i = 0; i < n; ++i) {
    double phi = 2.0 * M_PI * (i + 0.5) / n;
    complex<double> uu = u.point + std::polar(u.eps, phi);
    double inner = 0.0;
    for (int j = 0; j < n; ++j) {
      double psi = 2.0 * M_PI * (j + 0.5) / n;
      complex<double> vv = v.point + std::polar(v.eps, psi);
      inner += -std::log(std::abs(uu - vv));
    }
    direct += inner / n;
  }
  direct /= n;
  direct += -std::log(std::abs(1.0 - u.point * std::conj(v.point)));
  CHECK(k.regularized(u, v) == doctest::Approx(direct).epsilon(2e-5));

  // averaging circle must stay inside the closed disk
  CHECK_THROWS_AS(k.regularized(Site::bulk({0.999, 0.0}, 0.01), b),
                  GeometryError);
}

TEST_CASE("boundary diagonal carries the -2 log eps counterterm") {
  CovarianceKernel k(KernelKind::neumann_disk);
  double w1 = k.regularized(Site::circle_point(0.3, 1e-2),
                            Site::circle_point(0.3, 1e-2)) +
              2.0 * std::log(1e-2);
  double w2 = k.regularized(Site::circle_point(0.3, 5e-3),
                            Site::circle_point(0.3, 5e-3)) +
              2.0 * std::log(5e-3);
  double w3 = k.regularized(Site::circle_point(0.3, 2.5e-3),
                            Site::circle_point(0.3, 2.5e-3)) +
              2.0 * std::log(2.5e-3);
  // converges to W_b = 3 - 2 log 2 (triangular average of the log kernel)
  double target = k.diag_counterterm_boundary();
  CHECK(std::abs(w3 - target) < 1e-4);
  CHECK(std::abs(w3 - target) < std::abs(w1 - target));
  // distinct boundary points with small eps: plain boundary kernel
  double far = k.regularized(Site::circle_point(0.0, 1e-3),
                             Site::circle_point(2.0, 0.0));
  CHECK(far == doctest::Approx(-2.0 * std::log(2.0 * std::sin(1.0))).epsilon(1e-6));
}

TEST_CASE("field sampler reproduces the covariance and is deterministic") {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  std::vector<Site> sites = {Site::bulk({0.0, 0.0}, 0.01),
                             Site::bulk({0.4, 0.0}, 0.01),
                             Site::bulk({-0.1, 0.3}, 0.01)};
  FieldSampler sampler(kernel, sites);

  // variance at the center: -log eps + W(0) = -log eps
  CHECK(sampler.covariance()(0, 0) ==
        doctest::Approx(-std::log(0.01)).epsilon(1e-12));

  // determinism across call patterns
  Eigen::VectorXd one = sampler.sample(9, 17);
  Eigen::MatrixXd batch(3, 32);
  sampler.sample_batch(9, 0, batch);
  CHECK((batch.col(17) - one).norm() == doctest::Approx(0.0));

  // empirical covariance within 5 sigma over 20000 samples
  int n = 20000;
  Eigen::MatrixXd emp = Eigen::MatrixXd::Zero(3, 3);
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd v = sampler.sample(1234, i);
    emp += v * v.transpose();
  }
  emp /= n;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double cov = sampler.covariance()(i, j);
      double tol = 5.0 * (sampler.covariance()(i, i) +
                          sampler.covariance()(j, j)) /
                   std::sqrt(double(n));
      CHECK(std::abs(emp(i, j) - cov) < tol);
    }
}

TEST_CASE("boundary gff truncated covariance and mean-zero") {
  BoundaryGff circle(KernelKind::circle_gff, 256);
  auto modes = circle.draw_modes(5, 0);
  // zero angular mean: integrate the evaluator over theta
  double mean = 0.0;
  int n = 512;
  for (int i = 0; i < n; ++i)
    mean += circle.evaluate(modes, 2.0 * M_PI * i / n);
  CHECK(std::abs(mean / n) < 1e-10);

  // truncated covariance approaches -log(2 sin(gap/2))
  double trunc = circle.truncated_covariance(0.0, M_PI);
  CHECK(std::abs(trunc - (-std::log(2.0))) < 1.0 / 256.0);

  BoundaryGff half(KernelKind::half_circle_gff, 256);
  double htrunc = half.truncated_covariance(0.7, 0.7);
  double direct = 0.0;
  for (int m = 1; m <= 256; ++m)
    direct += 2.0 * std::cos(m * 0.7) * std::cos(m * 0.7) / m;
  CHECK(htrunc == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("harmonic extension and Dirichlet-to-Neumann") {
  // constant data: zero energy, D 1 = 0
  auto c = harmonic_extension_dtn(2.0, {0.0}, {0.0});
  CHECK(c.dirichlet_energy_mode_sum() == doctest::Approx(0.0));
  CHECK(c.evaluate({0.3, 0.2}) == doctest::Approx(2.0));

  // cos n theta -> energy n pi, quadrature route agrees to 1e-8
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> a(n, 0.0), b(n, 0.0);
    a[n - 1] = 1.0;
    auto e = harmonic_extension_dtn(0.0, a, b);
    CHECK(e.dirichlet_energy_mode_sum() ==
          doctest::Approx(n * M_PI).epsilon(1e-14));
    CHECK(std::abs(e.dirichlet_energy_quadrature(std::max(16, n + 8)) -
                   n * M_PI) < 1e-8);
    CHECK(e.dtn_cos()[n - 1] == doctest::Approx(double(n)));
  }

  // mixed c1 cos + c3 sin(3): energy pi (c1^2 + 3 c3^2)
  auto m = harmonic_extension_dtn(0.0, {0.7, 0.0, 0.0}, {0.0, 0.0, -1.2});
  CHECK(m.dirichlet_energy_mode_sum() ==
        doctest::Approx(M_PI * (0.49 + 3.0 * 1.44)).epsilon(1e-14));
  CHECK(std::abs(m.dirichlet_energy_quadrature(24) -
                 m.dirichlet_energy_mode_sum()) < 1e-8);
}

TEST_CASE("girsanov shift on the flat disk") {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  // empty functional
  auto u0 = girsanov_shift(kernel, {});
  CHECK(u0({0.3, 0.1}) == doctest::Approx(0.0));

  // one bulk charge alpha at 0: u(x) = -alpha log max(|x|, eps)
  double alpha = -1.0, eps = 0.01;
  auto u = girsanov_shift(kernel, {{Site::bulk({0.0, 0.0}, eps), alpha}});
  CHECK(u({0.5, 0.0}) ==
        doctest::Approx(-alpha * std::log(0.5)).epsilon(1e-12));
  CHECK(u({0.001, 0.0}) ==
        doctest::Approx(-alpha * std::log(eps)).epsilon(1e-9));

  // curvature part vanishes on the flat disk: the Q term changes nothing
  SurfaceSpec disk = SurfaceSpec::disk();
  ConformalFactor flat = ConformalFactor::flat();
  auto uq = girsanov_shift(kernel, {{Site::bulk({0.0, 0.0}, eps), alpha}},
                           -1.5, &disk, &flat);
  CHECK(uq({0.5, 0.0}) == doctest::Approx(u({0.5, 0.0})).epsilon(1e-12));

  // for the Neumann kernel the boundary integral is zero directly
  double boundary_int = 0.0;
  int n = 4096;
  for (int i = 0; i < n; ++i) {
    double th = 2.0 * M_PI * (i + 0.5) / n;
    boundary_int += kernel({0.37, 0.21}, std::polar(1.0, th)) * 2.0 * M_PI / n;
  }
  CHECK(std::abs(boundary_int) < 1e-8);
}

TEST_CASE("girsanov identities at finite sites") {
  // real version: E[F(X) e^Y] = e^{E Y^2/2} E[F(X + E[Y X])], F linear
  CovarianceKernel kernel(KernelKind::neumann_disk);
  std::vector<Site> sites = {Site::bulk({0.2, 0.0}, 0.02),
                             Site::bulk({-0.3, 0.2}, 0.02)};
  FieldSampler sampler(kernel, sites);
  Eigen::Vector2d h(0.7, -0.4);  // F(X) = h . X
  Eigen::Vector2d w(0.5, 0.3);   // Y = w . X
  Eigen::Matrix2d C = sampler.covariance();
  int n = 400000;
  double lhs = 0.0, lhs2 = 0.0;
  std::complex<double> phase_sum = 0.0;
  for (int i = 0; i < n; ++i) {
    Eigen::VectorXd x = sampler.sample(77, i);
    double y = w.dot(x);
    double v = h.dot(x) * std::exp(y);
    lhs += v;
    lhs2 += v * v;
    phase_sum += std::exp(std::complex<double>(0.0, y));
  }
  lhs /= n;
  double se = std::sqrt(std::max(0.0, lhs2 / n - lhs * lhs) / n);
  double ey2 = w.dot(C * w);
  double rhs = std::exp(0.5 * ey2) * h.dot(C * w);  // E[F(E[YX])] since F linear
  CHECK(std::abs(lhs - rhs) < 4.0 * se);

  // imaginary version with F = 1: E e^{iY} = e^{-E Y^2/2}
  std::complex<double> mean_phase = phase_sum / double(n);
  double target = std::exp(-0.5 * ey2);
  CHECK(std::abs(mean_phase.real() - target) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(mean_phase.imag()) < 4.0 / std::sqrt(double(n)));
}

TEST_CASE("field samples export to csv") {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  FieldSampler sampler(kernel, {Site::bulk({0.1, 0.0}, 0.05),
                                Site::circle_point(1.2, 0.05)});
  std::vector<FieldSample> samples = {sampler.sample_record(3, 0),
                                      sampler.sample_record(3, 1)};
  std::string csv = field_samples_to_csv(samples);
  CHECK(csv.find("sample,site,re,im,eps,boundary,value") == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("factorization failure reports the offending pair") {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  // duplicated site: rank-deficient matrix, handled by jitter (no throw)
  std::vector<Site> sites = {Site::bulk({0.2, 0.0}, 0.01),
                             Site::bulk({0.2, 0.0}, 0.01)};
  FieldSampler sampler(kernel, sites);
  CHECK(sampler.jitter_added() >= 0.0);
  Eigen::VectorXd v = sampler.sample(1, 0);
  CHECK(std::abs(v(0) - v(1)) < 1e-4);
}
