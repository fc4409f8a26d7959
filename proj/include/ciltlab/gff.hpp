#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ciltlab/geometry.hpp"

namespace ciltlab {

enum class KernelKind { circle_gff, half_circle_gff, neumann_disk, dirichlet_disk };

// Evaluation site. Bulk sites are circle-averaged at scale eps (exact closed
// forms away from overlaps); boundary sites on the unit circle are averaged
// along the boundary arc of half-length eps. Both conventions share the
// counterterm structure C_eps(x,x) = -log eps + W(x) (bulk) and
// C_eps(x,x) = -2 log eps + W_b + o(1) (boundary).
struct Site {
  std::complex<double> point;
  double eps = 0.0;
  bool boundary = false;

  static Site bulk(std::complex<double> z, double eps = 0.0) {
    return Site{z, eps, false};
  }
  static Site circle_point(double theta, double eps = 0.0) {
    return Site{std::polar(1.0, theta), eps, true};
  }
};

// Green function value G(x,y); the field covariance is C = 2*pi*G.
double green_kernel(KernelKind kind, std::complex<double> x,
                    std::complex<double> y);

class CovarianceKernel {
 public:
  explicit CovarianceKernel(KernelKind kind = KernelKind::neumann_disk);

  KernelKind kind() const { return kind_; }

  // Unregularized covariance C(x,y) = 2*pi*G(x,y).
  double operator()(std::complex<double> x, std::complex<double> y) const;

  // Circle/arc-average regularized covariance between two tagged sites.
  double regularized(const Site& x, const Site& y) const;

  // W(x) = lim_{eps->0} C_eps(x,x) + log eps. Flat Neumann disk:
  // W(x) = -log(1-|x|^2).
  double diag_counterterm_bulk(std::complex<double> x) const;

  // W_b = lim_{eps->0} C_eps(x,x) + 2 log eps for boundary sites
  // (x-independent on the disk).
  double diag_counterterm_boundary() const;

 private:
  KernelKind kind_;
  double harmonic_sign_ = -1.0;  // -log|1-x conj(y)| for Neumann, + for Dirichlet
};

Eigen::MatrixXd covariance_matrix(const CovarianceKernel& kernel,
                                  const std::vector<Site>& sites);

struct FieldSample {
  std::vector<Site> points;
  Eigen::VectorXd values;
  uint64_t seed = 0;
  uint64_t index = 0;
};

// Gaussian sampler over the exact finite-dimensional marginal at the given
// sites. Deterministic stream: sample (seed, i) never depends on the
// schedule. Near-singular matrices get diagonal jitter 1e-12*trace, recorded
// in jitter_added().
class FieldSampler {
 public:
  FieldSampler(const CovarianceKernel& kernel, std::vector<Site> sites);

  size_t dim() const { return sites_.size(); }
  const std::vector<Site>& sites() const { return sites_; }
  const Eigen::MatrixXd& covariance() const { return cov_; }
  double jitter_added() const { return jitter_; }

  Eigen::VectorXd sample(uint64_t seed, uint64_t index) const;
  FieldSample sample_record(uint64_t seed, uint64_t index) const;

  // columns start_index .. start_index+out.cols()-1 of the stream
  void sample_batch(uint64_t seed, uint64_t start_index,
                    Eigen::MatrixXd& out) const;

 private:
  std::vector<Site> sites_;
  Eigen::MatrixXd cov_;
  Eigen::MatrixXd chol_;
  double jitter_ = 0.0;
};

std::string field_samples_to_csv(const std::vector<FieldSample>& samples);

// Boundary GFF on the circle / half-circle, truncated to n_modes.
//   circle:      sum_{n<=N} (x_n cos n t - y_n sin n t)/sqrt(n)
//   half-circle: sum_{n<=N} sqrt(2/n) x_n cos n t
class BoundaryGff {
 public:
  BoundaryGff(KernelKind kind, int n_modes);

  int n_modes() const { return n_modes_; }
  // mode vector layout: circle (x_1,y_1,...,x_N,y_N); half (x_1,...,x_N)
  Eigen::VectorXd draw_modes(uint64_t seed, uint64_t index) const;
  double evaluate(const Eigen::VectorXd& modes, double theta) const;
  // evaluate(modes, theta) == coefficient_vector(theta).dot(modes)
  Eigen::VectorXd coefficient_vector(double theta) const;

  // truncated covariance of the mode sum
  double truncated_covariance(double theta_a, double theta_b) const;
  // full-series covariance: -log|e^{ia}-e^{ib}| resp. twice that
  double limit_covariance(double theta_a, double theta_b) const;

 private:
  KernelKind kind_;
  int n_modes_;
};

struct HarmonicExtension {
  double a0 = 0.0;
  std::vector<double> cos_coef;  // a_n, n = 1..N
  std::vector<double> sin_coef;  // b_n
  double evaluate(std::complex<double> z) const;
  std::vector<double> dtn_cos() const;  // |n| a_n
  std::vector<double> dtn_sin() const;
  double dirichlet_energy_mode_sum() const;       // pi sum n (a_n^2+b_n^2)
  double dirichlet_energy_quadrature(int order) const;
};

HarmonicExtension harmonic_extension_dtn(double a0, std::vector<double> cos_coef,
                                         std::vector<double> sin_coef);

// Girsanov shift u(x) = sum_j w_j C_eps(x, y_j)
//   - (Q/4pi) int K(y) C(x,y) dv(y) - (Q/2pi) int k C(x,y) dl(y).
// On the flat disk the curvature integrals vanish.
struct ShiftTerm {
  Site site;
  double weight = 0.0;
};

std::function<double(std::complex<double>)> girsanov_shift(
    const CovarianceKernel& kernel, std::vector<ShiftTerm> terms,
    double q_charge = 0.0, const SurfaceSpec* surface = nullptr,
    const ConformalFactor* rho = nullptr, int quad_order = 32);

}  // namespace ciltlab
