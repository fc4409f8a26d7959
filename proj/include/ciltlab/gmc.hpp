#pragma once

#include <complex>
#include <functional>

#include "ciltlab/coulomb.hpp"
#include "ciltlab/geometry.hpp"
#include "ciltlab/gff.hpp"

namespace ciltlab {

enum class GmcRegion { bulk, boundary };

// Imaginary chaos specification on the flat unit disk. Bulk weight f lives on
// {|z| <= support_radius}; boundary weight on the unit circle (by angle).
// Normalizers: eps^{-beta^2/2} with phase beta X_eps (bulk),
// eps^{-beta^2/4} with phase (beta/2) X_eps (boundary).
struct GmcSpec {
  GmcRegion region = GmcRegion::bulk;
  double beta = 1.0;
  double epsilon = 0.01;
  double support_radius = 0.5;
  bool radial_symmetric = false;  // f(z) depends on |z| only (quadrature fast path)
  std::function<std::complex<double>(std::complex<double>)> f_bulk;
  std::function<std::complex<double>(double)> f_boundary;

  static GmcSpec bulk_indicator(double beta, double eps, double radius = 0.5);
  static GmcSpec boundary_uniform(double beta, double eps);
};

// Joint-grid Monte Carlo estimator: the regularized field is sampled jointly
// at a product quadrature grid with spacing <= eps/2 and the chaos integral
// is evaluated by the same grid per sample.
McEstimate gmc_estimate(const GmcSpec& spec, int quad_nodes, uint64_t n_samples,
                        uint64_t seed, int threads = 0);

// Deterministic first moment E[estimate] via the Gaussian characteristic
// function; exact at any eps for interior-supported bulk weights.
std::complex<double> gmc_first_moment_oracle(const GmcSpec& spec,
                                             int order = 64);

// E|M|^2 in the eps -> 0 limit by singular-kernel quadrature.
double gmc_second_moment(const GmcSpec& spec, int order = 64);

// E|M_eps|^2 at the spec's eps: the limit value plus the averaging-overlap
// correction (supported on |x-y| < 2 eps).
double gmc_second_moment_at_eps(const GmcSpec& spec, int order = 64);

// Unbiased pair-marginal MC estimate of E|M_eps|^2 at the spec's eps: the
// field is sampled at random site pairs through its exact 2x2 marginals.
McEstimate gmc_second_moment_mc(const GmcSpec& spec, uint64_t n_samples,
                                uint64_t seed, int threads = 0);

// E|M_{eps_a} - M_{eps_b}|^2 by quadrature; the integrand vanishes
// identically outside the averaging-overlap zone.
double l2_gap(const GmcSpec& spec, double eps_a, double eps_b, int order = 48);

struct MomentBounds {
  double u1 = 0.0;
  double u2 = 0.0;
  double v = 0.0;
};

// U1 = iint |f f| (d(x,y)^{-b^2} + |1 - x conj(y)|^{-b^2}) dv dv
// U2 = iint_{boundary^2} |f f| d^{-b^2/2} dl dl
// V  = int |f| d(x, dSigma)^{-b^2/2} dv (no Dirichlet boundary in scope)
MomentBounds moment_bound_quantities(
    const std::function<std::complex<double>(std::complex<double>)>& f_bulk,
    const std::function<std::complex<double>(double)>& f_boundary, double beta,
    double support_radius = 1.0, int order = 64);

}  // namespace ciltlab
