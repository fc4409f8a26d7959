#pragma once

#include <complex>
#include <map>
#include <set>
#include <utility>
#include <vector>

#include "ciltlab/coulomb.hpp"
#include "ciltlab/geometry.hpp"
#include "ciltlab/params.hpp"
#include "ciltlab/topology.hpp"

namespace ciltlab {

enum class CorrelatorBackend { coulomb_gas, monte_carlo };

struct CorrelatorConfig {
  ParamSet params;
  ChargeConfig charges;
  SurfaceSpec surface = SurfaceSpec::disk();
  CorrelatorBackend backend = CorrelatorBackend::coulomb_gas;
  double epsilon = 0.01;
  uint64_t n_samples = 100000;
  uint64_t seed = 1;
  int threads = 0;
  int quad_order = 64;

  void validate() const;
};

struct TermValue {
  std::complex<double> value{0.0, 0.0};
  double stderr_ = 0.0;  // zero for quadrature backends
};

struct CorrelatorResult {
  std::complex<double> value{0.0, 0.0};
  double stderr_ = 0.0;
  std::set<std::pair<int, int>> neutrality_set;
  std::map<std::pair<int, int>, TermValue> per_term;
  std::map<int, std::complex<double>> topological_sum_terms;  // annulus, per k
};

// Deterministic Coulomb-gas value of the (p,q) screening moment I(p,q):
// fixed-insertion Green factors and counterterm weights times the screening
// integral over D^p x (dD)^q (limit kernels). Quadrature for p+q <= 1 and
// (0,2); importance-sampled MC otherwise (stderr reported).
TermValue coulomb_gas_term(const CorrelatorConfig& config, int p, int q);

CorrelatorResult disk_correlator(const CorrelatorConfig& config);

// Two independent evaluations of the same (p,q) moment at the config's eps:
// (a) Monte Carlo over the regularized field at the insertion sites (with the
// screening integral evaluated per sample), (b) the Girsanov-reduced Gaussian
// formula by quadrature.
struct MomentCrosscheck {
  McEstimate mc;
  std::complex<double> deterministic{0.0, 0.0};
  double zscore = 0.0;
};

MomentCrosscheck mc_moment_crosscheck(const CorrelatorConfig& config, int p,
                                      int q);

// Constant-rho Weyl identity residual: max over the neutrality set of
// |log(per-term factor) - log(anomaly formula)| per unit rho.
double weyl_constant_rho_check(const CorrelatorConfig& config, double rho_const);

// e^{i R sum_j (alpha_j - Q) m_j theta_j}; exact unit at theta_j = 2 pi.
std::complex<double> spin_phase(const ChargeConfig& charges,
                                const ParamSet& params,
                                const std::vector<double>& theta);

// Topological weight of the lattice class k on the annulus:
//   exp(-pi R^2 int^reg |w_k|^2) * exp(i sum_j alpha_j I(2 pi R w_k)(v_j))
//   * exp(-i Q R K^delta(w_k)).
std::complex<double> annulus_topological_weight(const CorrelatorConfig& config,
                                                const SeparatingFamily& family,
                                                int k);

// Sum of annulus_topological_weight over k until the Gaussian tail drops
// below 1e-14; family-independent when Q R lies in 2Z.
std::complex<double> annulus_topological_sum(const CorrelatorConfig& config,
                                             const SeparatingFamily& family,
                                             std::map<int, std::complex<double>>* terms = nullptr);

}  // namespace ciltlab
