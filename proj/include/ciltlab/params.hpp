#pragma once

#include <complex>
#include <optional>
#include <set>
#include <utility>
#include <vector>

namespace ciltlab {

using Complex = std::complex<double>;

// Validated theory parameters. q_charge = beta/2 - 2/beta is negative on the
// whole admissible range beta in (0, sqrt(2)).
struct ParamSet {
  double beta = 1.0;
  double q_charge = -1.5;
  double radius = 4.0;
  Complex mu{0.0, 0.0};
  Complex mu_boundary{0.0, 0.0};
  bool has_corners = false;
  bool has_boundary_potential = false;
  bool rational_regime_warning = false;

  double central_charge() const { return 1.0 - 6.0 * q_charge * q_charge; }
};

struct BulkInsertion {
  Complex position;
  double alpha = 0.0;
  int magnetic = 0;
  double tangent_angle = 0.0;
};

struct BoundaryInsertion {
  double theta = 0.0;  // position e^{i theta} on the Neumann circle
  double eta = 0.0;
};

struct ChargeConfig {
  std::vector<BulkInsertion> bulk;
  std::vector<BoundaryInsertion> boundary;
  int extra_degree = 0;  // pure degree n of the test functional

  double alpha_sum() const;
  double eta_half_sum() const;
};

inline constexpr double kLatticeTol = 1e-9;

// Distance from x to the nearest point of step*Z.
double lattice_distance(double x, double step);
bool in_lattice(double x, double step, double tol = kLatticeTol);

ParamSet validate_params(double beta, double radius, Complex mu,
                         Complex mu_boundary, bool has_corners);

// Throws if the insertion data violates the charge integrality constraints
// or the alpha,eta > Q hypothesis.
void validate_charges(const ParamSet& params, const ChargeConfig& charges);

struct ConformalWeights {
  double delta_bulk = 0.0;
  std::optional<double> delta_boundary;
  double central_charge = 0.0;
};

ConformalWeights conformal_weights(const ParamSet& params, double alpha, int m,
                                   std::optional<double> eta = std::nullopt);

// All (p, q) >= (0, 0) with n/R + sum(alpha) + sum(eta)/2 - Q*chi
// + p*beta + q*beta/2 = 0. Empty iff the Seiberg-type bound fails.
std::set<std::pair<int, int>> neutrality_solutions(const ParamSet& params,
                                                   const ChargeConfig& charges,
                                                   int euler_char);

}  // namespace ciltlab
