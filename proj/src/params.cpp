#include "ciltlab/params.hpp"

#include <cmath>
#include <sstream>

#include "ciltlab/errors.hpp"

namespace ciltlab {

double ChargeConfig::alpha_sum() const {
  double s = 0.0;
  for (const auto& b : bulk) s += b.alpha;
  return s;
}

double ChargeConfig::eta_half_sum() const {
  double s = 0.0;
  for (const auto& b : boundary) s += 0.5 * b.eta;
  return s;
}

double lattice_distance(double x, double step) {
  double q = x / step;
  return std::abs(q - std::round(q)) * std::abs(step);
}

bool in_lattice(double x, double step, double tol) {
  return lattice_distance(x, step) < tol;
}

ParamSet validate_params(double beta, double radius, Complex mu,
                         Complex mu_boundary, bool has_corners) {
  if (!(beta > 0.0) || !(radius > 0.0))
    throw DomainError("validate_params: beta and radius must be positive");
  if (!(beta < std::sqrt(2.0)))
    throw DomainError("validate_params: beta must lie in (0, sqrt(2))");

  ParamSet p;
  p.beta = beta;
  p.radius = radius;
  p.mu = mu;
  p.mu_boundary = mu_boundary;
  p.has_corners = has_corners;
  p.has_boundary_potential = (mu_boundary != Complex(0.0, 0.0));
  p.q_charge = beta / 2.0 - 2.0 / beta;

  double br_step = p.has_boundary_potential ? 2.0 : 1.0;
  if (!in_lattice(beta * radius, br_step)) {
    std::ostringstream os;
    os << "validate_params: beta*radius = " << beta * radius
       << " must lie in " << (br_step == 2.0 ? "2Z" : "Z")
       << " (distance " << lattice_distance(beta * radius, br_step) << ")";
    throw CompactificationError(os.str());
  }
  double qr_step = has_corners ? 4.0 : 2.0;
  if (!in_lattice(p.q_charge * radius, qr_step)) {
    std::ostringstream os;
    os << "validate_params: Q*radius = " << p.q_charge * radius
       << " must lie in " << (has_corners ? "4Z" : "2Z")
       << " (distance " << lattice_distance(p.q_charge * radius, qr_step)
       << ")";
    throw CompactificationError(os.str());
  }

  // Rational regime (1/beta)Z meets (1/Q)Z away from 0 iff Q/beta is
  // rational. Checked against small denominators only; a miss is a warning.
  double ratio = p.q_charge / beta;
  bool rational = false;
  for (int den = 1; den <= 64 && !rational; ++den)
    rational = in_lattice(ratio * den, 1.0, 1e-9);
  p.rational_regime_warning = !rational;
  return p;
}

void validate_charges(const ParamSet& params, const ChargeConfig& charges) {
  const double R = params.radius;
  for (size_t i = 0; i < charges.bulk.size(); ++i) {
    const auto& b = charges.bulk[i];
    if (!(b.alpha > params.q_charge))
      throw DomainError("validate_charges: alpha must exceed Q");
    if (!in_lattice(b.alpha * R, 1.0))
      throw CompactificationError("validate_charges: alpha*R must lie in Z");
    for (size_t j = i + 1; j < charges.bulk.size(); ++j)
      if (std::abs(b.position - charges.bulk[j].position) < 1e-12)
        throw DomainError("validate_charges: bulk positions must be distinct");
  }
  for (size_t i = 0; i < charges.boundary.size(); ++i) {
    const auto& b = charges.boundary[i];
    if (!(b.eta > params.q_charge))
      throw DomainError("validate_charges: eta must exceed Q");
    if (!in_lattice(b.eta * R, 2.0))
      throw CompactificationError("validate_charges: eta*R must lie in 2Z");
    for (size_t j = i + 1; j < charges.boundary.size(); ++j)
      if (std::abs(b.theta - charges.boundary[j].theta) < 1e-12)
        throw DomainError(
            "validate_charges: boundary positions must be distinct");
  }
  double total = charges.alpha_sum() * R + charges.eta_half_sum() * R;
  if (!in_lattice(total, 1.0))
    throw CompactificationError(
        "validate_charges: sum(alpha)R + sum(eta/2)R must lie in Z");
}

ConformalWeights conformal_weights(const ParamSet& params, double alpha, int m,
                                   std::optional<double> eta) {
  ConformalWeights w;
  const double Q = params.q_charge;
  const double R = params.radius;
  w.delta_bulk = 0.5 * alpha * (0.5 * alpha - Q) +
                 0.25 * static_cast<double>(m) * m * R * R;
  if (eta) w.delta_boundary = 0.5 * *eta * (0.5 * *eta - Q);
  w.central_charge = params.central_charge();
  return w;
}

std::set<std::pair<int, int>> neutrality_solutions(const ParamSet& params,
                                                   const ChargeConfig& charges,
                                                   int euler_char) {
  // p*beta + q*beta/2 = S with S = Q*chi - n/R - sum(alpha) - sum(eta)/2.
  const double S = params.q_charge * euler_char -
                   charges.extra_degree / params.radius -
                   charges.alpha_sum() - charges.eta_half_sum();
  std::set<std::pair<int, int>> out;
  if (S < -kLatticeTol) return out;
  double target = S / params.beta;  // p + q/2
  int pmax = static_cast<int>(std::floor(target + kLatticeTol));
  for (int p = 0; p <= pmax; ++p) {
    double q = 2.0 * (target - p);
    long qr = std::lround(q);
    if (qr >= 0 && std::abs(q - qr) < kLatticeTol)
      out.insert({p, static_cast<int>(qr)});
  }
  return out;
}

}  // namespace ciltlab
