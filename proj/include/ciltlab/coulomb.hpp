#pragma once

#include <complex>
#include <cstdint>

namespace ciltlab {

// Complex Monte Carlo estimate. stderr combines the per-component standard
// errors in quadrature.
struct McEstimate {
  std::complex<double> value{0.0, 0.0};
  double stderr_ = 0.0;
  uint64_t n_samples = 0;
  uint64_t seed = 0;
  double epsilon = 0.0;

  double zscore(std::complex<double> reference) const {
    double d = std::abs(value - reference);
    return stderr_ > 0.0 ? d / stderr_ : (d == 0.0 ? 0.0 : 1e300);
  }
};

// log Gamma(x) for x > 0, Lanczos approximation, |error| < 1e-13.
double log_gamma(double x);
double gamma_fn(double x);

// Euler Beta via log-gamma.
double beta_fn(double a, double b);

struct MorrisParams {
  int q = 0;        // number of boundary screening charges
  double a = 0.0;   // per-point exponent; integrand carries |1-y|^{2a}
  double c = 0.0;   // pair exponent; integrand carries |y-y'|^{2c}

  static MorrisParams from_theory(int q, double beta, double eta) {
    return MorrisParams{q, eta * beta / 4.0, beta * beta / 4.0};
  }
  void check_integrable() const;
};

// prod_{j=0}^{q-1} G(1+2a+jc)G(1+(j+1)c) / (G(1+a+jc)^2 G(1+c)) with
// G = Gamma, a = eta*beta/4, c = beta^2/4. Empty product for q = 0.
double morris_closed_form(const MorrisParams& params);

// Gamma(1+q c)/Gamma(1+c)^q, the eta = 0 specialization.
double fyodorov_bouchaud(int q, double beta);

// Normalized boundary integral with measure dtheta/(2 pi) per point:
//   E prod_k |x - y_k|^{eta beta / 2} prod_{k<k'} |y_k - y_{k'}|^{beta^2/2}
// for an insertion point x = e^{i insertion_angle} on the circle.
McEstimate selberg_mc(int q, double eta_exponent, double pair_exponent,
                      double insertion_angle, uint64_t n_samples,
                      uint64_t seed, int threads = 0);

// Deterministic backends (256-node Gauss-Jacobi); q <= 2 only.
double selberg_quadrature(int q, double eta_exponent, double pair_exponent,
                          int nodes = 256);

// Unnormalized mixed bulk/boundary integral (Lebesgue area per bulk charge,
// arclength per boundary charge), insertions alpha at 0 and eta at 1:
//   int_{D^p} int_{(dD)^q} prod_j |w_j|^{alpha beta} |1-w_j|^{eta beta}
//     (1-|w_j|^2)^{beta^2/2} prod_{j<j'} |w_j-w_j'|^{beta^2} |1-w_j conj(w_j')|^{beta^2}
//     prod_k |1-y_k|^{eta beta/2} prod_{k<k'} |y_k-y_k'|^{beta^2/2}
//     prod_{j,k} |w_j-y_k|^{beta^2} dy dw
struct MixedIntegralDiagnostics {
  bool divergence_warning = false;
  double min_margin = 1e300;  // distance of exponents to integrability edge
};

McEstimate mixed_integral_mc(int p, int q, double alpha, double eta,
                             double beta, uint64_t n_samples, uint64_t seed,
                             int threads = 0,
                             MixedIntegralDiagnostics* diag = nullptr);

}  // namespace ciltlab
