#include "ciltlab/coulomb.hpp"

#include <cmath>
#include <vector>

#include "ciltlab/errors.hpp"
#include "ciltlab/parallel.hpp"
#include "ciltlab/quadrature.hpp"
#include "ciltlab/rng.hpp"

namespace ciltlab {

using std::complex;

double log_gamma(double x) {
  if (!(x > 0.0)) throw DomainError("log_gamma: argument must be positive");
  // Lanczos, g = 7, 9 coefficients.
  static const double g = 7.0;
  static const double coef[9] = {
      0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
      771.32342877765313,   -176.61502916214059,   12.507343278686905,
      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  if (x < 0.5) {
    // Reflection keeps accuracy near 0; in-scope arguments stay positive.
    return std::log(M_PI / std::sin(M_PI * x)) - log_gamma(1.0 - x);
  }
  double xx = x - 1.0;
  double a = coef[0];
  double t = xx + g + 0.5;
  for (int i = 1; i < 9; ++i) a += coef[i] / (xx + i);
  return 0.5 * std::log(2.0 * M_PI) + (xx + 0.5) * std::log(t) - t +
         std::log(a);
}

double gamma_fn(double x) { return std::exp(log_gamma(x)); }

double beta_fn(double a, double b) {
  return std::exp(log_gamma(a) + log_gamma(b) - log_gamma(a + b));
}

void MorrisParams::check_integrable() const {
  if (q < 0) throw DomainError("MorrisParams: q must be nonnegative");
  if (q >= 1 && !(2.0 * a + (q - 1) * 2.0 * c > -1.0))
    throw DivergenceError("MorrisParams: per-point exponent not integrable");
  if (q >= 2 && !(2.0 * c > -1.0))
    throw DivergenceError("MorrisParams: pair exponent not integrable");
}

double morris_closed_form(const MorrisParams& params) {
  params.check_integrable();
  double log_val = 0.0;
  for (int j = 0; j < params.q; ++j) {
    double g1 = 1.0 + 2.0 * params.a + j * params.c;
    double g2 = 1.0 + (j + 1) * params.c;
    double g3 = 1.0 + params.a + j * params.c;
    double g4 = 1.0 + params.c;
    if (g1 <= 0.0 || g2 <= 0.0 || g3 <= 0.0 || g4 <= 0.0)
      throw DomainError("morris_closed_form: nonpositive Gamma argument");
    log_val += log_gamma(g1) + log_gamma(g2) - 2.0 * log_gamma(g3) -
               log_gamma(g4);
  }
  return std::exp(log_val);
}

double fyodorov_bouchaud(int q, double beta) {
  double c = beta * beta / 4.0;
  return std::exp(log_gamma(1.0 + q * c) - q * log_gamma(1.0 + c));
}

namespace {

struct Accumulator {
  double sum_re = 0.0, sum_im = 0.0;
  double sum_re2 = 0.0, sum_im2 = 0.0;
  uint64_t n = 0;

  void add(complex<double> v) {
    sum_re += v.real();
    sum_im += v.imag();
    sum_re2 += v.real() * v.real();
    sum_im2 += v.imag() * v.imag();
    ++n;
  }
  void merge(const Accumulator& o) {
    sum_re += o.sum_re;
    sum_im += o.sum_im;
    sum_re2 += o.sum_re2;
    sum_im2 += o.sum_im2;
    n += o.n;
  }
  McEstimate finish(uint64_t seed, double epsilon = 0.0) const {
    McEstimate e;
    e.n_samples = n;
    e.seed = seed;
    e.epsilon = epsilon;
    double inv = 1.0 / static_cast<double>(n);
    double mre = sum_re * inv, mim = sum_im * inv;
    e.value = {mre, mim};
    double var_re = std::max(0.0, sum_re2 * inv - mre * mre);
    double var_im = std::max(0.0, sum_im2 * inv - mim * mim);
    e.stderr_ = std::sqrt((var_re + var_im) * inv);
    return e;
  }
};

constexpr uint64_t kChunk = 8192;

// Deterministic chunked MC: per-sample substream keyed by global index,
// per-chunk partial sums merged in fixed order.
template <typename SampleFn>
McEstimate run_mc(uint64_t n_samples, uint64_t seed, int threads,
                  double epsilon, SampleFn&& sample) {
  uint64_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<Accumulator> parts(n_chunks);
  parallel_chunks(static_cast<int64_t>(n_chunks), threads, [&](int64_t c) {
    uint64_t lo = static_cast<uint64_t>(c) * kChunk;
    uint64_t hi = std::min(lo + kChunk, n_samples);
    Accumulator acc;
    for (uint64_t i = lo; i < hi; ++i) {
      Rng rng(seed, i);
      acc.add(sample(rng));
    }
    parts[c] = acc;
  });
  Accumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.finish(seed, epsilon);
}

}  // namespace

McEstimate selberg_mc(int q, double eta_exponent, double pair_exponent,
                      double insertion_angle, uint64_t n_samples,
                      uint64_t seed, int threads) {
  MorrisParams mp{q, eta_exponent / 2.0, pair_exponent / 2.0};
  mp.check_integrable();
  auto sample = [=](Rng& rng) -> complex<double> {
    std::vector<double> theta(q);
    for (int k = 0; k < q; ++k) theta[k] = rng.uniform(0.0, 2.0 * M_PI);
    double log_w = 0.0;
    for (int k = 0; k < q; ++k) {
      double gap = std::abs(2.0 * std::sin(0.5 * (theta[k] - insertion_angle)));
      log_w += eta_exponent * std::log(gap);
      for (int kk = k + 1; kk < q; ++kk) {
        double pg = std::abs(2.0 * std::sin(0.5 * (theta[k] - theta[kk])));
        log_w += pair_exponent * std::log(pg);
      }
    }
    return {std::exp(log_w), 0.0};
  };
  return run_mc(n_samples, seed, threads, 0.0, sample);
}

double selberg_quadrature(int q, double eta_exponent, double pair_exponent,
                          int nodes) {
  if (q == 0) return 1.0;
  if (q == 1) {
    // (1/2pi) int (2 sin(t/2))^{eta} dt, endpoint singularities t -> 0, 2pi.
    QuadRule r = gauss_jacobi(nodes, eta_exponent, eta_exponent, 0.0, 2.0 * M_PI);
    double acc = 0.0;
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      double t = r.nodes[i];
      double base = 2.0 * std::sin(0.5 * t);
      // remove the endpoint factors already inside the Jacobi weight:
      // (2 sin(t/2))^{e} = [t(2pi - t)]^{e} * smooth(t)^{e}
      double smooth = base / (t * (2.0 * M_PI - t));
      acc += r.weights[i] * std::pow(smooth, eta_exponent);
    }
    return acc / (2.0 * M_PI);
  }
  if (q == 2) {
    if (eta_exponent == 0.0) {
      // Rotation invariance reduces to a single angular gap.
      QuadRule r = gauss_jacobi(nodes, pair_exponent, pair_exponent, 0.0,
                                2.0 * M_PI);
      double acc = 0.0;
      for (size_t i = 0; i < r.nodes.size(); ++i) {
        double u = r.nodes[i];
        double s = 2.0 * std::sin(0.5 * u) / (u * (2.0 * M_PI - u));
        acc += r.weights[i] * std::pow(s, pair_exponent);
      }
      return acc / (2.0 * M_PI);
    }
    // Nested Gauss-Jacobi: outer t1 with |1-y1|^{eta} endpoint weights,
    // inner t2 split at t1 with the |1-y2|^{eta} and |y1-y2|^{pair} weights.
    const double e = eta_exponent, c = pair_exponent;
    const double two_pi = 2.0 * M_PI;
    QuadRule outer = gauss_jacobi(nodes, e, e, 0.0, two_pi);
    auto eta_resid = [&](double t) {
      // (2 sin(t/2))^e = [t (2pi - t)]^e * resid(t)^e
      return 2.0 * std::sin(0.5 * t) / (t * (two_pi - t));
    };
    double acc = 0.0;
    for (size_t i = 0; i < outer.nodes.size(); ++i) {
      double t1 = outer.nodes[i];
      double f1 = std::pow(eta_resid(t1), e);
      double inner = 0.0;
      {  // [0, t1]: weight (t1 - t2)^c * t2^e
        QuadRule r = gauss_jacobi(nodes, c, e, 0.0, t1);
        for (size_t j = 0; j < r.nodes.size(); ++j) {
          double t2 = r.nodes[j];
          double g_eta = 2.0 * std::sin(0.5 * t2) / t2;          // ^e
          double g_pair = 2.0 * std::sin(0.5 * (t1 - t2)) / (t1 - t2);  // ^c
          inner += r.weights[j] * std::pow(g_eta, e) * std::pow(g_pair, c);
        }
      }
      {  // [t1, 2pi]: weight (2pi - t2)^e * (t2 - t1)^c
        QuadRule r = gauss_jacobi(nodes, e, c, t1, two_pi);
        for (size_t j = 0; j < r.nodes.size(); ++j) {
          double t2 = r.nodes[j];
          double g_eta = 2.0 * std::sin(0.5 * t2) / (two_pi - t2);
          double g_pair = 2.0 * std::sin(0.5 * (t2 - t1)) / (t2 - t1);
          inner += r.weights[j] * std::pow(g_eta, e) * std::pow(g_pair, c);
        }
      }
      acc += outer.weights[i] * f1 * inner;
    }
    return acc / (4.0 * M_PI * M_PI);
  }
  throw UnsupportedSurface("selberg_quadrature: only q <= 2 supported");
}

McEstimate mixed_integral_mc(int p, int q, double alpha, double eta,
                             double beta, uint64_t n_samples, uint64_t seed,
                             int threads, MixedIntegralDiagnostics* diag) {
  const double ab = alpha * beta;
  const double b2 = beta * beta;
  if (!(ab > -2.0)) throw DivergenceError("mixed_integral_mc: alpha*beta <= -2");
  if (!(b2 < 2.0)) throw DivergenceError("mixed_integral_mc: beta^2 >= 2");
  if (q >= 1 && !(eta * beta / 2.0 > -1.0))
    throw DivergenceError("mixed_integral_mc: eta*beta/2 <= -1");
  if (p >= 1 && !(eta * beta > -1.0))
    throw DivergenceError("mixed_integral_mc: eta*beta <= -1 (bulk vs x=1)");
  if (diag) {
    diag->min_margin = std::min({ab + 2.0, 2.0 - b2,
                                 q >= 1 ? eta * beta / 2.0 + 1.0 : 1e300,
                                 p >= 1 ? eta * beta + 1.0 : 1e300});
    diag->divergence_warning = diag->min_margin < 0.05;
  }

  // Bulk radial proposal r ~ (2+ab) r^{1+ab} handles the |w|^{ab} pole at 0;
  // angles uniform. Boundary proposal: mixture of uniform and a power-law
  // cluster near theta = 0 tempered to exponent max(eta*beta/2, -0.95).
  const double rad_pow = 2.0 + ab;
  const double bexp = q >= 1 ? std::max(eta * beta / 2.0, -0.95) : 0.0;
  const double mix = 0.5;

  auto sample = [=](Rng& rng) -> complex<double> {
    double log_w = 0.0;
    std::vector<complex<double>> w(p);
    std::vector<double> ty(q);
    for (int j = 0; j < p; ++j) {
      double u = rng.uniform();
      double r = std::pow(u, 1.0 / rad_pow);
      double th = rng.uniform(0.0, 2.0 * M_PI);
      w[j] = std::polar(r, th);
      // density on the disk: rad_pow * r^{1+ab} / (2 pi r)
      log_w -= std::log(rad_pow / (2.0 * M_PI)) + ab * std::log(r);
    }
    for (int k = 0; k < q; ++k) {
      double t;
      double u = rng.uniform();
      if (rng.uniform() < mix) {
        // theta = pi * v^{1/(1+bexp)}, sign random
        double v = std::pow(u, 1.0 / (1.0 + bexp));
        t = M_PI * v;
        if (rng.uniform() < 0.5) t = 2.0 * M_PI - t;
      } else {
        t = u * 2.0 * M_PI;
      }
      ty[k] = t;
      double tt = t <= M_PI ? t : 2.0 * M_PI - t;  // distance to 0 in angle
      double dens = mix * (1.0 + bexp) * std::pow(tt / M_PI, bexp) / (2.0 * M_PI) +
                    (1.0 - mix) / (2.0 * M_PI);
      log_w -= std::log(dens);
    }
    // integrand
    for (int j = 0; j < p; ++j) {
      double r = std::abs(w[j]);
      log_w += ab * std::log(r);
      log_w += eta * beta * std::log(std::abs(1.0 - w[j]));
      log_w += 0.5 * b2 * std::log1p(-r * r);
      for (int jj = j + 1; jj < p; ++jj) {
        log_w += b2 * std::log(std::abs(w[j] - w[jj]));
        log_w += b2 * std::log(std::abs(1.0 - w[j] * std::conj(w[jj])));
      }
    }
    for (int k = 0; k < q; ++k) {
      complex<double> y = std::polar(1.0, ty[k]);
      log_w += 0.5 * eta * beta * std::log(std::abs(2.0 * std::sin(0.5 * ty[k])));
      for (int kk = k + 1; kk < q; ++kk)
        log_w += 0.5 * b2 *
                 std::log(std::abs(2.0 * std::sin(0.5 * (ty[k] - ty[kk]))));
      for (int j = 0; j < p; ++j)
        log_w += b2 * std::log(std::abs(w[j] - y));
    }
    return {std::exp(log_w), 0.0};
  };
  return run_mc(n_samples, seed, threads, 0.0, sample);
}

}  // namespace ciltlab
