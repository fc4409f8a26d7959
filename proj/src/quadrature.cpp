#include "ciltlab/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "ciltlab/coulomb.hpp"
#include "ciltlab/errors.hpp"

namespace ciltlab {

QuadRule gauss_legendre(int n) {
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  // Newton iteration on Legendre polynomials, nodes symmetric about 0.
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 0; j < n; ++j) {
        double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
      }
      pp = n * (x * p0 - p1) / (x * x - 1.0);
      double dx = p0 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * pp * pp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  return rule;
}

QuadRule gauss_legendre(int n, double a, double b) {
  QuadRule base = gauss_legendre(n);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * base.nodes[i];
    rule.weights[i] = half * base.weights[i];
  }
  return rule;
}

QuadRule gauss_jacobi(int n, double alpha, double beta) {
  if (alpha <= -1.0 || beta <= -1.0)
    throw QuadratureError("gauss_jacobi: exponents must exceed -1");
  // Three-term recurrence coefficients for Jacobi polynomials. k = 0 and
  // k = 1 use the cancelled forms, which stay finite at alpha + beta = -1, 0.
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  auto a_k = [&](int k) {
    if (k == 0) return (beta - alpha) / (alpha + beta + 2.0);
    double num = (beta * beta - alpha * alpha);
    double den = (2.0 * k + alpha + beta) * (2.0 * k + alpha + beta + 2.0);
    return num / den;
  };
  auto b_k = [&](int k) {
    // off-diagonal, k >= 1
    if (k == 1) {
      double num = 4.0 * (1.0 + alpha) * (1.0 + beta);
      double den = std::pow(alpha + beta + 2.0, 2) * (alpha + beta + 3.0);
      return std::sqrt(num / den);
    }
    double num = 4.0 * k * (k + alpha) * (k + beta) * (k + alpha + beta);
    double den = (2.0 * k + alpha + beta - 1.0) *
                 std::pow(2.0 * k + alpha + beta, 2) *
                 (2.0 * k + alpha + beta + 1.0);
    return std::sqrt(num / den);
  };
  for (int k = 0; k < n; ++k) {
    J(k, k) = a_k(k);
    if (k >= 1) {
      double off = b_k(k);
      J(k, k - 1) = off;
      J(k - 1, k) = off;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  if (es.info() != Eigen::Success)
    throw QuadratureError("gauss_jacobi: eigensolver failed");
  // mu0 = integral of the weight over [-1,1]
  double mu0 = std::exp((alpha + beta + 1.0) * std::log(2.0) +
                        log_gamma(alpha + 1.0) + log_gamma(beta + 1.0) -
                        log_gamma(alpha + beta + 2.0));
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = es.eigenvalues()(i);
    double v = es.eigenvectors()(0, i);
    rule.weights[i] = mu0 * v * v;
  }
  return rule;
}

QuadRule gauss_jacobi(int n, double alpha, double beta, double a, double b) {
  QuadRule base = gauss_jacobi(n, alpha, beta);
  QuadRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double half = 0.5 * (b - a);
  // x in [-1,1] -> t = a + half*(x+1); weight scales by half^(alpha+beta+1)
  double wscale = std::pow(half, alpha + beta + 1.0);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = a + half * (base.nodes[i] + 1.0);
    rule.weights[i] = wscale * base.weights[i];
  }
  return rule;
}

double integrate(const QuadRule& rule, const std::function<double(double)>& f) {
  double acc = 0.0;
  for (size_t i = 0; i < rule.nodes.size(); ++i)
    acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

double integrate_composite(const std::function<double(double)>& f, double a,
                           double b, int order, int n_panels) {
  QuadRule base = gauss_legendre(order);
  double acc = 0.0;
  double h = (b - a) / n_panels;
  for (int p = 0; p < n_panels; ++p) {
    double lo = a + p * h;
    double mid = lo + 0.5 * h, half = 0.5 * h;
    for (size_t i = 0; i < base.nodes.size(); ++i)
      acc += half * base.weights[i] * f(mid + half * base.nodes[i]);
  }
  return acc;
}

}  // namespace ciltlab
