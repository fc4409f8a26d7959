#pragma once

#include <functional>
#include <vector>

namespace ciltlab {

struct QuadRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Gauss-Legendre rule on [-1, 1].
QuadRule gauss_legendre(int n);

// Shifted Gauss-Legendre rule on [a, b].
QuadRule gauss_legendre(int n, double a, double b);

// Gauss-Jacobi rule on [-1, 1] for weight (1-x)^alpha (1+x)^beta, via
// Golub-Welsch on the Jacobi recurrence. Weights include the singular factor.
QuadRule gauss_jacobi(int n, double alpha, double beta);

// Gauss-Jacobi rule mapped to [a, b] for weight (b-x)^alpha (x-a)^beta.
QuadRule gauss_jacobi(int n, double alpha, double beta, double a, double b);

double integrate(const QuadRule& rule, const std::function<double(double)>& f);

// Composite Gauss-Legendre over [a, b] split into n_panels panels.
double integrate_composite(const std::function<double(double)>& f, double a,
                           double b, int order, int n_panels);

}  // namespace ciltlab
