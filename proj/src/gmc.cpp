#include "ciltlab/gmc.hpp"

#include <cmath>
#include <vector>

#include "ciltlab/errors.hpp"
#include "ciltlab/parallel.hpp"
#include "ciltlab/quadrature.hpp"
#include "ciltlab/rng.hpp"

namespace ciltlab {

using std::complex;

GmcSpec GmcSpec::bulk_indicator(double beta, double eps, double radius) {
  GmcSpec s;
  s.region = GmcRegion::bulk;
  s.beta = beta;
  s.epsilon = eps;
  s.support_radius = radius;
  s.radial_symmetric = true;
  s.f_bulk = [](complex<double>) { return complex<double>(1.0, 0.0); };
  return s;
}

GmcSpec GmcSpec::boundary_uniform(double beta, double eps) {
  GmcSpec s;
  s.region = GmcRegion::boundary;
  s.beta = beta;
  s.epsilon = eps;
  s.f_boundary = [](double) { return complex<double>(1.0, 0.0); };
  return s;
}

namespace {

struct GridNode {
  Site site;
  complex<double> fw;  // f(node) * quadrature weight
};

std::vector<GridNode> build_grid(const GmcSpec& spec, int quad_nodes) {
  // grid spacing must resolve the regularization scale: spacing <= eps/2
  std::vector<GridNode> nodes;
  if (spec.region == GmcRegion::bulk) {
    int nr = std::max<int>(
        quad_nodes, static_cast<int>(std::ceil(2.0 * spec.support_radius /
                                               spec.epsilon)));
    int nth = std::max<int>(
        2 * quad_nodes,
        static_cast<int>(std::ceil(4.0 * M_PI * spec.support_radius /
                                   spec.epsilon)));
    if (static_cast<int64_t>(nr) * nth > 6000)
      throw ResolutionError(
          "gmc_estimate: eps under-resolved for a factorizable joint grid; "
          "use a larger eps or the pair-marginal second-moment estimator");
    QuadRule rr = gauss_legendre(nr, 0.0, spec.support_radius);
    QuadRule tt = gauss_legendre(nth, 0.0, 2.0 * M_PI);
    for (size_t i = 0; i < rr.nodes.size(); ++i)
      for (size_t j = 0; j < tt.nodes.size(); ++j) {
        GridNode n;
        complex<double> z = std::polar(rr.nodes[i], tt.nodes[j]);
        n.site = Site::bulk(z, spec.epsilon);
        n.fw = spec.f_bulk(z) * rr.weights[i] * tt.weights[j] * rr.nodes[i];
        nodes.push_back(n);
      }
  } else {
    int nth = std::max<int>(
        quad_nodes, static_cast<int>(std::ceil(4.0 * M_PI / spec.epsilon)));
    if (nth > 6000)
      throw ResolutionError(
          "gmc_estimate: eps under-resolved for the boundary grid");
    QuadRule tt = gauss_legendre(nth, 0.0, 2.0 * M_PI);
    for (size_t j = 0; j < tt.nodes.size(); ++j) {
      GridNode n;
      n.site = Site::circle_point(tt.nodes[j], spec.epsilon);
      n.fw = spec.f_boundary(tt.nodes[j]) * tt.weights[j];
      nodes.push_back(n);
    }
  }
  return nodes;
}

struct ComplexAccumulator {
  double sr = 0.0, si = 0.0, sr2 = 0.0, si2 = 0.0;
  uint64_t n = 0;
  void add(complex<double> v) {
    sr += v.real();
    si += v.imag();
    sr2 += v.real() * v.real();
    si2 += v.imag() * v.imag();
    ++n;
  }
  void merge(const ComplexAccumulator& o) {
    sr += o.sr;
    si += o.si;
    sr2 += o.sr2;
    si2 += o.si2;
    n += o.n;
  }
  McEstimate finish(uint64_t seed, double eps) const {
    McEstimate e;
    e.n_samples = n;
    e.seed = seed;
    e.epsilon = eps;
    double inv = 1.0 / static_cast<double>(n);
    double mr = sr * inv, mi = si * inv;
    e.value = {mr, mi};
    double vr = std::max(0.0, sr2 * inv - mr * mr);
    double vi = std::max(0.0, si2 * inv - mi * mi);
    e.stderr_ = std::sqrt((vr + vi) * inv);
    return e;
  }
};

constexpr uint64_t kChunk = 512;

}  // namespace

McEstimate gmc_estimate(const GmcSpec& spec, int quad_nodes, uint64_t n_samples,
                        uint64_t seed, int threads) {
  auto grid = build_grid(spec, quad_nodes);
  CovarianceKernel kernel(KernelKind::neumann_disk);
  std::vector<Site> sites;
  sites.reserve(grid.size());
  for (const auto& n : grid) sites.push_back(n.site);
  FieldSampler sampler(kernel, sites);

  const double lam = spec.region == GmcRegion::bulk ? spec.beta : 0.5 * spec.beta;
  const double norm = spec.region == GmcRegion::bulk
                          ? std::pow(spec.epsilon, -0.5 * spec.beta * spec.beta)
                          : std::pow(spec.epsilon, -0.25 * spec.beta * spec.beta);

  uint64_t n_chunks = (n_samples + kChunk - 1) / kChunk;
  std::vector<ComplexAccumulator> parts(n_chunks);
  const int dim = static_cast<int>(grid.size());
  parallel_chunks(static_cast<int64_t>(n_chunks), threads, [&](int64_t c) {
    uint64_t lo = static_cast<uint64_t>(c) * kChunk;
    uint64_t hi = std::min(lo + kChunk, n_samples);
    Eigen::MatrixXd batch(dim, static_cast<int>(hi - lo));
    sampler.sample_batch(seed, lo, batch);
    ComplexAccumulator acc;
    for (int s = 0; s < batch.cols(); ++s) {
      complex<double> v = 0.0;
      for (int i = 0; i < dim; ++i) {
        double phase = lam * batch(i, s);
        v += grid[i].fw * complex<double>(std::cos(phase), std::sin(phase));
      }
      acc.add(norm * v);
    }
    parts[c] = acc;
  });
  ComplexAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.finish(seed, spec.epsilon);
}

std::complex<double> gmc_first_moment_oracle(const GmcSpec& spec, int order) {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  if (spec.region == GmcRegion::bulk) {
    const double b2 = spec.beta * spec.beta;
    QuadRule rr = gauss_legendre(order, 0.0, spec.support_radius);
    QuadRule tt = gauss_legendre(2 * order, 0.0, 2.0 * M_PI);
    complex<double> acc = 0.0;
    for (size_t i = 0; i < rr.nodes.size(); ++i)
      for (size_t j = 0; j < tt.nodes.size(); ++j) {
        complex<double> z = std::polar(rr.nodes[i], tt.nodes[j]);
        Site s = Site::bulk(z, spec.epsilon);
        double c_eps = kernel.regularized(s, s);
        double w = std::pow(spec.epsilon, -0.5 * b2) *
                   std::exp(-0.5 * b2 * c_eps);
        acc += spec.f_bulk(z) * w * rr.weights[i] * tt.weights[j] * rr.nodes[i];
      }
    return acc;
  }
  const double q2 = 0.25 * spec.beta * spec.beta;  // (beta/2)^2
  QuadRule tt = gauss_legendre(4 * order, 0.0, 2.0 * M_PI);
  complex<double> acc = 0.0;
  for (size_t j = 0; j < tt.nodes.size(); ++j) {
    Site s = Site::circle_point(tt.nodes[j], spec.epsilon);
    double c_eps = kernel.regularized(s, s);
    double w = std::pow(spec.epsilon, -q2) * std::exp(-0.5 * q2 * c_eps);
    acc += spec.f_boundary(tt.nodes[j]) * w * tt.weights[j];
  }
  return acc;
}

double gmc_second_moment(const GmcSpec& spec, int order) {
  const double b2 = spec.beta * spec.beta;
  if (!(b2 < 2.0))
    throw DivergenceError("gmc_second_moment: beta^2 must be below 2");
  if (spec.region == GmcRegion::bulk) {
    const double R = spec.support_radius;
    // outer x over the support, inner y in polar around x with the radial
    // substitution u = r^{2 - b2} flattening |x - y|^{-b2} r dr.
    QuadRule orr = gauss_legendre(order, 0.0, R);
    QuadRule ott = spec.radial_symmetric ? gauss_legendre(1, 0.0, 2.0 * M_PI)
                                         : gauss_legendre(order, 0.0, 2.0 * M_PI);
    QuadRule iphi = gauss_legendre(order, 0.0, 2.0 * M_PI);
    QuadRule iu = gauss_legendre(order, 0.0, 1.0);
    const double p = 2.0 - b2;
    double acc = 0.0;
    for (size_t i = 0; i < orr.nodes.size(); ++i) {
      double rx = orr.nodes[i];
      for (size_t j = 0; j < ott.nodes.size(); ++j) {
        complex<double> x = spec.radial_symmetric
                                ? complex<double>(rx, 0.0)
                                : std::polar(rx, ott.nodes[j]);
        double wx = std::pow(1.0 - std::norm(x), 0.5 * b2);
        complex<double> fx = spec.f_bulk(x);
        double inner = 0.0;
        for (size_t a = 0; a < iphi.nodes.size(); ++a) {
          double phi = iphi.nodes[a];
          complex<double> dir = std::polar(1.0, phi);
          // ray-circle distance to |y| = R
          double bq = 2.0 * (x.real() * dir.real() + x.imag() * dir.imag());
          double cq = std::norm(x) - R * R;
          double rmax = 0.5 * (-bq + std::sqrt(bq * bq - 4.0 * cq));
          if (rmax <= 0.0) continue;
          double umax = std::pow(rmax, p);
          double line = 0.0;
          for (size_t t = 0; t < iu.nodes.size(); ++t) {
            double u = iu.nodes[t] * umax;
            double r = std::pow(u, 1.0 / p);
            complex<double> y = x + r * dir;
            double wy = std::pow(1.0 - std::norm(y), 0.5 * b2);
            double harm = std::pow(std::abs(1.0 - x * std::conj(y)), -b2);
            complex<double> fy = std::conj(spec.f_bulk(y));
            line += iu.weights[t] * umax *
                    (fx * fy).real() * wy * harm;
          }
          inner += iphi.weights[a] * line / p;
        }
        acc += orr.weights[i] * ott.weights[j] * rx * wx * inner;
      }
    }
    return acc;
  }
  // boundary: iint f fbar |2 sin((a-b)/2)|^{-b2/2} e^{-(b2/8)(Wb+Wb)} dl dl
  CovarianceKernel kernel(KernelKind::neumann_disk);
  double wb = kernel.diag_counterterm_boundary();
  double pref = std::exp(-0.25 * b2 * wb);
  QuadRule outer = gauss_legendre(2 * order, 0.0, 2.0 * M_PI);
  QuadRule gap = gauss_jacobi(2 * order, -0.5 * b2, -0.5 * b2, 0.0, 2.0 * M_PI);
  double acc = 0.0;
  for (size_t i = 0; i < outer.nodes.size(); ++i) {
    double a = outer.nodes[i];
    complex<double> fa = spec.f_boundary(a);
    double line = 0.0;
    for (size_t j = 0; j < gap.nodes.size(); ++j) {
      double u = gap.nodes[j];
      double s = 2.0 * std::sin(0.5 * u) / (u * (2.0 * M_PI - u));
      double kernel_resid = std::pow(s, -0.5 * b2);
      complex<double> fb = std::conj(spec.f_boundary(a + u));
      line += gap.weights[j] * kernel_resid * (fa * fb).real();
    }
    acc += outer.weights[i] * line;
  }
  return pref * acc;
}

double gmc_second_moment_at_eps(const GmcSpec& spec, int order) {
  if (spec.region != GmcRegion::bulk)
    throw UnsupportedSurface("gmc_second_moment_at_eps: bulk only");
  CovarianceKernel kernel(KernelKind::neumann_disk);
  const double b2 = spec.beta * spec.beta;
  const double R = spec.support_radius;
  const double eps = spec.epsilon;
  const double reach = 2.0 * eps;
  auto wfun = [&](complex<double> z) {
    return spec.f_bulk(z) * std::pow(1.0 - std::norm(z), 0.5 * b2);
  };
  // correction integrand e^{b2 C_eps} - e^{b2 C}, zero outside the overlap
  auto corr = [&](complex<double> x, complex<double> y) {
    Site xa = Site::bulk(x, eps), ya = Site::bulk(y, eps);
    double ce = kernel.regularized(xa, ya);
    double c0 = kernel(x, y);
    return std::exp(b2 * ce) - std::exp(b2 * c0);
  };
  QuadRule ott = spec.radial_symmetric ? gauss_legendre(1, 0.0, 2.0 * M_PI)
                                       : gauss_legendre(order, 0.0, 2.0 * M_PI);
  QuadRule iphi = gauss_legendre(order / 2 + 8, 0.0, 2.0 * M_PI);
  QuadRule ir = gauss_legendre(order, 0.0, 1.0);
  std::vector<double> rbreaks = {0.0};
  if (R - reach > 0.0) rbreaks.push_back(R - reach);
  rbreaks.push_back(R);
  double acc = 0.0;
  for (size_t rb = 0; rb + 1 < rbreaks.size(); ++rb) {
    QuadRule orr = gauss_legendre(order / 2 + 8, rbreaks[rb], rbreaks[rb + 1]);
    for (size_t i = 0; i < orr.nodes.size(); ++i) {
      double rx = orr.nodes[i];
      for (size_t j = 0; j < ott.nodes.size(); ++j) {
        complex<double> x = spec.radial_symmetric
                                ? complex<double>(rx, 0.0)
                                : std::polar(rx, ott.nodes[j]);
        complex<double> wx = wfun(x);
        double inner = 0.0;
        for (size_t a = 0; a < iphi.nodes.size(); ++a) {
          complex<double> dir = std::polar(1.0, iphi.nodes[a]);
          double bq = 2.0 * (x.real() * dir.real() + x.imag() * dir.imag());
          double cq = std::norm(x) - R * R;
          double rmax = 0.5 * (-bq + std::sqrt(std::max(bq * bq - 4.0 * cq, 0.0)));
          rmax = std::min(rmax, reach);
          if (rmax <= 0.0) continue;
          double line = 0.0;
          for (size_t t = 0; t < ir.nodes.size(); ++t) {
            double r = ir.nodes[t] * rmax;
            complex<double> y = x + r * dir;
            complex<double> wy = std::conj(wfun(y));
            line += ir.weights[t] * rmax * (wx * wy).real() * corr(x, y) * r;
          }
          inner += iphi.weights[a] * line;
        }
        acc += orr.weights[i] * ott.weights[j] * rx * inner;
      }
    }
  }
  return gmc_second_moment(spec, order) + acc;
}

McEstimate gmc_second_moment_mc(const GmcSpec& spec, uint64_t n_samples,
                                uint64_t seed, int threads) {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  const double b2 = spec.beta * spec.beta;

  uint64_t n_chunks = (n_samples + 8192 - 1) / 8192;
  std::vector<ComplexAccumulator> parts(n_chunks);
  parallel_chunks(static_cast<int64_t>(n_chunks), threads, [&](int64_t c) {
    uint64_t lo = static_cast<uint64_t>(c) * 8192;
    uint64_t hi = std::min(lo + 8192, n_samples);
    ComplexAccumulator acc;
    for (uint64_t idx = lo; idx < hi; ++idx) {
      Rng rng(seed, idx);
      if (spec.region == GmcRegion::bulk) {
        const double R = spec.support_radius;
        const double area = M_PI * R * R;
        complex<double> x = std::polar(R * std::sqrt(rng.uniform()),
                                       rng.uniform(0.0, 2.0 * M_PI));
        complex<double> y = std::polar(R * std::sqrt(rng.uniform()),
                                       rng.uniform(0.0, 2.0 * M_PI));
        Site sx = Site::bulk(x, spec.epsilon), sy = Site::bulk(y, spec.epsilon);
        double cxx = kernel.regularized(sx, sx);
        double cyy = kernel.regularized(sy, sy);
        double cxy = kernel.regularized(sx, sy);
        // joint draw of (X(x), X(y)) through the exact 2x2 marginal
        double g1 = rng.gaussian(), g2 = rng.gaussian();
        double l11 = std::sqrt(cxx);
        double l21 = cxy / l11;
        double l22 = std::sqrt(std::max(cyy - l21 * l21, 0.0));
        double xi_x = l11 * g1;
        double xi_y = l21 * g1 + l22 * g2;
        double phase = spec.beta * (xi_x - xi_y);
        complex<double> t = area * area * std::pow(spec.epsilon, -b2) *
                            spec.f_bulk(x) * std::conj(spec.f_bulk(y)) *
                            complex<double>(std::cos(phase), std::sin(phase));
        acc.add(t);
      } else {
        double a = rng.uniform(0.0, 2.0 * M_PI);
        double b = rng.uniform(0.0, 2.0 * M_PI);
        Site sa = Site::circle_point(a, spec.epsilon);
        Site sb = Site::circle_point(b, spec.epsilon);
        double caa = kernel.regularized(sa, sa);
        double cbb = kernel.regularized(sb, sb);
        double cab = kernel.regularized(sa, sb);
        double g1 = rng.gaussian(), g2 = rng.gaussian();
        double l11 = std::sqrt(caa);
        double l21 = cab / l11;
        double l22 = std::sqrt(std::max(cbb - l21 * l21, 0.0));
        double phase = 0.5 * spec.beta * (l11 * g1 - (l21 * g1 + l22 * g2));
        double len = 2.0 * M_PI;
        complex<double> t = len * len * std::pow(spec.epsilon, -0.5 * b2) *
                            spec.f_boundary(a) * std::conj(spec.f_boundary(b)) *
                            complex<double>(std::cos(phase), std::sin(phase));
        acc.add(t);
      }
    }
    parts[c] = acc;
  });
  ComplexAccumulator total;
  for (const auto& p : parts) total.merge(p);
  return total.finish(seed, spec.epsilon);
}

double l2_gap(const GmcSpec& spec, double eps_a, double eps_b, int order) {
  if (spec.region != GmcRegion::bulk)
    throw UnsupportedSurface("l2_gap: bulk weights only");
  if (eps_a == eps_b) return 0.0;
  CovarianceKernel kernel(KernelKind::neumann_disk);
  const double b2 = spec.beta * spec.beta;
  const double R = spec.support_radius;
  const double reach = 2.0 * std::max(eps_a, eps_b);

  // E|M_a - M_b|^2 = iint w(x) w(y) [e^{b2 Caa} - e^{b2 Cab} - e^{b2 Cba}
  //   + e^{b2 Cbb}] with w = f e^{-b2 W/2}; the bracket vanishes for
  //   |x - y| >= 2 max(eps).
  auto wfun = [&](complex<double> z) {
    return spec.f_bulk(z) * std::pow(1.0 - std::norm(z), 0.5 * b2);
  };
  auto bracket = [&](complex<double> x, complex<double> y) {
    Site xa = Site::bulk(x, eps_a), xb = Site::bulk(x, eps_b);
    Site ya = Site::bulk(y, eps_a), yb = Site::bulk(y, eps_b);
    double caa = kernel.regularized(xa, ya);
    double cab = kernel.regularized(xa, yb);
    double cba = kernel.regularized(xb, ya);
    double cbb = kernel.regularized(xb, yb);
    return std::exp(b2 * caa) - std::exp(b2 * cab) - std::exp(b2 * cba) +
           std::exp(b2 * cbb);
  };

  // outer radial panels, refined near the support edge where the inner
  // region clips
  std::vector<double> rbreaks = {0.0};
  if (R - reach > 0.0) rbreaks.push_back(R - reach);
  rbreaks.push_back(R);
  QuadRule ott = spec.radial_symmetric ? gauss_legendre(1, 0.0, 2.0 * M_PI)
                                       : gauss_legendre(order, 0.0, 2.0 * M_PI);
  QuadRule iphi = gauss_legendre(order / 2 + 8, 0.0, 2.0 * M_PI);
  QuadRule ir = gauss_legendre(order, 0.0, 1.0);
  double acc = 0.0;
  for (size_t rb = 0; rb + 1 < rbreaks.size(); ++rb) {
    QuadRule orr = gauss_legendre(order / 2 + 8, rbreaks[rb], rbreaks[rb + 1]);
    for (size_t i = 0; i < orr.nodes.size(); ++i) {
      double rx = orr.nodes[i];
      for (size_t j = 0; j < ott.nodes.size(); ++j) {
        complex<double> x = spec.radial_symmetric
                                ? complex<double>(rx, 0.0)
                                : std::polar(rx, ott.nodes[j]);
        complex<double> wx = wfun(x);
        double inner = 0.0;
        for (size_t a = 0; a < iphi.nodes.size(); ++a) {
          complex<double> dir = std::polar(1.0, iphi.nodes[a]);
          double bq = 2.0 * (x.real() * dir.real() + x.imag() * dir.imag());
          double cq = std::norm(x) - R * R;
          double rmax = 0.5 * (-bq + std::sqrt(std::max(bq * bq - 4.0 * cq, 0.0)));
          rmax = std::min(rmax, reach);
          if (rmax <= 0.0) continue;
          double line = 0.0;
          for (size_t t = 0; t < ir.nodes.size(); ++t) {
            double r = ir.nodes[t] * rmax;
            complex<double> y = x + r * dir;
            complex<double> wy = std::conj(wfun(y));
            line += ir.weights[t] * rmax * (wx * wy).real() *
                    bracket(x, y) * r;
          }
          inner += iphi.weights[a] * line;
        }
        acc += orr.weights[i] * ott.weights[j] * rx * inner;
      }
    }
  }
  return acc;
}

MomentBounds moment_bound_quantities(
    const std::function<complex<double>(complex<double>)>& f_bulk,
    const std::function<complex<double>(double)>& f_boundary, double beta,
    double support_radius, int order) {
  const double b2 = beta * beta;
  MomentBounds out;
  if (f_bulk) {
    if (!(b2 < 2.0))
      throw DivergenceError("moment_bound_quantities: |x-y|^{-b^2} with b^2 >= 2");
    const double R = support_radius;
    QuadRule orr = gauss_legendre(order, 0.0, R);
    QuadRule ott = gauss_legendre(order, 0.0, 2.0 * M_PI);
    QuadRule iphi = gauss_legendre(order / 2 + 8, 0.0, 2.0 * M_PI);
    QuadRule iu = gauss_legendre(order, 0.0, 1.0);
    const double p = 2.0 - b2;
    double u1 = 0.0;
    for (size_t i = 0; i < orr.nodes.size(); ++i) {
      double rx = orr.nodes[i];
      for (size_t j = 0; j < ott.nodes.size(); ++j) {
        complex<double> x = std::polar(rx, ott.nodes[j]);
        double fx = std::abs(f_bulk(x));
        double inner = 0.0;
        for (size_t a = 0; a < iphi.nodes.size(); ++a) {
          complex<double> dir = std::polar(1.0, iphi.nodes[a]);
          double bq = 2.0 * (x.real() * dir.real() + x.imag() * dir.imag());
          double cq = std::norm(x) - R * R;
          double disc = std::max(bq * bq - 4.0 * cq, 0.0);
          double rmax = 0.5 * (-bq + std::sqrt(disc));
          if (rmax <= 0.0) continue;
          double umax = std::pow(rmax, p);
          double line = 0.0;
          for (size_t t = 0; t < iu.nodes.size(); ++t) {
            double u = iu.nodes[t] * umax;
            double r = std::pow(u, 1.0 / p);
            complex<double> y = x + r * dir;
            double fy = std::abs(f_bulk(y));
            double image = std::pow(std::abs(1.0 - x * std::conj(y)), -b2);
            // |x-y|^{-b2} absorbed by the substitution; the image part is
            // carried explicitly (r^{b2} restores the Lebesgue factor)
            line += iu.weights[t] * umax * fy *
                    (1.0 + image * std::pow(r, b2));
          }
          inner += iphi.weights[a] * line / p;
        }
        u1 += orr.weights[i] * ott.weights[j] * rx * fx * inner;
      }
    }
    out.u1 = u1;
    // V: distance to the boundary is 1 - |x|
    if (!(0.5 * b2 < 1.0))
      throw DivergenceError("moment_bound_quantities: boundary-distance power");
    QuadRule vr = gauss_jacobi(order, 0.0, -0.5 * b2, 0.0, 1.0);
    // weight (r-0)^{-b2/2} is at the wrong end; integrate in s = 1 - r
    double v = 0.0;
    for (size_t i = 0; i < vr.nodes.size(); ++i) {
      double s = vr.nodes[i];  // weight s^{-b2/2} at s -> 0
      double r = 1.0 - s;
      if (r > support_radius) continue;
      double ring = 0.0;
      for (size_t j = 0; j < ott.nodes.size(); ++j)
        ring += ott.weights[j] * std::abs(f_bulk(std::polar(r, ott.nodes[j])));
      v += vr.weights[i] * ring * r;
    }
    out.v = v;
  }
  if (f_boundary) {
    if (!(0.5 * b2 < 1.0))
      throw DivergenceError("moment_bound_quantities: boundary pair power");
    QuadRule outer = gauss_legendre(2 * order, 0.0, 2.0 * M_PI);
    QuadRule gap = gauss_jacobi(2 * order, -0.5 * b2, -0.5 * b2, 0.0, 2.0 * M_PI);
    double u2 = 0.0;
    for (size_t i = 0; i < outer.nodes.size(); ++i) {
      double a = outer.nodes[i];
      double fa = std::abs(f_boundary(a));
      double line = 0.0;
      for (size_t j = 0; j < gap.nodes.size(); ++j) {
        double u = gap.nodes[j];
        double s = 2.0 * std::sin(0.5 * u) / (u * (2.0 * M_PI - u));
        line += gap.weights[j] * std::pow(s, -0.5 * b2) *
                std::abs(f_boundary(a + u));
      }
      u2 += outer.weights[i] * fa * line;
    }
    out.u2 = u2;
  }
  return out;
}

}  // namespace ciltlab
