#include "ciltlab/geometry.hpp"

#include <cmath>

#include "ciltlab/errors.hpp"
#include "ciltlab/quadrature.hpp"

namespace ciltlab {

using std::complex;

SurfaceSpec SurfaceSpec::disk(std::vector<complex<double>> punctures) {
  SurfaceSpec s;
  s.kind = SurfaceKind::disk;
  s.euler_char = 1;
  s.punctures = std::move(punctures);
  for (size_t i = 0; i < s.punctures.size(); ++i) {
    if (std::abs(s.punctures[i]) >= 1.0 - 1e-9)
      throw DomainError("SurfaceSpec: puncture must be strictly interior");
    for (size_t j = i + 1; j < s.punctures.size(); ++j)
      if (std::abs(s.punctures[i] - s.punctures[j]) < 1e-9)
        throw DomainError("SurfaceSpec: punctures must be distinct");
  }
  return s;
}

SurfaceSpec SurfaceSpec::half_disk() {
  SurfaceSpec s;
  s.kind = SurfaceKind::half_disk;
  s.euler_char = 1;
  s.corner_count = 2;
  return s;
}

SurfaceSpec SurfaceSpec::annulus(double inner_radius,
                                 std::vector<complex<double>> punctures) {
  if (!(inner_radius > 0.0) || !(inner_radius < 1.0))
    throw DomainError("SurfaceSpec: annulus inner radius must lie in (0,1)");
  SurfaceSpec s;
  s.kind = SurfaceKind::annulus;
  s.inner_radius = inner_radius;
  s.euler_char = 0;
  s.punctures = std::move(punctures);
  for (size_t i = 0; i < s.punctures.size(); ++i) {
    double r = std::abs(s.punctures[i]);
    if (r <= inner_radius + 1e-9 || r >= 1.0 - 1e-9)
      throw DomainError("SurfaceSpec: puncture must be strictly interior");
    for (size_t j = i + 1; j < s.punctures.size(); ++j)
      if (std::abs(s.punctures[i] - s.punctures[j]) < 1e-9)
        throw DomainError("SurfaceSpec: punctures must be distinct");
  }
  return s;
}

SurfaceSpec SurfaceSpec::circle() {
  SurfaceSpec s;
  s.kind = SurfaceKind::circle;
  s.euler_char = 0;
  return s;
}

SurfaceSpec SurfaceSpec::half_circle() {
  SurfaceSpec s;
  s.kind = SurfaceKind::half_circle;
  s.euler_char = 1;
  return s;
}

bool SurfaceSpec::contains(complex<double> z, double tol) const {
  double r = std::abs(z);
  switch (kind) {
    case SurfaceKind::disk:
      return r <= 1.0 + tol;
    case SurfaceKind::half_disk:
      return r <= 1.0 + tol && z.imag() >= -tol;
    case SurfaceKind::annulus:
      return r >= inner_radius - tol && r <= 1.0 + tol;
    default:
      return false;
  }
}

bool SurfaceSpec::on_boundary(complex<double> z, double tol) const {
  double r = std::abs(z);
  switch (kind) {
    case SurfaceKind::disk:
      return std::abs(r - 1.0) < tol;
    case SurfaceKind::half_disk:
      return (std::abs(r - 1.0) < tol && z.imag() >= -tol) ||
             (std::abs(z.imag()) < tol && std::abs(z.real()) <= 1.0 + tol);
    case SurfaceKind::annulus:
      return std::abs(r - 1.0) < tol || std::abs(r - inner_radius) < tol;
    default:
      return false;
  }
}

ConformalFactor::ConformalFactor() : rho_([](complex<double>) { return 0.0; }) {
  flat_ = true;
}

ConformalFactor::ConformalFactor(Scalar rho) : rho_(std::move(rho)) {}

ConformalFactor::ConformalFactor(Scalar rho, Grad grad,
                                 Scalar geometer_laplacian)
    : rho_(std::move(rho)),
      grad_(std::move(grad)),
      lap_(std::move(geometer_laplacian)) {}

complex<double> ConformalFactor::gradient(complex<double> z) const {
  if (flat_) return {0.0, 0.0};
  if (grad_) return grad_(z);
  const double h = 1e-5;
  double dx = (rho_(z + h) - rho_(z - h)) / (2.0 * h);
  double dy = (rho_(z + complex<double>(0, h)) - rho_(z - complex<double>(0, h))) /
              (2.0 * h);
  return {dx, dy};
}

double ConformalFactor::laplacian(complex<double> z) const {
  if (flat_) return 0.0;
  if (lap_) return lap_(z);
  const double h = 1e-5;
  double c = rho_(z);
  double lap_an = (rho_(z + h) + rho_(z - h) + rho_(z + complex<double>(0, h)) +
                   rho_(z - complex<double>(0, h)) - 4.0 * c) /
                  (h * h);
  return -lap_an;
}

ConformalFactor ConformalFactor::flat() { return ConformalFactor(); }

ConformalFactor ConformalFactor::constant(double c) {
  return ConformalFactor([c](complex<double>) { return c; },
                         [](complex<double>) { return complex<double>(0.0); },
                         [](complex<double>) { return 0.0; });
}

ConformalFactor ConformalFactor::hemisphere() {
  auto rho = [](complex<double> z) {
    double r2 = std::norm(z);
    return std::log(4.0) - 2.0 * std::log1p(r2);
  };
  auto grad = [](complex<double> z) {
    double r2 = std::norm(z);
    return complex<double>(-4.0 * z.real() / (1.0 + r2),
                           -4.0 * z.imag() / (1.0 + r2));
  };
  auto lap = [](complex<double> z) {
    double r2 = std::norm(z);
    return 8.0 / ((1.0 + r2) * (1.0 + r2));  // -Delta_flat rho
  };
  return ConformalFactor(rho, grad, lap);
}

ConformalFactor ConformalFactor::gaussian_bump(double a, double s,
                                               complex<double> c) {
  double s2 = s * s;
  auto rho = [a, s2, c](complex<double> z) {
    return a * std::exp(-std::norm(z - c) / (2.0 * s2));
  };
  auto grad = [a, s2, c](complex<double> z) {
    double e = a * std::exp(-std::norm(z - c) / (2.0 * s2));
    complex<double> d = z - c;
    return complex<double>(-d.real() / s2 * e, -d.imag() / s2 * e);
  };
  auto lap = [a, s2, c](complex<double> z) {
    double r2 = std::norm(z - c);
    double e = a * std::exp(-r2 / (2.0 * s2));
    double lap_an = e * (r2 / (s2 * s2) - 2.0 / s2);
    return -lap_an;
  };
  return ConformalFactor(rho, grad, lap);
}

namespace {

// Flat geodesic curvature of the boundary at z with the outward-normal
// convention, plus the outward normal itself.
struct BoundaryFrame {
  double k_flat;
  complex<double> outward_normal;
};

BoundaryFrame boundary_frame(const SurfaceSpec& surface, complex<double> z) {
  double r = std::abs(z);
  switch (surface.kind) {
    case SurfaceKind::disk:
      return {1.0, z / r};
    case SurfaceKind::half_disk:
      if (std::abs(z.imag()) < 1e-9 && std::abs(z.real()) < 1.0 - 1e-9)
        return {0.0, complex<double>(0.0, -1.0)};
      return {1.0, z / r};
    case SurfaceKind::annulus:
      if (std::abs(r - surface.inner_radius) < std::abs(r - 1.0))
        return {-1.0 / surface.inner_radius, -z / r};
      return {1.0, z / r};
    default:
      throw UnsupportedSurface("boundary_frame: 1d surface");
  }
}

}  // namespace

CurvatureSample curvature_fields(const SurfaceSpec& surface,
                                 const ConformalFactor& rho,
                                 complex<double> point, bool boundary) {
  if (!surface.is_two_dimensional())
    throw UnsupportedSurface("curvature_fields: need a 2d surface");
  if (!surface.contains(point))
    throw DomainError("curvature_fields: point off surface");
  CurvatureSample out;
  if (boundary) {
    if (!surface.on_boundary(point))
      throw DomainError("curvature_fields: point not on boundary");
    BoundaryFrame f = boundary_frame(surface, point);
    complex<double> g = rho.gradient(point);
    double dn = g.real() * f.outward_normal.real() +
                g.imag() * f.outward_normal.imag();
    out.geodesic_curvature =
        std::exp(-0.5 * rho(point)) * (f.k_flat + 0.5 * dn);
    out.scalar_curvature =
        std::exp(-rho(point)) * rho.laplacian(point);
    return out;
  }
  // K_{e^rho g} = e^{-rho} (K_g + Delta_g rho), flat reference K_g = 0.
  out.scalar_curvature = std::exp(-rho(point)) * rho.laplacian(point);
  return out;
}

double gauss_bonnet_defect(const SurfaceSpec& surface,
                           const ConformalFactor& rho, int quad_order) {
  if (quad_order < 4)
    throw DomainError("gauss_bonnet_defect: quad_order must be >= 4");
  if (!surface.is_two_dimensional())
    throw UnsupportedSurface("gauss_bonnet_defect: need a 2d surface");

  double r_lo = surface.kind == SurfaceKind::annulus ? surface.inner_radius : 0.0;
  double th_hi = surface.kind == SurfaceKind::half_disk ? M_PI : 2.0 * M_PI;

  // Bulk: (1/2) int K dv, with K dv = (-Delta_an rho) dx dy.
  QuadRule rr = gauss_legendre(quad_order, r_lo, 1.0);
  QuadRule tt = gauss_legendre(2 * quad_order, 0.0, th_hi);
  double bulk = 0.0;
  for (size_t i = 0; i < rr.nodes.size(); ++i) {
    double r = rr.nodes[i];
    for (size_t j = 0; j < tt.nodes.size(); ++j) {
      complex<double> z = std::polar(r, tt.nodes[j]);
      double kdv = rho.laplacian(z);  // e^{-rho} lap * e^{rho} dxdy
      if (!std::isfinite(kdv))
        throw QuadratureError("gauss_bonnet_defect: non-finite curvature");
      bulk += rr.weights[i] * tt.weights[j] * kdv * r;
    }
  }
  bulk *= 0.5;

  // Boundary: int k dl, with k dl = (k_flat + (1/2) d_nu rho) dl_flat.
  auto arc_term = [&](double radius, double sign_n, double t0, double t1) {
    QuadRule ta = gauss_legendre(2 * quad_order, t0, t1);
    double acc = 0.0;
    for (size_t j = 0; j < ta.nodes.size(); ++j) {
      complex<double> z = std::polar(radius, ta.nodes[j]);
      complex<double> n = sign_n * z / radius;
      complex<double> g = rho.gradient(z);
      double dn = g.real() * n.real() + g.imag() * n.imag();
      double k_flat = sign_n / radius;
      acc += ta.weights[j] * (k_flat + 0.5 * dn) * radius;
    }
    return acc;
  };

  double boundary = 0.0;
  switch (surface.kind) {
    case SurfaceKind::disk:
      boundary = arc_term(1.0, 1.0, 0.0, 2.0 * M_PI);
      break;
    case SurfaceKind::annulus:
      boundary = arc_term(1.0, 1.0, 0.0, 2.0 * M_PI) +
                 arc_term(surface.inner_radius, -1.0, 0.0, 2.0 * M_PI);
      break;
    case SurfaceKind::half_disk: {
      boundary = arc_term(1.0, 1.0, 0.0, M_PI);
      QuadRule seg = gauss_legendre(2 * quad_order, -1.0, 1.0);
      for (size_t j = 0; j < seg.nodes.size(); ++j) {
        complex<double> z(seg.nodes[j], 0.0);
        complex<double> g = rho.gradient(z);
        boundary += seg.weights[j] * 0.5 * (-g.imag());  // k_flat = 0
      }
      break;
    }
    default:
      break;
  }

  // Right-angle corners keep their turning angles under conformal change.
  double corners = surface.corner_count * (M_PI / 2.0);
  return bulk + boundary + corners - 2.0 * M_PI * surface.euler_char;
}

}  // namespace ciltlab
