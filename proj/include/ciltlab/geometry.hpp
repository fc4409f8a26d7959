#pragma once

#include <complex>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ciltlab {

enum class SurfaceKind { circle, half_circle, disk, half_disk, annulus };

struct SurfaceSpec {
  SurfaceKind kind = SurfaceKind::disk;
  double inner_radius = 0.0;  // annulus only, in (0,1)
  std::vector<std::complex<double>> punctures;
  int euler_char = 1;
  int corner_count = 0;

  static SurfaceSpec disk(std::vector<std::complex<double>> punctures = {});
  static SurfaceSpec half_disk();
  static SurfaceSpec annulus(double inner_radius,
                             std::vector<std::complex<double>> punctures = {});
  static SurfaceSpec circle();
  static SurfaceSpec half_circle();

  bool is_two_dimensional() const {
    return kind == SurfaceKind::disk || kind == SurfaceKind::half_disk ||
           kind == SurfaceKind::annulus;
  }
  bool contains(std::complex<double> z, double tol = 1e-12) const;
  bool on_boundary(std::complex<double> z, double tol = 1e-9) const;
};

// Log-conformal factor rho against the flat reference |dz|^2. Gradient and
// Laplacian are analytic when provided, else central differences (step 1e-5).
// laplacian() is the geometer's convention d*d = -(d_xx + d_yy).
class ConformalFactor {
 public:
  using Scalar = std::function<double(std::complex<double>)>;
  using Grad = std::function<std::complex<double>(std::complex<double>)>;

  ConformalFactor();  // rho = 0
  explicit ConformalFactor(Scalar rho);
  ConformalFactor(Scalar rho, Grad grad, Scalar geometer_laplacian);

  double operator()(std::complex<double> z) const { return rho_(z); }
  std::complex<double> gradient(std::complex<double> z) const;
  double laplacian(std::complex<double> z) const;
  bool is_flat() const { return flat_; }

  static ConformalFactor flat();
  static ConformalFactor constant(double c);
  // rho = log(4/(1+|z|^2)^2): round metric of scalar curvature 2.
  static ConformalFactor hemisphere();
  // rho = a*exp(-|z-c|^2/(2 s^2)); smooth bump with analytic derivatives.
  static ConformalFactor gaussian_bump(double a, double s,
                                       std::complex<double> c = 0.0);

 private:
  Scalar rho_;
  Grad grad_;
  Scalar lap_;
  bool flat_ = false;
};

struct CurvatureSample {
  double scalar_curvature = 0.0;              // interior points
  std::optional<double> geodesic_curvature;   // boundary points
};

// Scalar curvature of e^rho * flat at interior points, geodesic curvature at
// boundary points (outward normal; unit circle as disk boundary has k = +1).
CurvatureSample curvature_fields(const SurfaceSpec& surface,
                                 const ConformalFactor& rho,
                                 std::complex<double> point, bool boundary);

// (1/2) int K dv + int k dl + corner turning angles - 2*pi*chi.
double gauss_bonnet_defect(const SurfaceSpec& surface,
                           const ConformalFactor& rho, int quad_order);

}  // namespace ciltlab
