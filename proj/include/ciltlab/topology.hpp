#pragma once

#include <complex>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ciltlab/geometry.hpp"

namespace ciltlab {

// Closed, co-closed 1-form written as omega = Im(f(z) dz) with
// f(z) = sum_j coef_j / (2 pi (z - pole_j)); poles are the punctures plus
// their boundary images (method of images; truncated reflection series on
// the annulus with residual <= 1e-10). Path integrals over segments are
// exact sums of angle increments.
class HarmonicForm {
 public:
  struct Pole {
    std::complex<double> pos;
    double coef = 0.0;  // cycle around the pole in units of full turns
  };

  HarmonicForm() = default;
  HarmonicForm(SurfaceSpec surface, std::vector<int> winding,
               int boundary_cycle);

  // Synthetic form from an explicit pole list (all cycles must come out as
  // stated); used to exercise exact forms and corner cases in tests.
  static HarmonicForm from_poles(SurfaceSpec surface, std::vector<int> winding,
                                 int boundary_cycle, std::vector<Pole> poles);

  const SurfaceSpec& surface() const { return surface_; }
  const std::vector<int>& winding() const { return winding_; }
  int boundary_cycle() const { return boundary_cycle_; }
  const std::vector<Pole>& poles() const { return poles_; }
  bool zero() const { return poles_.empty(); }

  // 1-form components (omega_x, omega_y) at z.
  std::complex<double> components(std::complex<double> z) const;
  // Hodge dual components (*omega).
  std::complex<double> star_components(std::complex<double> z) const;
  // Exact integral of omega along the straight segment [a, b].
  double segment_integral(std::complex<double> a, std::complex<double> b) const;
  // Exact integral of *omega along [a, b] (Gauss-Legendre, smooth away
  // from poles).
  double star_segment_integral(std::complex<double> a,
                               std::complex<double> b) const;

  // Residual max |i_nu omega| over boundary samples (image-series check).
  double boundary_flux_residual(int n_samples = 256) const;

  // Named homology cycle values.
  double cycle_outer() const;    // ccw outer boundary
  double cycle_inner() const;    // cw inner boundary (annulus)
  double cycle_puncture(size_t i) const { return winding_.at(i); }

  HarmonicForm& operator+=(const HarmonicForm& o);

 private:
  SurfaceSpec surface_;
  std::vector<int> winding_;
  int boundary_cycle_ = 0;
  std::vector<Pole> poles_;
};

struct LatticeDescription {
  int rank = 0;
  std::function<HarmonicForm(const std::vector<int>&)> representative;
};

LatticeDescription cohomology_lattice(const SurfaceSpec& surface,
                                      const std::vector<int>& m);

// Separating-family curves are polylines; endpoints sit on boundary circles
// (met orthogonally) or at punctures (leaving along the puncture's tangent
// line).
struct CurveEndpoint {
  enum class Kind { outer_boundary, inner_boundary, puncture };
  Kind kind = Kind::outer_boundary;
  int puncture_index = -1;
};

struct FamilyCurve {
  CurveEndpoint start;
  CurveEndpoint end;
  std::vector<std::complex<double>> points;  // polyline, start -> end

  // total turning of the polyline: interior corner angles (flat metric)
  double flat_turning() const;
};

class SeparatingFamily {
 public:
  SeparatingFamily(SurfaceSpec surface, std::vector<FamilyCurve> curves);

  const SurfaceSpec& surface() const { return surface_; }
  const std::vector<FamilyCurve>& curves() const { return curves_; }
  // tangent angle at each puncture (direction the incident curves leave in)
  const std::vector<double>& tangent_angles() const { return tangents_; }

  // cycle of e_i for the given form: sum of vertex cycle values over the
  // tree component containing the start endpoint of curve i.
  double dual_cycle(size_t curve_index, const HarmonicForm& form) const;

  std::string to_text() const;
  static SeparatingFamily from_text(const SurfaceSpec& surface,
                                    const std::string& text);

 private:
  void validate() const;
  SurfaceSpec surface_;
  std::vector<FamilyCurve> curves_;
  std::vector<double> tangents_;
};

// Canonical family: radial cuts from each puncture to the outer boundary,
// plus (annulus) one radial inner-outer cut at an angle clear of the
// punctures. Optional tangent angles prescribe the leaving direction.
SeparatingFamily default_family(const SurfaceSpec& surface,
                                const std::vector<double>* tangent_angles = nullptr);

// Randomized valid family on the annulus: a random spanning tree over
// {outer, inner, punctures} realized by jittered polylines. The tangent
// angles are fixed inputs so families drawn with different seeds are
// comparable in anomaly tests.
SeparatingFamily random_annulus_family(const SurfaceSpec& surface,
                                       const std::vector<double>& tangent_angles,
                                       uint64_t seed);

// Single-valued primitive of omega on the cut surface: path integral along a
// canonical polyline from x0, corrected by signed cut crossings.
class CutPrimitive {
 public:
  CutPrimitive(const HarmonicForm& form, const SeparatingFamily& family,
               std::complex<double> base);

  double operator()(std::complex<double> x) const;
  std::complex<double> base() const { return base_; }

 private:
  const HarmonicForm& form_;
  const SeparatingFamily& family_;
  std::complex<double> base_;
  std::vector<double> jump_;  // dual cycle per curve
};

// Interior-cycle correction data (genus terms); disk/annulus have none, the
// hook exists for synthetic cycle tests.
struct InteriorCycleTerm {
  double omega_a = 0.0, omega_b = 0.0;        // cycles of omega on a_i, b_i
  double k_int_a = 0.0, k_int_b = 0.0;        // int k dl over a_i, b_i
};

// (1/2) int K I dv + int k I dl + genus terms + sum_i e_i-cycle * int_{d_i} k dl.
double curvature_term(const HarmonicForm& form, const SeparatingFamily& family,
                      std::complex<double> base,
                      const ConformalFactor& rho = ConformalFactor::flat(),
                      const std::vector<InteriorCycleTerm>& genus_terms = {},
                      int quad_order = 48);

double anomaly(const HarmonicForm& form, const SeparatingFamily& family_a,
               const SeparatingFamily& family_b, std::complex<double> base,
               const ConformalFactor& rho = ConformalFactor::flat());

// int^reg |omega|^2 dv_{e^rho}: excised geodesic disks, Richardson ladder in
// eps^2 over {1e-2, 5e-3, 2.5e-3}; the excised integral itself is reduced by
// Stokes to boundary/cut/puncture-circle line integrals.
double regularized_norm(const HarmonicForm& form,
                        const ConformalFactor& rho = ConformalFactor::flat());

// int <omega_a, omega_b> dv (no regularization needed when the singular
// supports are disjoint or cross terms are integrable).
double form_inner_product(const HarmonicForm& a, const HarmonicForm& b);

// (1/2) int <d rho, omega> dv, the right side of the metric rule for the
// curvature term.
double gradient_pairing(const HarmonicForm& form, const ConformalFactor& rho);

// sum over the cohomology lattice of exp(-a * reg-norm); truncated with tail
// below 1e-14.
double theta_sum(const SurfaceSpec& surface, const std::vector<int>& m,
                 double a, const ConformalFactor& rho = ConformalFactor::flat());

}  // namespace ciltlab
