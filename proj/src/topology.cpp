#include "ciltlab/topology.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ciltlab/errors.hpp"
#include "ciltlab/quadrature.hpp"
#include "ciltlab/rng.hpp"

namespace ciltlab {

using std::complex;

namespace {

constexpr double kTiny = 1e-12;

double cross2(complex<double> u, complex<double> v) {
  return u.real() * v.imag() - u.imag() * v.real();
}

double dot2(complex<double> u, complex<double> v) {
  return u.real() * v.real() + u.imag() * v.imag();
}

double point_segment_distance(complex<double> p, complex<double> a,
                              complex<double> b) {
  complex<double> d = b - a;
  double len2 = std::norm(d);
  if (len2 < kTiny) return std::abs(p - a);
  double t = std::clamp(dot2(p - a, d) / len2, 0.0, 1.0);
  return std::abs(p - (a + t * d));
}

struct Crossing {
  double t_path = 0.0;
  int sign = 0;      // sign of cross(t_path, t_curve)
  bool degenerate = false;
};

// Intersection of open segments (a1,b1) x (a2,b2); near-endpoint or
// near-parallel hits are flagged degenerate so callers can reroute.
std::optional<Crossing> segment_crossing(complex<double> a1, complex<double> b1,
                                         complex<double> a2,
                                         complex<double> b2) {
  complex<double> d1 = b1 - a1, d2 = b2 - a2;
  double denom = cross2(d1, d2);
  double scale = std::abs(d1) * std::abs(d2);
  if (scale < kTiny) return std::nullopt;
  if (std::abs(denom) < 1e-12 * scale) {
    // parallel: degenerate only if the lines nearly coincide and overlap
    double dist = point_segment_distance(a2, a1, b1);
    double dist2 = point_segment_distance(b2, a1, b1);
    if (std::min(dist, dist2) < 1e-9) {
      Crossing c;
      c.degenerate = true;
      return c;
    }
    return std::nullopt;
  }
  double t = cross2(a2 - a1, d2) / denom;
  double s = cross2(a2 - a1, d1) / denom;
  const double elo = 1e-9, ehi = 1.0 - 1e-9;
  if (t < -elo || t > 1.0 + elo || s < -elo || s > 1.0 + elo)
    return std::nullopt;
  Crossing c;
  if (t < elo || t > ehi || s < elo || s > ehi) {
    c.degenerate = true;
    return c;
  }
  c.t_path = t;
  c.sign = denom > 0.0 ? 1 : -1;
  return c;
}

}  // namespace

HarmonicForm::HarmonicForm(SurfaceSpec surface, std::vector<int> winding,
                           int boundary_cycle)
    : surface_(std::move(surface)),
      winding_(std::move(winding)),
      boundary_cycle_(boundary_cycle) {
  if (winding_.size() != surface_.punctures.size())
    throw DomainError("HarmonicForm: winding list size mismatch");
  if (surface_.kind == SurfaceKind::disk) {
    if (boundary_cycle_ != 0)
      throw DomainError("HarmonicForm: disk has no boundary cycle freedom");
    for (size_t i = 0; i < winding_.size(); ++i) {
      if (winding_[i] == 0) continue;
      complex<double> z = surface_.punctures[i];
      double m = winding_[i];
      poles_.push_back({z, m});
      if (std::abs(z) > kTiny)
        poles_.push_back({1.0 / std::conj(z), -m});
    }
  } else if (surface_.kind == SurfaceKind::annulus) {
    const double r = surface_.inner_radius;
    if (boundary_cycle_ != 0) poles_.push_back({0.0, double(boundary_cycle_)});
    // reflection images across both circles cluster geometrically; the
    // symmetric truncation keeps every cycle integral exactly integral.
    int depth = static_cast<int>(std::ceil(std::log(1e-12) / std::log(r * r)));
    depth = std::clamp(depth, 2, 80);
    for (size_t i = 0; i < winding_.size(); ++i) {
      if (winding_[i] == 0) continue;
      complex<double> z = surface_.punctures[i];
      double m = winding_[i];
      complex<double> zi = 1.0 / std::conj(z);
      for (int j = -depth; j <= depth; ++j) {
        double scale = std::pow(r, 2.0 * j);
        poles_.push_back({z * scale, m});
        poles_.push_back({zi * scale, -m});
      }
    }
  } else {
    throw UnsupportedSurface("HarmonicForm: disk or annulus only");
  }
}

HarmonicForm HarmonicForm::from_poles(SurfaceSpec surface,
                                      std::vector<int> winding,
                                      int boundary_cycle,
                                      std::vector<Pole> poles) {
  HarmonicForm f;
  f.surface_ = std::move(surface);
  f.winding_ = std::move(winding);
  f.boundary_cycle_ = boundary_cycle;
  f.poles_ = std::move(poles);
  return f;
}

complex<double> HarmonicForm::components(complex<double> z) const {
  // omega = Im(f dz) = Im(f) dx + Re(f) dy
  complex<double> f = 0.0;
  for (const auto& p : poles_) f += p.coef / (z - p.pos);
  f /= 2.0 * M_PI;
  return {f.imag(), f.real()};
}

complex<double> HarmonicForm::star_components(complex<double> z) const {
  // *dx = dy, *dy = -dx: *omega = -Re(f) dx + Im(f) dy
  complex<double> f = 0.0;
  for (const auto& p : poles_) f += p.coef / (z - p.pos);
  f /= 2.0 * M_PI;
  return {-f.real(), f.imag()};
}

double HarmonicForm::segment_integral(complex<double> a,
                                      complex<double> b) const {
  // int Im(f dz) over the segment; per pole the increment of arg(z - p) is
  // the principal angle of (b-p)/(a-p) (a straight segment never subtends
  // more than pi from an exterior point).
  double acc = 0.0;
  for (const auto& p : poles_) {
    complex<double> num = b - p.pos, den = a - p.pos;
    if (std::abs(num) < kTiny || std::abs(den) < kTiny)
      throw PathError("segment_integral: path touches a pole");
    acc += p.coef * std::arg(num / den);
  }
  return acc / (2.0 * M_PI);
}

double HarmonicForm::star_segment_integral(complex<double> a,
                                           complex<double> b) const {
  // panels graded toward the endpoints (cuts terminate at poles)
  auto piece = [&](double t0, double t1) {
    QuadRule r = gauss_legendre(16, t0, t1);
    double acc = 0.0;
    complex<double> d = b - a;
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      complex<double> z = a + r.nodes[i] * d;
      complex<double> s = star_components(z);
      acc += r.weights[i] * (s.real() * d.real() + s.imag() * d.imag());
    }
    return acc;
  };
  std::vector<double> breaks = {0.0};
  for (double t = 1.0 / 256.0; t < 0.49; t *= 2.0) breaks.push_back(t);
  breaks.push_back(0.5);
  for (double t = 1.0 / 256.0; t < 0.49; t *= 2.0) breaks.push_back(1.0 - t);
  breaks.push_back(1.0);
  std::sort(breaks.begin(), breaks.end());
  double acc = 0.0;
  for (size_t i = 0; i + 1 < breaks.size(); ++i)
    acc += piece(breaks[i], breaks[i + 1]);
  return acc;
}

double HarmonicForm::boundary_flux_residual(int n_samples) const {
  double worst = 0.0;
  auto probe = [&](double radius) {
    for (int i = 0; i < n_samples; ++i) {
      double th = 2.0 * M_PI * (i + 0.37) / n_samples;
      complex<double> z = std::polar(radius, th);
      complex<double> w = components(z);
      complex<double> nu = z / std::abs(z);
      worst = std::max(worst, std::abs(dot2(w, nu)));
    }
  };
  probe(1.0);
  if (surface_.kind == SurfaceKind::annulus) probe(surface_.inner_radius);
  return worst;
}

double HarmonicForm::cycle_outer() const {
  double m_sum = 0.0;
  for (int m : winding_) m_sum += m;
  if (surface_.kind == SurfaceKind::annulus) return boundary_cycle_ + m_sum;
  return m_sum;
}

double HarmonicForm::cycle_inner() const {
  if (surface_.kind != SurfaceKind::annulus)
    throw UnsupportedSurface("cycle_inner: annulus only");
  return -static_cast<double>(boundary_cycle_);  // induced (clockwise)
}

HarmonicForm& HarmonicForm::operator+=(const HarmonicForm& o) {
  if (winding_.size() != o.winding_.size())
    throw DomainError("HarmonicForm: incompatible sum");
  for (size_t i = 0; i < winding_.size(); ++i) winding_[i] += o.winding_[i];
  boundary_cycle_ += o.boundary_cycle_;
  poles_.insert(poles_.end(), o.poles_.begin(), o.poles_.end());
  return *this;
}

LatticeDescription cohomology_lattice(const SurfaceSpec& surface,
                                      const std::vector<int>& m) {
  if (surface.kind == SurfaceKind::disk) {
    LatticeDescription d;
    d.rank = 0;
    d.representative = [surface, m](const std::vector<int>& coords) {
      if (!coords.empty())
        throw DomainError("disk lattice has rank 0");
      return HarmonicForm(surface, m, 0);
    };
    return d;
  }
  if (surface.kind == SurfaceKind::annulus) {
    LatticeDescription d;
    d.rank = 1;
    d.representative = [surface, m](const std::vector<int>& coords) {
      if (coords.size() != 1)
        throw DomainError("annulus lattice has rank 1");
      return HarmonicForm(surface, m, coords[0]);
    };
    return d;
  }
  throw UnsupportedSurface("cohomology_lattice: disk or annulus only");
}

double FamilyCurve::flat_turning() const {
  double acc = 0.0;
  for (size_t i = 0; i + 2 < points.size(); ++i) {
    complex<double> u = points[i + 1] - points[i];
    complex<double> v = points[i + 2] - points[i + 1];
    acc += std::atan2(cross2(u, v), dot2(u, v));
  }
  return acc;
}

namespace {

int vertex_count(const SurfaceSpec& s) {
  int boundary = s.kind == SurfaceKind::annulus ? 2 : 1;
  return boundary + static_cast<int>(s.punctures.size());
}

int vertex_id(const SurfaceSpec& s, const CurveEndpoint& e) {
  switch (e.kind) {
    case CurveEndpoint::Kind::outer_boundary:
      return 0;
    case CurveEndpoint::Kind::inner_boundary:
      if (s.kind != SurfaceKind::annulus)
        throw DomainError("family: inner boundary endpoint on non-annulus");
      return 1;
    case CurveEndpoint::Kind::puncture:
      if (e.puncture_index < 0 ||
          e.puncture_index >= static_cast<int>(s.punctures.size()))
        throw DomainError("family: bad puncture index");
      return (s.kind == SurfaceKind::annulus ? 2 : 1) + e.puncture_index;
  }
  return -1;
}

double vertex_cycle_value(const SurfaceSpec& s, int vid,
                          const HarmonicForm& form) {
  int first_punc = s.kind == SurfaceKind::annulus ? 2 : 1;
  if (vid == 0) return form.cycle_outer();
  if (s.kind == SurfaceKind::annulus && vid == 1) return form.cycle_inner();
  return -form.cycle_puncture(static_cast<size_t>(vid - first_punc));
}

}  // namespace

SeparatingFamily::SeparatingFamily(SurfaceSpec surface,
                                   std::vector<FamilyCurve> curves)
    : surface_(std::move(surface)), curves_(std::move(curves)) {
  validate();
}

void SeparatingFamily::validate() const {
  const int nv = vertex_count(surface_);
  if (static_cast<int>(curves_.size()) != nv - 1)
    throw DomainError("family: curve count must be vertex count - 1");

  const_cast<SeparatingFamily*>(this)->tangents_.assign(
      surface_.punctures.size(), std::nan(""));

  auto endpoint_pos = [&](const FamilyCurve& c, bool start) {
    return start ? c.points.front() : c.points.back();
  };
  for (const auto& c : curves_) {
    if (c.points.size() < 2) throw DomainError("family: degenerate curve");
    for (bool start : {true, false}) {
      const CurveEndpoint& e = start ? c.start : c.end;
      complex<double> p = endpoint_pos(c, start);
      complex<double> dir = start ? c.points[1] - c.points[0]
                                  : c.points[c.points.size() - 2] -
                                        c.points[c.points.size() - 1];
      dir /= std::abs(dir);
      switch (e.kind) {
        case CurveEndpoint::Kind::outer_boundary: {
          if (std::abs(std::abs(p) - 1.0) > 1e-9)
            throw DomainError("family: endpoint not on outer boundary");
          // orthogonality: direction parallel to the radius
          if (std::abs(cross2(dir, p / std::abs(p))) > 1e-8)
            throw DomainError("family: curve must meet boundary orthogonally");
          break;
        }
        case CurveEndpoint::Kind::inner_boundary: {
          if (std::abs(std::abs(p) - surface_.inner_radius) > 1e-9)
            throw DomainError("family: endpoint not on inner boundary");
          if (std::abs(cross2(dir, p / std::abs(p))) > 1e-8)
            throw DomainError("family: curve must meet boundary orthogonally");
          break;
        }
        case CurveEndpoint::Kind::puncture: {
          complex<double> z = surface_.punctures[e.puncture_index];
          if (std::abs(p - z) > 1e-9)
            throw DomainError("family: endpoint not at its puncture");
          double ang = std::arg(dir);
          double& slot =
              const_cast<SeparatingFamily*>(this)->tangents_[e.puncture_index];
          if (std::isnan(slot)) {
            slot = ang;
          } else {
            double diff = std::remainder(ang - slot, M_PI);
            if (std::abs(diff) > 1e-6)
              throw DomainError(
                  "family: curves at a puncture must share the tangent line");
          }
          break;
        }
      }
    }
    // interior stays inside and clear of punctures
    for (size_t i = 0; i + 1 < c.points.size(); ++i) {
      complex<double> mid = 0.5 * (c.points[i] + c.points[i + 1]);
      if (!surface_.contains(mid, 1e-9))
        throw DomainError("family: curve leaves the surface");
      for (size_t pi = 0; pi < surface_.punctures.size(); ++pi) {
        double d = point_segment_distance(surface_.punctures[pi], c.points[i],
                                          c.points[i + 1]);
        bool incident = (c.start.kind == CurveEndpoint::Kind::puncture &&
                         c.start.puncture_index == static_cast<int>(pi)) ||
                        (c.end.kind == CurveEndpoint::Kind::puncture &&
                         c.end.puncture_index == static_cast<int>(pi));
        if (!incident && d < 1e-8)
          throw DomainError("family: curve passes through a puncture");
      }
    }
  }

  // pairwise disjoint interiors. Touching at a shared puncture endpoint is
  // allowed, including a short collinear run next to it: that is the polyline
  // stand-in for two smooth curves leaving a puncture on the same tangent
  // side and separating at second order.
  for (size_t a = 0; a < curves_.size(); ++a) {
    for (size_t b = a + 1; b < curves_.size(); ++b) {
      std::vector<complex<double>> shared;
      for (const auto& pa : {curves_[a].points.front(), curves_[a].points.back()})
        for (const auto& pb :
             {curves_[b].points.front(), curves_[b].points.back()})
          if (std::abs(pa - pb) < 1e-9) shared.push_back(pa);
      for (size_t i = 0; i + 1 < curves_[a].points.size(); ++i) {
        for (size_t j = 0; j + 1 < curves_[b].points.size(); ++j) {
          auto hit = segment_crossing(
              curves_[a].points[i], curves_[a].points[i + 1],
              curves_[b].points[j], curves_[b].points[j + 1]);
          if (!hit) continue;
          if (hit->degenerate) {
            // collinear overlap: tolerated only when one of the segments sits
            // entirely within 3e-3 of a shared endpoint
            bool ok = false;
            for (const auto& c : shared) {
              bool a_in = std::abs(curves_[a].points[i] - c) < 3e-3 &&
                          std::abs(curves_[a].points[i + 1] - c) < 3e-3;
              bool b_in = std::abs(curves_[b].points[j] - c) < 3e-3 &&
                          std::abs(curves_[b].points[j + 1] - c) < 3e-3;
              ok |= a_in || b_in;
            }
            if (ok) continue;
            throw DomainError("family: curves overlap");
          }
          complex<double> pa =
              curves_[a].points[i] +
              hit->t_path * (curves_[a].points[i + 1] - curves_[a].points[i]);
          bool near_shared = false;
          for (const auto& c : shared)
            if (std::abs(pa - c) < 1e-6) near_shared = true;
          if (near_shared) continue;
          throw DomainError("family: curves intersect");
        }
      }
    }
  }

  // spanning tree over {boundary circles} u {punctures}
  const int n = vertex_count(surface_);
  std::vector<std::vector<int>> adj(n);
  for (const auto& c : curves_) {
    int u = vertex_id(surface_, c.start);
    int v = vertex_id(surface_, c.end);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::vector<bool> seen(n, false);
  std::vector<int> stack = {0};
  seen[0] = true;
  int count = 1;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        ++count;
        stack.push_back(v);
      }
  }
  if (count != n)
    throw DomainError("family: incidence graph must span all circles/punctures");
  // n-1 edges + connected => tree
}

double SeparatingFamily::dual_cycle(size_t curve_index,
                                    const HarmonicForm& form) const {
  const int n = vertex_count(surface_);
  std::vector<std::vector<int>> adj(n);
  for (size_t c = 0; c < curves_.size(); ++c) {
    if (c == curve_index) continue;
    int u = vertex_id(surface_, curves_[c].start);
    int v = vertex_id(surface_, curves_[c].end);
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  int start = vertex_id(surface_, curves_[curve_index].start);
  std::vector<bool> seen(n, false);
  std::vector<int> stack = {start};
  seen[start] = true;
  double acc = 0.0;
  while (!stack.empty()) {
    int u = stack.back();
    stack.pop_back();
    acc += vertex_cycle_value(surface_, u, form);
    for (int v : adj[u])
      if (!seen[v]) {
        seen[v] = true;
        stack.push_back(v);
      }
  }
  return acc;
}

std::string SeparatingFamily::to_text() const {
  std::ostringstream os;
  auto ep = [](const CurveEndpoint& e) {
    switch (e.kind) {
      case CurveEndpoint::Kind::outer_boundary:
        return std::string("outer");
      case CurveEndpoint::Kind::inner_boundary:
        return std::string("inner");
      case CurveEndpoint::Kind::puncture:
        return "z" + std::to_string(e.puncture_index);
    }
    return std::string();
  };
  os.precision(17);
  for (const auto& c : curves_) {
    os << "polyline " << ep(c.start) << ' ' << ep(c.end);
    for (const auto& p : c.points) os << " (" << p.real() << ',' << p.imag() << ')';
    os << '\n';
  }
  return os.str();
}

SeparatingFamily SeparatingFamily::from_text(const SurfaceSpec& surface,
                                             const std::string& text) {
  std::vector<FamilyCurve> curves;
  std::istringstream is(text);
  std::string line;
  auto parse_ep = [](const std::string& s) {
    CurveEndpoint e;
    if (s == "outer") {
      e.kind = CurveEndpoint::Kind::outer_boundary;
    } else if (s == "inner") {
      e.kind = CurveEndpoint::Kind::inner_boundary;
    } else if (!s.empty() && s[0] == 'z') {
      e.kind = CurveEndpoint::Kind::puncture;
      e.puncture_index = std::stoi(s.substr(1));
    } else {
      throw DomainError("family text: bad endpoint '" + s + "'");
    }
    return e;
  };
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string kind, a, b;
    ls >> kind >> a >> b;
    if (kind != "polyline") throw DomainError("family text: bad curve type");
    FamilyCurve c;
    c.start = parse_ep(a);
    c.end = parse_ep(b);
    std::string tok;
    while (ls >> tok) {
      double re, im;
      if (std::sscanf(tok.c_str(), "(%lf,%lf)", &re, &im) != 2)
        throw DomainError("family text: bad point '" + tok + "'");
      c.points.emplace_back(re, im);
    }
    curves.push_back(std::move(c));
  }
  return SeparatingFamily(surface, std::move(curves));
}

SeparatingFamily default_family(const SurfaceSpec& surface,
                                const std::vector<double>* tangent_angles) {
  std::vector<FamilyCurve> curves;
  const auto& zs = surface.punctures;
  std::vector<double> used_angles;
  for (size_t i = 0; i < zs.size(); ++i) {
    complex<double> z = zs[i];
    double base_angle = std::abs(z) > kTiny ? std::arg(z) : 0.0;
    FamilyCurve c;
    c.start = {CurveEndpoint::Kind::puncture, static_cast<int>(i)};
    c.end = {CurveEndpoint::Kind::outer_boundary, -1};
    if (tangent_angles) {
      // leave along the prescribed tangent, then bend to a radial approach
      double psi = (*tangent_angles)[i];
      double stub = 0.25 * (1.0 - std::abs(z));
      complex<double> w = z + std::polar(stub, psi);
      double exit_angle = std::arg(w);
      c.points = {z, w, std::polar(1.0, exit_angle)};
      used_angles.push_back(exit_angle);
    } else {
      c.points = {z, std::polar(1.0, base_angle)};
      used_angles.push_back(base_angle);
    }
    curves.push_back(std::move(c));
  }
  if (surface.kind == SurfaceKind::annulus) {
    // inner-outer radial cut at the angle farthest from every puncture
    double best_angle = 0.0, best_gap = -1.0;
    for (int cand = 0; cand < 64; ++cand) {
      double a = 2.0 * M_PI * (cand + 0.5) / 64.0;
      double gap = 1e300;
      for (size_t i = 0; i < zs.size(); ++i) {
        double d = std::abs(std::remainder(a - std::arg(zs[i]), 2.0 * M_PI));
        gap = std::min(gap, d);
      }
      for (double ua : used_angles) {
        double d = std::abs(std::remainder(a - ua, 2.0 * M_PI));
        gap = std::min(gap, d);
      }
      if (zs.empty()) gap = std::abs(std::remainder(a - 0.0, 2.0 * M_PI));
      if (gap > best_gap) {
        best_gap = gap;
        best_angle = a;
      }
    }
    FamilyCurve c;
    c.start = {CurveEndpoint::Kind::inner_boundary, -1};
    c.end = {CurveEndpoint::Kind::outer_boundary, -1};
    c.points = {std::polar(surface.inner_radius, best_angle),
                std::polar(1.0, best_angle)};
    curves.push_back(std::move(c));
  }
  return SeparatingFamily(surface, std::move(curves));
}

SeparatingFamily random_annulus_family(const SurfaceSpec& surface,
                                       const std::vector<double>& tangent_angles,
                                       uint64_t seed) {
  if (surface.kind != SurfaceKind::annulus)
    throw UnsupportedSurface("random_annulus_family: annulus only");
  const auto& zs = surface.punctures;
  const size_t s = zs.size();
  if (tangent_angles.size() != s)
    throw DomainError("random_annulus_family: tangent angle per puncture");
  const double r_in = surface.inner_radius;

  for (int attempt = 0; attempt < 400; ++attempt) {
    Rng rng(seed, static_cast<uint64_t>(attempt));
    // random spanning tree over {outer=0, inner=1, punctures 2..} with
    // puncture degree at most 2 (one curve per tangent side)
    const int n = 2 + static_cast<int>(s);
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    for (int i = n - 1; i > 0; --i)
      std::swap(order[i], order[rng.next_u64() % (i + 1)]);
    std::vector<bool> in_tree(n, false);
    std::vector<int> degree(n, 0);
    in_tree[order[0]] = true;
    std::vector<std::pair<int, int>> edges;
    bool tree_ok = true;
    for (int i = 1; i < n && tree_ok; ++i) {
      int v = order[i];
      std::vector<int> pool;
      for (int u = 0; u < n; ++u)
        if (in_tree[u] && (u < 2 || degree[u] < 2)) pool.push_back(u);
      if (pool.empty()) {
        tree_ok = false;
        break;
      }
      int u = pool[rng.next_u64() % pool.size()];
      edges.push_back({u, v});
      ++degree[u];
      ++degree[v];
      in_tree[v] = true;
    }
    if (!tree_ok) continue;

    std::vector<FamilyCurve> curves;
    bool feasible = true;
    std::vector<int> side_used(s, 0);  // bit 1: +tangent, bit 2: -tangent
    auto stub_dir = [&](size_t pi) {
      double sign;
      if ((side_used[pi] & 1) == 0) {
        sign = 1.0;
        side_used[pi] |= 1;
      } else {
        sign = -1.0;
        side_used[pi] |= 2;
      }
      return sign * std::polar(1.0, tangent_angles[pi]);
    };
    auto stub_len = [&](size_t pi) {
      double room = std::min(1.0 - std::abs(zs[pi]), std::abs(zs[pi]) - r_in);
      return (0.15 + 0.2 * rng.uniform()) * room;
    };
    for (auto [u, v] : edges) {
      if (u > v && (u < 2) == (v < 2)) std::swap(u, v);
      FamilyCurve c;
      if (u < 2 && v < 2) {
        // outer-inner radial cut
        double a = rng.uniform(0.0, 2.0 * M_PI);
        c.start = {CurveEndpoint::Kind::inner_boundary, -1};
        c.end = {CurveEndpoint::Kind::outer_boundary, -1};
        c.points = {std::polar(r_in, a), std::polar(1.0, a)};
      } else if (u < 2 || v < 2) {
        int bvert = u < 2 ? u : v;
        size_t pi = static_cast<size_t>((u < 2 ? v : u) - 2);
        complex<double> z = zs[pi];
        complex<double> w = z + stub_len(pi) * stub_dir(pi);
        double a = std::arg(w) + 0.3 * (rng.uniform() - 0.5);
        c.start = {CurveEndpoint::Kind::puncture, static_cast<int>(pi)};
        if (bvert == 0) {
          c.end = {CurveEndpoint::Kind::outer_boundary, -1};
          c.points = {z, w, std::polar(0.5 * (std::abs(w) + 1.0), a),
                      std::polar(1.0, a)};
        } else {
          c.end = {CurveEndpoint::Kind::inner_boundary, -1};
          c.points = {z, w, std::polar(0.5 * (std::abs(w) + r_in), a),
                      std::polar(r_in, a)};
        }
      } else {
        size_t pa = static_cast<size_t>(u - 2), pb = static_cast<size_t>(v - 2);
        complex<double> za = zs[pa], zb = zs[pb];
        complex<double> wa = za + stub_len(pa) * stub_dir(pa);
        complex<double> wb = zb + stub_len(pb) * stub_dir(pb);
        complex<double> mid = 0.5 * (wa + wb);
        // keep the waypoint inside the annulus
        double rm = std::abs(mid);
        if (rm < r_in + 0.05 || rm > 0.95) {
          double rr = std::clamp(rm, r_in + 0.08, 0.92);
          mid *= rr / std::max(rm, 1e-12);
        }
        mid += 0.1 * (rng.uniform() - 0.5) * complex<double>(0.0, 1.0) *
               (wb - wa);
        c.start = {CurveEndpoint::Kind::puncture, static_cast<int>(pa)};
        c.end = {CurveEndpoint::Kind::puncture, static_cast<int>(pb)};
        c.points = {za, wa, mid, wb, zb};
      }
      curves.push_back(std::move(c));
    }
    if (!feasible) continue;
    try {
      return SeparatingFamily(surface, std::move(curves));
    } catch (const ValidationError&) {
      continue;
    }
  }
  throw DomainError("random_annulus_family: no valid family found");
}

namespace {

// Canonical path from x0 to x: straight segment if admissible, else a
// radial/chord polyline through a clear middle radius.
struct PathMaker {
  const SurfaceSpec& surface;
  std::vector<complex<double>> obstacles;  // punctures and curve endpoints

  bool piece_ok(complex<double> a, complex<double> b,
                complex<double> target) const {
    if (std::abs(b - a) < kTiny) return true;
    // stay inside the surface
    if (surface.kind == SurfaceKind::annulus) {
      double d0 = point_segment_distance(0.0, a, b);
      if (d0 < surface.inner_radius - 1e-12) return false;
    }
    if (std::max(std::abs(a), std::abs(b)) > 1.0 + 1e-9) return false;
    for (const auto& o : obstacles) {
      if (std::abs(o - target) < 1e-5) continue;  // evaluating next to it
      if (point_segment_distance(o, a, b) < 1e-7) return false;
    }
    return true;
  }

  bool path_ok(const std::vector<complex<double>>& pts) const {
    complex<double> target = pts.back();
    for (size_t i = 0; i + 1 < pts.size(); ++i)
      if (!piece_ok(pts[i], pts[i + 1], target)) return false;
    return true;
  }

  std::vector<complex<double>> polar_path(complex<double> a, complex<double> b,
                                          double rho_mid,
                                          double angle_jitter = 0.0) const {
    std::vector<complex<double>> pts;
    pts.push_back(a);
    double ta = std::arg(a), tb = std::arg(b);
    double sweep = std::remainder(tb - ta, 2.0 * M_PI);
    pts.push_back(std::polar(rho_mid, ta));
    int nseg = std::max(2, static_cast<int>(std::ceil(std::abs(sweep) / (M_PI / 8.0))));
    for (int i = 1; i <= nseg; ++i) {
      double frac = static_cast<double>(i) / nseg;
      // interior chord points take a small angular detour; endpoints stay put
      double detour = angle_jitter * std::sin(M_PI * frac);
      pts.push_back(std::polar(rho_mid, ta + sweep * frac + detour));
    }
    pts.push_back(b);
    // drop duplicate consecutive points
    std::vector<complex<double>> out;
    for (const auto& p : pts)
      if (out.empty() || std::abs(p - out.back()) > kTiny) out.push_back(p);
    return out;
  }

  std::vector<complex<double>> make(complex<double> a, complex<double> b) const {
    std::vector<complex<double>> direct = {a, b};
    if (path_ok(direct)) return direct;
    double lo = surface.kind == SurfaceKind::annulus ? surface.inner_radius : 0.05;
    for (double frac : {0.5, 0.42, 0.58, 0.35, 0.65, 0.28, 0.72, 0.47, 0.53,
                        0.39, 0.61, 0.44}) {
      double rho = lo + (1.0 - lo) * frac;
      auto pts = polar_path(a, b, rho);
      if (path_ok(pts)) return pts;
    }
    throw PathError("could not route a path clear of punctures/endpoints");
  }
};

}  // namespace

CutPrimitive::CutPrimitive(const HarmonicForm& form,
                           const SeparatingFamily& family,
                           complex<double> base)
    : form_(form), family_(family), base_(base) {
  jump_.resize(family.curves().size());
  for (size_t i = 0; i < jump_.size(); ++i)
    jump_[i] = family.dual_cycle(i, form);
  for (const auto& c : family.curves())
    for (size_t i = 0; i + 1 < c.points.size(); ++i)
      if (point_segment_distance(base, c.points[i], c.points[i + 1]) < 1e-9)
        throw PathError("CutPrimitive: base point lies on a family curve");
}

double CutPrimitive::operator()(complex<double> x) const {
  PathMaker pm{form_.surface(), {}};
  for (const auto& z : form_.surface().punctures) pm.obstacles.push_back(z);
  for (const auto& c : family_.curves()) {
    pm.obstacles.push_back(c.points.front());
    pm.obstacles.push_back(c.points.back());
  }
  // try a few routes until crossings are nondegenerate: vary the middle
  // radius and bend the chord legs so near-parallel hits resolve
  const auto& curves = family_.curves();
  for (int attempt = 0; attempt < 24; ++attempt) {
    std::vector<complex<double>> pts;
    if (attempt == 0) {
      pts = {base_, x};
      if (!pm.path_ok(pts)) continue;
    } else {
      double lo = form_.surface().kind == SurfaceKind::annulus
                      ? form_.surface().inner_radius
                      : 0.05;
      double frac = 0.30 + 0.053 * ((attempt - 1) % 8);
      double jitter = 0.11 * (((attempt - 1) / 8) - 1);
      auto cand = pm.polar_path(base_, x, lo + (1.0 - lo) * frac, jitter);
      if (!pm.path_ok(cand)) continue;
      pts = cand;
    }
    bool degenerate = false;
    double correction = 0.0;
    for (size_t ci = 0; ci < curves.size() && !degenerate; ++ci) {
      for (size_t s = 0; s + 1 < curves[ci].points.size() && !degenerate; ++s) {
        for (size_t pp = 0; pp + 1 < pts.size() && !degenerate; ++pp) {
          auto hit = segment_crossing(pts[pp], pts[pp + 1], curves[ci].points[s],
                                      curves[ci].points[s + 1]);
          if (!hit) continue;
          if (hit->degenerate) {
            degenerate = true;
            break;
          }
          correction += hit->sign * jump_[ci];
        }
      }
    }
    if (degenerate) continue;
    double j = 0.0;
    for (size_t pp = 0; pp + 1 < pts.size(); ++pp)
      j += form_.segment_integral(pts[pp], pts[pp + 1]);
    return j - correction;
  }
  throw PathError("CutPrimitive: all candidate paths were degenerate");
}

namespace {

// angles (sorted) at which family curves attach to the given boundary circle
std::vector<double> attach_angles(const SeparatingFamily& family, bool outer) {
  std::vector<double> angles;
  for (const auto& c : family.curves()) {
    for (bool start : {true, false}) {
      const CurveEndpoint& e = start ? c.start : c.end;
      complex<double> p = start ? c.points.front() : c.points.back();
      bool is_outer = e.kind == CurveEndpoint::Kind::outer_boundary;
      bool is_inner = e.kind == CurveEndpoint::Kind::inner_boundary;
      if ((outer && is_outer) || (!outer && is_inner)) {
        double a = std::arg(p);
        if (a < 0.0) a += 2.0 * M_PI;
        angles.push_back(a);
      }
    }
  }
  std::sort(angles.begin(), angles.end());
  return angles;
}

// int over the circle of integrand(theta) with GL panels split at the given
// angles (jump points of the cut primitive)
double circle_quadrature(const std::vector<double>& splits, int order,
                         const std::function<double(double)>& integrand) {
  // Gauss nodes are strictly interior, so panels run edge to edge even
  // though the integrand jumps at the split angles.
  std::vector<double> brk = splits;
  if (brk.empty()) brk.push_back(0.0);
  brk.push_back(brk.front() + 2.0 * M_PI);
  double acc = 0.0;
  for (size_t i = 0; i + 1 < brk.size(); ++i) {
    double lo = brk[i], hi = brk[i + 1];
    if (hi - lo <= 1e-13) continue;
    int panels = std::max(1, static_cast<int>((hi - lo) / (M_PI / 4.0)));
    for (int p = 0; p < panels; ++p) {
      QuadRule r = gauss_legendre(order, lo + (hi - lo) * p / panels,
                                  lo + (hi - lo) * (p + 1) / panels);
      for (size_t j = 0; j < r.nodes.size(); ++j)
        acc += r.weights[j] * integrand(r.nodes[j]);
    }
  }
  return acc;
}

// crossing radii of the ray at angle theta with the family curves
std::vector<double> ray_crossings(const SeparatingFamily& family, double theta,
                                  double r_lo) {
  std::vector<double> radii;
  complex<double> dir = std::polar(1.0, theta);
  complex<double> a = r_lo > 0.0 ? complex<double>(r_lo * dir) : complex<double>(1e-9 * dir);
  complex<double> b = 1.0 * dir;
  for (const auto& c : family.curves())
    for (size_t s = 0; s + 1 < c.points.size(); ++s) {
      auto hit = segment_crossing(a, b, c.points[s], c.points[s + 1]);
      if (hit && !hit->degenerate) {
        complex<double> p = a + hit->t_path * (b - a);
        radii.push_back(std::abs(p));
      }
    }
  std::sort(radii.begin(), radii.end());
  return radii;
}

}  // namespace

double curvature_term(const HarmonicForm& form, const SeparatingFamily& family,
                      complex<double> base, const ConformalFactor& rho,
                      const std::vector<InteriorCycleTerm>& genus_terms,
                      int quad_order) {
  const SurfaceSpec& surface = form.surface();
  CutPrimitive I(form, family, base);

  double total = 0.0;

  // boundary circles: int (k_flat + (1/2) d_nu rho) I dl_flat. Punctures
  // close to a circle leave a sharp angular feature in the primitive there;
  // extra splits bracket it.
  auto boundary_part = [&](bool outer) {
    double radius = outer ? 1.0 : surface.inner_radius;
    double k_flat = outer ? 1.0 : -1.0 / radius;
    auto splits = attach_angles(family, outer);
    auto add_feature = [&](complex<double> z) {
      double dist = std::abs(std::abs(z) - radius);
      double width = 2.5 * std::max(dist, 1e-3) / radius;
      double a0 = std::arg(z);
      for (double a : {a0 - width, a0, a0 + width}) {
        double an = a - 2.0 * M_PI * std::floor(a / (2.0 * M_PI));
        splits.push_back(an);
      }
    };
    for (const auto& z : surface.punctures) add_feature(z);
    // curve vertices close to the circle leave features in the primitive too
    for (const auto& c : family.curves())
      for (const auto& p : c.points) add_feature(p);
    std::sort(splits.begin(), splits.end());
    auto integrand = [&](double th) {
      complex<double> z = std::polar(radius, th);
      complex<double> nu = (outer ? 1.0 : -1.0) * z / radius;
      double dn = rho.is_flat()
                      ? 0.0
                      : dot2(rho.gradient(z), nu);
      return (k_flat + 0.5 * dn) * I(z) * radius;
    };
    return circle_quadrature(splits, quad_order / 2 + 8, integrand);
  };
  total += boundary_part(true);
  if (surface.kind == SurfaceKind::annulus) total += boundary_part(false);

  // bulk (1/2) int K I dv, nonzero only for curved metrics. The per-ray
  // integral is smooth in the angle between curve-vertex directions, so the
  // angular quadrature splits there.
  if (!rho.is_flat()) {
    double r_lo = surface.kind == SurfaceKind::annulus ? surface.inner_radius : 0.0;
    std::vector<double> tsplits;
    for (const auto& c : family.curves())
      for (const auto& pt : c.points) {
        double a = std::arg(pt);
        if (a < 0.0) a += 2.0 * M_PI;
        tsplits.push_back(a);
      }
    std::sort(tsplits.begin(), tsplits.end());
    if (tsplits.empty()) tsplits.push_back(0.0);
    tsplits.push_back(tsplits.front() + 2.0 * M_PI);
    double bulk = 0.0;
    for (size_t seg = 0; seg + 1 < tsplits.size(); ++seg) {
      double lo = tsplits[seg] + 1e-9, hi = tsplits[seg + 1] - 1e-9;
      if (hi <= lo) continue;
      int panels = std::max(1, static_cast<int>(std::ceil((hi - lo) / 0.3)));
      for (int pnl = 0; pnl < panels; ++pnl) {
        QuadRule tt = gauss_legendre(quad_order / 2 + 8,
                                     lo + (hi - lo) * pnl / panels,
                                     lo + (hi - lo) * (pnl + 1) / panels);
        for (size_t j = 0; j < tt.nodes.size(); ++j) {
          double th = tt.nodes[j];
          std::vector<double> radii = ray_crossings(family, th, r_lo);
          // rays passing close to a puncture see a sharp angular feature of
          // the primitive at the puncture radius
          for (const auto& z : surface.punctures) radii.push_back(std::abs(z));
          std::sort(radii.begin(), radii.end());
          std::vector<double> brk = {r_lo};
          for (double rr : radii)
            if (rr > r_lo + 1e-9 && rr < 1.0 - 1e-9) brk.push_back(rr);
          brk.push_back(1.0);
          double line = 0.0;
          for (size_t b = 0; b + 1 < brk.size(); ++b) {
            if (brk[b + 1] - brk[b] <= 1e-13) continue;
            QuadRule rrule =
                gauss_legendre(quad_order / 2 + 8, brk[b], brk[b + 1]);
            for (size_t i = 0; i < rrule.nodes.size(); ++i) {
              double r = rrule.nodes[i];
              complex<double> z = std::polar(r, th);
              line += rrule.weights[i] * rho.laplacian(z) * I(z) * r;
            }
          }
          bulk += tt.weights[j] * line;
        }
      }
    }
    total += 0.5 * bulk;
  }

  // cut corrections: sum_i dual_cycle_i * int_{d_i} k dl
  for (size_t ci = 0; ci < family.curves().size(); ++ci) {
    const auto& c = family.curves()[ci];
    double kint = c.flat_turning();
    if (!rho.is_flat()) {
      for (size_t s = 0; s + 1 < c.points.size(); ++s) {
        complex<double> a = c.points[s], b = c.points[s + 1];
        complex<double> t = (b - a) / std::abs(b - a);
        complex<double> n_right(t.imag(), -t.real());
        QuadRule r = gauss_legendre(quad_order / 2 + 8, 0.0, 1.0);
        double len = std::abs(b - a);
        for (size_t i = 0; i < r.nodes.size(); ++i) {
          complex<double> z = a + r.nodes[i] * (b - a);
          kint += r.weights[i] * 0.5 * dot2(rho.gradient(z), n_right) * len;
        }
      }
    }
    total += family.dual_cycle(ci, form) * kint;
  }

  // genus (a_i, b_i) correction terms; empty for disk/annulus
  for (const auto& g : genus_terms)
    total += g.omega_a * g.k_int_b - g.omega_b * g.k_int_a;

  return total;
}

double anomaly(const HarmonicForm& form, const SeparatingFamily& family_a,
               const SeparatingFamily& family_b, complex<double> base,
               const ConformalFactor& rho) {
  return curvature_term(form, family_b, base, rho) -
         curvature_term(form, family_a, base, rho);
}

namespace {

// Excised energy integral via Stokes on the cut surface:
//   int_{Sigma \ (delta u D_eps)} |w|^2 dv
//     = oint_{dSigma} I *w  -  sum_i oint_{C_i(eps_i), ccw} I *w
//       + sum_i E_i int_{d_i \ D_eps} *w
double excised_energy(const HarmonicForm& form_I, const HarmonicForm& form_star,
                      const SeparatingFamily& family, complex<double> base,
                      const std::vector<double>& eps) {
  const SurfaceSpec& surface = form_I.surface();
  CutPrimitive I(form_I, family, base);

  double total = 0.0;
  // outer boundary (ccw) and inner boundary (cw = induced)
  {
    auto splits = attach_angles(family, true);
    total += circle_quadrature(splits, 24, [&](double th) {
      complex<double> z = std::polar(1.0, th);
      complex<double> t = complex<double>(-std::sin(th), std::cos(th));
      complex<double> sw = form_star.star_components(z);
      return I(z) * dot2(sw, t);
    });
  }
  if (surface.kind == SurfaceKind::annulus) {
    auto splits = attach_angles(family, false);
    double r = surface.inner_radius;
    total += circle_quadrature(splits, 24, [&](double th) {
      complex<double> z = std::polar(r, th);
      // induced orientation is clockwise
      complex<double> t = complex<double>(std::sin(th), -std::cos(th));
      complex<double> sw = form_star.star_components(z);
      return I(z) * dot2(sw, t) * r;
    });
  }
  // puncture circles, ccw, subtracted
  for (size_t pi = 0; pi < surface.punctures.size(); ++pi) {
    double e = eps[pi];
    if (e <= 0.0) continue;
    complex<double> z0 = surface.punctures[pi];
    // split at angles of incident cuts
    std::vector<double> splits;
    for (const auto& c : family.curves()) {
      for (bool start : {true, false}) {
        const CurveEndpoint& ep = start ? c.start : c.end;
        if (ep.kind == CurveEndpoint::Kind::puncture &&
            ep.puncture_index == static_cast<int>(pi)) {
          complex<double> dir = start ? c.points[1] - c.points[0]
                                      : c.points[c.points.size() - 2] -
                                            c.points.back();
          double a = std::arg(dir);
          if (a < 0.0) a += 2.0 * M_PI;
          splits.push_back(a);
        }
      }
    }
    std::sort(splits.begin(), splits.end());
    total -= circle_quadrature(splits, 24, [&](double th) {
      complex<double> z = z0 + std::polar(e, th);
      complex<double> t = complex<double>(-std::sin(th), std::cos(th));
      complex<double> sw = form_star.star_components(z);
      return I(z) * dot2(sw, t) * e;
    });
  }
  // cut segments, trimmed at excised disks
  for (size_t ci = 0; ci < family.curves().size(); ++ci) {
    const auto& c = family.curves()[ci];
    double E = family.dual_cycle(ci, form_I);
    if (E == 0.0) continue;
    double acc = 0.0;
    for (size_t s = 0; s + 1 < c.points.size(); ++s) {
      complex<double> a = c.points[s], b = c.points[s + 1];
      // trim around any puncture endpoint of this segment
      for (size_t pi = 0; pi < surface.punctures.size(); ++pi) {
        double e = eps[pi];
        if (e <= 0.0) continue;
        complex<double> z0 = surface.punctures[pi];
        if (std::abs(a - z0) < e) {
          complex<double> d = (b - a) / std::abs(b - a);
          a = z0 + d * e;
        }
        if (std::abs(b - z0) < e) {
          complex<double> d = (a - b) / std::abs(a - b);
          b = z0 + d * e;
        }
      }
      if (std::abs(b - a) > kTiny) acc += form_star.star_segment_integral(a, b);
    }
    total += E * acc;
  }
  return total;
}

}  // namespace

double regularized_norm(const HarmonicForm& form, const ConformalFactor& rho) {
  const SurfaceSpec& surface = form.surface();
  SeparatingFamily family = default_family(surface);

  // base point away from the default family's radial cuts
  double base_angle = 0.0;
  {
    std::vector<double> avoid = attach_angles(family, true);
    double best_gap = -1.0;
    for (int cand = 0; cand < 64; ++cand) {
      double a = 2.0 * M_PI * (cand + 0.25) / 64.0;
      double gap = 1e300;
      for (double ua : avoid)
        gap = std::min(gap, std::abs(std::remainder(a - ua, 2.0 * M_PI)));
      if (avoid.empty()) gap = 1.0;
      if (gap > best_gap) {
        best_gap = gap;
        base_angle = a;
      }
    }
  }
  double base_r = surface.kind == SurfaceKind::annulus
                      ? std::sqrt(surface.inner_radius)
                      : 0.45;
  // keep the base clear of punctures
  complex<double> base = std::polar(base_r, base_angle);
  for (int tries = 0; tries < 32; ++tries) {
    bool ok = true;
    for (const auto& z : surface.punctures)
      if (std::abs(base - z) < 0.05) ok = false;
    if (ok) break;
    base_angle += 0.19;
    base = std::polar(base_r, base_angle);
  }

  double m2_sum = 0.0;
  for (size_t i = 0; i < form.winding().size(); ++i)
    m2_sum += static_cast<double>(form.winding()[i]) * form.winding()[i];

  auto level = [&](double eps_geodesic) {
    std::vector<double> eps(surface.punctures.size(), 0.0);
    for (size_t i = 0; i < eps.size(); ++i) {
      double scale = rho.is_flat() ? 1.0 : std::exp(-0.5 * rho(surface.punctures[i]));
      eps[i] = form.winding()[i] != 0 ? eps_geodesic * scale : 0.0;
    }
    double ex = excised_energy(form, form, family, base, eps);
    return ex + m2_sum / (2.0 * M_PI) * std::log(eps_geodesic);
  };

  if (m2_sum == 0.0) {
    // no counterterm needed; a single evaluation is exact
    return excised_energy(form, form, family, base,
                          std::vector<double>(surface.punctures.size(), 0.0));
  }

  // eps ladder 1e-2, 5e-3, 2.5e-3 plus one refinement rung: punctures close
  // to a boundary leave a visible eps^4 tail that the second Richardson
  // level removes
  double i0 = level(1e-2), i1 = level(5e-3), i2 = level(2.5e-3),
         i3 = level(1.25e-3);
  double r1 = (4.0 * i1 - i0) / 3.0;
  double r2 = (4.0 * i2 - i1) / 3.0;
  double r3 = (4.0 * i3 - i2) / 3.0;
  double s1 = (16.0 * r2 - r1) / 15.0;
  double s2 = (16.0 * r3 - r2) / 15.0;
  double extrap = (64.0 * s2 - s1) / 63.0;
  if (std::abs(s2 - s1) > 1e-6 * std::max(1.0, std::abs(extrap)))
    throw NonConvergence("regularized_norm: eps ladder disagreement");
  return extrap;
}

double gradient_pairing(const HarmonicForm& form, const ConformalFactor& rho) {
  // (1/2) int <d rho, omega> dv via d(rho *omega) = <d rho, omega> dv:
  // boundary integrals only, rho is single-valued.
  const SurfaceSpec& surface = form.surface();
  auto level = [&](double eps) {
    double total = 0.0;
    total += circle_quadrature({}, 32, [&](double th) {
      complex<double> z = std::polar(1.0, th);
      complex<double> t(-std::sin(th), std::cos(th));
      complex<double> sw = form.star_components(z);
      return rho(z) * dot2(sw, t);
    });
    if (surface.kind == SurfaceKind::annulus) {
      double r = surface.inner_radius;
      total += circle_quadrature({}, 32, [&](double th) {
        complex<double> z = std::polar(r, th);
        complex<double> t(std::sin(th), -std::cos(th));  // induced cw
        complex<double> sw = form.star_components(z);
        return rho(z) * dot2(sw, t) * r;
      });
    }
    for (size_t pi = 0; pi < surface.punctures.size(); ++pi) {
      if (form.winding()[pi] == 0) continue;
      complex<double> z0 = surface.punctures[pi];
      total -= circle_quadrature({}, 32, [&](double th) {
        complex<double> z = z0 + std::polar(eps, th);
        complex<double> t(-std::sin(th), std::cos(th));
        complex<double> sw = form.star_components(z);
        return rho(z) * dot2(sw, t) * eps;
      });
    }
    return total;
  };
  bool has_winding = false;
  for (int m : form.winding()) has_winding |= (m != 0);
  if (!has_winding) return 0.5 * level(0.0);
  double i1 = level(1e-3), i2 = level(5e-4);
  return 0.5 * (2.0 * i2 - i1);
}

double form_inner_product(const HarmonicForm& a, const HarmonicForm& b) {
  const SurfaceSpec& surface = a.surface();
  SeparatingFamily family = default_family(surface);
  complex<double> base = std::polar(
      surface.kind == SurfaceKind::annulus ? std::sqrt(surface.inner_radius)
                                           : 0.45,
      2.416);
  for (int tries = 0; tries < 32; ++tries) {
    bool ok = true;
    for (const auto& z : surface.punctures)
      if (std::abs(base - z) < 0.05) ok = false;
    if (ok) break;
    base *= std::polar(1.0, 0.19);
  }
  // cross term is integrable; small excisions and linear extrapolation
  auto level = [&](double eps_val) {
    std::vector<double> eps(surface.punctures.size(), 0.0);
    for (size_t i = 0; i < eps.size(); ++i)
      eps[i] = a.winding()[i] != 0 ? eps_val : 0.0;
    return excised_energy(a, b, family, base, eps);
  };
  if (surface.punctures.empty()) return level(0.0);
  double i1 = level(2e-4), i2 = level(1e-4);
  return 2.0 * i2 - i1;
}

double theta_sum(const SurfaceSpec& surface, const std::vector<int>& m,
                 double a, const ConformalFactor& rho) {
  if (!(a > 0.0)) throw DomainError("theta_sum: a must be positive");
  auto lattice = cohomology_lattice(surface, m);
  if (lattice.rank == 0) {
    HarmonicForm w = lattice.representative({});
    return std::exp(-a * (w.zero() ? 0.0 : regularized_norm(w, rho)));
  }
  // annulus: |w_k|^2 = c0 + 2 k c1 + k^2 c2 with k the inner-boundary cycle
  HarmonicForm w0 = lattice.representative({0});
  HarmonicForm core(surface, std::vector<int>(surface.punctures.size(), 0), 1);
  double c2 = regularized_norm(core, ConformalFactor::flat());
  double c0 = w0.zero() ? 0.0 : regularized_norm(w0, rho);
  double c1 = w0.zero() ? 0.0 : form_inner_product(w0, core);
  // tail bound: exp(-a c2 k^2) below 1e-14 ends the sum
  double acc = 0.0;
  int k = 0;
  for (;;) {
    double np = c0 + 2.0 * k * c1 + double(k) * k * c2;
    double nm = c0 - 2.0 * k * c1 + double(k) * k * c2;
    double term = std::exp(-a * np) + (k == 0 ? 0.0 : std::exp(-a * nm));
    acc += term;
    double kk = k + 1.0;
    double tail = std::exp(-a * (c0 + kk * kk * c2 - 2.0 * kk * std::abs(c1)));
    if (tail < 1e-14 && k >= 1) break;
    ++k;
    if (k > 100000) throw NonConvergence("theta_sum: no convergence");
  }
  return acc;
}

}  // namespace ciltlab
