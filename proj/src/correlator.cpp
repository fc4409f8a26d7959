#include "ciltlab/correlator.hpp"

#include <cmath>
#include <optional>
#include <sstream>

#include "ciltlab/errors.hpp"
#include "ciltlab/gff.hpp"
#include "ciltlab/parallel.hpp"
#include "ciltlab/quadrature.hpp"
#include "ciltlab/rng.hpp"

namespace ciltlab {

using std::complex;

void CorrelatorConfig::validate() const {
  validate_charges(params, charges);
  for (const auto& b : charges.bulk)
    if (!surface.contains(b.position) || surface.on_boundary(b.position))
      throw DomainError("CorrelatorConfig: bulk insertion must be interior");
}

namespace {

struct InsertionData {
  std::vector<Site> sites;
  std::vector<double> weights;  // alpha_j (bulk), eta_j / 2 (boundary)
};

InsertionData insertion_data(const CorrelatorConfig& cfg, double eps) {
  InsertionData d;
  for (const auto& b : cfg.charges.bulk) {
    d.sites.push_back(Site::bulk(b.position, eps));
    d.weights.push_back(b.alpha);
  }
  for (const auto& b : cfg.charges.boundary) {
    d.sites.push_back(Site::circle_point(b.theta, eps));
    d.weights.push_back(0.5 * b.eta);
  }
  return d;
}

// Limit-kernel pair factor exp(-l l' C(x, y)) = (|x-y| |1-x conj(y)|)^{l l'}
// for bulk slots; boundary slots collapse to |x-y|^{2 l l'}.
double limit_pair_factor(const Site& a, const Site& b, double la, double lb) {
  double gap = std::abs(a.point - b.point);
  double harm = std::abs(1.0 - a.point * std::conj(b.point));
  return std::pow(gap * harm, la * lb);
}

double limit_diag_factor(const CovarianceKernel& kernel, const Site& s,
                         double lambda) {
  if (s.boundary)
    return std::exp(-0.5 * lambda * lambda * kernel.diag_counterterm_boundary());
  return std::exp(-0.5 * lambda * lambda * kernel.diag_counterterm_bulk(s.point));
}

// Smooth plateau cutoff: 1 on [0, 1/2], 0 at 1, C^3 transition.
double cutoff(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  double x = 2.0 * (1.0 - t);  // 1 -> 0 maps to 0 -> 1... x in (0,1)
  return x * x * x * (10.0 - 15.0 * x + 6.0 * x * x);
}

// int_D g(w) prod_i |w - z_i|^{mu_i} d^2w with interior point singularities,
// via a smooth partition of unity and polar grids centered at each z_i.
double disk_integral_with_singularities(
    const std::vector<complex<double>>& centers, const std::vector<double>& mus,
    const std::function<double(complex<double>)>& g_smooth, int order) {
  // localization radius: half the minimal separation / boundary distance
  std::vector<double> rad(centers.size(), 0.25);
  for (size_t i = 0; i < centers.size(); ++i) {
    double d = 1.0 - std::abs(centers[i]);
    for (size_t j = 0; j < centers.size(); ++j)
      if (j != i) d = std::min(d, 0.5 * std::abs(centers[i] - centers[j]));
    rad[i] = 0.5 * d;
  }
  auto chi = [&](size_t i, complex<double> w) {
    return cutoff(std::abs(w - centers[i]) / rad[i]);
  };
  auto full_integrand = [&](complex<double> w) {
    double v = g_smooth(w);
    for (size_t i = 0; i < centers.size(); ++i)
      v *= std::pow(std::abs(w - centers[i]), mus[i]);
    return v;
  };

  double total = 0.0;
  QuadRule phi = gauss_legendre(2 * order, 0.0, 2.0 * M_PI);
  QuadRule ur = gauss_legendre(order, 0.0, 1.0);
  // singular pieces, polar around each center with u = r^{2+mu}
  for (size_t i = 0; i < centers.size(); ++i) {
    double p = 2.0 + mus[i];
    if (!(p > 0.0))
      throw DivergenceError("disk_integral: exponent not integrable");
    double umax = std::pow(rad[i], p);
    for (size_t a = 0; a < phi.nodes.size(); ++a) {
      complex<double> dir = std::polar(1.0, phi.nodes[a]);
      for (size_t t = 0; t < ur.nodes.size(); ++t) {
        double u = ur.nodes[t] * umax;
        double r = std::pow(u, 1.0 / p);
        complex<double> w = centers[i] + r * dir;
        double v = g_smooth(w) * chi(i, w);
        for (size_t j = 0; j < centers.size(); ++j)
          if (j != i) v *= std::pow(std::abs(w - centers[j]), mus[j]);
        total += phi.weights[a] * ur.weights[t] * umax * v / p;
      }
    }
  }
  // remainder: polar over the disk, smooth after removing the bumps
  QuadRule rr = gauss_legendre(2 * order, 0.0, 1.0);
  for (size_t a = 0; a < phi.nodes.size(); ++a) {
    for (size_t t = 0; t < rr.nodes.size(); ++t) {
      complex<double> w = std::polar(rr.nodes[t], phi.nodes[a]);
      double mask = 1.0;
      for (size_t i = 0; i < centers.size(); ++i) mask -= chi(i, w);
      if (mask <= 0.0) continue;
      total += phi.weights[a] * rr.weights[t] * rr.nodes[t] * mask *
               full_integrand(w);
    }
  }
  return total;
}

// Primitive value at a puncture approached along its tangent angle. Family
// cuts attach along the same line, so the evaluation backs off by a small
// angular offset and removes the exact (m / 2 pi) * offset contribution of
// the winding part; the cut-side ambiguity is an integer cycle, invisible in
// the insertion phases.
double primitive_at_insertion(const CutPrimitive& I, complex<double> z,
                              double tangent_angle, int winding) {
  const double h = 1e-8;
  for (double delta : {0.0, 0.02, -0.02, 0.05, -0.05, 0.11, -0.11, 0.23}) {
    try {
      double v = I(z - h * std::polar(1.0, tangent_angle + delta));
      return v - winding / (2.0 * M_PI) * delta;
    } catch (const PathError&) {
      continue;
    }
  }
  throw PathError("primitive_at_insertion: no admissible approach direction");
}

// magnetic data on the disk: global weight and screening phase
struct MagneticDisk {
  bool active = false;
  HarmonicForm form;
  std::optional<SeparatingFamily> family;
  complex<double> base{0.45, 0.17};
  double norm_weight = 1.0;      // exp(-pi R^2 reg-norm)
  complex<double> phase{1.0, 0.0};  // insertion + curvature phases
};

MagneticDisk magnetic_disk_data(const CorrelatorConfig& cfg) {
  MagneticDisk md;
  bool any = false;
  for (const auto& b : cfg.charges.bulk) any |= (b.magnetic != 0);
  if (!any || cfg.surface.kind != SurfaceKind::disk) return md;
  md.active = true;
  std::vector<complex<double>> zs;
  std::vector<int> ms;
  std::vector<double> tangents;
  for (const auto& b : cfg.charges.bulk) {
    zs.push_back(b.position);
    ms.push_back(b.magnetic);
    tangents.push_back(b.tangent_angle);
  }
  SurfaceSpec punctured = SurfaceSpec::disk(zs);
  md.form = HarmonicForm(punctured, ms, 0);
  md.family = default_family(punctured, &tangents);
  const double R = cfg.params.radius;
  md.norm_weight = std::exp(-M_PI * R * R * regularized_norm(md.form));
  CutPrimitive I(md.form, *md.family, md.base);
  double phase = 0.0;
  for (size_t j = 0; j < cfg.charges.bulk.size(); ++j) {
    const auto& b = cfg.charges.bulk[j];
    phase += b.alpha * 2.0 * M_PI * R *
             primitive_at_insertion(I, b.position, b.tangent_angle, b.magnetic);
  }
  phase -= cfg.params.q_charge * R *
           curvature_term(md.form, *md.family, md.base);
  md.phase = std::polar(1.0, phase);
  return md;
}

// Quadrature rule for int_0^{2pi} f(t) prod_j |2 sin((t - a_j)/2)|^{e_j} dt
// with smooth f: Gauss-Jacobi panels between consecutive singular angles,
// weights carrying the full singular product.
struct CircleRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

CircleRule circle_rule_with_powers(std::vector<double> angles,
                                   std::vector<double> expos, int n_per_panel) {
  CircleRule out;
  const double two_pi = 2.0 * M_PI;
  for (auto& a : angles) a = a - two_pi * std::floor(a / two_pi);
  std::vector<size_t> idx(angles.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](size_t a, size_t b) { return angles[a] < angles[b]; });
  std::vector<double> sa;
  std::vector<double> se;
  for (size_t i : idx) {
    sa.push_back(angles[i]);
    se.push_back(expos[i]);
  }
  auto singular_product = [&](double t) {
    double v = 1.0;
    for (size_t j = 0; j < sa.size(); ++j)
      v *= std::pow(std::abs(2.0 * std::sin(0.5 * (t - sa[j]))), se[j]);
    return v;
  };
  if (sa.empty()) {
    QuadRule r = gauss_legendre(4 * n_per_panel, 0.0, two_pi);
    out.nodes = r.nodes;
    out.weights = r.weights;
    return out;
  }
  for (size_t s = 0; s < sa.size(); ++s) {
    double a = sa[s];
    double b = (s + 1 < sa.size()) ? sa[s + 1] : sa[0] + two_pi;
    double ea = se[s];
    double eb = (s + 1 < sa.size()) ? se[s + 1] : se[0];
    if (b - a < 1e-12) continue;
    QuadRule r = gauss_jacobi(n_per_panel, eb, ea, a, b);
    for (size_t i = 0; i < r.nodes.size(); ++i) {
      double t = r.nodes[i];
      // the GJ weight carries (t-a)^{ea} (b-t)^{eb}; swap in the true product
      double w = r.weights[i] * singular_product(t) /
                 (std::pow(t - a, ea) * std::pow(b - t, eb));
      out.nodes.push_back(t);
      out.weights.push_back(w);
    }
  }
  return out;
}

// Deterministic screening integral with either limit kernels (eps <= 0) or
// the finite-eps regularized covariance. Supported: p + q <= 1 and (0, 2).
TermValue deterministic_moment(const CorrelatorConfig& cfg, int p, int q,
                               double eps, const MagneticDisk* md) {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  InsertionData ins = insertion_data(cfg, eps > 0.0 ? eps : 0.0);
  const double beta = cfg.params.beta;
  const size_t s = ins.sites.size();
  const bool limit = eps <= 0.0;

  auto pairfac = [&](const Site& a, const Site& b, double la, double lb) {
    if (limit) return limit_pair_factor(a, b, la, lb);
    return std::exp(-la * lb * kernel.regularized(a, b));
  };
  auto diagfac = [&](const Site& site, double lambda) {
    if (limit) return limit_diag_factor(kernel, site, lambda);
    // bulk: eps^{-l^2/2} e^{-l^2 C/2}; boundary: lambda = eta/2 carries the
    // normalizer eps^{-eta^2/4} = eps^{-l^2} against the -2 log eps diagonal
    double c = kernel.regularized(site, site);
    double norm = site.boundary ? std::pow(eps, -lambda * lambda)
                                : std::pow(eps, -0.5 * lambda * lambda);
    return norm * std::exp(-0.5 * lambda * lambda * c);
  };

  // fixed-insertion factor
  double fixed = 1.0;
  for (size_t a = 0; a < s; ++a) {
    fixed *= diagfac(ins.sites[a], ins.weights[a]);
    for (size_t b = a + 1; b < s; ++b)
      fixed *= pairfac(ins.sites[a], ins.sites[b], ins.weights[a],
                       ins.weights[b]);
  }

  auto screening_fac = [&](const Site& u, double m) {
    double v = diagfac(u, m);
    for (size_t a = 0; a < s; ++a)
      v *= pairfac(ins.sites[a], u, ins.weights[a], m);
    return v;
  };
  auto screening_phase = [&](complex<double> w, double lambda_coef) {
    if (md == nullptr || !md->active) return complex<double>(1.0, 0.0);
    CutPrimitive I(md->form, *md->family, md->base);
    return std::polar(1.0, lambda_coef * 2.0 * M_PI * cfg.params.radius * I(w));
  };

  TermValue out;
  if (p == 0 && q == 0) {
    out.value = fixed;
    return out;
  }
  // singular angles on the boundary circle (boundary insertions)
  std::vector<double> sing_angles;
  std::vector<double> sing_expos;
  for (const auto& b : cfg.charges.boundary) {
    sing_angles.push_back(b.theta);
    sing_expos.push_back(0.5 * b.eta * beta);  // 2 (eta/2)(beta/2)
  }
  // residual of the screening factor after the boundary-insertion powers
  auto screening_smooth = [&](double t, double m) {
    Site y = Site::circle_point(t, 0.0);
    double v = limit_diag_factor(kernel, y, m);
    for (size_t a = 0; a < s; ++a)
      if (!ins.sites[a].boundary)
        v *= limit_pair_factor(ins.sites[a], y, ins.weights[a], m);
    return v;
  };

  if (p == 0 && q == 1) {
    complex<double> acc = 0.0;
    if (limit) {
      CircleRule rule =
          circle_rule_with_powers(sing_angles, sing_expos, 2 * cfg.quad_order);
      for (size_t i = 0; i < rule.nodes.size(); ++i) {
        double t = rule.nodes[i];
        acc += rule.weights[i] * screening_smooth(t, 0.5 * beta) *
               screening_phase(std::polar(1.0, t), 0.5 * beta);
      }
    } else {
      int n = std::max(8 * cfg.quad_order,
                       static_cast<int>(std::ceil(8.0 * M_PI / eps)));
      QuadRule tt = gauss_legendre(n, 0.0, 2.0 * M_PI);
      for (size_t i = 0; i < tt.nodes.size(); ++i) {
        Site y = Site::circle_point(tt.nodes[i], eps);
        acc += tt.weights[i] * screening_fac(y, 0.5 * beta) *
               screening_phase(y.point, 0.5 * beta);
      }
    }
    out.value = fixed * acc;
    return out;
  }
  if (p == 1 && q == 0) {
    if (md != nullptr && md->active)
      throw UnsupportedSurface(
          "deterministic bulk screening with magnetic phases not supported; "
          "use the MC backend");
    // bulk screening over area with |w - z_j|^{alpha_j beta} singularities
    std::vector<complex<double>> centers;
    std::vector<double> mus;
    for (size_t a = 0; a < s; ++a) {
      if (ins.sites[a].boundary) continue;
      centers.push_back(ins.sites[a].point);
      mus.push_back(ins.weights[a] * beta);
    }
    double acc;
    if (limit) {
      auto g = [&](complex<double> w) {
        Site u = Site::bulk(w, 0.0);
        double v = limit_diag_factor(kernel, u, beta);
        for (size_t a = 0; a < s; ++a) {
          // remove the |w - z| factor carried by the partition integrator
          if (!ins.sites[a].boundary) {
            double harm =
                std::abs(1.0 - w * std::conj(ins.sites[a].point));
            v *= std::pow(harm, ins.weights[a] * beta);
          } else {
            v *= limit_pair_factor(ins.sites[a], u, ins.weights[a], beta);
          }
        }
        return v;
      };
      acc = disk_integral_with_singularities(centers, mus, g, cfg.quad_order);
    } else {
      auto g = [&](complex<double> w) {
        double rmax = 1.0 - std::abs(w);
        Site u = Site::bulk(w, std::min(eps, std::max(rmax, 1e-12)));
        double v = screening_fac(u, beta);
        for (size_t a = 0; a < s; ++a)
          if (!ins.sites[a].boundary)
            v /= std::pow(std::abs(w - ins.sites[a].point),
                          ins.weights[a] * beta);
        return v;
      };
      acc = disk_integral_with_singularities(centers, mus, g, cfg.quad_order);
    }
    out.value = fixed * acc;
    return out;
  }
  if (p == 0 && q == 2) {
    complex<double> acc = 0.0;
    if (limit) {
      // nested rules: the inner integral adds the |y1 - y2|^{beta^2/2} power
      CircleRule outer =
          circle_rule_with_powers(sing_angles, sing_expos, cfg.quad_order);
      for (size_t i = 0; i < outer.nodes.size(); ++i) {
        double t1 = outer.nodes[i];
        complex<double> f1 = screening_smooth(t1, 0.5 * beta) *
                             screening_phase(std::polar(1.0, t1), 0.5 * beta);
        std::vector<double> ia = sing_angles;
        std::vector<double> ie = sing_expos;
        ia.push_back(t1);
        ie.push_back(0.5 * beta * beta);
        CircleRule innr = circle_rule_with_powers(ia, ie, cfg.quad_order);
        complex<double> line = 0.0;
        for (size_t j = 0; j < innr.nodes.size(); ++j) {
          double t2 = innr.nodes[j];
          line += innr.weights[j] * screening_smooth(t2, 0.5 * beta) *
                  screening_phase(std::polar(1.0, t2), 0.5 * beta);
        }
        acc += outer.weights[i] * f1 * line;
      }
    } else {
      int n = std::max(6 * cfg.quad_order,
                       static_cast<int>(std::ceil(4.0 * M_PI / eps)));
      QuadRule tt = gauss_legendre(n, 0.0, 2.0 * M_PI);
      std::vector<complex<double>> fs(tt.nodes.size());
      for (size_t i = 0; i < tt.nodes.size(); ++i) {
        Site y = Site::circle_point(tt.nodes[i], eps);
        fs[i] = screening_fac(y, 0.5 * beta) *
                screening_phase(y.point, 0.5 * beta);
      }
      for (size_t i = 0; i < tt.nodes.size(); ++i) {
        for (size_t j = 0; j < tt.nodes.size(); ++j) {
          Site y1 = Site::circle_point(tt.nodes[i], eps);
          Site y2 = Site::circle_point(tt.nodes[j], eps);
          acc += tt.weights[i] * tt.weights[j] * fs[i] * fs[j] *
                 pairfac(y1, y2, 0.5 * beta, 0.5 * beta);
        }
      }
    }
    out.value = fixed * acc;
    return out;
  }
  throw UnsupportedSurface(
      "deterministic_moment: only p+q <= 1 and (0,2) have quadrature backends");
}

// Plain joint-site MC moment: the field is drawn at the insertions plus the
// randomly placed screening charges of each sample.
McEstimate moment_mc_plain(const CorrelatorConfig& cfg, int p, int q,
                           const MagneticDisk* md) {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  InsertionData ins = insertion_data(cfg, cfg.epsilon);
  const double beta = cfg.params.beta;
  const double eps = cfg.epsilon;
  const size_t s = ins.sites.size();
  const size_t dim = s + p + q;

  Eigen::MatrixXd insA = s > 0 ? covariance_matrix(kernel, ins.sites)
                               : Eigen::MatrixXd();
  // rotation invariance: the regularized boundary diagonal is one number
  const double boundary_diag =
      q > 0 ? kernel.regularized(Site::circle_point(0.0, eps),
                                 Site::circle_point(0.0, eps))
            : 0.0;

  struct Acc {
    double sr = 0, si = 0, sr2 = 0, si2 = 0;
    uint64_t n = 0;
  };
  const uint64_t chunk = 4096;
  uint64_t n_chunks = (cfg.n_samples + chunk - 1) / chunk;
  std::vector<Acc> parts(n_chunks);
  parallel_chunks(n_chunks, cfg.threads, [&](int64_t c) {
    uint64_t lo = static_cast<uint64_t>(c) * chunk;
    uint64_t hi = std::min(lo + chunk, cfg.n_samples);
    Acc acc;
    Eigen::MatrixXd cov(dim, dim);
    std::vector<Site> sites(dim);
    std::vector<double> lam(dim);
    for (size_t a = 0; a < s; ++a) {
      sites[a] = ins.sites[a];
      lam[a] = ins.weights[a];
    }
    for (uint64_t idx = lo; idx < hi; ++idx) {
      Rng rng(cfg.seed, idx);
      double measure = 1.0;
      for (int j = 0; j < p; ++j) {
        double r = std::sqrt(rng.uniform());
        sites[s + j] = Site::bulk(std::polar(r, rng.uniform(0.0, 2.0 * M_PI)),
                                  std::min(eps, 1.0 - r));
        lam[s + j] = beta;
        measure *= M_PI;
      }
      for (int j = 0; j < q; ++j) {
        sites[s + p + j] = Site::circle_point(rng.uniform(0.0, 2.0 * M_PI), eps);
        lam[s + p + j] = 0.5 * beta;
        measure *= 2.0 * M_PI;
      }
      if (s > 0) cov.topLeftCorner(s, s) = insA;
      for (size_t a = s; a < dim; ++a)
        for (size_t b = 0; b <= a; ++b) {
          double v = (a == b && sites[a].boundary)
                         ? boundary_diag
                         : kernel.regularized(sites[a], sites[b]);
          cov(a, b) = v;
          cov(b, a) = v;
        }
      Eigen::LLT<Eigen::MatrixXd> llt(cov);
      Eigen::MatrixXd L;
      if (llt.info() == Eigen::Success) {
        L = llt.matrixL();
      } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
        L = es.eigenvectors() *
            es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
      }
      Eigen::VectorXd z(dim);
      for (size_t a = 0; a < dim; ++a) z(a) = rng.gaussian();
      Eigen::VectorXd xi = L * z;
      double phase = 0.0, log_norm = 0.0;
      for (size_t a = 0; a < dim; ++a) {
        phase += lam[a] * xi(a);
        bool bdry = sites[a].boundary;
        log_norm += (bdry ? -lam[a] * lam[a] : -0.5 * lam[a] * lam[a]) *
                    std::log(eps);
      }
      complex<double> t = measure * std::exp(log_norm) *
                          complex<double>(std::cos(phase), std::sin(phase));
      if (md != nullptr && md->active) {
        CutPrimitive I(md->form, *md->family, md->base);
        double extra = 0.0;
        for (size_t a = s; a < dim; ++a)
          extra += lam[a] * 2.0 * M_PI * cfg.params.radius * I(sites[a].point);
        t *= std::polar(1.0, extra);
      }
      acc.sr += t.real();
      acc.si += t.imag();
      acc.sr2 += t.real() * t.real();
      acc.si2 += t.imag() * t.imag();
      ++acc.n;
    }
    parts[c] = acc;
  });
  Acc tot;
  for (const auto& a : parts) {
    tot.sr += a.sr;
    tot.si += a.si;
    tot.sr2 += a.sr2;
    tot.si2 += a.si2;
    tot.n += a.n;
  }
  McEstimate e;
  e.n_samples = tot.n;
  e.seed = cfg.seed;
  e.epsilon = eps;
  double inv = 1.0 / static_cast<double>(tot.n);
  e.value = {tot.sr * inv, tot.si * inv};
  double vr = std::max(0.0, tot.sr2 * inv - e.value.real() * e.value.real());
  double vi = std::max(0.0, tot.si2 * inv - e.value.imag() * e.value.imag());
  e.stderr_ = std::sqrt((vr + vi) * inv);
  return e;
}

// Conditional MC for p + q = 1: the screening integral is reduced to the
// conditional characteristic function on a fixed quadrature grid, the field
// is sampled at the insertion sites only.
McEstimate moment_mc_conditional(const CorrelatorConfig& cfg, int p, int q,
                                 const MagneticDisk* md) {
  CovarianceKernel kernel(KernelKind::neumann_disk);
  InsertionData ins = insertion_data(cfg, cfg.epsilon);
  const double beta = cfg.params.beta;
  const double eps = cfg.epsilon;
  const size_t s = ins.sites.size();
  const double m_coef = p == 1 ? beta : 0.5 * beta;

  FieldSampler sampler(kernel, ins.sites);
  Eigen::MatrixXd A = sampler.covariance();
  Eigen::LLT<Eigen::MatrixXd> Allt(A);

  // screening grid
  struct Node {
    complex<double> point;
    double weight;
    bool boundary;
  };
  std::vector<Node> grid;
  if (q == 1) {
    QuadRule tt = gauss_legendre(512, 0.0, 2.0 * M_PI);
    for (size_t i = 0; i < tt.nodes.size(); ++i)
      grid.push_back({std::polar(1.0, tt.nodes[i]), tt.weights[i], true});
  } else {
    QuadRule rr = gauss_legendre(48, 0.0, 1.0);
    QuadRule tt = gauss_legendre(64, 0.0, 2.0 * M_PI);
    for (size_t i = 0; i < rr.nodes.size(); ++i)
      for (size_t j = 0; j < tt.nodes.size(); ++j)
        grid.push_back({std::polar(rr.nodes[i], tt.nodes[j]),
                        rr.weights[i] * tt.weights[j] * rr.nodes[i], false});
  }
  // conditional coefficients per node
  const size_t g = grid.size();
  Eigen::MatrixXd cmat(s, g);
  std::vector<complex<double>> amp(g);
  for (size_t u = 0; u < g; ++u) {
    Site su = grid[u].boundary
                  ? Site::circle_point(std::arg(grid[u].point), eps)
                  : Site::bulk(grid[u].point,
                               std::min(eps, 1.0 - std::abs(grid[u].point)));
    Eigen::VectorXd b(s);
    for (size_t a = 0; a < s; ++a)
      b(a) = kernel.regularized(ins.sites[a], su);
    Eigen::VectorXd cu = s > 0 ? Allt.solve(b) : Eigen::VectorXd();
    double cvar = kernel.regularized(su, su) - (s > 0 ? b.dot(cu) : 0.0);
    double log_norm = (grid[u].boundary ? -m_coef * m_coef
                                        : -0.5 * m_coef * m_coef) *
                      std::log(eps);
    double a_u = std::exp(log_norm - 0.5 * m_coef * m_coef * cvar);
    complex<double> ph(1.0, 0.0);
    if (md != nullptr && md->active) {
      CutPrimitive I(md->form, *md->family, md->base);
      ph = std::polar(1.0, m_coef * 2.0 * M_PI * cfg.params.radius *
                               I(grid[u].point));
    }
    amp[u] = grid[u].weight * a_u * ph;
    if (s > 0) cmat.col(u) = m_coef * cu;
  }

  struct Acc {
    double sr = 0, si = 0, sr2 = 0, si2 = 0;
    uint64_t n = 0;
  };
  const uint64_t chunk = 1024;
  uint64_t n_chunks = (cfg.n_samples + chunk - 1) / chunk;
  std::vector<Acc> parts(n_chunks);
  double ins_log_norm = 0.0;
  for (size_t a = 0; a < s; ++a)
    ins_log_norm += (ins.sites[a].boundary ? -1.0 : -0.5) * ins.weights[a] *
                    ins.weights[a] * std::log(eps);
  parallel_chunks(n_chunks, cfg.threads, [&](int64_t c) {
    uint64_t lo = static_cast<uint64_t>(c) * chunk;
    uint64_t hi = std::min(lo + chunk, cfg.n_samples);
    Acc acc;
    for (uint64_t idx = lo; idx < hi; ++idx) {
      Eigen::VectorXd xi = sampler.sample(cfg.seed, idx);
      double phase0 = 0.0;
      for (size_t a = 0; a < s; ++a) phase0 += ins.weights[a] * xi(a);
      Eigen::VectorXd mu = cmat.transpose() * xi;  // g entries
      complex<double> phi = 0.0;
      for (size_t u = 0; u < g; ++u)
        phi += amp[u] * complex<double>(std::cos(mu(u)), std::sin(mu(u)));
      complex<double> t = std::exp(ins_log_norm) *
                          complex<double>(std::cos(phase0), std::sin(phase0)) *
                          phi;
      acc.sr += t.real();
      acc.si += t.imag();
      acc.sr2 += t.real() * t.real();
      acc.si2 += t.imag() * t.imag();
      ++acc.n;
    }
    parts[c] = acc;
  });
  Acc tot;
  for (const auto& a : parts) {
    tot.sr += a.sr;
    tot.si += a.si;
    tot.sr2 += a.sr2;
    tot.si2 += a.si2;
    tot.n += a.n;
  }
  McEstimate e;
  e.n_samples = tot.n;
  e.seed = cfg.seed;
  e.epsilon = eps;
  double inv = 1.0 / static_cast<double>(tot.n);
  e.value = {tot.sr * inv, tot.si * inv};
  double vr = std::max(0.0, tot.sr2 * inv - e.value.real() * e.value.real());
  double vi = std::max(0.0, tot.si2 * inv - e.value.imag() * e.value.imag());
  e.stderr_ = std::sqrt((vr + vi) * inv);
  return e;
}

McEstimate moment_mc(const CorrelatorConfig& cfg, int p, int q,
                     const MagneticDisk* md) {
  if (p == 0 && q == 0) return moment_mc_plain(cfg, 0, 0, md);
  if (p + q == 1) return moment_mc_conditional(cfg, p, q, md);
  return moment_mc_plain(cfg, p, q, md);
}

}  // namespace

TermValue coulomb_gas_term(const CorrelatorConfig& config, int p, int q) {
  config.validate();
  auto neutral = neutrality_solutions(config.params, config.charges,
                                      config.surface.euler_char);
  if (neutral.find({p, q}) == neutral.end()) {
    std::ostringstream os;
    os << "coulomb_gas_term: (" << p << "," << q
       << ") violates the neutrality condition";
    throw NeutralityError(os.str());
  }
  MagneticDisk md = magnetic_disk_data(config);
  TermValue t;
  bool quadrature_ok = (p + q <= 1) || (p == 0 && q == 2);
  if (p > 0 && !config.charges.boundary.empty()) quadrature_ok = false;
  if (quadrature_ok && !(md.active && p > 0)) {
    t = deterministic_moment(config, p, q, 0.0, &md);
  } else {
    McEstimate mc = moment_mc(config, p, q, &md);
    t.value = mc.value;
    t.stderr_ = mc.stderr_;
  }
  if (md.active) {
    t.value *= md.norm_weight * md.phase;
    t.stderr_ *= md.norm_weight;
  }
  return t;
}

CorrelatorResult disk_correlator(const CorrelatorConfig& config) {
  config.validate();
  if (config.surface.kind != SurfaceKind::disk)
    throw UnsupportedSurface("disk_correlator: disk surface required");
  CorrelatorResult out;
  out.neutrality_set = neutrality_solutions(config.params, config.charges,
                                            config.surface.euler_char);
  if (out.neutrality_set.empty()) return out;

  MagneticDisk md = magnetic_disk_data(config);
  complex<double> total = 0.0;
  double var = 0.0;
  for (const auto& [p, q] : out.neutrality_set) {
    TermValue term;
    if (config.backend == CorrelatorBackend::coulomb_gas) {
      bool quadrature_ok = (p + q <= 1) || (p == 0 && q == 2);
      if (p > 0 && !config.charges.boundary.empty()) quadrature_ok = false;
      if (quadrature_ok && !(md.active && p > 0)) {
        term = deterministic_moment(config, p, q, 0.0, &md);
      } else {
        McEstimate mc = moment_mc(config, p, q, &md);
        term.value = mc.value;
        term.stderr_ = mc.stderr_;
      }
    } else {
      McEstimate mc = moment_mc(config, p, q, &md);
      term.value = mc.value;
      term.stderr_ = mc.stderr_;
    }
    if (md.active) {
      term.value *= md.norm_weight * md.phase;
      term.stderr_ *= md.norm_weight;
    }
    double sign = ((p + q) % 2 == 0) ? 1.0 : -1.0;
    complex<double> coef = sign * std::pow(config.params.mu, p) *
                           std::pow(config.params.mu_boundary, q) /
                           (std::tgamma(p + 1.0) * std::tgamma(q + 1.0));
    TermValue contrib;
    contrib.value = coef * term.value;
    contrib.stderr_ = std::abs(coef) * term.stderr_;
    out.per_term[{p, q}] = contrib;
    total += contrib.value;
    var += contrib.stderr_ * contrib.stderr_;
  }
  out.value = total;
  out.stderr_ = std::sqrt(var);
  return out;
}

MomentCrosscheck mc_moment_crosscheck(const CorrelatorConfig& config, int p,
                                      int q) {
  config.validate();
  MagneticDisk md = magnetic_disk_data(config);
  MomentCrosscheck out;
  out.mc = moment_mc(config, p, q, &md);
  out.deterministic =
      deterministic_moment(config, p, q, config.epsilon, &md).value;
  out.zscore = out.mc.zscore(out.deterministic);
  return out;
}

double weyl_constant_rho_check(const CorrelatorConfig& config,
                               double rho_const) {
  config.validate();
  const ParamSet& P = config.params;
  const ChargeConfig& C = config.charges;
  auto neutral =
      neutrality_solutions(P, C, config.surface.euler_char);
  const double Q = P.q_charge;
  const double R = P.radius;
  const double cl = P.central_charge();
  double worst = 0.0;
  for (const auto& [p, q] : neutral) {
    // measure factor exp(rho/12) from the hemisphere-normalized curvature
    // background (int K dv = 4 pi at chi = 1), screening and insertion
    // counterterm factors
    double lhs = -(p * P.beta + 0.5 * q * P.beta) * 0.5 * Q * rho_const;
    for (const auto& b : C.bulk)
      lhs -= (0.25 * b.alpha * b.alpha +
              0.25 * b.magnetic * b.magnetic * R * R) *
             rho_const;
    for (const auto& b : C.boundary) lhs -= 0.125 * b.eta * b.eta * rho_const;
    lhs += rho_const / 12.0;

    double rhs = cl / 12.0 * rho_const;
    for (const auto& b : C.bulk) {
      auto w = conformal_weights(P, b.alpha, b.magnetic);
      rhs -= w.delta_bulk * rho_const;
    }
    for (const auto& b : C.boundary) {
      auto w = conformal_weights(P, 0.0, 0, b.eta);
      rhs -= 0.5 * *w.delta_boundary * rho_const;
    }
    rhs += (C.extra_degree / R) * 0.5 * Q * rho_const;
    worst = std::max(worst, std::abs(lhs - rhs));
  }
  return worst;
}

std::complex<double> spin_phase(const ChargeConfig& charges,
                                const ParamSet& params,
                                const std::vector<double>& theta) {
  if (theta.size() != charges.bulk.size())
    throw DomainError("spin_phase: one angle per bulk insertion");
  const double R = params.radius;
  double x = 0.0;
  for (size_t j = 0; j < theta.size(); ++j) {
    double kappa = R * (charges.bulk[j].alpha - params.q_charge);
    double snapped = std::round(kappa);
    double th = theta[j];
    if (std::abs(kappa - snapped) < 1e-9) {
      // (alpha - Q) R is integral for valid configurations, so the phase
      // only sees theta mod 2 pi; reducing first keeps full turns exact
      kappa = snapped;
      th = std::remainder(th, 2.0 * M_PI);
    }
    x += kappa * charges.bulk[j].magnetic * th;
  }
  double n = std::round(x / (2.0 * M_PI));
  double reduced = x - 2.0 * M_PI * n;
  if (reduced == 0.0) return {1.0, 0.0};
  return std::polar(1.0, reduced);
}

std::complex<double> annulus_topological_weight(const CorrelatorConfig& config,
                                                const SeparatingFamily& family,
                                                int k) {
  if (config.surface.kind != SurfaceKind::annulus)
    throw UnsupportedSurface("annulus_topological_weight: annulus required");
  std::vector<int> m;
  std::vector<complex<double>> zs;
  for (const auto& b : config.charges.bulk) {
    m.push_back(b.magnetic);
    zs.push_back(b.position);
  }
  HarmonicForm w(config.surface, m, k);
  const double R = config.params.radius;
  double norm = w.zero() ? 0.0 : regularized_norm(w);
  // base point clear of the family
  complex<double> base = std::polar(std::sqrt(config.surface.inner_radius), 1.234);
  for (int tries = 0; tries < 64; ++tries) {
    bool ok = true;
    for (const auto& c : family.curves())
      for (size_t i = 0; i + 1 < c.points.size(); ++i) {
        complex<double> d = c.points[i + 1] - c.points[i];
        double len2 = std::norm(d);
        double t = len2 > 0 ? std::clamp(
                                  ((base - c.points[i]).real() * d.real() +
                                   (base - c.points[i]).imag() * d.imag()) /
                                      len2,
                                  0.0, 1.0)
                            : 0.0;
        if (std::abs(base - (c.points[i] + t * d)) < 5e-3) ok = false;
      }
    for (const auto& z : zs)
      if (std::abs(base - z) < 5e-3) ok = false;
    if (ok) break;
    base *= std::polar(1.0, 0.177);
  }
  double phase = 0.0;
  if (!w.zero() || k != 0) {
    CutPrimitive I(w, family, base);
    for (const auto& b : config.charges.bulk) {
      phase += b.alpha * 2.0 * M_PI * R *
               primitive_at_insertion(I, b.position, b.tangent_angle,
                                      b.magnetic);
    }
  }
  double kdelta = curvature_term(w, family, base, ConformalFactor::flat(), {},
                                 std::max(96, config.quad_order));
  phase -= config.params.q_charge * R * kdelta;
  return std::exp(-M_PI * R * R * norm) * std::polar(1.0, phase);
}

std::complex<double> annulus_topological_sum(
    const CorrelatorConfig& config, const SeparatingFamily& family,
    std::map<int, std::complex<double>>* terms) {
  if (config.surface.kind != SurfaceKind::annulus)
    throw UnsupportedSurface("annulus_topological_sum: annulus required");
  const double R = config.params.radius;
  const double Q = config.params.q_charge;
  // lattice forms are w_k = w_0 + k * core pole-for-pole; every ingredient
  // of the weight is linear (phases) or quadratic (norm) in k
  std::vector<int> m;
  for (const auto& b : config.charges.bulk) m.push_back(b.magnetic);
  HarmonicForm w0(config.surface, m, 0);
  HarmonicForm core(config.surface,
                    std::vector<int>(config.surface.punctures.size(), 0), 1);
  double c2 = regularized_norm(core);
  double c0 = w0.zero() ? 0.0 : regularized_norm(w0);
  double c1 = w0.zero() ? 0.0 : form_inner_product(w0, core);

  complex<double> base = std::polar(std::sqrt(config.surface.inner_radius), 1.234);
  for (int tries = 0; tries < 64; ++tries) {
    bool ok = true;
    for (const auto& c : family.curves())
      for (size_t i = 0; i + 1 < c.points.size(); ++i) {
        complex<double> d = c.points[i + 1] - c.points[i];
        double len2 = std::norm(d);
        double t = len2 > 0 ? std::clamp(((base - c.points[i]).real() * d.real() +
                                          (base - c.points[i]).imag() * d.imag()) /
                                             len2,
                                         0.0, 1.0)
                            : 0.0;
        if (std::abs(base - (c.points[i] + t * d)) < 5e-3) ok = false;
      }
    for (const auto& z : config.surface.punctures)
      if (std::abs(base - z) < 5e-3) ok = false;
    if (ok) break;
    base *= std::polar(1.0, 0.177);
  }

  int order = std::max(96, config.quad_order);
  double k0_term = curvature_term(w0, family, base, ConformalFactor::flat(), {},
                                  order);
  double kc_term = curvature_term(core, family, base, ConformalFactor::flat(),
                                  {}, order);
  double phase0 = 0.0, phase_c = 0.0;
  if (!config.charges.bulk.empty()) {
    CutPrimitive I0(w0, family, base);
    CutPrimitive Ic(core, family, base);
    for (const auto& b : config.charges.bulk) {
      phase0 += b.alpha * 2.0 * M_PI * R *
                primitive_at_insertion(I0, b.position, b.tangent_angle,
                                       b.magnetic);
      phase_c += b.alpha * 2.0 * M_PI * R *
                 primitive_at_insertion(Ic, b.position, b.tangent_angle, 0);
    }
  }
  phase0 -= Q * R * k0_term;
  phase_c -= Q * R * kc_term;

  int kmax = 1;
  while (std::exp(-M_PI * R * R * (c2 * kmax * kmax - 2.0 * std::abs(c1) * kmax)) >
             1e-16 &&
         kmax < 64)
    ++kmax;
  complex<double> acc = 0.0;
  for (int k = -kmax; k <= kmax; ++k) {
    double norm_k = c0 + 2.0 * k * c1 + double(k) * k * c2;
    complex<double> w = std::exp(-M_PI * R * R * norm_k) *
                        std::polar(1.0, phase0 + k * phase_c);
    if (terms) (*terms)[k] = w;
    acc += w;
  }
  return acc;
}

}  // namespace ciltlab
