// Acceptance suite: runs each release criterion at its stated tolerance and
// prints one pass/fail line per criterion.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ciltlab/correlator.hpp"
#include "ciltlab/coulomb.hpp"
#include "ciltlab/geometry.hpp"
#include "ciltlab/gff.hpp"
#include "ciltlab/gmc.hpp"
#include "ciltlab/parallel.hpp"
#include "ciltlab/params.hpp"
#include "ciltlab/rng.hpp"
#include "ciltlab/topology.hpp"

using namespace ciltlab;
using std::complex;

namespace {

int g_failures = 0;

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void line(int id, const std::string& name, bool pass, const std::string& detail,
          double seconds) {
  std::printf("[%s] %2d %-34s %s (%.1f s)\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str(), seconds);
  if (!pass) ++g_failures;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// 1. Fyodorov-Bouchaud identity: selberg_mc q = 1,2,3 at beta = 1, eta = 0
// within 3 sigma of Gamma(1+q/4)/Gamma(5/4)^q; q = 2 additionally matches a
// 256-node Gauss-Jacobi oracle to 1e-6 relative.
void criterion_1() {
  Timer t;
  bool pass = true;
  std::ostringstream detail;
  for (int q = 1; q <= 3; ++q) {
    McEstimate mc = selberg_mc(q, 0.0, 0.5, 0.0, 1000000, 101 + q);
    double ref = fyodorov_bouchaud(q, 1.0);
    double z = mc.zscore(ref);
    if (q == 1) z = std::abs(mc.value.real() - ref) < 1e-12 ? 0.0 : 1e9;
    pass &= z < 3.0;
    detail << "q" << q << " z=" << fmt(z) << ' ';
  }
  double quad = selberg_quadrature(2, 0.0, 0.5, 256);
  double rel = std::abs(quad - fyodorov_bouchaud(2, 1.0)) /
               fyodorov_bouchaud(2, 1.0);
  pass &= rel < 1e-6;
  detail << "quad rel=" << fmt(rel);
  pass &= t.seconds() < 30.0;
  line(1, "Fyodorov-Bouchaud identity", pass, detail.str(), t.seconds());
}

// 2. Morris identity: q = 2, beta = 1, eta = 2 MC vs Gamma product within
// 3 sigma; closed form vs 2D quadrature to 1e-6.
void criterion_2() {
  Timer t;
  double closed = morris_closed_form(MorrisParams::from_theory(2, 1.0, 2.0));
  McEstimate mc = selberg_mc(2, 1.0, 0.5, 0.0, 1000000, 202);
  double z = mc.zscore(closed);
  double quad = selberg_quadrature(2, 1.0, 0.5, 256);
  double rel = std::abs(quad - closed) / closed;
  bool pass = z < 3.0 && rel < 1e-6 && t.seconds() < 30.0;
  std::ostringstream detail;
  detail << "z=" << fmt(z) << " quad rel=" << fmt(rel);
  line(2, "Morris identity", pass, detail.str(), t.seconds());
}

// 3. GFF covariance: circle, 2^11 modes, 1e5 samples, lag pi within 3 sigma
// of -log 2; half-circle variance within 3 sigma of its truncated sum.
void criterion_3() {
  Timer t;
  const int n_modes = 2048;
  const uint64_t n = 100000;
  BoundaryGff circle(KernelKind::circle_gff, n_modes);
  BoundaryGff half(KernelKind::half_circle_gff, n_modes);

  const double theta = 0.7;
  Eigen::VectorXd coef0 = circle.coefficient_vector(0.0);
  Eigen::VectorXd coefp = circle.coefficient_vector(M_PI);
  Eigen::VectorXd coefh = half.coefficient_vector(theta);
  const uint64_t chunk = 1024;
  uint64_t n_chunks = (n + chunk - 1) / chunk;
  std::vector<double> c1(n_chunks, 0.0), c2(n_chunks, 0.0), h1(n_chunks, 0.0),
      h2(n_chunks, 0.0);
  parallel_chunks(n_chunks, 0, [&](int64_t c) {
    uint64_t lo = c * chunk, hi = std::min(lo + chunk, n);
    double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0;
    for (uint64_t i = lo; i < hi; ++i) {
      auto mc = circle.draw_modes(301, i);
      double v0 = coef0.dot(mc);
      double vp = coefp.dot(mc);
      a1 += v0 * vp;
      a2 += v0 * vp * v0 * vp;
      auto mh = half.draw_modes(302, i);
      double w = coefh.dot(mh);
      b1 += w * w;
      b2 += w * w * w * w;
    }
    c1[c] = a1;
    c2[c] = a2;
    h1[c] = b1;
    h2[c] = b2;
  });
  double sc = 0.0, sc2 = 0.0, sh = 0.0, sh2 = 0.0;
  for (uint64_t c = 0; c < n_chunks; ++c) {
    sc += c1[c];
    sc2 += c2[c];
    sh += h1[c];
    sh2 += h2[c];
  }
  double mean_c = sc / n;
  double se_c = std::sqrt(std::max(0.0, sc2 / n - mean_c * mean_c) / n);
  double z_c = std::abs(mean_c - (-std::log(2.0))) / se_c;

  double mean_h = sh / n;
  double se_h = std::sqrt(std::max(0.0, sh2 / n - mean_h * mean_h) / n);
  double target_h = half.truncated_covariance(theta, theta);
  double z_h = std::abs(mean_h - target_h) / se_h;

  bool pass = z_c < 3.0 && z_h < 3.0 && t.seconds() < 10.0;
  std::ostringstream detail;
  detail << "circle z=" << fmt(z_c) << " half z=" << fmt(z_h);
  line(3, "GFF covariance", pass, detail.str(), t.seconds());
}

// 4. Dirichlet-to-Neumann energy identity: cos n theta, n = 1..8, quadrature
// energy equals n pi to 1e-8.
void criterion_4() {
  Timer t;
  bool pass = true;
  double worst = 0.0;
  for (int n = 1; n <= 8; ++n) {
    std::vector<double> a(n, 0.0), b(n, 0.0);
    a[n - 1] = 1.0;
    auto e = harmonic_extension_dtn(0.0, a, b);
    double err = std::abs(e.dirichlet_energy_quadrature(std::max(16, n + 8)) -
                          n * M_PI);
    worst = std::max(worst, err);
    pass &= err < 1e-8;
  }
  line(4, "Dirichlet-to-Neumann energy", pass, "max err=" + fmt(worst),
       t.seconds());
}

// 5. Imaginary GMC second moment: beta = 1, f = indicator of |z| <= 1/2; MC
// estimate at eps = 0.005 (1e5 samples) vs quadrature within 3 sigma; the
// l2 gap sequence strictly decreases over eps in {0.02, 0.01, 0.005}.
void criterion_5() {
  Timer t;
  GmcSpec spec = GmcSpec::bulk_indicator(1.0, 0.005, 0.5);
  McEstimate mc = gmc_second_moment_mc(spec, 100000, 505);
  double quad = gmc_second_moment(spec, 64);
  double z = mc.zscore(quad);
  double g1 = l2_gap(spec, 0.02, 0.01, 40);
  double g2 = l2_gap(spec, 0.01, 0.005, 40);
  bool pass = z < 3.0 && g2 < g1 && g2 > 0.0 && t.seconds() < 120.0;
  std::ostringstream detail;
  detail << "z=" << fmt(z) << " gaps " << fmt(g1) << " > " << fmt(g2);
  line(5, "imaginary GMC second moment", pass, detail.str(), t.seconds());
}

// 6. Curvature-anomaly quantization: 20 randomized family pairs on the
// annulus with |m_i| <= 2 within 1e-6 of pi Z; the two-puncture reconnection
// move reproduces 2 pi m_1 exactly; base-point and metric rules to 1e-6 on
// 10 random cases.
void criterion_6() {
  Timer t;
  bool pass = true;
  std::ostringstream detail;

  SurfaceSpec ann = SurfaceSpec::annulus(0.35, {{0.62, 0.1}, {-0.15, -0.6}});
  std::vector<double> tangents = {std::arg(complex<double>(0.62, 0.1)),
                                  std::arg(complex<double>(-0.15, -0.6))};
  complex<double> base = std::polar(std::sqrt(0.35), 1.9);
  Rng rng(606);
  double worst_quant = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    int m1 = static_cast<int>(rng.next_u64() % 5) - 2;
    int m2 = static_cast<int>(rng.next_u64() % 5) - 2;
    int k = static_cast<int>(rng.next_u64() % 3) - 1;
    HarmonicForm w(ann, {m1, m2}, k);
    SeparatingFamily fa = random_annulus_family(ann, tangents, 1000 + 2 * trial);
    SeparatingFamily fb = random_annulus_family(ann, tangents, 1001 + 2 * trial);
    double a = anomaly(w, fa, fb, base);
    double dist = std::abs(a / M_PI - std::round(a / M_PI)) * M_PI;
    worst_quant = std::max(worst_quant, dist);
  }
  pass &= worst_quant < 1e-6;
  detail << "quant=" << fmt(worst_quant) << ' ';

  // reconnection move: replace the z1->outer cut by a z1->z2 curve. The new
  // curve shares the tangent side at z2 with the outgoing cut, so both carry
  // short collinear stubs there.
  {
    int m1 = 2;
    HarmonicForm w(ann, {m1, 1}, 0);
    complex<double> z1 = ann.punctures[0], z2 = ann.punctures[1];
    double psi0 = tangents[0], psi1 = tangents[1];
    FamilyCurve d1;  // z1 -> outer
    d1.start = {CurveEndpoint::Kind::puncture, 0};
    d1.end = {CurveEndpoint::Kind::outer_boundary, -1};
    complex<double> w1 = z1 + 0.1 * std::polar(1.0, psi0);
    d1.points = {z1, w1, std::polar(1.0, std::arg(w1))};
    FamilyCurve d2;  // z2 -> outer with a short tangent stub, then a bend
    d2.start = {CurveEndpoint::Kind::puncture, 1};
    d2.end = {CurveEndpoint::Kind::outer_boundary, -1};
    complex<double> stub2 = z2 + 1e-3 * std::polar(1.0, psi1);
    complex<double> bend2 = z2 + 0.12 * std::polar(1.0, psi1 - 0.25);
    d2.points = {z2, stub2, bend2, std::polar(1.0, std::arg(bend2))};
    FamilyCurve d3;  // z2 -> inner
    d3.start = {CurveEndpoint::Kind::puncture, 1};
    d3.end = {CurveEndpoint::Kind::inner_boundary, -1};
    complex<double> w3 = z2 - 0.05 * std::polar(1.0, psi1);
    d3.points = {z2, w3, std::polar(0.35, std::arg(w3))};
    SeparatingFamily before(ann, {d1, d2, d3});

    // the reconnection that picks up the full 2 pi winding around z1: the new
    // curve leaves z1 on the opposite tangent side and wraps z1 once before
    // heading to z2, arriving along d2's tangent side with a short shared stub
    FamilyCurve blue;
    blue.start = {CurveEndpoint::Kind::puncture, 0};
    blue.end = {CurveEndpoint::Kind::puncture, 1};
    std::vector<complex<double>> pts = {z1, z1 - 1e-3 * std::polar(1.0, psi0)};
    for (int i = 1; i <= 7; ++i) {
      double a = psi0 + M_PI - 2.0 * M_PI * i / 8.0;
      pts.push_back(z1 + 0.07 * (1.0 + 0.35 * (8 - i) / 8.0) *
                    std::polar(1.0, a));
    }
    pts.push_back(std::polar(0.55, -0.55));
    pts.push_back(std::polar(0.55, -1.30));
    pts.push_back(z2 + 0.1 * std::polar(1.0, psi1 + M_PI / 2.0));
    pts.push_back(z2 + 5e-4 * std::polar(1.0, psi1));
    pts.push_back(z2);
    blue.points = pts;
    SeparatingFamily after(ann, {blue, d2, d3});

    double move = anomaly(w, before, after, base);
    double err = std::abs(move - 2.0 * M_PI * m1);
    pass &= err < 1e-6;
    detail << "move err=" << fmt(err) << ' ';
  }

  // base-point and metric rules on 10 random cases
  double worst_rule = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    int m1 = static_cast<int>(rng.next_u64() % 5) - 2;
    int m2 = static_cast<int>(rng.next_u64() % 5) - 2;
    HarmonicForm w(ann, {m1, m2}, 1);
    SeparatingFamily f = random_annulus_family(ann, tangents, 3000 + trial);
    complex<double> b2 = std::polar(std::sqrt(0.35), 4.4 + 0.05 * trial);
    // chi(annulus) = 0: base move leaves K unchanged
    double shift = curvature_term(w, f, b2) - curvature_term(w, f, base);
    worst_rule = std::max(worst_rule, std::abs(shift));
    // metric rule against the gradient pairing
    auto rho = ConformalFactor::gaussian_bump(0.3, 0.45, {0.1, 0.05});
    double metric = curvature_term(w, f, base, rho) -
                    curvature_term(w, f, base) - gradient_pairing(w, rho);
    worst_rule = std::max(worst_rule, std::abs(metric));
  }
  pass &= worst_rule < 1e-6;
  detail << "rules=" << fmt(worst_rule);
  pass &= t.seconds() < 60.0;
  line(6, "curvature anomaly quantization", pass, detail.str(), t.seconds());
}

// 7. Neutrality / Seiberg behavior.
void criterion_7() {
  Timer t;
  ParamSet p = validate_params(1.0, 4.0, {0.0, 0.0}, {1.0, 0.0}, false);
  ChargeConfig two;
  two.bulk.push_back({{0.3, 0.0}, -1.0, 0, 0.0});
  two.bulk.push_back({{-0.4, 0.0}, -1.0, 0, 0.0});
  auto sols = neutrality_solutions(p, two, 1);
  bool pass = sols.size() == 1 && sols.count({0, 1}) == 1;

  CorrelatorConfig cfg;
  cfg.params = p;
  cfg.charges.bulk.push_back({{0.0, 0.0}, 0.0, 0, 0.0});
  CorrelatorResult res = disk_correlator(cfg);
  pass &= res.neutrality_set.empty();
  pass &= res.value == complex<double>(0.0, 0.0);
  line(7, "neutrality / Seiberg bound", pass,
       pass ? "{(0,1)} and empty-set zero" : "mismatch", t.seconds());
}

// 8. Girsanov crosscheck at (0,0), (0,1), (1,0) on the (-1,-1) disk
// configuration, 3 sigma at eps = 0.01 with 1e5 samples.
void criterion_8() {
  Timer t;
  CorrelatorConfig cfg;
  cfg.params = validate_params(1.0, 4.0, {0.0, 0.0}, {1.0, 0.0}, false);
  cfg.charges.bulk.push_back({{0.3, 0.0}, -1.0, 0, 0.0});
  cfg.charges.bulk.push_back({{-0.4, 0.0}, -1.0, 0, 0.0});
  cfg.epsilon = 0.01;
  cfg.n_samples = 100000;
  cfg.seed = 808;
  cfg.quad_order = 48;
  bool pass = true;
  std::ostringstream detail;
  for (auto [p, q] :
       std::vector<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}}) {
    MomentCrosscheck cc = mc_moment_crosscheck(cfg, p, q);
    pass &= cc.zscore < 3.0;
    detail << '(' << p << ',' << q << ") z=" << fmt(cc.zscore) << ' ';
  }
  pass &= t.seconds() < 180.0;
  line(8, "Girsanov crosscheck", pass, detail.str(), t.seconds());
}

// 9. Constant-rho Weyl identity on 20 random neutral configurations.
void criterion_9() {
  Timer t;
  Rng rng(909);
  double worst = 0.0;
  int built = 0;
  for (int trial = 0; built < 20 && trial < 200; ++trial) {
    CorrelatorConfig cfg;
    cfg.params = validate_params(1.0, 4.0, {0.0, 0.0}, {1.0, 0.0}, false);
    int n_bulk = 1 + static_cast<int>(rng.next_u64() % 3);
    double alpha_pool[] = {-1.0, -0.75, -1.25, -0.5};
    for (int j = 0; j < n_bulk; ++j) {
      BulkInsertion b;
      b.alpha = alpha_pool[rng.next_u64() % 4];
      b.position = std::polar(0.15 + 0.18 * j, rng.uniform(0.0, 6.28));
      b.magnetic = static_cast<int>(rng.next_u64() % 3) - 1;
      cfg.charges.bulk.push_back(b);
    }
    if (rng.uniform() < 0.5) cfg.charges.boundary.push_back({1.3, -0.5});
    cfg.charges.extra_degree = static_cast<int>(rng.next_u64() % 3);
    auto sols = neutrality_solutions(cfg.params, cfg.charges, 1);
    if (sols.empty()) continue;
    double rho = rng.uniform(-1.0, 1.0);
    worst = std::max(worst, weyl_constant_rho_check(cfg, rho));
    ++built;
  }
  bool pass = built == 20 && worst < 1e-10;
  line(9, "constant-rho Weyl identity", pass,
       "residual=" + fmt(worst) + " configs=" + std::to_string(built),
       t.seconds());
}

// 10. Spin phase: theta = 2 pi exact unit on 50 random configs; linear slope
// R (alpha - Q) m to 1e-12.
void criterion_10() {
  Timer t;
  Rng rng(1010);
  bool pass = true;
  double worst_slope = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    ParamSet p = validate_params(1.0, 4.0, {0.0, 0.0}, {0.0, 0.0}, false);
    ChargeConfig charges;
    int nb = 1 + static_cast<int>(rng.next_u64() % 3);
    for (int j = 0; j < nb; ++j) {
      BulkInsertion b;
      b.alpha = -1.0 + 0.25 * static_cast<int>(rng.next_u64() % 3);
      b.position = std::polar(0.1 + 0.2 * j, rng.uniform(0.0, 6.28));
      b.magnetic = static_cast<int>(rng.next_u64() % 5) - 2;
      charges.bulk.push_back(b);
    }
    std::vector<double> theta(charges.bulk.size(), 2.0 * M_PI);
    complex<double> v = spin_phase(charges, p, theta);
    pass &= (v == complex<double>(1.0, 0.0));

    // slope of the phase in theta_j
    for (size_t j = 0; j < charges.bulk.size(); ++j) {
      if (charges.bulk[j].magnetic == 0) continue;
      std::vector<double> th(charges.bulk.size(), 0.0);
      double h = 1e-3;
      th[j] = h;
      double slope = std::arg(spin_phase(charges, p, th)) / h;
      double expect =
          p.radius * (charges.bulk[j].alpha - p.q_charge) * charges.bulk[j].magnetic;
      // reduce modulo 2 pi / h ambiguity: h small enough that none occurs
      worst_slope = std::max(worst_slope, std::abs(slope - expect));
    }
  }
  pass &= worst_slope < 1e-12;
  line(10, "spin phase", pass, "slope err=" + fmt(worst_slope), t.seconds());
}

// 11. Theta-sum convergence and family independence of the annulus weights.
void criterion_11() {
  Timer t;
  bool pass = true;
  std::ostringstream detail;
  double r = std::exp(-1.0);
  double direct = 0.0;
  for (int k = -12; k <= 12; ++k) direct += std::exp(-2.0 * k * k);
  double ts = theta_sum(SurfaceSpec::annulus(r), {}, M_PI * 4.0);
  pass &= std::abs(ts - direct) < 1e-10;
  detail << "theta err=" << fmt(std::abs(ts - direct)) << ' ';

  // family independence with charges under QR in 2Z (beta = 1, R = 4)
  CorrelatorConfig cfg;
  cfg.params = validate_params(1.0, 4.0, {0.0, 0.0}, {0.0, 0.0}, false);
  std::vector<complex<double>> zs = {{0.62, 0.1}, {-0.15, -0.6}};
  cfg.surface = SurfaceSpec::annulus(0.35, zs);
  cfg.charges.bulk.push_back({zs[0], -1.0, 1, std::arg(zs[0])});
  cfg.charges.bulk.push_back({zs[1], 1.0, -1, std::arg(zs[1])});
  std::vector<double> tangents = {std::arg(zs[0]), std::arg(zs[1])};
  std::vector<complex<double>> sums;
  for (uint64_t fs = 0; fs < 5; ++fs) {
    SeparatingFamily fam = random_annulus_family(cfg.surface, tangents, 40 + fs);
    sums.push_back(annulus_topological_sum(cfg, fam));
  }
  double worst = 0.0;
  for (size_t i = 1; i < sums.size(); ++i)
    worst = std::max(worst, std::abs(sums[i] - sums[0]) / std::abs(sums[0]));
  pass &= worst < 1e-8;
  detail << "family spread(rel)=" << fmt(worst);
  line(11, "theta sum / family independence", pass, detail.str(), t.seconds());
}

// 12. Reproducibility: identical reports for the same seed across thread
// counts, byte for byte.
void criterion_12() {
  Timer t;
  std::string bin = CILTLAB_BIN;
  auto run = [&](const std::string& args, const std::string& out) {
    std::string cmd = bin + " " + args + " --out " + out + " > /dev/null";
    return std::system(cmd.c_str()) == 0;
  };
  bool pass = true;
  pass &= run("morris --q 3 --beta 1 --eta 0 --n-samples 200000 --seed 5 "
              "--threads 1",
              "/tmp/ciltlab_rep_a.json");
  pass &= run("morris --q 3 --beta 1 --eta 0 --n-samples 200000 --seed 5 "
              "--threads 4",
              "/tmp/ciltlab_rep_b.json");
  auto slurp = [](const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
  };
  std::string a = slurp("/tmp/ciltlab_rep_a.json");
  std::string b = slurp("/tmp/ciltlab_rep_b.json");
  pass &= !a.empty() && a == b;

  pass &= run("gmc-moment --beta 1 --eps 0.1 --region bulk --n-samples 2000 "
              "--quad-nodes 10 --seed 9 --threads 1",
              "/tmp/ciltlab_rep_c.json");
  pass &= run("gmc-moment --beta 1 --eps 0.1 --region bulk --n-samples 2000 "
              "--quad-nodes 10 --seed 9 --threads 3",
              "/tmp/ciltlab_rep_d.json");
  pass &= slurp("/tmp/ciltlab_rep_c.json") == slurp("/tmp/ciltlab_rep_d.json");
  line(12, "byte-identical reports", pass, pass ? "2 subcommands" : "diff",
       t.seconds());
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  criterion_10();
  criterion_11();
  criterion_12();
  if (g_failures > 0) {
    std::printf("%d criterion(s) failed\n", g_failures);
    return 1;
  }
  std::printf("all acceptance criteria passed\n");
  return 0;
}
