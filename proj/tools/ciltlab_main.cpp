// ciltlab: reproducible experiment runner. One JSON report per run; every
// run is fully determined by (subcommand, parameters, seed).

#include <chrono>
#include <complex>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ciltlab/correlator.hpp"
#include "ciltlab/coulomb.hpp"
#include "ciltlab/errors.hpp"
#include "ciltlab/geometry.hpp"
#include "ciltlab/gff.hpp"
#include "ciltlab/gmc.hpp"
#include "ciltlab/parallel.hpp"
#include "ciltlab/params.hpp"
#include "ciltlab/report.hpp"
#include "ciltlab/rng.hpp"
#include "ciltlab/topology.hpp"

namespace {

using ciltlab::Report;
using std::complex;

struct Options {
  std::string subcommand;
  std::map<std::string, std::string> kv;
  uint64_t seed = 1;
  uint64_t n_samples = 100000;
  int threads = 0;
  std::string out_path;
  std::string csv_path;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string str(const std::string& key, const std::string& fallback = "") const {
    auto it = kv.find(key);
    return it == kv.end() ? fallback : it->second;
  }
  double num(const std::string& key, double fallback) const {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
      size_t pos = 0;
      double v = std::stod(it->second, &pos);
      if (pos != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (...) {
      throw ciltlab::DomainError("option --" + key + " expects a number, got '" +
                                 it->second + "'");
    }
  }
  double require_num(const std::string& key) const {
    if (!has(key))
      throw ciltlab::DomainError("missing required option --" + key);
    return num(key, 0.0);
  }
  int integer(const std::string& key, int fallback) const {
    return static_cast<int>(num(key, fallback));
  }
};

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  return out;
}

std::vector<complex<double>> parse_points(const std::string& s) {
  // "x,y;x,y;..."
  std::vector<complex<double>> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ';')) {
    auto xy = parse_list(tok);
    if (xy.size() != 2)
      throw ciltlab::DomainError("point list expects x,y pairs separated by ;");
    out.emplace_back(xy[0], xy[1]);
  }
  return out;
}

complex<double> parse_complex(const std::string& s) {
  auto v = parse_list(s);
  if (v.size() == 1) return {v[0], 0.0};
  if (v.size() == 2) return {v[0], v[1]};
  throw ciltlab::DomainError("complex option expects re or re,im");
}

Options parse_args(int argc, char** argv) {
  Options opt;
  if (argc < 2)
    throw ciltlab::DomainError(
        "usage: ciltlab <subcommand> [--key value ...] [--config path]");
  opt.subcommand = argv[1];
  std::map<std::string, std::string> cli;
  for (int i = 2; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0)
      throw ciltlab::DomainError("unexpected argument '" + arg + "'");
    std::string key = arg.substr(2);
    if (i + 1 >= argc)
      throw ciltlab::DomainError("option --" + key + " expects a value");
    cli[key] = argv[++i];
  }
  if (cli.count("config")) {
    std::ifstream is(cli["config"]);
    if (!is)
      throw ciltlab::DomainError("cannot open config file " + cli["config"]);
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ciltlab::DomainError("config line is not key=value: " + line);
      opt.kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    cli.erase("config");
  }
  for (const auto& [k, v] : cli) opt.kv[k] = v;  // flags win
  if (opt.has("seed")) opt.seed = static_cast<uint64_t>(opt.num("seed", 1));
  if (opt.has("n-samples"))
    opt.n_samples = static_cast<uint64_t>(opt.num("n-samples", 1e5));
  if (opt.has("threads")) opt.threads = opt.integer("threads", 0);
  opt.out_path = opt.str("out");
  opt.csv_path = opt.str("csv");
  return opt;
}

ciltlab::ConformalFactor parse_rho(const std::string& s) {
  using ciltlab::ConformalFactor;
  if (s.empty() || s == "flat") return ConformalFactor::flat();
  if (s == "hemisphere") return ConformalFactor::hemisphere();
  if (s.rfind("const:", 0) == 0)
    return ConformalFactor::constant(std::stod(s.substr(6)));
  if (s.rfind("bump:", 0) == 0) {
    auto v = parse_list(s.substr(5));
    if (v.size() < 2)
      throw ciltlab::DomainError("--rho bump:a,s[,cx,cy]");
    complex<double> c = v.size() >= 4 ? complex<double>(v[2], v[3]) : 0.0;
    return ConformalFactor::gaussian_bump(v[0], v[1], c);
  }
  throw ciltlab::DomainError(
      "option --rho expects flat|hemisphere|const:c|bump:a,s");
}

ciltlab::ParamSet params_from(const Options& opt) {
  return ciltlab::validate_params(
      opt.require_num("beta"), opt.require_num("radius"),
      parse_complex(opt.str("mu", "0")), parse_complex(opt.str("mu-boundary", "0")),
      opt.num("corners", 0) != 0.0);
}

ciltlab::ChargeConfig charges_from(const Options& opt) {
  ciltlab::ChargeConfig charges;
  auto alphas = parse_list(opt.str("alpha", ""));
  auto positions = parse_points(opt.str("positions", ""));
  auto ms = parse_list(opt.str("m", ""));
  auto tangents = parse_list(opt.str("tangents", ""));
  if (positions.size() < alphas.size()) {
    // default ring placements
    for (size_t i = positions.size(); i < alphas.size(); ++i)
      positions.push_back(std::polar(0.3 + 0.12 * i, 0.9 * i));
  }
  for (size_t i = 0; i < alphas.size(); ++i) {
    ciltlab::BulkInsertion b;
    b.alpha = alphas[i];
    b.position = positions[i];
    b.magnetic = i < ms.size() ? static_cast<int>(ms[i]) : 0;
    b.tangent_angle = i < tangents.size() ? tangents[i] : 0.0;
    charges.bulk.push_back(b);
  }
  auto etas = parse_list(opt.str("eta", ""));
  auto eta_angles = parse_list(opt.str("eta-angles", ""));
  for (size_t i = 0; i < etas.size(); ++i) {
    ciltlab::BoundaryInsertion b;
    b.eta = etas[i];
    b.theta = i < eta_angles.size() ? eta_angles[i] : 2.1 * i;
    charges.boundary.push_back(b);
  }
  charges.extra_degree = opt.integer("degree", 0);
  return charges;
}

ciltlab::CorrelatorConfig correlator_config_from(const Options& opt) {
  ciltlab::CorrelatorConfig cfg;
  cfg.params = params_from(opt);
  cfg.charges = charges_from(opt);
  std::string surf = opt.str("surface", "disk");
  if (surf == "disk") {
    cfg.surface = ciltlab::SurfaceSpec::disk();
  } else if (surf == "annulus") {
    std::vector<complex<double>> punctures;
    for (const auto& b : cfg.charges.bulk) punctures.push_back(b.position);
    cfg.surface =
        ciltlab::SurfaceSpec::annulus(opt.require_num("inner-radius"), punctures);
  } else {
    throw ciltlab::DomainError("--surface expects disk|annulus");
  }
  cfg.backend = opt.str("backend", "coulomb-gas") == "monte-carlo"
                    ? ciltlab::CorrelatorBackend::monte_carlo
                    : ciltlab::CorrelatorBackend::coulomb_gas;
  cfg.epsilon = opt.num("eps", 0.01);
  cfg.n_samples = opt.n_samples;
  cfg.seed = opt.seed;
  cfg.threads = opt.threads;
  cfg.quad_order = opt.integer("quad-order", 64);
  return cfg;
}

void echo_common(Report& report, const Options& opt) {
  report.set_integer("seed", static_cast<int64_t>(opt.seed));
  report.set_integer("n_samples", static_cast<int64_t>(opt.n_samples));
  std::ostringstream os;
  for (const auto& [k, v] : opt.kv) {
    // delivery knobs do not define the experiment
    if (k == "out" || k == "csv" || k == "threads") continue;
    os << k << '=' << v << ' ';
  }
  report.set_string("inputs", os.str());
}

void echo_params(Report& report, const ciltlab::ParamSet& p) {
  report.set_number("beta", p.beta);
  report.set_number("q_charge", p.q_charge);
  report.set_number("radius", p.radius);
  report.set_complex("mu", p.mu);
  report.set_complex("mu_boundary", p.mu_boundary);
  report.set_number("central_charge", p.central_charge());
  report.set_bool("rational_regime_warning", p.rational_regime_warning);
}

Report run(const Options& opt, std::vector<ciltlab::CsvRow>& csv) {
  using namespace ciltlab;
  Report report(opt.subcommand);
  echo_common(report, opt);
  const std::string& cmd = opt.subcommand;

  if (cmd == "params") {
    ParamSet p = params_from(opt);
    echo_params(report, p);
    if (opt.has("alpha")) {
      ChargeConfig charges = charges_from(opt);
      validate_charges(p, charges);
      auto sols = neutrality_solutions(p, charges, opt.integer("chi", 1));
      std::vector<double> flat;
      for (auto [pp, qq] : sols) {
        flat.push_back(pp);
        flat.push_back(qq);
      }
      report.set_number_list("neutrality_set_pq", flat);
    }
    report.set_bool("constraints_ok", true);
    return report;
  }

  if (cmd == "gauss-bonnet") {
    std::string surf = opt.str("surface", "disk");
    SurfaceSpec s = surf == "annulus"
                        ? SurfaceSpec::annulus(opt.num("inner-radius", 0.5))
                        : (surf == "half-disk" ? SurfaceSpec::half_disk()
                                               : SurfaceSpec::disk());
    ConformalFactor rho = parse_rho(opt.str("rho", "flat"));
    int order = opt.integer("quad-order", 24);
    double defect = gauss_bonnet_defect(s, rho, order);
    report.set_number("defect", defect);
    report.set_integer("quad_order", order);
    return report;
  }

  if (cmd == "anomaly") {
    double r = opt.num("inner-radius", 0.35);
    auto positions = parse_points(opt.str("punctures", "0.62,0.1;-0.15,-0.66"));
    auto ms_d = parse_list(opt.str("m", "1,-2"));
    std::vector<int> ms(ms_d.begin(), ms_d.end());
    SurfaceSpec surface = SurfaceSpec::annulus(r, positions);
    HarmonicForm form(surface, ms, opt.integer("k", 0));
    std::vector<double> tangents(positions.size());
    for (size_t i = 0; i < positions.size(); ++i)
      tangents[i] = std::arg(positions[i]);
    int trials = opt.integer("trials", 5);
    std::vector<double> values, distances;
    complex<double> base(std::sqrt(r) * std::cos(1.1), std::sqrt(r) * std::sin(1.1));
    for (int t = 0; t < trials; ++t) {
      SeparatingFamily fa =
          random_annulus_family(surface, tangents, opt.seed + 2 * t);
      SeparatingFamily fb =
          random_annulus_family(surface, tangents, opt.seed + 2 * t + 1);
      double a = anomaly(form, fa, fb, base);
      values.push_back(a);
      distances.push_back(std::abs(a / M_PI - std::round(a / M_PI)) * M_PI);
    }
    report.set_number_list("anomalies", values);
    report.set_number_list("distance_to_pi_lattice", distances);
    return report;
  }

  if (cmd == "theta-sum") {
    std::string surf = opt.str("surface", "annulus");
    auto positions = parse_points(opt.str("punctures", ""));
    auto ms_d = parse_list(opt.str("m", ""));
    std::vector<int> ms(ms_d.begin(), ms_d.end());
    SurfaceSpec s = surf == "annulus"
                        ? SurfaceSpec::annulus(opt.require_num("inner-radius"),
                                               positions)
                        : SurfaceSpec::disk(positions);
    double a = opt.require_num("a");
    double v = theta_sum(s, ms, a, parse_rho(opt.str("rho", "flat")));
    report.set_number("theta_sum", v);
    return report;
  }

  if (cmd == "gff-cov") {
    std::string kind = opt.str("kind", "circle");
    BoundaryGff gff(kind == "half-circle" ? KernelKind::half_circle_gff
                                          : KernelKind::circle_gff,
                    opt.integer("n-modes", 2048));
    double ta = opt.num("theta", 0.0);
    double tb = ta + opt.num("lag", M_PI);
    uint64_t n = opt.n_samples;
    // chunked deterministic sample covariance
    const uint64_t chunk = 2048;
    uint64_t n_chunks = (n + chunk - 1) / chunk;
    std::vector<double> s1(n_chunks, 0.0), s2(n_chunks, 0.0);
    parallel_chunks(n_chunks, opt.threads, [&](int64_t c) {
      uint64_t lo = c * chunk, hi = std::min(lo + chunk, n);
      double acc = 0.0, acc2 = 0.0;
      for (uint64_t i = lo; i < hi; ++i) {
        auto modes = gff.draw_modes(opt.seed, i);
        double va = gff.evaluate(modes, ta);
        double vb = gff.evaluate(modes, tb);
        acc += va * vb;
        acc2 += va * vb * va * vb;
      }
      s1[c] = acc;
      s2[c] = acc2;
    });
    double sum = 0.0, sum2 = 0.0;
    for (uint64_t c = 0; c < n_chunks; ++c) {
      sum += s1[c];
      sum2 += s2[c];
    }
    double mean = sum / n;
    double var = std::max(0.0, sum2 / n - mean * mean);
    McEstimate est;
    est.value = mean;
    est.stderr_ = std::sqrt(var / n);
    est.n_samples = n;
    est.seed = opt.seed;
    report.set_estimate("sample_covariance", est);
    report.set_number("truncated_covariance", gff.truncated_covariance(ta, tb));
    report.set_number("limit_covariance", gff.limit_covariance(ta, tb));
    report.set_number("z_score",
                      est.zscore(gff.truncated_covariance(ta, tb)));
    return report;
  }

  if (cmd == "dtn") {
    int nmax = opt.integer("n-max", 8);
    std::vector<double> mode_sum, quadrature, dtn;
    double worst = 0.0;
    for (int n = 1; n <= nmax; ++n) {
      std::vector<double> a(n, 0.0), b(n, 0.0);
      a[n - 1] = 1.0;
      auto ext = harmonic_extension_dtn(0.0, a, b);
      double es = ext.dirichlet_energy_mode_sum();
      double eq = ext.dirichlet_energy_quadrature(std::max(16, n + 8));
      mode_sum.push_back(es);
      quadrature.push_back(eq);
      dtn.push_back(ext.dtn_cos()[n - 1]);
      worst = std::max(worst, std::abs(es - eq));
    }
    report.set_number_list("energy_mode_sum", mode_sum);
    report.set_number_list("energy_quadrature", quadrature);
    report.set_number_list("dtn_leading_coef", dtn);
    report.set_number("max_energy_mismatch", worst);
    return report;
  }

  if (cmd == "gmc-moment") {
    GmcSpec spec = opt.str("region", "bulk") == "boundary"
                       ? GmcSpec::boundary_uniform(opt.require_num("beta"),
                                                   opt.num("eps", 0.05))
                       : GmcSpec::bulk_indicator(opt.require_num("beta"),
                                                 opt.num("eps", 0.05),
                                                 opt.num("radius", 0.5));
    McEstimate est = gmc_estimate(spec, opt.integer("quad-nodes", 24),
                                  opt.n_samples, opt.seed, opt.threads);
    complex<double> oracle = gmc_first_moment_oracle(spec);
    report.set_estimate("mc_first_moment", est);
    report.set_complex("oracle_first_moment", oracle);
    report.set_number("z_score", est.zscore(oracle));
    McEstimate second = gmc_second_moment_mc(spec, opt.n_samples, opt.seed,
                                             opt.threads);
    report.set_estimate("mc_second_moment", second);
    report.set_number("quadrature_second_moment", gmc_second_moment(spec));
    return report;
  }

  if (cmd == "gmc-gap") {
    GmcSpec spec = GmcSpec::bulk_indicator(opt.require_num("beta"), 0.01,
                                           opt.num("radius", 0.5));
    auto eps = parse_list(opt.str("eps-list", "0.02,0.01,0.005"));
    std::vector<double> gaps;
    for (size_t i = 0; i + 1 < eps.size(); ++i)
      gaps.push_back(l2_gap(spec, eps[i], eps[i + 1]));
    report.set_number_list("eps", eps);
    report.set_number_list("l2_gaps", gaps);
    bool decreasing = true;
    for (size_t i = 0; i + 1 < gaps.size(); ++i)
      decreasing &= gaps[i + 1] < gaps[i];
    report.set_bool("strictly_decreasing", decreasing);
    return report;
  }

  if (cmd == "morris") {
    int q = opt.integer("q", 2);
    double beta = opt.require_num("beta");
    double eta = opt.num("eta", 0.0);
    auto mp = MorrisParams::from_theory(q, beta, eta);
    double closed = morris_closed_form(mp);
    McEstimate mc = selberg_mc(q, eta * beta / 2.0, beta * beta / 2.0, 0.0,
                               opt.n_samples, opt.seed, opt.threads);
    report.set_number("closed_form", closed);
    report.set_estimate("mc", mc);
    report.set_number("z_score", mc.zscore(closed));
    if (q <= 2)
      report.set_number("quadrature",
                        selberg_quadrature(q, eta * beta / 2.0,
                                           beta * beta / 2.0));
    report.set_number("fyodorov_bouchaud", fyodorov_bouchaud(q, beta));
    return report;
  }

  if (cmd == "selberg") {
    int q = opt.integer("q", 2);
    double ee = opt.num("eta-exponent", 0.0);
    double pe = opt.num("pair-exponent", 0.5);
    McEstimate mc = selberg_mc(q, ee, pe, opt.num("insertion-angle", 0.0),
                               opt.n_samples, opt.seed, opt.threads);
    report.set_estimate("mc", mc);
    if (q <= 2) report.set_number("quadrature", selberg_quadrature(q, ee, pe));
    return report;
  }

  if (cmd == "mixed-integral") {
    MixedIntegralDiagnostics diag;
    McEstimate mc = mixed_integral_mc(
        opt.integer("p", 1), opt.integer("q", 0), opt.num("alpha", -1.0),
        opt.num("eta", 0.0), opt.require_num("beta"), opt.n_samples, opt.seed,
        opt.threads, &diag);
    report.set_estimate("mc", mc);
    report.set_bool("divergence_warning", diag.divergence_warning);
    report.set_number("integrability_margin", diag.min_margin);
    return report;
  }

  if (cmd == "correlator") {
    CorrelatorConfig cfg = correlator_config_from(opt);
    CorrelatorResult res = disk_correlator(cfg);
    echo_params(report, cfg.params);
    std::vector<double> flat;
    for (auto [pp, qq] : res.neutrality_set) {
      flat.push_back(pp);
      flat.push_back(qq);
    }
    report.set_number_list("neutrality_set_pq", flat);
    report.set_complex("value", res.value);
    report.set_number("stderr", res.stderr_);
    for (const auto& [pq, term] : res.per_term) {
      std::ostringstream id;
      id << "p" << pq.first << "q" << pq.second;
      CsvRow row;
      row.term_id = id.str();
      row.value_re = term.value.real();
      row.value_im = term.value.imag();
      row.stderr_ = term.stderr_;
      row.n_samples = cfg.backend == CorrelatorBackend::monte_carlo ||
                              term.stderr_ > 0.0
                          ? cfg.n_samples
                          : 0;
      csv.push_back(row);
      report.set_complex("term_" + id.str(), term.value);
    }
    return report;
  }

  if (cmd == "weyl-check") {
    CorrelatorConfig cfg = correlator_config_from(opt);
    double rho = opt.num("rho-const", 0.3);
    double resid = weyl_constant_rho_check(cfg, rho);
    echo_params(report, cfg.params);
    report.set_number("rho_const", rho);
    report.set_number("max_residual", resid);
    return report;
  }

  if (cmd == "spin") {
    ParamSet p = params_from(opt);
    ChargeConfig charges = charges_from(opt);
    auto theta = parse_list(opt.str("theta", ""));
    if (theta.empty()) theta.assign(charges.bulk.size(), 2.0 * M_PI);
    complex<double> phase = spin_phase(charges, p, theta);
    report.set_complex("phase", phase);
    report.set_number("abs", std::abs(phase));
    return report;
  }

  if (cmd == "annulus-weight") {
    CorrelatorConfig cfg = correlator_config_from(opt);
    if (cfg.surface.kind != SurfaceKind::annulus)
      throw DomainError("annulus-weight: pass --surface annulus");
    std::vector<double> tangents;
    for (const auto& b : cfg.charges.bulk) tangents.push_back(b.tangent_angle);
    SeparatingFamily family =
        opt.has("family-seed")
            ? random_annulus_family(cfg.surface, tangents,
                                    static_cast<uint64_t>(opt.num("family-seed", 1)))
            : default_family(cfg.surface, tangents.empty() ? nullptr : &tangents);
    std::map<int, complex<double>> terms;
    complex<double> total = annulus_topological_sum(cfg, family, &terms);
    report.set_complex("total", total);
    for (const auto& [k, w] : terms) {
      CsvRow row;
      row.term_id = "k" + std::to_string(k);
      row.value_re = w.real();
      row.value_im = w.imag();
      csv.push_back(row);
    }
    report.set_integer("lattice_terms", static_cast<int64_t>(terms.size()));
    return report;
  }

  throw DomainError("unknown subcommand '" + cmd + "'");
}

}  // namespace

int main(int argc, char** argv) {
  using namespace std::chrono;
  auto t0 = steady_clock::now();
  try {
    Options opt = parse_args(argc, argv);
    std::vector<ciltlab::CsvRow> csv;
    Report report = run(opt, csv);
    if (!opt.out_path.empty()) report.write(opt.out_path);
    if (!opt.csv_path.empty()) ciltlab::write_csv(opt.csv_path, csv);
    double ms = duration_cast<microseconds>(steady_clock::now() - t0).count() / 1000.0;
    std::cout << report.to_string();
    std::cout << "# wall_time_ms " << ms << "\n";
    return 0;
  } catch (const ciltlab::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 2;
  } catch (const ciltlab::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
