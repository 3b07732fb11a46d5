#include "commands.h"

#include "ofbs/oracle.h"
#include "ofbs/rng.h"
#include "ofbs/sheet.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace ofbs::cli {
namespace {

// seed streams of the verify command
constexpr std::uint64_t kTagFddApprox = 1;
constexpr std::uint64_t kTagFddOracle = 2;
constexpr std::uint64_t kTagLindeberg = 3;
constexpr std::uint64_t kTagQv = 4;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& file, bool binary = false) {
  std::ofstream os(file, binary ? std::ios::binary | std::ios::out : std::ios::out);
  if (!os) throw ConfigError("cannot write '" + file.string() + "'");
  return os;
}

void finish(std::ofstream& os, const std::filesystem::path& file) {
  os.flush();
  if (!os) throw ConfigError("error writing '" + file.string() + "'");
}

SimConfig prepare(const Options& opt) {
  SimConfig cfg = load_config(opt.config);
  if (opt.seed) cfg.seed = *opt.seed;
  if (opt.jobs < 1) throw ConfigError("--jobs must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(opt.out, ec);
  if (!std::filesystem::is_directory(opt.out))
    throw ConfigError("cannot create output directory '" + opt.out.string() + "'");
  return cfg;
}

std::string brief(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double outside(double x, double lo, double hi) { return std::max({0.0, lo - x, x - hi}); }

}  // namespace

std::optional<std::filesystem::path> cache_dir_from_env() {
  const char* v = std::getenv("OFBS_CACHE_DIR");
  if (v == nullptr || *v == '\0') return std::nullopt;
  return std::filesystem::path(v);
}

ConvergenceReport verify_report(const SimConfig& cfg, int jobs, const std::optional<std::filesystem::path>& cache_dir) {
  const KernelSpec spec = cfg.kernel_spec();
  const OperatorExponent& e = spec.exponent;
  const int d = spec.dim();
  ConvergenceReport rep;
  rep.seed = cfg.seed;
  rep.replicates = cfg.fdd_replicates > 0 ? cfg.fdd_replicates : cfg.replicates;
  rep.quad_order = cfg.quad_order;
  rep.config_hash = cfg.hash();

  // covariance ladder
  if (!cfg.points.empty()) {
    const CovarianceTensor ref = quadrature_covariance(cfg.points, spec);
    for (int n : cfg.n_list) {
      const XnSimulator sim(spec, n, cfg.points, cache_dir);
      rep.add(n, "cov_error", cov_error(sim, ref), cfg.tol.cov_error);
    }
  }

  // self-similarity
  if (!cfg.points.empty())
    for (double c : cfg.c_list) {
      rep.add(0, "selfsim_residual_c=" + brief(c), selfsim_residual(c, cfg.points, spec), cfg.tol.selfsim);
      rep.notes.push_back("selfsim c=" + brief(c) + ": residual against c^D alone = " +
                          brief(selfsim_residual(c, cfg.points, spec, SelfSimExponent::literal)));
    }

  // increment scaling: distance of each slope from [lambda_D + 1/2, Lambda_D + 1/2]
  {
    const HolderFit fit = holder_slope(spec, cfg.holder_sides);
    const double lo = e.lambda_D() + 0.5, hi = e.Lambda_D() + 0.5;
    for (int k = 0; k < d; ++k) {
      rep.add(0, "holder_slope_t_" + std::to_string(k + 1), outside(fit.slope_t[k], lo, hi), cfg.tol.holder);
      rep.add(0, "holder_slope_s_" + std::to_string(k + 1), outside(fit.slope_s[k], lo, hi), cfg.tol.holder);
      rep.notes.push_back("holder component " + std::to_string(k + 1) + ": slope " + brief(fit.slope_t[k]));
    }
    rep.add(0, "holder_slope_trace", outside(fit.trace_slope_t, lo, hi), cfg.tol.holder);
    rep.notes.push_back("holder trace slope " + brief(fit.trace_slope_t) + ", target interval [" + brief(lo) + ", " +
                        brief(hi) + "]");
  }

  // Lindeberg: the sum must vanish from the analytic threshold on
  {
    const int n0 = lindeberg_threshold(cfg.fdd, e, 1.0, cfg.epsilon);
    std::set<int> ns = {n0, n0 + 1, n0 + 2};
    for (int n : cfg.n_list)
      if (n >= n0) ns.insert(n);
    for (int n : ns) {
      std::vector<MDArray> arrays;
      for (std::uint64_t r = 0; r < 4; ++r)
        arrays.push_back(generate(cfg.generator, n, d, derive_seed(derive_seed(cfg.seed, kTagLindeberg), r)));
      rep.add(n, "lindeberg_sum", lindeberg_sum(spec, cfg.fdd, arrays, cfg.epsilon), 0.0);
    }
    rep.notes.push_back("lindeberg: C = " + brief(lindeberg_constant(cfg.fdd, e)) + ", threshold n0 = " +
                        std::to_string(n0) + " at epsilon = " + brief(cfg.epsilon));
  }

  // quadratic variation
  if (real_diagonalizable(e.D())) {
    for (int k = 1; k <= d; ++k) {
      const auto rows = qv_convergence(cfg.n_list, cfg.qv_k, cfg.qv_l, k, k, spec, cfg.generator,
                                       derive_seed(cfg.seed, kTagQv));
      for (const QVRow& r : rows)
        rep.add(r.n, "qv_gap_" + std::to_string(k), r.gap, cfg.tol.qv_factor * r.limit_error_bound);
      rep.notes.push_back("qv component " + std::to_string(k) + ": limit " + brief(rows.back().limit) +
                          ", discrete at n=" + std::to_string(rows.back().n) + " " + brief(rows.back().discrete));
    }
  } else {
    rep.notes.push_back("qv: skipped, exponent is not real-diagonalizable (covered by the cov_error rows)");
  }

  // Cramer-Wold projection against the oracle
  {
    const std::int64_t reps = rep.replicates;
    const XnSimulator sim(spec, cfg.fdd_n, cfg.fdd.points, cache_dir);
    const Ensemble approx = simulate_ensemble(sim, cfg.generator, reps, derive_seed(cfg.seed, kTagFddApprox), jobs);
    std::vector<Point> inner;
    for (const Point& p : cfg.fdd.points)
      if (p.t > 0.0 && p.s > 0.0 && std::find(inner.begin(), inner.end(), p) == inner.end()) inner.push_back(p);
    const OracleModel model = build_oracle(inner, spec);
    const Ensemble oracle = sample_oracle(model, cfg.fdd.points, derive_seed(cfg.seed, kTagFddOracle), reps, jobs);
    FDDTestSpec on_model = cfg.fdd;
    // the oracle model only knows the off-axis points; axis points contribute nothing
    on_model.points.clear();
    on_model.a.clear();
    for (std::size_t k = 0; k < cfg.fdd.points.size(); ++k)
      if (cfg.fdd.points[k].t > 0.0 && cfg.fdd.points[k].s > 0.0) {
        on_model.points.push_back(cfg.fdd.points[k]);
        on_model.a.push_back(cfg.fdd.a[k]);
      }
    if (on_model.points.empty()) throw DegenerateError("fdd: every test point lies on an axis");
    const CramerWoldResult cw = cramer_wold_test(on_model, approx, oracle, model);
    rep.add(cfg.fdd_n, "ks_distance", cw.ks.distance, ks_critical_distance(cfg.ks_level, reps, reps));
    rep.add(cfg.fdd_n, "projected_variance_error", std::abs(cw.sample_variance - cw.parametric_variance),
            cfg.tol.mc_sigmas * std::sqrt(2.0 / double(reps)) * cw.parametric_variance);
    rep.notes.push_back("cramer-wold: KS p-value " + brief(cw.ks.p_value) + " (level " + brief(cfg.ks_level) +
                        "), sample variance " + brief(cw.sample_variance) + ", exact " + brief(cw.parametric_variance));
  }
  return rep;
}

int cmd_simulate(const Options& opt, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  const SimConfig cfg = prepare(opt);
  const KernelSpec spec = cfg.kernel_spec();
  const XnSimulator sim(spec, cfg.n, grid_points(cfg.grid_m), cache_dir_from_env());
  const Ensemble ens = simulate_ensemble(sim, cfg.generator, cfg.replicates, cfg.seed, opt.jobs);

  const auto bin_path = opt.out / "ensemble.bin";
  auto bin = open_out(bin_path, true);
  write_ensemble_binary(bin, ens, cfg.grid_m);
  finish(bin, bin_path);

  const auto sum_path = opt.out / "summary.csv";
  auto sum = open_out(sum_path);
  sum << "t,s,component,mean,variance\n";
  for (std::size_t p = 0; p < ens.points.size(); ++p)
    for (int k = 0; k < ens.d; ++k) {
      double mean = 0.0;
      for (std::int64_t r = 0; r < ens.replicates; ++r) mean += ens.value(r, p, k);
      mean /= double(ens.replicates);
      double ss = 0.0;
      for (std::int64_t r = 0; r < ens.replicates; ++r) {
        const double x = ens.value(r, p, k) - mean;
        ss += x * x;
      }
      sum << num(ens.points[p].t) << ',' << num(ens.points[p].s) << ',' << k + 1 << ',' << num(mean) << ','
          << num(ss / double(ens.replicates - 1)) << '\n';
    }
  finish(sum, sum_path);

  const auto hash_path = opt.out / "config.hash";
  auto hash = open_out(hash_path);
  hash << cfg.hash() << '\n';
  finish(hash, hash_path);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const auto log_path = opt.out / "run.log";
  auto runlog = open_out(log_path);
  const std::time_t now = std::time(nullptr);
  runlog << "command simulate\nstarted " << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << "\nconfig "
         << opt.config.string() << "\nconfig_hash " << cfg.hash() << "\nseed " << cfg.seed << "\njobs " << opt.jobs
         << "\nelapsed_s " << secs << '\n';
  finish(runlog, log_path);

  if (!opt.quiet)
    log << "simulate: " << ens.replicates << " replicates of X_" << cfg.n << " on a " << cfg.grid_m + 1 << "x"
        << cfg.grid_m + 1 << " grid written to " << opt.out.string() << " (config hash " << cfg.hash() << ")\n";
  return kExitPass;
}

int cmd_verify(const Options& opt, std::ostream& log, std::ostream& err) {
  const SimConfig cfg = prepare(opt);
  const ConvergenceReport rep = verify_report(cfg, opt.jobs, cache_dir_from_env());

  const auto csv_path = opt.out / "report.csv";
  auto csv = open_out(csv_path);
  rep.write_csv(csv);
  finish(csv, csv_path);
  const auto txt_path = opt.out / "report.txt";
  auto txt = open_out(txt_path);
  rep.write_text(txt);
  finish(txt, txt_path);

  if (!opt.quiet) rep.write_text(log);
  if (rep.all_pass()) return kExitPass;
  err << "verify: " << rep.failures().size() << " failing row(s):\n";
  for (const ReportRow& r : rep.failures())
    err << "  n=" << r.n << ' ' << r.metric << " value " << num(r.value) << " > tolerance " << num(r.tolerance) << '\n';
  return kExitMetricFailure;
}

int cmd_cov(const Options& opt, std::ostream& log) {
  const SimConfig cfg = prepare(opt);
  const KernelSpec spec = cfg.kernel_spec();
  std::vector<double> coords;
  for (const Point& p : cfg.points) {
    coords.push_back(p.t);
    coords.push_back(p.s);
  }
  const CovarianceEngine engine(spec, coords);
  const auto path = opt.out / "cov.csv";
  auto os = open_out(path);
  os << "k,l,t1,s1,t2,s2,row,col,value,error_bound\n";
  const int d = spec.dim();
  for (std::size_t k = 0; k < cfg.points.size(); ++k)
    for (std::size_t l = k; l < cfg.points.size(); ++l) {
      const Point a = cfg.points[k], b = cfg.points[l];
      CovBlock blk;
      try {
        blk = engine.block(a.t, a.s, b.t, b.s);
      } catch (const NumericError&) {
        blk = cov_integral(a.t, a.s, b.t, b.s, spec);  // escalates the order, rethrows if still short
      }
      for (int r = 0; r < d; ++r)
        for (int c = 0; c < d; ++c)
          os << k + 1 << ',' << l + 1 << ',' << num(a.t) << ',' << num(a.s) << ',' << num(b.t) << ',' << num(b.s)
             << ',' << r + 1 << ',' << c + 1 << ',' << num(blk.value(r, c)) << ',' << num(blk.error_bound) << '\n';
    }
  finish(os, path);
  if (!opt.quiet)
    log << "cov: " << cfg.points.size() << " points, blocks written to " << path.string() << '\n';
  return kExitPass;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Operator fractional Brownian sheet: simulation and verification", "ofbs"};
  app.require_subcommand(1);
  Options opt;
  std::uint64_t seed = 0;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config, "Configuration file")->required();
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", seed, "Override the configured seed");
    sub->add_flag("--quiet", opt.quiet, "Suppress progress output");
  };
  CLI::App* sim = app.add_subcommand("simulate", "Simulate an ensemble of X_n on the grid");
  CLI::App* ver = app.add_subcommand("verify", "Run the verification suite and write a report");
  CLI::App* cov = app.add_subcommand("cov", "Write limit covariance blocks for the configured points");
  for (CLI::App* sub : {sim, ver, cov}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitConfig;
  }
  CLI::App* chosen = app.get_subcommands().front();
  if (chosen->count("--seed") > 0) opt.seed = seed;

  try {
    if (chosen == sim) return cmd_simulate(opt, out);
    if (chosen == ver) return cmd_verify(opt, out, err);
    return cmd_cov(opt, out);
  } catch (const NumericError& e) {
    err << "ofbs: numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const ConfigError& e) {
    err << "ofbs: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    err << "ofbs: invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PreconditionError& e) {
    err << "ofbs: invalid input: " << e.what() << '\n';
    return kExitConfig;
  } catch (const UnsupportedError& e) {
    err << "ofbs: unsupported: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DegenerateError& e) {
    err << "ofbs: degenerate test: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "ofbs: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "ofbs: error: " << e.what() << '\n';
    return kExitNumeric;
  }
}

}  // namespace ofbs::cli
