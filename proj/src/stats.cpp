#include "ofbs/stats.h"

#include "ofbs/rng.h"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

namespace ofbs {
namespace {

std::size_t find_point(const std::vector<Point>& pts, Point p, const char* who) {
  for (std::size_t k = 0; k < pts.size(); ++k)
    if (std::abs(pts[k].t - p.t) <= 1e-12 && std::abs(pts[k].s - p.s) <= 1e-12) return k;
  throw PreconditionError(std::string(who) + ": point (" + std::to_string(p.t) + ", " + std::to_string(p.s) +
                          ") not present");
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  return sxy / sxx;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

void FDDTestSpec::validate(int d) const {
  if (points.empty()) throw PreconditionError("FDDTestSpec: no points");
  if (a.size() != points.size()) throw PreconditionError("FDDTestSpec: need one weight a_k per point");
  if (b.size() != d) throw PreconditionError("FDDTestSpec: b must have d entries");
  const bool a_zero = std::all_of(a.begin(), a.end(), [](double x) { return x == 0.0; });
  if (a_zero || b.isZero(0.0)) throw PreconditionError("FDDTestSpec: degenerate projection (all a_k b vanish)");
}

// ---------------------------------------------------------------------------------------

void ConvergenceReport::add(int n, const std::string& metric, double value, double tolerance) {
  rows.push_back({n, metric, value, tolerance, value <= tolerance});
}

bool ConvergenceReport::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReportRow& r) { return r.pass; });
}

std::vector<ReportRow> ConvergenceReport::failures() const {
  std::vector<ReportRow> out;
  for (const ReportRow& r : rows)
    if (!r.pass) out.push_back(r);
  return out;
}

void ConvergenceReport::write_csv(std::ostream& os) const {
  os << "# config_hash=" << config_hash << "\n# seed=" << seed << "\n# replicates=" << replicates
     << "\n# quad_order=" << quad_order << "\n";
  os << "n,metric,value,tolerance,pass\n" << std::setprecision(17);
  for (const ReportRow& r : rows)
    os << r.n << ',' << r.metric << ',' << r.value << ',' << r.tolerance << ',' << (r.pass ? "true" : "false") << '\n';
}

void ConvergenceReport::write_text(std::ostream& os) const {
  os << "config hash " << config_hash << ", seed " << seed << ", replicates " << replicates << ", quad order "
     << quad_order << "\n\n";
  std::size_t width = 6;
  for (const ReportRow& r : rows) width = std::max(width, r.metric.size());
  os << std::left << std::setw(6) << "n" << std::setw(int(width) + 2) << "metric" << std::setw(18) << "value"
     << std::setw(18) << "tolerance" << "result\n";
  for (const ReportRow& r : rows)
    os << std::left << std::setw(6) << (r.n > 0 ? std::to_string(r.n) : "-") << std::setw(int(width) + 2) << r.metric
       << std::setw(18) << fmt(r.value) << std::setw(18) << fmt(r.tolerance) << (r.pass ? "pass" : "FAIL") << '\n';
  const std::size_t failed = failures().size();
  os << '\n' << rows.size() - failed << " of " << rows.size() << " rows pass\n";
  if (!notes.empty()) os << '\n';
  for (const std::string& line : notes) os << line << '\n';
}

// ---------------------------------------------------------------------------------------

double cov_error(const XnSimulator& sim, const CovarianceTensor& reference) {
  const auto& pts = sim.points();
  if (reference.points.size() != pts.size() || reference.d != sim.dim())
    throw PreconditionError("cov_error: reference covariance does not match the simulator points");
  double worst = 0.0;
  for (std::size_t k = 0; k < pts.size(); ++k)
    for (std::size_t l = k; l < pts.size(); ++l) {
      const Mat c = reference.block(k, l);
      const Mat e = sim.exact_covariance(k, l);
      const double cn = c.norm();
      const double err = cn > 0.0 ? (e - c).norm() / cn : e.norm();
      worst = std::max(worst, err);
    }
  return worst;
}

double cov_error(int n, const std::vector<Point>& points, const KernelSpec& spec) {
  XnSimulator sim(spec, n, points);
  return cov_error(sim, quadrature_covariance(points, spec));
}

// ---------------------------------------------------------------------------------------

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // theta-function form of the CDF, fast for small lambda
    const double pi = std::numbers::pi;
    const double y = -pi * pi / (8.0 * lambda * lambda);
    double cdf = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double term = std::exp(double((2 * k - 1) * (2 * k - 1)) * y);
      cdf += term;
      if (term < 1e-17 * cdf) break;
    }
    cdf *= std::sqrt(2.0 * pi) / lambda;
    return std::clamp(1.0 - cdf, 0.0, 1.0);
  }
  double q = 0.0, sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += sign * term;
    sign = -sign;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * q, 0.0, 1.0);
}

KSResult ks_two_sample(std::vector<double> x, std::vector<double> y) {
  if (x.empty() || y.empty()) throw PreconditionError("ks_two_sample: empty sample");
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = double(x.size()), ny = double(y.size());
  std::size_t i = 0, j = 0;
  double dmax = 0.0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    dmax = std::max(dmax, std::abs(double(i) / nx - double(j) / ny));
  }
  const double ne = nx * ny / (nx + ny);
  const double sq = std::sqrt(ne);
  return {dmax, kolmogorov_survival((sq + 0.12 + 0.11 / sq) * dmax)};
}

double ks_critical_distance(double level, std::int64_t n, std::int64_t m) {
  if (!(level > 0.0 && level < 1.0)) throw PreconditionError("ks_critical_distance: level must lie in (0, 1)");
  double lo = 0.0, hi = 10.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (kolmogorov_survival(mid) > level)
      lo = mid;
    else
      hi = mid;
  }
  const double ne = double(n) * double(m) / double(n + m);
  const double sq = std::sqrt(ne);
  return hi / (sq + 0.12 + 0.11 / sq);
}

std::vector<double> project(const Ensemble& ens, const FDDTestSpec& fdd) {
  fdd.validate(ens.d);
  std::vector<std::size_t> idx;
  for (const Point& p : fdd.points) idx.push_back(find_point(ens.points, p, "project"));
  std::vector<double> out(std::size_t(ens.replicates));
  for (std::int64_t r = 0; r < ens.replicates; ++r) {
    double acc = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      double inner = 0.0;
      for (int c = 0; c < ens.d; ++c) inner += fdd.b(c) * ens.value(r, idx[k], c);
      acc += fdd.a[k] * inner;
    }
    out[std::size_t(r)] = acc;
  }
  return out;
}

double projected_variance(const CovarianceTensor& cov, const FDDTestSpec& fdd) {
  fdd.validate(cov.d);
  std::vector<std::size_t> idx;
  for (const Point& p : fdd.points) idx.push_back(find_point(cov.points, p, "projected_variance"));
  Mat sum = Mat::Zero(cov.d, cov.d);
  for (std::size_t k = 0; k < idx.size(); ++k)
    for (std::size_t l = 0; l < idx.size(); ++l) sum += fdd.a[k] * fdd.a[l] * cov.block(idx[k], idx[l]);
  return fdd.b.dot(sum * fdd.b);
}

CramerWoldResult cramer_wold_test(const FDDTestSpec& fdd, const Ensemble& approx, const Ensemble& oracle,
                                  const OracleModel& model) {
  if (approx.replicates < 2 || oracle.replicates < 2)
    throw PreconditionError("cramer_wold_test: ensembles need at least 2 replicates");
  CovarianceTensor cov;
  cov.points = model.points;
  cov.d = model.d;
  cov.matrix = model.sigma;
  CramerWoldResult res;
  res.parametric_variance = projected_variance(cov, fdd);
  if (!(res.parametric_variance > 0.0)) throw DegenerateError("cramer_wold_test: projection has zero variance");
  const std::vector<double> x = project(approx, fdd);
  const std::vector<double> y = project(oracle, fdd);
  res.ks = ks_two_sample(x, y);
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  res.sample_variance = ss / double(x.size() - 1);
  res.variance_band = 4.0 * std::sqrt(2.0 / double(approx.replicates)) * res.parametric_variance;
  return res;
}

// ---------------------------------------------------------------------------------------

double lindeberg_delta(int n, double lambda_D) {
  if (n < 1) throw PreconditionError("lindeberg_delta: n must be >= 1");
  const double p = lambda_D + 0.5;
  // 1 - (1 - 1/n)^p without cancellation
  return -std::expm1(p * std::log1p(-1.0 / n)) / p;
}

double kernel_norm_bound(const OperatorExponent& e) {
  if (e.dim() == 1) return 1.0;
  const Mat& a = e.A();
  auto norm_at = [&](double lx) { return operator_norm(mat_power(std::exp(lx), a)); };
  // coarse scan in ln x over [-60, 0], then golden-section refinement around the best node
  constexpr int steps = 1200;
  const double lo = -60.0;
  int best = steps;
  double best_val = norm_at(0.0);
  for (int k = 0; k < steps; ++k) {
    const double v = norm_at(lo * (1.0 - double(k) / steps));
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best == steps) return best_val;
  const double h = -lo / steps;
  double a0 = lo * (1.0 - double(best) / steps) - h, b0 = std::min(0.0, a0 + 2.0 * h);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 80; ++it) {
    const double x1 = b0 - g * (b0 - a0), x2 = a0 + g * (b0 - a0);
    if (norm_at(x1) < norm_at(x2))
      a0 = x1;
    else
      b0 = x2;
  }
  return std::max(best_val, norm_at(0.5 * (a0 + b0)));
}

double lindeberg_constant(const FDDTestSpec& fdd, const OperatorExponent& e) {
  fdd.validate(e.dim());
  const double kappa = kernel_norm_bound(e);
  double asum = 0.0;
  for (double a : fdd.a) asum += std::abs(a);
  return kappa * kappa * asum * fdd.b.norm() * (e.lambda_D() + 0.5);
}

int lindeberg_threshold(const FDDTestSpec& fdd, const OperatorExponent& e, double c_bound, double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("lindeberg_threshold: epsilon must be > 0");
  const double c = lindeberg_constant(fdd, e) * c_bound;
  // delta_n decreases in n, so bisection on the first crossing is exact
  constexpr int n_max = 1 << 30;
  if (!(c * lindeberg_delta(n_max, e.lambda_D()) < epsilon))
    throw NumericError("lindeberg_threshold: bound does not cross epsilon below n = 2^30");
  int lo = 0, hi = n_max;  // bound(lo) >= eps (or lo = 0), bound(hi) < eps
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (c * lindeberg_delta(mid, e.lambda_D()) < epsilon)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

double lindeberg_sum(const KernelSpec& spec, const FDDTestSpec& fdd, const std::vector<MDArray>& arrays,
                     double epsilon) {
  if (!(epsilon > 0.0)) throw PreconditionError("lindeberg_sum: epsilon must be > 0");
  if (arrays.empty()) throw PreconditionError("lindeberg_sum: no arrays");
  const int d = spec.dim();
  fdd.validate(d);
  const int n = arrays.front().n();
  for (const MDArray& arr : arrays)
    if (arr.n() != n || arr.dim() != d) throw PreconditionError("lindeberg_sum: array shape mismatch");

  const KernelSpec stair(spec.exponent, spec.quad_order, true);
  const std::size_t q = fdd.points.size();
  std::vector<double> coords;
  for (const Point& p : fdd.points) {
    coords.push_back(p.t);
    coords.push_back(p.s);
  }
  const AxisCellTable table(n, coords, stair);

  // u[k][i] = b^T W_i(t_k) (zero past the summation range)
  std::vector<std::vector<Vec>> u(q, std::vector<Vec>(n, Vec::Zero(d)));
  for (std::size_t k = 0; k < q; ++k)
    for (int i = 1; i <= table.count(2 * k); ++i) u[k][i - 1] = (fdd.b.transpose() * table.matrix(2 * k, i)).transpose();

  // coefficient c_ij[m] of xi_ijm in Y
  std::vector<double> coef(std::size_t(n) * n * d, 0.0);
  for (std::size_t k = 0; k < q; ++k) {
    const int rows = table.count(2 * k), cols = table.count(2 * k + 1);
    for (int j = 1; j <= cols; ++j) {
      const Mat ws = table.matrix(2 * k + 1, j);
      for (int i = 1; i <= rows; ++i) {
        const Vec row = (u[k][i - 1].transpose() * ws).transpose();
        double* c = &coef[(std::size_t(i - 1) * n + (j - 1)) * d];
        for (int m = 0; m < d; ++m) c[m] += fdd.a[k] * row(m);
      }
    }
  }

  double total = 0.0;
  for (const MDArray& arr : arrays) {
    double s = 0.0;
    for (int i = 1; i <= n; ++i)
      for (int j = 1; j <= n; ++j) {
        const double* c = &coef[(std::size_t(i - 1) * n + (j - 1)) * d];
        for (int m = 0; m < d; ++m) {
          const double y = c[m] * arr.xi(i, j, m + 1);
          if (std::abs(y) > epsilon) s += y * y;
        }
      }
    total += s;
  }
  return total / double(arrays.size());
}

// ---------------------------------------------------------------------------------------

bool real_diagonalizable(const Mat& d_matrix) {
  const Eigen::MatrixXd dm = d_matrix;
  Eigen::EigenSolver<Eigen::MatrixXd> es(dm);
  if (es.info() != Eigen::Success) return false;
  const double scale = std::max(1.0, dm.cwiseAbs().maxCoeff());
  if ((es.eigenvalues().imag().array().abs() > 1e-12 * scale).any()) return false;
  const Eigen::MatrixXd v = es.eigenvectors().real();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v);
  const auto sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  return smin > 0.0 && sv(0) / smin < 1e8;
}

std::vector<QVRow> qv_convergence(const std::vector<int>& n_list, Point pk, Point pl, int q, int m,
                                  const KernelSpec& spec, Generator g, std::uint64_t seed) {
  const int d = spec.dim();
  if (q < 1 || q > d || m < 1 || m > d) throw PreconditionError("qv_convergence: component index out of range");
  if (!real_diagonalizable(spec.exponent.D()))
    throw UnsupportedError("qv_convergence: the entrywise product form needs a real-diagonalizable exponent D");

  const double coords[4] = {pk.t, pl.t, pk.s, pl.s};
  const CovarianceEngine engine(spec, coords);
  const ScalarEstimate ut = engine.entry_product(pk.t, pl.t, q - 1, m - 1);
  const ScalarEstimate us = engine.entry_product(pk.s, pl.s, m - 1, q - 1);
  const double limit = ut.value * us.value;
  const double limit_err = std::abs(ut.value) * us.error_bound + std::abs(us.value) * ut.error_bound +
                           ut.error_bound * us.error_bound;

  const KernelSpec stair(spec.exponent, spec.quad_order, true);
  const int eq = (q - 1) * d + (m - 1);  // entry (q, m)
  const int em = (m - 1) * d + (q - 1);  // entry (m, q)
  std::vector<QVRow> rows;
  for (int n : n_list) {
    const AxisCellTable table(n, coords, stair);
    const MDArray arr = generate(g, n, d, derive_seed(seed, std::uint64_t(n)));
    const int ni = std::min(table.count(0), table.count(1));
    const int nj = std::min(table.count(2), table.count(3));
    double sum = 0.0;
    for (int i = 1; i <= ni; ++i) {
      const double fi = table.cell(0, i)[eq] * table.cell(1, i)[eq];
      for (int j = 1; j <= nj; ++j) {
        const double fj = table.cell(2, j)[em] * table.cell(3, j)[em];
        const double x = arr.xi(i, j, q);
        sum += fi * fj * x * x;
      }
    }
    rows.push_back({n, sum, limit, std::abs(sum - limit), limit_err});
  }
  return rows;
}

// ---------------------------------------------------------------------------------------

HolderFit holder_slope(const KernelSpec& spec, const std::vector<double>& sides, double fixed) {
  if (sides.size() < 4) throw PreconditionError("holder_slope: need at least 4 sides");
  for (double h : sides)
    if (!(h > 0.0 && h <= 0.5)) throw PreconditionError("holder_slope: sides must lie in (0, 1/2]");
  if (!(fixed > 0.0)) throw PreconditionError("holder_slope: fixed side must be > 0");
  const int d = spec.dim();
  std::vector<double> coords(sides);
  coords.push_back(fixed);
  const CovarianceEngine engine(spec, coords);

  HolderFit fit;
  fit.sides = sides;
  std::vector<double> lx;
  for (double h : sides) lx.push_back(std::log(h));
  auto slopes = [&](bool along_t, std::vector<double>& per, double& trace) {
    std::vector<std::vector<double>> ly(d);
    std::vector<double> lt;
    for (double h : sides) {
      // increment over [0,h] x [0,fixed] (or its transpose) is X at the far corner
      const Mat c = along_t ? engine.block(h, fixed, h, fixed).value : engine.block(fixed, h, fixed, h).value;
      for (int k = 0; k < d; ++k) ly[k].push_back(std::log(c(k, k)));
      lt.push_back(std::log(c.trace()));
    }
    per.clear();
    for (int k = 0; k < d; ++k) per.push_back(ls_slope(lx, ly[k]));
    trace = ls_slope(lx, lt);
  };
  slopes(true, fit.slope_t, fit.trace_slope_t);
  slopes(false, fit.slope_s, fit.trace_slope_s);
  return fit;
}

Mat selfsim_scaling(const OperatorExponent& e, double c, SelfSimExponent which) {
  const Mat cd = e.scaling(c);
  return which == SelfSimExponent::sheet ? Mat(std::sqrt(c) * cd) : cd;
}

double selfsim_residual(double c, const std::vector<Point>& points, const KernelSpec& spec, SelfSimExponent which) {
  if (!(c > 0.0) || !std::isfinite(c)) throw PreconditionError("selfsim_residual: c must be > 0");
  std::vector<double> coords;
  for (const Point& p : points) {
    coords.push_back(p.t);
    coords.push_back(p.s);
    coords.push_back(c * p.t);
    coords.push_back(c * p.s);
  }
  const CovarianceEngine engine(spec, coords);
  const Mat cd = selfsim_scaling(spec.exponent, c, which);
  double worst = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k)
    for (std::size_t l = k; l < points.size(); ++l) {
      const Point a = points[k], b = points[l];
      const Mat lhs = engine.block(c * a.t, c * a.s, c * b.t, c * b.s).value;
      const Mat rhs = cd * engine.block(a.t, a.s, b.t, b.s).value * cd.transpose();
      const double rn = rhs.norm();
      const double err = rn > 0.0 ? (lhs - rhs).norm() / rn : lhs.norm();
      worst = std::max(worst, err);
    }
  return worst;
}

}  // namespace ofbs
