#pragma once

#include "ofbs/core.h"
#include "ofbs/kernel.h"
#include "ofbs/mdgen.h"
#include "ofbs/oracle.h"
#include "ofbs/sheet.h"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ofbs {

/// Projection sum_k a_k <b, X(t_k, s_k)> used by the Cramer-Wold checks.
struct FDDTestSpec {
  std::vector<Point> points;
  std::vector<double> a;
  Vec b;

  /// Throws PreconditionError on size mismatch or when every a_k b vanishes.
  void validate(int d) const;
};

struct ReportRow {
  int n = 0;  ///< 0 when the metric is not tied to an approximation index
  std::string metric;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ConvergenceReport {
  std::vector<ReportRow> rows;
  std::uint64_t seed = 0;
  std::int64_t replicates = 0;
  int quad_order = 0;
  std::string config_hash;
  /// Free-form lines printed under the table in the text report.
  std::vector<std::string> notes;

  /// Appends a row with pass = (value <= tolerance); NaN never passes.
  void add(int n, const std::string& metric, double value, double tolerance);
  bool all_pass() const;
  std::vector<ReportRow> failures() const;

  /// `# key=value` metadata lines, then `n,metric,value,tolerance,pass`.
  void write_csv(std::ostream& os) const;
  void write_text(std::ostream& os) const;
};

/// max over point pairs of |E_n - C|_F / |C|_F, E_n the exact-sum covariance of X_n and C
/// the quadrature covariance (pairs with C = 0 contribute |E_n|_F).
double cov_error(const XnSimulator& sim, const CovarianceTensor& reference);
double cov_error(int n, const std::vector<Point>& points, const KernelSpec& spec);

struct KSResult {
  double distance = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value
/// Q_KS((sqrt(N) + 0.12 + 0.11 / sqrt(N)) D), N = n m / (n + m).
KSResult ks_two_sample(std::vector<double> x, std::vector<double> y);
/// Q_KS(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_survival(double lambda);
/// Smallest D with asymptotic p-value <= level for sample sizes n, m.
double ks_critical_distance(double level, std::int64_t n, std::int64_t m);

/// Projected sample of each replicate. Every fdd point must be one of ens.points.
std::vector<double> project(const Ensemble& ens, const FDDTestSpec& fdd);
/// b^T (sum_{k,l} a_k a_l C(p_k, p_l)) b for a covariance over exactly fdd.points.
double projected_variance(const CovarianceTensor& cov, const FDDTestSpec& fdd);

struct CramerWoldResult {
  KSResult ks;
  double parametric_variance = 0.0;  ///< exact limit variance of the projection
  double sample_variance = 0.0;      ///< of the approximation ensemble
  double variance_band = 0.0;        ///< 4 sqrt(2/R) parametric_variance
};

/// KS distance/p-value between the projections of `approx` and `oracle`, plus the
/// parametric variance check against the oracle model. DegenerateError when the exact
/// projected variance is zero.
CramerWoldResult cramer_wold_test(const FDDTestSpec& fdd, const Ensemble& approx, const Ensemble& oracle,
                                  const OracleModel& model);

/// delta_n = int_0^{1/n} (1 - u)^{lambda_D - 1/2} du (the delta -> 0 limit).
double lindeberg_delta(int n, double lambda_D);
/// sup_{0 < x <= 1} |x^A| (exactly 1 for d = 1, numerical maximum otherwise).
double kernel_norm_bound(const OperatorExponent& e);
/// C with |Y_ij| <= C n delta_n max|xi|:  C = kappa^2 sum_k |a_k| |b|_2 (lambda_D + 1/2).
double lindeberg_constant(const FDDTestSpec& fdd, const OperatorExponent& e);
/// First n with C c_bound delta_n < epsilon; beyond it every indicator vanishes.
int lindeberg_threshold(const FDDTestSpec& fdd, const OperatorExponent& e, double c_bound, double epsilon);

/// (1/#arrays) sum_arrays sum_{i,j,m} Y_ijm^2 1{|Y_ijm| > epsilon} with the staircase summands
/// Y_ijm = sum_k a_k [b^T M_ij(floor(n t_k)/n, floor(n s_k)/n)]_m xi_ijm.
double lindeberg_sum(const KernelSpec& spec, const FDDTestSpec& fdd, const std::vector<MDArray>& arrays,
                     double epsilon);

struct QVRow {
  int n = 0;
  double discrete = 0.0;
  double limit = 0.0;
  double gap = 0.0;
  double limit_error_bound = 0.0;
};

/// True when D = V diag(real) V^{-1} with a well-conditioned real V.
bool real_diagonalizable(const Mat& d_matrix);

/// Discrete sum sum_{i,j} [W_i(t_k)]_qm [W_i(t_l)]_qm [W_j(s_k)]_mq [W_j(s_l)]_mq xi_ijq^2
/// (staircase cell averages) against its limit
/// int [P(t_k-u)]_qm [P(t_l-u)]_qm du * int [P(s_k-v)]_mq [P(s_l-v)]_mq dv.
/// q, m are 1-based. UnsupportedError unless D is real-diagonalizable.
std::vector<QVRow> qv_convergence(const std::vector<int>& n_list, Point pk, Point pl, int q, int m,
                                  const KernelSpec& spec, Generator g, std::uint64_t seed);

struct HolderFit {
  std::vector<double> sides;
  /// slope[k]: per-component slope over rectangles [0,h] x [0,fixed].
  std::vector<double> slope_t;
  /// Same over [0,fixed] x [0,h].
  std::vector<double> slope_s;
  /// Slope of the trace (sum of component second moments), t direction.
  double trace_slope_t = 0.0;
  double trace_slope_s = 0.0;
};

/// Least-squares log-log slopes of increment second moments (from cov_integral) against the
/// side length. Sides must lie in (0, 1/2], at least 4 of them.
HolderFit holder_slope(const KernelSpec& spec, const std::vector<double>& sides, double fixed = 1.0);

/// Scaling matrix S(c) in X(c t, c s) = S(c) X(t, s). Both axes stretch by c, so the sheet
/// noise contributes c (not c^{1/2}) and the kernel contributes c^{2A}: S(c) = c^{D + I/2}.
/// `literal` gives c^D alone, which only matches when c = 1.
enum class SelfSimExponent { sheet, literal };
Mat selfsim_scaling(const OperatorExponent& e, double c, SelfSimExponent which = SelfSimExponent::sheet);

/// max over pairs of |C(c p_k, c p_l) - S C(p_k, p_l) S^T|_F / |S C S^T|_F, S = selfsim_scaling(c).
double selfsim_residual(double c, const std::vector<Point>& points, const KernelSpec& spec,
                        SelfSimExponent which = SelfSimExponent::sheet);

}  // namespace ofbs
