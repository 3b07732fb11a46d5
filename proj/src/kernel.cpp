#include "ofbs/kernel.h"

#include "ofbs/binio.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace ofbs {
namespace {

constexpr double kEps = std::numeric_limits<double>::epsilon();

// out += w * a * b^T for row-major d x d blocks
inline void add_abt(double* out, double w, const double* a, const double* b, int d) {
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += a[r * d + k] * b[c * d + k];
      out[r * d + c] += w * acc;
    }
}

// out = a * g
inline void mul(double* out, const double* a, const double* g, int d) {
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += a[r * d + k] * g[k * d + c];
      out[r * d + c] = acc;
    }
}

void store(std::vector<double>& dst, const Mat& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) dst.push_back(m(r, c));
}

Mat from_flat(const double* p, int d) {
  Mat m(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) m(r, c) = p[r * d + c];
  return m;
}

// n * int_{lo}^{hi} y^A dy with 0 <= lo < hi; graded toward lo when the cell touches the
// singular edge y = 0 (lo < cell width).
Mat cell_average_over(double lo, double hi, int n, const KernelSpec& spec, bool graded) {
  QuadNodes q;
  if (graded)
    append_graded(q, lo, hi, spec.quad_order, graded_depth(spec.exponent.lambda_A()), false);
  else
    append_gauss(q, lo, hi, spec.quad_order);
  const int d = spec.dim();
  Mat acc = Mat::Zero(d, d);
  for (std::size_t k = 0; k < q.size(); ++k) acc += q.w[k] * spec.power(q.x[k]);
  return double(n) * acc;
}

bool on_lattice(int n, double t) {
  const double nt = n * t;
  const double k = std::round(nt);
  return std::abs(nt - k) <= 1e-9 * std::max(1.0, nt);
}

}  // namespace

KernelSpec::KernelSpec(OperatorExponent e, int order, bool stair)
    : exponent(std::move(e)), quad_order(order), staircase(stair) {
  if (order < 2 || order > 64) throw PreconditionError("KernelSpec: quad_order must lie in [2, 64]");
}

Mat KernelSpec::power(double x) const {
  if (!(x > 0.0)) return Mat::Zero(dim(), dim());
  return mat_power(x, exponent.A());
}

Mat kernel_eval(double t, double s, double u, double v, const KernelSpec& spec) {
  if (u >= t || v >= s) return Mat::Zero(spec.dim(), spec.dim());
  return spec.power(t - u) * spec.power(s - v);
}

int lattice_floor(int n, double t) {
  if (!(t > 0.0)) return 0;
  const double nt = n * t;
  if (on_lattice(n, t)) return static_cast<int>(std::llround(nt));
  return static_cast<int>(std::floor(nt));
}

Mat axis_cell_average(int n, int i, double t, const KernelSpec& spec) {
  if (n < 1 || i < 1 || i > n)
    throw PreconditionError("axis_cell_average: cell index must lie in 1..n");
  const int d = spec.dim();
  const int k = lattice_floor(n, t);
  if (i > k) return Mat::Zero(d, d);
  if (spec.staircase || on_lattice(n, t)) {
    const int r = k - i;
    return cell_average_over(double(r) / n, double(r + 1) / n, n, spec, r == 0);
  }
  const double lo = t - double(i) / n;
  const double hi = t - double(i - 1) / n;
  return cell_average_over(std::max(lo, 0.0), hi, n, spec, i == k);
}

Mat cell_integral(int n, int i, int j, double t, double s, const KernelSpec& spec) {
  if (n < 1 || i < 1 || i > n || j < 1 || j > n)
    throw PreconditionError("cell_integral: cell indices must lie in 1..n");
  return axis_cell_average(n, i, t, spec) * axis_cell_average(n, j, s, spec);
}

std::vector<Mat> shift_cell_table(int n, const KernelSpec& spec) {
  if (n < 1) throw PreconditionError("shift_cell_table: n must be >= 1");
  std::vector<Mat> table;
  table.reserve(n);
  for (int r = 0; r < n; ++r)
    table.push_back(cell_average_over(double(r) / n, double(r + 1) / n, n, spec, r == 0));
  return table;
}

// ---------------------------------------------------------------------------------------

AxisCellTable::AxisCellTable(int n, std::span<const double> coords, const KernelSpec& spec,
                             const std::optional<std::filesystem::path>& cache_dir)
    : n_(n), d_(spec.dim()), coords_(coords.begin(), coords.end()) {
  if (n < 1) throw PreconditionError("AxisCellTable: n must be >= 1");
  const std::size_t block = std::size_t(d_) * d_;

  bool need_shift = false;
  for (double x : coords_) need_shift |= lattice_floor(n, x) > 0 && (spec.staircase || on_lattice(n, x));

  std::vector<Mat> shift;
  if (need_shift) {
    std::optional<std::vector<Mat>> cached;
    std::filesystem::path file;
    if (cache_dir) {
      file = cell_cache_path(*cache_dir, spec, n);
      cached = read_cell_cache(file, spec, n);
    }
    if (cached) {
      shift = std::move(*cached);
    } else {
      shift = shift_cell_table(n, spec);
      if (cache_dir) write_cell_cache(file, spec, n, shift);
    }
  }

  for (double x : coords_) {
    const int k = lattice_floor(n, x);
    counts_.push_back(k);
    offsets_.push_back(data_.size());
    data_.reserve(data_.size() + k * block);
    if (k == 0) continue;
    if (spec.staircase || on_lattice(n, x)) {
      for (int i = 1; i <= k; ++i) store(data_, shift[k - i]);
    } else {
      for (int i = 1; i <= k; ++i) store(data_, axis_cell_average(n, i, x, spec));
    }
  }
}

Mat AxisCellTable::matrix(std::size_t c, int i) const {
  if (i < 1 || i > count(c)) throw PreconditionError("AxisCellTable: cell index out of range");
  return from_flat(cell(c, i), d_);
}

// ---------------------------------------------------------------------------------------

CovarianceEngine::CovarianceEngine(KernelSpec spec, std::span<const double> coords)
    : spec_(std::move(spec)) {
  std::vector<double> xs(coords.begin(), coords.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = a; b < xs.size(); ++b)
      tables_.emplace(std::make_pair(xs[a], xs[b]), build_pair(xs[a], xs[b]));
}

CovarianceEngine::PairTable CovarianceEngine::build_pair(double x, double x2) const {
  PairTable table;
  const double hi = std::min(x, x2);
  if (!(hi > 0.0)) return table;
  const int depth = graded_depth(spec_.exponent.lambda_A());
  auto fill = [&](Nodes& nodes, int order) {
    QuadNodes q;
    append_graded(q, 0.0, hi, order, depth, true);
    nodes.w = q.w;
    for (double u : q.x) {
      store(nodes.pa, spec_.power(x - u));
      store(nodes.pb, spec_.power(x2 - u));
    }
  };
  fill(table.low, spec_.quad_order);
  fill(table.high, 2 * spec_.quad_order);
  return table;
}

std::pair<const CovarianceEngine::PairTable*, bool> CovarianceEngine::lookup(
    double x, double x2, std::optional<PairTable>& scratch) const {
  const bool swapped = x > x2;
  const auto key = swapped ? std::make_pair(x2, x) : std::make_pair(x, x2);
  if (auto it = tables_.find(key); it != tables_.end()) return {&it->second, swapped};
  scratch = build_pair(key.first, key.second);
  return {&*scratch, swapped};
}

CovBlock CovarianceEngine::block(double t, double s, double t2, double s2) const {
  const int d = spec_.dim();
  const int bs = d * d;
  CovBlock out{Mat::Zero(d, d), 0.0};
  if (!(std::min(t, t2) > 0.0) || !(std::min(s, s2) > 0.0)) return out;

  std::optional<PairTable> scratch_t, scratch_s;
  const auto [tt, t_swapped] = lookup(t, t2, scratch_t);
  const auto [st, s_swapped] = lookup(s, s2, scratch_s);

  auto evaluate = [&](const Nodes& tn, const Nodes& sn) {
    // G = sum_v w P(s - v) P(s2 - v)^T
    double g[kMaxDim * kMaxDim] = {};
    const std::vector<double>& sa = s_swapped ? sn.pb : sn.pa;
    const std::vector<double>& sb = s_swapped ? sn.pa : sn.pb;
    for (std::size_t k = 0; k < sn.w.size(); ++k) add_abt(g, sn.w[k], &sa[k * bs], &sb[k * bs], d);

    const std::vector<double>& ta = t_swapped ? tn.pb : tn.pa;
    const std::vector<double>& tb = t_swapped ? tn.pa : tn.pb;
    double acc[kMaxDim * kMaxDim] = {};
    double tmp[kMaxDim * kMaxDim];
    for (std::size_t k = 0; k < tn.w.size(); ++k) {
      mul(tmp, &ta[k * bs], g, d);
      add_abt(acc, tn.w[k], tmp, &tb[k * bs], d);
    }
    return from_flat(acc, d);
  };

  const Mat low = evaluate(tt->low, st->low);
  const Mat high = evaluate(tt->high, st->high);
  const double scale = low.cwiseAbs().maxCoeff();
  out.value = low;
  out.error_bound = 2.0 * (low - high).cwiseAbs().maxCoeff() + 16.0 * kEps * scale;
  if (out.error_bound > kRelTol * scale) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "cov_integral: quadrature not converged at order "
        << spec_.quad_order << " for (" << t << ", " << s << "), (" << t2 << ", " << s2
        << "): estimate max|C| = " << scale << ", error bound = " << out.error_bound;
    throw NumericError(msg.str(), scale, out.error_bound);
  }
  return out;
}

ScalarEstimate CovarianceEngine::entry_product(double x, double x2, int row, int col) const {
  const int d = spec_.dim();
  if (row < 0 || row >= d || col < 0 || col >= d)
    throw PreconditionError("entry_product: entry index out of range");
  if (!(std::min(x, x2) > 0.0)) return {};
  std::optional<PairTable> scratch;
  const auto [tab, swapped] = lookup(x, x2, scratch);
  (void)swapped;  // the integrand is symmetric in (x, x2)
  const int e = row * d + col;
  auto sum = [&](const Nodes& nodes) {
    double acc = 0.0;
    for (std::size_t k = 0; k < nodes.w.size(); ++k)
      acc += nodes.w[k] * nodes.pa[k * d * d + e] * nodes.pb[k * d * d + e];
    return acc;
  };
  const double low = sum(tab->low);
  const double high = sum(tab->high);
  return {low, 2.0 * std::abs(low - high) + 16.0 * kEps * std::abs(low)};
}

CovBlock cov_integral(double t, double s, double t2, double s2, const KernelSpec& spec) {
  const double coords[4] = {t, s, t2, s2};
  for (double c : coords)
    if (!std::isfinite(c) || c < 0.0) throw PreconditionError("cov_integral: arguments must be >= 0");
  KernelSpec trial = spec;
  for (;;) {
    try {
      return CovarianceEngine(trial, coords).block(t, s, t2, s2);
    } catch (const NumericError& err) {
      if (trial.quad_order >= 64) throw;
      trial.quad_order = std::min(64, 2 * trial.quad_order);
    }
  }
}

// ---------------------------------------------------------------------------------------

std::filesystem::path cell_cache_path(const std::filesystem::path& dir, const KernelSpec& spec, int n) {
  std::ostringstream name;
  name << "cells_" << std::hex << std::setw(16) << std::setfill('0') << spec.exponent.hash()
       << std::dec << "_n" << n << "_q" << spec.quad_order << ".bin";
  return dir / name.str();
}

void write_cell_cache(const std::filesystem::path& file, const KernelSpec& spec, int n,
                      const std::vector<Mat>& table) {
  std::error_code ec;
  std::filesystem::create_directories(file.parent_path(), ec);
  const auto tmp = file.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) return;  // cache is best effort
    os.write(kCellCacheMagic, sizeof kCellCacheMagic);
    binio::put_u32(os, kCellCacheVersion);
    binio::put_u32(os, std::uint32_t(spec.dim()));
    binio::put_u32(os, std::uint32_t(n));
    binio::put_u32(os, std::uint32_t(spec.quad_order));
    for (const Mat& m : table)
      for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c) binio::put_f64(os, m(r, c));
    if (!os) return;
  }
  std::filesystem::rename(tmp, file, ec);
}

std::optional<std::vector<Mat>> read_cell_cache(const std::filesystem::path& file,
                                                const KernelSpec& spec, int n) {
  std::ifstream is(file, std::ios::binary);
  if (!is) return std::nullopt;
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kCellCacheMagic)) return std::nullopt;
  std::uint32_t version = 0, d = 0, nn = 0, order = 0;
  if (!binio::get_u32(is, version) || !binio::get_u32(is, d) || !binio::get_u32(is, nn) ||
      !binio::get_u32(is, order))
    return std::nullopt;
  if (version != kCellCacheVersion || int(d) != spec.dim() || int(nn) != n ||
      int(order) != spec.quad_order)
    return std::nullopt;
  std::vector<Mat> table(n, Mat(d, d));
  for (Mat& m : table)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c)
        if (!binio::get_f64(is, m(r, c))) return std::nullopt;
  return table;
}

}  // namespace ofbs
