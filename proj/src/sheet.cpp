#include "ofbs/sheet.h"

#include "ofbs/binio.h"
#include "ofbs/rng.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <thread>

namespace ofbs {
namespace {

std::vector<double> unique_coords(const std::vector<Point>& points) {
  std::vector<double> xs;
  xs.reserve(2 * points.size());
  for (const Point& p : points) {
    if (!(p.t >= 0.0 && p.s >= 0.0) || !std::isfinite(p.t) || !std::isfinite(p.s))
      throw PreconditionError("points must have finite, nonnegative coordinates");
    xs.push_back(p.t);
    xs.push_back(p.s);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs;
}

std::size_t slot_of(const AxisCellTable& table, double x) {
  std::size_t lo = 0, hi = table.coord_count();
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (table.coord(mid) < x)
      lo = mid + 1;
    else
      hi = mid;
  }
  return lo;
}

}  // namespace

std::vector<Point> grid_points(int m) {
  if (m < 1) throw PreconditionError("grid_points: m must be >= 1");
  std::vector<Point> pts;
  pts.reserve(std::size_t(m + 1) * (m + 1));
  for (int p = 0; p <= m; ++p)
    for (int q = 0; q <= m; ++q) pts.push_back({double(p) / m, double(q) / m});
  return pts;
}

GridField::GridField(int m, int d, std::vector<double> values, FieldSource source,
                     OperatorExponent exponent)
    : m_(m), d_(d), values_(std::move(values)), source_(source), exponent_(std::move(exponent)) {
  if (m < 1 || d < 1) throw PreconditionError("GridField: m and d must be >= 1");
  if (values_.size() != std::size_t(m + 1) * (m + 1) * d)
    throw PreconditionError("GridField: value count does not match (m+1)^2 * d");
  if (exponent_.dim() != d) throw PreconditionError("GridField: exponent dimension mismatch");
}

Vec GridField::vector(int p, int q) const {
  Vec v(d_);
  for (int k = 0; k < d_; ++k) v(k) = at(p, q, k);
  return v;
}

int GridField::grid_index(double x) const {
  const double mx = x * m_;
  const double p = std::round(mx);
  if (!(std::abs(mx - p) <= 1e-9 * std::max(1.0, mx)) || p < 0 || p > m_)
    throw PreconditionError("GridField: coordinate is not a grid point");
  return static_cast<int>(p);
}

// ---------------------------------------------------------------------------------------

XnSimulator::XnSimulator(const KernelSpec& spec, int n, std::vector<Point> points,
                         const std::optional<std::filesystem::path>& cache_dir)
    : n_(n),
      d_(spec.dim()),
      points_(std::move(points)),
      table_(n, unique_coords(points_), spec, cache_dir) {
  t_index_.reserve(points_.size());
  s_index_.reserve(points_.size());
  for (const Point& p : points_) {
    t_index_.push_back(slot_of(table_, p.t));
    s_index_.push_back(slot_of(table_, p.s));
  }
}

void XnSimulator::evaluate(const MDArray& arr, std::span<double> out) const {
  if (arr.n() != n_ || arr.dim() != d_)
    throw PreconditionError("XnSimulator: array shape does not match (n, d)");
  if (out.size() != points_.size() * std::size_t(d_))
    throw PreconditionError("XnSimulator: output span has the wrong size");
  const int d = d_;

  int rows_needed = 0;
  for (std::size_t ti : t_index_) rows_needed = std::max(rows_needed, table_.count(ti));

  // Z_c[i] = sum_{j <= J_c} W_j(x_c) eta_{i,j} for every coordinate slot used as an s value
  const std::size_t slots = table_.coord_count();
  std::vector<char> used(slots, 0);
  for (std::size_t si : s_index_) used[si] = 1;
  std::vector<double> z(slots * std::size_t(rows_needed) * d, 0.0);
  for (std::size_t c = 0; c < slots; ++c) {
    if (!used[c]) continue;
    const int cols = table_.count(c);
    for (int i = 1; i <= rows_needed; ++i) {
      double* zi = &z[(c * rows_needed + (i - 1)) * d];
      for (int j = 1; j <= cols; ++j) {
        const double* w = table_.cell(c, j);
        const double* e = arr.eta(i, j);
        for (int r = 0; r < d; ++r) {
          double acc = 0.0;
          for (int k = 0; k < d; ++k) acc += w[r * d + k] * e[k];
          zi[r] += acc;
        }
      }
    }
  }

  for (std::size_t p = 0; p < points_.size(); ++p) {
    double* x = &out[p * d];
    std::fill(x, x + d, 0.0);
    const std::size_t tc = t_index_[p];
    const std::size_t sc = s_index_[p];
    if (table_.count(sc) == 0) continue;
    const int rows = table_.count(tc);
    for (int i = 1; i <= rows; ++i) {
      const double* w = table_.cell(tc, i);
      const double* zi = &z[(sc * rows_needed + (i - 1)) * d];
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += w[r * d + k] * zi[k];
        x[r] += acc;
      }
    }
  }
}

std::vector<double> XnSimulator::evaluate(const MDArray& arr) const {
  std::vector<double> out(points_.size() * std::size_t(d_));
  evaluate(arr, out);
  return out;
}

Mat XnSimulator::exact_covariance(std::size_t a, std::size_t b) const {
  const int d = d_;
  const std::size_t ta = t_index_.at(a), tb = t_index_.at(b);
  const std::size_t sa = s_index_.at(a), sb = s_index_.at(b);
  const int rows = std::min(table_.count(ta), table_.count(tb));
  const int cols = std::min(table_.count(sa), table_.count(sb));
  Mat g = Mat::Zero(d, d);
  for (int j = 1; j <= cols; ++j) g.noalias() += table_.matrix(sa, j) * table_.matrix(sb, j).transpose();
  Mat acc = Mat::Zero(d, d);
  for (int i = 1; i <= rows; ++i)
    acc.noalias() += table_.matrix(ta, i) * g * table_.matrix(tb, i).transpose();
  return acc / (double(n_) * n_);
}

GridField simulate_xn(const KernelSpec& spec, int n, int grid_m, const MDArray& arr,
                      const std::optional<std::filesystem::path>& cache_dir) {
  if (arr.n() != n || arr.dim() != spec.dim())
    throw PreconditionError("simulate_xn: array shape does not match (n, d)");
  XnSimulator sim(spec, n, grid_points(grid_m), cache_dir);
  FieldSource src{FieldSource::Kind::approximation, n, arr.generator(), arr.seed()};
  return GridField(grid_m, spec.dim(), sim.evaluate(arr), src, spec.exponent);
}

Ensemble simulate_ensemble(const XnSimulator& sim, Generator g, std::int64_t replicates,
                           std::uint64_t seed, int jobs) {
  if (replicates < 1) throw PreconditionError("simulate_ensemble: replicate count must be >= 1");
  Ensemble ens;
  ens.points = sim.points();
  ens.d = sim.dim();
  ens.replicates = replicates;
  ens.seed = seed;
  ens.values.assign(std::size_t(replicates) * ens.stride(), 0.0);

  const int workers = static_cast<int>(std::clamp<std::int64_t>(jobs, 1, replicates));
  auto run = [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t r = begin; r < end; ++r) {
      const MDArray arr = generate(g, sim.n(), sim.dim(), derive_seed(seed, std::uint64_t(r)));
      sim.evaluate(arr, std::span<double>(ens.values.data() + std::size_t(r) * ens.stride(), ens.stride()));
    }
  };
  if (workers == 1) {
    run(0, replicates);
    return ens;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t begin = replicates * w / workers;
    const std::int64_t end = replicates * (w + 1) / workers;
    pool.emplace_back(run, begin, end);
  }
  return ens;
}

Vec increment(const GridField& field, double t, double s, double t2, double s2) {
  if (t > t2 || s > s2) throw PreconditionError("increment: corners must satisfy (t, s) <= (t2, s2)");
  const int p = field.grid_index(t), q = field.grid_index(s);
  const int p2 = field.grid_index(t2), q2 = field.grid_index(s2);
  return field.vector(p2, q2) - field.vector(p, q2) - field.vector(p2, q) + field.vector(p, q);
}

GridField field_of(const Ensemble& ens, std::int64_t r, int m, FieldSource source,
                   const OperatorExponent& exponent) {
  if (ens.points != grid_points(m)) throw PreconditionError("field_of: ensemble is not on the grid");
  if (r < 0 || r >= ens.replicates) throw PreconditionError("field_of: replicate out of range");
  const double* v = ens.replicate(r);
  return GridField(m, ens.d, std::vector<double>(v, v + ens.stride()), source, exponent);
}

void write_field_csv(std::ostream& os, const GridField& field) {
  os << "t,s,component,value\n" << std::setprecision(17);
  const int m = field.m();
  for (int p = 0; p <= m; ++p)
    for (int q = 0; q <= m; ++q)
      for (int k = 0; k < field.dim(); ++k)
        os << double(p) / m << ',' << double(q) / m << ',' << k + 1 << ',' << field.at(p, q, k) << '\n';
}

void write_ensemble_binary(std::ostream& os, const Ensemble& ens, int m) {
  if (ens.points != grid_points(m)) throw PreconditionError("write_ensemble_binary: ensemble is not on the grid");
  os.write(kEnsembleMagic, sizeof kEnsembleMagic);
  binio::put_u32(os, kEnsembleVersion);
  binio::put_u32(os, std::uint32_t(ens.d));
  binio::put_u32(os, std::uint32_t(m));
  binio::put_u64(os, std::uint64_t(ens.replicates));
  binio::put_u64(os, ens.seed);
  for (double v : ens.values) binio::put_f64(os, v);
}

Ensemble read_ensemble_binary(std::istream& is, int& m) {
  char magic[8];
  if (!is.read(magic, 8) || !std::equal(magic, magic + 8, kEnsembleMagic))
    throw ConfigError("ensemble file: bad magic");
  std::uint32_t version = 0, d = 0, mm = 0;
  std::uint64_t r = 0, seed = 0;
  if (!binio::get_u32(is, version) || !binio::get_u32(is, d) || !binio::get_u32(is, mm) ||
      !binio::get_u64(is, r) || !binio::get_u64(is, seed))
    throw ConfigError("ensemble file: truncated header");
  if (version != kEnsembleVersion) throw ConfigError("ensemble file: unsupported version");
  if (d < 1 || d > std::uint32_t(kMaxDim) || mm < 1) throw ConfigError("ensemble file: bad shape");
  m = int(mm);
  Ensemble ens;
  ens.points = grid_points(m);
  ens.d = int(d);
  ens.replicates = std::int64_t(r);
  ens.seed = seed;
  ens.values.resize(std::size_t(r) * ens.stride());
  for (double& v : ens.values)
    if (!binio::get_f64(is, v)) throw ConfigError("ensemble file: truncated payload");
  return ens;
}

}  // namespace ofbs
