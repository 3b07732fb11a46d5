#pragma once

#include "ofbs/core.h"
#include "ofbs/kernel.h"
#include "ofbs/mdgen.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace ofbs {

/// Evaluation grid {p/m : p = 0..m}^2 in p-major order: index p * (m + 1) + q -> (p/m, q/m).
std::vector<Point> grid_points(int m);

struct FieldSource {
  enum class Kind { approximation, oracle };
  Kind kind = Kind::approximation;
  int n = 0;  ///< approximation index (approximation only)
  Generator generator = Generator::rademacher;
  std::uint64_t seed = 0;
};

/// Values of a d-vector field on the grid {p/m}^2.
class GridField {
 public:
  GridField(int m, int d, std::vector<double> values, FieldSource source, OperatorExponent exponent);

  int m() const noexcept { return m_; }
  int dim() const noexcept { return d_; }
  const FieldSource& source() const noexcept { return source_; }
  const OperatorExponent& exponent() const noexcept { return exponent_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double at(int p, int q, int k) const { return values_[(std::size_t(p) * (m_ + 1) + q) * d_ + k]; }
  Vec vector(int p, int q) const;
  /// Grid index of coordinate x; PreconditionError if x is not (within 1e-9) a multiple of 1/m.
  int grid_index(double x) const;

 private:
  int m_;
  int d_;
  std::vector<double> values_;
  FieldSource source_;
  OperatorExponent exponent_;
};

/// Replicate-major samples of a d-vector field at a fixed list of points.
struct Ensemble {
  std::vector<Point> points;
  int d = 0;
  std::int64_t replicates = 0;
  std::uint64_t seed = 0;
  std::vector<double> values;  ///< [r][point][component]

  std::size_t stride() const noexcept { return points.size() * std::size_t(d); }
  const double* replicate(std::int64_t r) const { return values.data() + std::size_t(r) * stride(); }
  double value(std::int64_t r, std::size_t point, int k) const { return replicate(r)[point * d + k]; }
};

/// The martingale-difference approximation
///   X_n(t, s) = sum_{i <= floor(nt)} sum_{j <= floor(ns)} M_{i,j}(t, s) eta_{i,j},
///   M_{i,j}(t, s) = n^2 int_cell (t - u)_+^A (s - v)_+^A du dv = W_i(t) W_j(s),
/// evaluated at a fixed point set. The separable cell matrices are tabulated once per
/// coordinate in the constructor; each evaluation only sweeps the noise.
class XnSimulator {
 public:
  XnSimulator(const KernelSpec& spec, int n, std::vector<Point> points,
              const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

  int n() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  const std::vector<Point>& points() const noexcept { return points_; }

  /// Writes points().size() * d values; PreconditionError unless arr matches (n, d).
  void evaluate(const MDArray& arr, std::span<double> out) const;
  std::vector<double> evaluate(const MDArray& arr) const;

  /// E[X_n(p_a) X_n(p_b)^T] when E[eta_{i,j} eta_{k,l}^T] = delta_{ik} delta_{jl} I / n^2
  /// (both built-in generators):  (1/n^2) sum_{i,j} M_{i,j}(p_a) M_{i,j}(p_b)^T.
  Mat exact_covariance(std::size_t a, std::size_t b) const;

 private:
  int n_;
  int d_;
  std::vector<Point> points_;
  std::vector<std::size_t> t_index_;  // point -> coordinate slot in table_
  std::vector<std::size_t> s_index_;
  AxisCellTable table_;
};

/// One-shot X_n on the grid of the given size.
GridField simulate_xn(const KernelSpec& spec, int n, int grid_m, const MDArray& arr,
                      const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// R replicates of X_n at `points`; replicate r is driven by generate(g, n, d, derive_seed(seed, r)).
/// Replicates are split across `jobs` worker threads; the result does not depend on `jobs`.
Ensemble simulate_ensemble(const XnSimulator& sim, Generator g, std::int64_t replicates,
                           std::uint64_t seed, int jobs = 1);

/// Four-corner increment X(t2,s2) - X(t,s2) - X(t2,s) + X(t,s) over ((t,s), (t2,s2)].
/// Corners must be grid points with t <= t2 and s <= s2.
Vec increment(const GridField& field, double t, double s, double t2, double s2);

/// GridField of replicate r of an ensemble sampled on grid_points(m).
GridField field_of(const Ensemble& ens, std::int64_t r, int m, FieldSource source,
                   const OperatorExponent& exponent);

/// CSV `t,s,component,value` (component 1-based, 17 significant digits).
void write_field_csv(std::ostream& os, const GridField& field);

/// Ensemble binary layout (little endian):
///   "OFBSENSB" | u32 version | u32 d | u32 m | u64 R | u64 seed | R*(m+1)^2*d f64.
inline constexpr char kEnsembleMagic[8] = {'O', 'F', 'B', 'S', 'E', 'N', 'S', 'B'};
inline constexpr std::uint32_t kEnsembleVersion = 1;

/// Requires ens.points == grid_points(m).
void write_ensemble_binary(std::ostream& os, const Ensemble& ens, int m);
/// Returns the ensemble and sets m; throws ConfigError on malformed input.
Ensemble read_ensemble_binary(std::istream& is, int& m);

}  // namespace ofbs
