#pragma once

#include "ofbs/core.h"
#include "ofbs/matfun.h"
#include "ofbs/quadrature.h"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace ofbs {

/// Kernel of the operator fractional Brownian sheet,
///   K(t, s, u, v) = (t - u)_+^A (s - v)_+^A,   A = D/2 - I/4,
/// plus the quadrature settings used to integrate it.
struct KernelSpec {
  KernelSpec(OperatorExponent exponent, int quad_order = 16, bool staircase = false);

  OperatorExponent exponent;
  /// Gauss-Legendre points per panel, in [2, 64].
  int quad_order;
  /// Snap time arguments to floor(n t)/n before integrating over cells.
  bool staircase;

  int dim() const noexcept { return exponent.dim(); }
  /// (x)_+^A: zero for x <= 0.
  Mat power(double x) const;
};

Mat kernel_eval(double t, double s, double u, double v, const KernelSpec& spec);

/// floor(n t), treating n t within 1e-9 (relative) of an integer as that integer so that
/// grid points p/m that sit on the 1/n lattice are classified exactly.
int lattice_floor(int n, double t);

/// W_i(t) = n * int_{(i-1)/n}^{i/n} (t - u)_+^A du for 1 <= i <= n; zero when i > floor(n t).
/// Uses floor(n t)/n in place of t when spec.staircase is set.
Mat axis_cell_average(int n, int i, double t, const KernelSpec& spec);

/// n^2 times the integral of the kernel over cell [(i-1)/n, i/n] x [(j-1)/n, j/n].
/// Cells outside the summation range of X_n (i > floor(n t) or j > floor(n s)) give zero;
/// indices outside 1..n throw PreconditionError.
Mat cell_integral(int n, int i, int j, double t, double s, const KernelSpec& spec);

/// The n shift-invariant cell averages w_r = n * int_{r/n}^{(r+1)/n} x^A dx, r = 0..n-1.
/// For lattice arguments t = k/n, W_i(t) = w_{k-i}.
std::vector<Mat> shift_cell_table(int n, const KernelSpec& spec);

/// Cell averages W_i(x) for a fixed set of coordinates, stored flat and immutable.
class AxisCellTable {
 public:
  /// When cache_dir is set, the lattice shift table is read from / written to it.
  AxisCellTable(int n, std::span<const double> coords, const KernelSpec& spec,
                const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

  int n() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  std::size_t coord_count() const noexcept { return counts_.size(); }
  double coord(std::size_t c) const { return coords_.at(c); }
  /// Number of cells in the sum for coordinate c, i.e. floor(n x_c).
  int count(std::size_t c) const { return counts_.at(c); }
  /// Row-major d x d block for cell i (1-based, i <= count(c)).
  const double* cell(std::size_t c, int i) const { return data_.data() + offsets_[c] + (i - 1) * d_ * d_; }
  Mat matrix(std::size_t c, int i) const;

 private:
  int n_;
  int d_;
  std::vector<double> coords_;
  std::vector<int> counts_;
  std::vector<std::size_t> offsets_;
  std::vector<double> data_;
};

struct CovBlock {
  Mat value;
  double error_bound = 0.0;
};

struct ScalarEstimate {
  double value = 0.0;
  double error_bound = 0.0;
};

/// Covariance blocks E[X(t,s) X(t2,s2)^T] of the limit sheet. The 2-D integral factors as
///   int P(t-u) G(s,s2) P(t2-u)^T du,   G(s,s2) = int P(s-v) P(s2-v)^T dv,
/// and both 1-D integrals run on a rule graded toward the upper limit min(., .), where the
/// integrand has an unbounded derivative. Node tables are built once per coordinate pair
/// in the constructor; the engine is immutable afterwards and safe to share.
class CovarianceEngine {
 public:
  /// Relative accuracy demanded of every block (error_bound <= tol * max|block|).
  static constexpr double kRelTol = 1e-9;

  CovarianceEngine(KernelSpec spec, std::span<const double> coords);

  const KernelSpec& spec() const noexcept { return spec_; }

  /// value at quad_order; error_bound = 2 |C(q) - C(2q)|_max + rounding term.
  /// Throws NumericError when the bound exceeds kRelTol.
  CovBlock block(double t, double s, double t2, double s2) const;

  /// int_0^{min(x,x2)} [P(x-u)]_{row,col} [P(x2-u)]_{row,col} du.
  ScalarEstimate entry_product(double x, double x2, int row, int col) const;

 private:
  struct Nodes {
    std::vector<double> w;
    std::vector<double> pa;  // P(x - u_k), flat row-major blocks
    std::vector<double> pb;  // P(x2 - u_k)
  };
  struct PairTable {
    Nodes low;   // quad_order
    Nodes high;  // 2 * quad_order
  };

  PairTable build_pair(double x, double x2) const;
  /// Table for (x, x2) and whether its roles are swapped relative to storage.
  std::pair<const PairTable*, bool> lookup(double x, double x2, std::optional<PairTable>& scratch) const;

  KernelSpec spec_;
  std::map<std::pair<double, double>, PairTable> tables_;
};

/// Single covariance block, escalating quad_order (doubling up to 64) until the block meets
/// CovarianceEngine::kRelTol. Throws NumericError with the last estimate otherwise.
CovBlock cov_integral(double t, double s, double t2, double s2, const KernelSpec& spec);

/// Binary layout of the on-disk shift-table cache (little endian):
///   "OFBSCELL" | u32 version | u32 d | u32 n | u32 order | n * d*d f64 row-major.
inline constexpr char kCellCacheMagic[8] = {'O', 'F', 'B', 'S', 'C', 'E', 'L', 'L'};
inline constexpr std::uint32_t kCellCacheVersion = 1;

std::filesystem::path cell_cache_path(const std::filesystem::path& dir, const KernelSpec& spec, int n);
void write_cell_cache(const std::filesystem::path& file, const KernelSpec& spec, int n,
                      const std::vector<Mat>& table);
/// Empty optional when the file is absent or its header does not match (d, n, order).
std::optional<std::vector<Mat>> read_cell_cache(const std::filesystem::path& file,
                                                const KernelSpec& spec, int n);

}  // namespace ofbs
