#pragma once

#include "ofbs/core.h"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace ofbs {

enum class Generator { rademacher, product_sign, external };

std::string to_string(Generator g);
/// Accepts "rademacher" and "product_sign"; throws ConfigError otherwise.
Generator parse_generator(const std::string& name);

/// n x n array of d-vector martingale differences eta_{i,j} = (xi_{i,j,1}, ..., xi_{i,j,d}).
class MDArray {
 public:
  MDArray(int n, int d, std::vector<double> xi, Generator generator, std::uint64_t seed,
          double c_bound);

  int n() const noexcept { return n_; }
  int dim() const noexcept { return d_; }
  Generator generator() const noexcept { return generator_; }
  std::uint64_t seed() const noexcept { return seed_; }
  double c_bound() const noexcept { return c_bound_; }

  /// 1-based (i, j, k).
  double xi(int i, int j, int k) const { return xi_[index(i, j, k)]; }
  /// Pointer to the d components of eta_{i,j} (1-based i, j).
  const double* eta(int i, int j) const { return xi_.data() + index(i, j, 1); }
  const std::vector<double>& values() const noexcept { return xi_; }

 private:
  std::size_t index(int i, int j, int k) const {
    return (std::size_t(i - 1) * n_ + std::size_t(j - 1)) * d_ + std::size_t(k - 1);
  }

  int n_;
  int d_;
  std::vector<double> xi_;
  Generator generator_;
  std::uint64_t seed_;
  double c_bound_;
};

/// xi_{i,j,k} = eps_{i,j,k} / n, eps i.i.d. uniform on {-1, +1}; component k uses its own
/// counter stream. C_bound = 1.
MDArray gen_rademacher(int n, int d, std::uint64_t seed);

/// xi_{i,j,k} = r_{i,k} c_{j,k} / n with independent row and column signs. C_bound = 1.
MDArray gen_product_sign(int n, int d, std::uint64_t seed);

/// Product-sign array from explicit signs: row_signs[(i-1)*d + k-1], col_signs likewise.
MDArray product_sign_from(int n, int d, const std::vector<int>& row_signs,
                          const std::vector<int>& col_signs, std::uint64_t seed = 0);

/// Row and column signs gen_product_sign(n, d, seed) draws.
void product_sign_streams(int n, int d, std::uint64_t seed, std::vector<int>& row_signs,
                          std::vector<int>& col_signs);

MDArray generate(Generator g, int n, int d, std::uint64_t seed);

enum class MartingaleStatus { certified, unverified };

struct BoundViolation {
  int i, j, k;
  double value;
};

struct ConditionReport {
  double max_scaled_abs = 0.0;  ///< max n |xi|
  double c_slack = 0.0;         ///< C_bound - max n |xi|
  double min_scaled_sq = 0.0;   ///< min n^2 xi^2
  double max_scaled_sq = 0.0;   ///< max n^2 xi^2
  std::vector<BoundViolation> bound_violations;
  MartingaleStatus martingale = MartingaleStatus::unverified;

  bool bound_ok() const noexcept { return bound_violations.empty(); }
  /// n^2 xi^2 == 1 everywhere, up to the rounding of 1/n (exact for power-of-two n).
  bool normalization_ok() const noexcept {
    return std::abs(min_scaled_sq - 1.0) <= 4e-16 && std::abs(max_scaled_sq - 1.0) <= 4e-16;
  }
  bool all_ok() const noexcept {
    return bound_ok() && normalization_ok() && martingale == MartingaleStatus::certified;
  }
};

/// Checks the boundedness condition max |xi| <= C/n and the normalisation n^2 xi^2 = 1.
/// The martingale-difference property is certified only for the built-in generators.
ConditionReport check_conditions(const MDArray& arr);

/// B_n(t, s) = sum_{i <= floor(n t)} sum_{j <= floor(n s)} eta_{i,j}.
Vec partial_sum_field(const MDArray& arr, double t, double s);

/// CSV with header `i,j,k,value`, 1-based indices, 17 significant digits.
void write_md_csv(std::ostream& os, const MDArray& arr);
/// Reads a complete array; the result is marked external with the given C_bound.
MDArray read_md_csv(std::istream& is, double c_bound = 1.0);

}  // namespace ofbs
