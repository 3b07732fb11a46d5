#pragma once

#include "ofbs/core.h"

#include <complex>
#include <cstdint>
#include <vector>

namespace ofbs {

/// Matrix exponential by scaling and squaring with a [6/6] diagonal Pade approximant.
/// Throws PreconditionError on non-finite entries.
Mat mat_exp(const Mat& a);

/// t^A = exp(ln(t) A) for t > 0. mat_power(1, A) is exactly I; mat_power(0, A) is the
/// zero matrix, which requires Re(sigma(A)) > 0 (DomainError otherwise, and for t < 0).
Mat mat_power(double t, const Mat& a);

/// Eigenvalues of a real square matrix: Hessenberg reduction followed by the Francis
/// double-shift QR iteration. Throws NumericError when an eigenvalue fails to converge.
std::vector<std::complex<double>> eigenvalues(const Mat& a);

struct SpectrumBounds {
  double lambda;  ///< min Re(sigma)
  double Lambda;  ///< max Re(sigma)
};

SpectrumBounds spectrum_bounds(const Mat& a);

/// Spectral norm max_{|x|_2 = 1} |Ax|_2.
double operator_norm(const Mat& a);

/// The d x d exponent D of the sheet, validated so that 1/2 < lambda_D <= Lambda_D < 1,
/// together with the kernel exponent A = D/2 - I/4 it induces.
class OperatorExponent {
 public:
  /// Throws DomainError if the spectrum gate fails, PreconditionError on bad shape.
  explicit OperatorExponent(const Mat& d_matrix);

  int dim() const noexcept { return static_cast<int>(d_.rows()); }
  const Mat& D() const noexcept { return d_; }
  /// Kernel exponent A = D/2 - I/4; Re(sigma(A)) lies in (0, 1/4).
  const Mat& A() const noexcept { return a_; }
  double lambda_D() const noexcept { return bounds_.lambda; }
  double Lambda_D() const noexcept { return bounds_.Lambda; }
  /// min Re(sigma(A)) = lambda_D / 2 - 1/4.
  double lambda_A() const noexcept { return bounds_.lambda / 2.0 - 0.25; }

  /// c^D, the operator scaling of the sheet.
  Mat scaling(double c) const { return mat_power(c, d_); }

  /// Stable 64-bit hash of the matrix entries (used to key on-disk caches).
  std::uint64_t hash() const noexcept;

 private:
  Mat d_;
  Mat a_;
  SpectrumBounds bounds_{};
};

}  // namespace ofbs
