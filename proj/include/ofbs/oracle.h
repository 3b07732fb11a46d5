#pragma once

#include "ofbs/core.h"
#include "ofbs/kernel.h"
#include "ofbs/sheet.h"

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace ofbs {

/// Covariance blocks E[X(p_k) X(p_l)^T] for a point list, assembled into one
/// (Q d) x (Q d) matrix in point-major order.
struct CovarianceTensor {
  enum class Provenance { quadrature, exact_sum, empirical };

  std::vector<Point> points;
  int d = 0;
  Eigen::MatrixXd matrix;
  Provenance provenance = Provenance::quadrature;
  int n = 0;                     ///< exact_sum only
  std::int64_t replicates = 0;   ///< empirical only
  int quad_order = 0;            ///< quadrature only
  double max_error_bound = 0.0;  ///< quadrature only

  Mat block(std::size_t k, std::size_t l) const;
};

/// cov_integral blocks for every pair of points (error bounds carried along).
CovarianceTensor quadrature_covariance(const std::vector<Point>& points, const KernelSpec& spec);
/// (1/n^2) sum_{i,j} M_ij(p_k) M_ij(p_l)^T at the simulator's points.
CovarianceTensor exact_sum_covariance(const XnSimulator& sim);
/// Centered sample covariance with divisor R - 1.
CovarianceTensor empirical_covariance(const Ensemble& ens);

/// Gaussian law of the limit sheet at a set of points off the axes.
struct OracleModel {
  std::vector<Point> points;
  int d = 0;
  Eigen::MatrixXd sigma;
  /// factor * factor^T = sigma + jitter * I (a permuted lower-triangular factor).
  Eigen::MatrixXd factor;
  /// Absolute diagonal shift used by the successful factorization.
  double jitter = 0.0;
  double max_error_bound = 0.0;
};

/// Points must be distinct with t > 0 and s > 0 (PreconditionError otherwise). Tries the
/// jitter ladder 0, 1e-14, 1e-12, 1e-10 (times the largest diagonal entry); throws
/// NumericError carrying the smallest eigenvalue of sigma if every rung fails.
OracleModel build_oracle(const std::vector<Point>& points, const KernelSpec& spec);
/// Same, from an already assembled covariance (used by build_oracle).
OracleModel oracle_from_covariance(const CovarianceTensor& cov);

/// R independent draws factor * z; replicate r uses the normal stream derive_seed(seed, r).
Ensemble sample_oracle(const OracleModel& model, std::uint64_t seed, std::int64_t replicates,
                       int jobs = 1);

/// Draws at `points`, each of which is either on an axis (value 0) or one of model.points.
Ensemble sample_oracle(const OracleModel& model, const std::vector<Point>& points,
                       std::uint64_t seed, std::int64_t replicates, int jobs = 1);

/// Oracle on grid_points(m) without the axis points.
OracleModel build_grid_oracle(int m, const KernelSpec& spec);

}  // namespace ofbs
