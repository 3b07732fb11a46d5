#include "ofbs/oracle.h"

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include <cmath>

using ofbs::KernelSpec;
using ofbs::Mat;
using ofbs::OperatorExponent;
using ofbs::Point;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

KernelSpec scalar_spec(double h) {
  Mat d(1, 1);
  d << h;
  return KernelSpec(OperatorExponent(d));
}

double sample_variance_error(const ofbs::OracleModel& model, std::uint64_t seed, std::int64_t reps) {
  const auto ens = ofbs::sample_oracle(model, seed, reps);
  double sq = 0.0;
  for (std::int64_t r = 0; r < reps; ++r) sq += ens.value(r, 0, 0) * ens.value(r, 0, 0);
  return sq / double(reps) - model.sigma(0, 0);
}

}  // namespace

TEST(BuildOracle, SinglePointScalar) {
  const auto model = ofbs::build_oracle({{1, 1}}, scalar_spec(0.75));
  ASSERT_EQ(model.sigma.rows(), 1);
  EXPECT_NEAR(model.sigma(0, 0), 0.64, 1e-12);
  EXPECT_NEAR(model.factor(0, 0), 0.8, 1e-12);
  EXPECT_EQ(model.jitter, 0.0);
}

TEST(BuildOracle, Deterministic) {
  const KernelSpec spec{OperatorExponent(mat2(0.7, 0.2, 0.0, 0.7))};
  const auto a = ofbs::build_grid_oracle(4, spec);
  const auto b = ofbs::build_grid_oracle(4, spec);
  EXPECT_EQ(a.sigma, b.sigma);
  EXPECT_EQ(a.factor, b.factor);
  EXPECT_EQ(a.points.size(), 16u);
}

TEST(BuildOracle, DiagonalExponentGivesIndependentComponents) {
  const KernelSpec spec{OperatorExponent(mat2(0.6, 0.0, 0.0, 0.9))};
  const auto model = ofbs::build_grid_oracle(3, spec);
  const int q = int(model.points.size());
  for (int k = 0; k < q; ++k)
    for (int l = 0; l < q; ++l) {
      EXPECT_EQ(model.sigma(2 * k, 2 * l + 1), 0.0);
      EXPECT_EQ(model.sigma(2 * k + 1, 2 * l), 0.0);
    }
}

TEST(BuildOracle, FactorReproducesSigma) {
  for (const Mat& d : {mat2(0.6, 0.0, 0.0, 0.8), mat2(0.7, 0.2, 0.0, 0.7), mat2(0.7, 0.2, -0.2, 0.7)}) {
    const auto model = ofbs::build_grid_oracle(4, KernelSpec(OperatorExponent(d)));
    const Eigen::MatrixXd rebuilt = model.factor * model.factor.transpose();
    const double tol = std::max(1e-10, 10.0 * model.jitter);
    EXPECT_LE((rebuilt - model.sigma).cwiseAbs().maxCoeff(), tol);
    EXPECT_LE(model.jitter, 1e-8 * model.sigma.diagonal().maxCoeff());
    EXPECT_LT((model.sigma - model.sigma.transpose()).cwiseAbs().maxCoeff(), 1e-15);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(model.sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * model.sigma.trace());
  }
}

TEST(BuildOracle, RejectsBadPoints) {
  const KernelSpec spec = scalar_spec(0.75);
  EXPECT_THROW(ofbs::build_oracle({{0, 1}}, spec), ofbs::PreconditionError);
  EXPECT_THROW(ofbs::build_oracle({{0.5, 1}, {0.5, 1}}, spec), ofbs::PreconditionError);
}

TEST(BuildOracle, IndefiniteCovarianceNamesEigenvalue) {
  ofbs::CovarianceTensor cov;
  cov.points = {{0.5, 0.5}, {1, 1}};
  cov.d = 1;
  cov.matrix = Eigen::MatrixXd(2, 2);
  cov.matrix << 1.0, 2.0, 2.0, 1.0;
  try {
    ofbs::oracle_from_covariance(cov);
    FAIL() << "expected NumericError";
  } catch (const ofbs::NumericError& e) {
    EXPECT_NEAR(e.estimate(), -1.0, 1e-12);
    EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
  }
}

TEST(BuildOracle, MarginallyIndefiniteUsesJitter) {
  ofbs::CovarianceTensor cov;
  cov.points = {{0.5, 0.5}, {1, 1}};
  cov.d = 1;
  cov.matrix = Eigen::MatrixXd(2, 2);
  cov.matrix << 1.0, 1.0, 1.0, 1.0 - 1e-15;
  const auto model = ofbs::oracle_from_covariance(cov);
  EXPECT_GT(model.jitter, 0.0);
  EXPECT_LE(model.jitter, 1e-10);
  EXPECT_LE((model.factor * model.factor.transpose() - model.sigma).cwiseAbs().maxCoeff(),
            std::max(1e-10, 10 * model.jitter));
}

TEST(SampleOracle, VarianceWithinWishartBand) {
  const auto model = ofbs::build_oracle({{1, 1}}, scalar_spec(0.75));
  const std::int64_t reps = 100000;
  const auto ens = ofbs::sample_oracle(model, 12, reps);
  double sum = 0.0, sq = 0.0;
  for (std::int64_t r = 0; r < reps; ++r) {
    sum += ens.value(r, 0, 0);
    sq += ens.value(r, 0, 0) * ens.value(r, 0, 0);
  }
  EXPECT_LT(std::abs(sq / reps - 0.64), 4.0 * std::sqrt(2.0 / reps) * 0.64);
  EXPECT_LT(std::abs(sum / reps), 4.0 * 0.8 / std::sqrt(double(reps)));
  const auto emp = ofbs::empirical_covariance(ens);
  EXPECT_LT(std::abs(emp.matrix(0, 0) - 0.64), 4.0 * std::sqrt(2.0 / reps) * 0.64);
  EXPECT_EQ(emp.provenance, ofbs::CovarianceTensor::Provenance::empirical);
  EXPECT_EQ(emp.replicates, reps);
}

TEST(SampleOracle, ErrorShrinksAtRootRRate) {
  const auto model = ofbs::build_oracle({{1, 1}}, scalar_spec(0.75));
  std::vector<double> lx, ly;
  for (std::int64_t reps : {1000, 10000, 100000}) {
    double ms = 0.0;
    const int seeds = 24;
    for (int k = 0; k < seeds; ++k) {
      const double e = sample_variance_error(model, 1000 + k, reps);
      ms += e * e;
    }
    lx.push_back(std::log(double(reps)));
    ly.push_back(0.5 * std::log(ms / seeds));
  }
  const double slope = (ly[2] - ly[0]) / (lx[2] - lx[0]);
  EXPECT_NEAR(slope, -0.5, 0.15);
}

TEST(SampleOracle, ReproducibleAndJobIndependent) {
  const auto model = ofbs::build_grid_oracle(2, KernelSpec(OperatorExponent(mat2(0.6, 0.0, 0.0, 0.8))));
  const auto a = ofbs::sample_oracle(model, 5, 50, 1);
  const auto b = ofbs::sample_oracle(model, 5, 50, 3);
  const auto c = ofbs::sample_oracle(model, 6, 50, 1);
  EXPECT_EQ(a.values, b.values);
  EXPECT_NE(a.values, c.values);
  EXPECT_THROW(ofbs::sample_oracle(model, 5, 0), ofbs::PreconditionError);
}

TEST(SampleOracle, AxisPointsAreZero) {
  const auto model = ofbs::build_grid_oracle(2, scalar_spec(0.75));
  const auto pts = ofbs::grid_points(2);
  const auto ens = ofbs::sample_oracle(model, pts, 3, 10);
  for (std::int64_t r = 0; r < 10; ++r)
    for (std::size_t p = 0; p < pts.size(); ++p)
      if (pts[p].t == 0 || pts[p].s == 0) EXPECT_EQ(ens.value(r, p, 0), 0.0);
      else EXPECT_NE(ens.value(r, p, 0), 0.0);
  EXPECT_THROW(ofbs::sample_oracle(model, {{0.3, 0.3}}, 3, 10), ofbs::PreconditionError);
}

TEST(OracleScaling, SigmaOnScaledPointsIsConjugated) {
  const double c = 0.5;
  const Mat d = mat2(0.6, 0.0, 0.0, 0.9);
  const KernelSpec spec{OperatorExponent(d)};
  const std::vector<Point> base = {{0.5, 1.0}, {1.0, 1.0}, {0.25, 0.75}};
  std::vector<Point> scaled;
  for (auto p : base) scaled.push_back({c * p.t, c * p.s});
  const auto a = ofbs::build_oracle(base, spec);
  const auto b = ofbs::build_oracle(scaled, spec);
  // Both axes stretch, so each component scales by c^{D_kk + 1/2}.
  Eigen::VectorXd s(6);
  for (int k = 0; k < 3; ++k) {
    s(2 * k) = std::pow(c, 0.6 + 0.5);
    s(2 * k + 1) = std::pow(c, 0.9 + 0.5);
  }
  const Eigen::MatrixXd expected = s.asDiagonal() * a.sigma * s.asDiagonal();
  EXPECT_LT((b.sigma - expected).cwiseAbs().maxCoeff(), 1e-9 * expected.cwiseAbs().maxCoeff());
}

TEST(CovarianceTensor, ExactSumAndQuadratureAgreeInShape) {
  const KernelSpec spec{OperatorExponent(mat2(0.6, 0.1, 0.0, 0.8))};
  const std::vector<Point> pts = {{0.5, 0.5}, {1, 1}};
  const auto q = ofbs::quadrature_covariance(pts, spec);
  const auto e = ofbs::exact_sum_covariance(ofbs::XnSimulator(spec, 16, pts));
  EXPECT_EQ(q.matrix.rows(), 4);
  EXPECT_EQ(e.matrix.rows(), 4);
  EXPECT_EQ(e.n, 16);
  EXPECT_EQ(q.provenance, ofbs::CovarianceTensor::Provenance::quadrature);
  EXPECT_LT((q.block(0, 1) - q.block(1, 0).transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((e.block(0, 1) - e.block(1, 0).transpose()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LT((q.matrix - e.matrix).norm() / q.matrix.norm(), 0.05);
  EXPECT_THROW(q.block(2, 0), ofbs::PreconditionError);
}
