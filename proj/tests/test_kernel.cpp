#include "ofbs/kernel.h"

#include "oracles.h"

#include <gtest/gtest.h>

#include <array>
#include <cmath>
#include <filesystem>
#include <vector>

#include <unistd.h>

using ofbs::KernelSpec;
using ofbs::Mat;
using ofbs::OperatorExponent;

namespace {

Mat mat2(double a, double b, double c, double d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

KernelSpec scalar_spec(double h, int order = 16, bool staircase = false) {
  Mat d(1, 1);
  d << h;
  return KernelSpec(OperatorExponent(d), order, staircase);
}

// n * int_lo^hi x^a [[1, b ln x], [0, 1]] dx.
Mat jordan_cell_average(double a, double b, double lo, double hi, int n) {
  auto f0 = [&](double x) { return x > 0 ? std::pow(x, a + 1) / (a + 1) : 0.0; };
  auto f1 = [&](double x) {
    return x > 0 ? std::pow(x, a + 1) * (std::log(x) / (a + 1) - 1.0 / ((a + 1) * (a + 1))) : 0.0;
  };
  return n * mat2(f0(hi) - f0(lo), b * (f1(hi) - f1(lo)), 0.0, f0(hi) - f0(lo));
}

const std::filesystem::path& scratch_dir() {
  static const std::filesystem::path dir = [] {
    auto p = std::filesystem::temp_directory_path() / ("ofbs_kernel_test_" + std::to_string(::getpid()));
    std::filesystem::create_directories(p);
    return p;
  }();
  return dir;
}

}  // namespace

TEST(KernelSpec, QuadOrderRange) {
  EXPECT_THROW(scalar_spec(0.75, 1), ofbs::PreconditionError);
  EXPECT_THROW(scalar_spec(0.75, 65), ofbs::PreconditionError);
  EXPECT_NO_THROW(scalar_spec(0.75, 2));
  EXPECT_NO_THROW(scalar_spec(0.75, 64));
}

TEST(KernelEval, SupportAndScalarValues) {
  const KernelSpec spec = scalar_spec(0.75);
  EXPECT_EQ(ofbs::kernel_eval(0.5, 1.0, 0.5, 0.0, spec)(0, 0), 0.0);
  EXPECT_EQ(ofbs::kernel_eval(0.5, 1.0, 0.7, 0.0, spec)(0, 0), 0.0);
  EXPECT_EQ(ofbs::kernel_eval(1.0, 0.3, 0.0, 0.4, spec)(0, 0), 0.0);
  EXPECT_NEAR(ofbs::kernel_eval(1.0, 1.0, 0.0, 0.0, spec)(0, 0), 1.0, 1e-15);
  const double expected = std::pow(0.5, 0.125) * std::pow(0.25, 0.125);
  EXPECT_NEAR(ofbs::kernel_eval(1.0, 1.0, 0.5, 0.75, spec)(0, 0), expected, 1e-14);
  EXPECT_NEAR(expected, 0.7711, 1e-4);
}

TEST(LatticeFloor, SnapsNearIntegers) {
  EXPECT_EQ(ofbs::lattice_floor(8, 0.375), 3);
  EXPECT_EQ(ofbs::lattice_floor(100, 0.29), 29);
  EXPECT_EQ(ofbs::lattice_floor(10, 0.7), 7);
  EXPECT_EQ(ofbs::lattice_floor(4, 0.2), 0);
  EXPECT_EQ(ofbs::lattice_floor(4, 0.0), 0);
  EXPECT_EQ(ofbs::lattice_floor(3, 1.0), 3);
}

TEST(CellIntegral, SingleCellScalar) {
  const KernelSpec spec = scalar_spec(0.75);
  const double v = ofbs::cell_integral(1, 1, 1, 1.0, 1.0, spec)(0, 0);
  EXPECT_NEAR(v, 1.0 / (1.125 * 1.125), 1e-13);
  EXPECT_NEAR(v, 0.7901, 1e-4);
}

TEST(CellIntegral, DiagonalTwoByTwo) {
  const KernelSpec spec(OperatorExponent(mat2(0.75, 0, 0, 0.75)));
  const Mat m = ofbs::cell_integral(1, 1, 1, 1.0, 1.0, spec);
  const double v = 1.0 / (1.125 * 1.125);
  EXPECT_NEAR(m(0, 0), v, 1e-13);
  EXPECT_NEAR(m(1, 1), v, 1e-13);
  EXPECT_EQ(m(0, 1), 0.0);
  EXPECT_EQ(m(1, 0), 0.0);
}

TEST(CellIntegral, OutsideSupportAndRange) {
  const KernelSpec spec = scalar_spec(0.75);
  EXPECT_EQ(ofbs::cell_integral(4, 3, 1, 0.5, 1.0, spec)(0, 0), 0.0);  // i > floor(n t)
  EXPECT_EQ(ofbs::cell_integral(4, 1, 4, 1.0, 0.6, spec)(0, 0), 0.0);
  EXPECT_THROW(ofbs::cell_integral(4, 0, 1, 1.0, 1.0, spec), ofbs::PreconditionError);
  EXPECT_THROW(ofbs::cell_integral(4, 1, 5, 1.0, 1.0, spec), ofbs::PreconditionError);
}

TEST(CellIntegral, FactorsIntoAxisAverages) {
  const KernelSpec spec(OperatorExponent(mat2(0.7, 0.2, 0.0, 0.7)));
  const int n = 6;
  for (int i = 1; i <= 4; ++i)
    for (int j = 1; j <= 5; ++j) {
      const Mat m = ofbs::cell_integral(n, i, j, 0.7, 0.9, spec);
      const Mat ref = ofbs::axis_cell_average(n, i, 0.7, spec) * ofbs::axis_cell_average(n, j, 0.9, spec);
      EXPECT_LT((m - ref).cwiseAbs().maxCoeff(), 1e-13);
    }
}

TEST(AxisCellAverage, ClosedFormDiagonalizable) {
  const Mat d = mat2(0.62, 0.1, 0.05, 0.85);
  const KernelSpec spec{OperatorExponent(d)};
  const Mat a = spec.exponent.A();
  for (int n : {1, 3, 8, 32}) {
    for (double t : {1.0, 0.8, 0.55}) {
      const int k = ofbs::lattice_floor(n, t);
      for (int i = 1; i <= k; ++i) {
        const oracle::Matrix ref = oracle::cell_average_closed_form(a, t - double(i) / n, t - double(i - 1) / n, n);
        const Mat got = ofbs::axis_cell_average(n, i, t, spec);
        EXPECT_LT((got - Mat(ref)).cwiseAbs().maxCoeff(), 1e-11 * std::max(1.0, ref.cwiseAbs().maxCoeff()))
            << "n=" << n << " t=" << t << " i=" << i;
      }
    }
  }
}

TEST(AxisCellAverage, ClosedFormJordan) {
  const KernelSpec spec(OperatorExponent(mat2(0.7, 0.2, 0.0, 0.7)));
  // A = [[0.1, 0.1], [0, 0.1]].
  for (int n : {1, 4, 16}) {
    for (double t : {1.0, 0.6}) {
      const int k = ofbs::lattice_floor(n, t);
      for (int i = 1; i <= k; ++i) {
        const Mat ref = jordan_cell_average(0.1, 0.1, t - double(i) / n, t - double(i - 1) / n, n);
        EXPECT_LT((ofbs::axis_cell_average(n, i, t, spec) - ref).cwiseAbs().maxCoeff(), 1e-11);
      }
    }
  }
}

TEST(AxisCellAverage, StaircaseSnapsArgument) {
  const KernelSpec plain = scalar_spec(0.75, 16, false);
  const KernelSpec stair = scalar_spec(0.75, 16, true);
  for (int i = 1; i <= 2; ++i)
    EXPECT_EQ(ofbs::axis_cell_average(4, i, 0.6, stair)(0, 0), ofbs::axis_cell_average(4, i, 0.5, plain)(0, 0));
  EXPECT_NE(ofbs::axis_cell_average(4, 1, 0.6, plain)(0, 0), ofbs::axis_cell_average(4, 1, 0.5, plain)(0, 0));
}

TEST(ShiftTable, LatticeShiftInvariance) {
  const KernelSpec spec(OperatorExponent(mat2(0.6, 0.1, 0.0, 0.8)));
  const int n = 8;
  const auto w = ofbs::shift_cell_table(n, spec);
  ASSERT_EQ(int(w.size()), n);
  for (int k = 1; k <= n; ++k)
    for (int i = 1; i <= k; ++i)
      EXPECT_LT((ofbs::axis_cell_average(n, i, double(k) / n, spec) - w[k - i]).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(AxisCellTable, MatchesPointwiseAverages) {
  const KernelSpec spec(OperatorExponent(mat2(0.6, 0.1, 0.0, 0.8)));
  const std::vector<double> coords = {0.0, 0.1, 0.25, 0.3, 0.5, 1.0};
  const int n = 8;
  const ofbs::AxisCellTable table(n, coords, spec);
  ASSERT_EQ(table.coord_count(), coords.size());
  for (std::size_t c = 0; c < coords.size(); ++c) {
    EXPECT_EQ(table.count(c), ofbs::lattice_floor(n, coords[c]));
    for (int i = 1; i <= table.count(c); ++i)
      EXPECT_LT((table.matrix(c, i) - ofbs::axis_cell_average(n, i, coords[c], spec)).cwiseAbs().maxCoeff(), 1e-13);
  }
}

TEST(CellCache, RoundTripAndHeaderMismatch) {
  const KernelSpec spec(OperatorExponent(mat2(0.6, 0.0, 0.0, 0.8)));
  const auto table = ofbs::shift_cell_table(8, spec);
  const auto file = ofbs::cell_cache_path(scratch_dir(), spec, 8);
  ofbs::write_cell_cache(file, spec, 8, table);
  const auto back = ofbs::read_cell_cache(file, spec, 8);
  ASSERT_TRUE(back.has_value());
  ASSERT_EQ(back->size(), table.size());
  for (std::size_t r = 0; r < table.size(); ++r) EXPECT_EQ((*back)[r], table[r]);
  EXPECT_FALSE(ofbs::read_cell_cache(file, spec, 16).has_value());
  EXPECT_FALSE(ofbs::read_cell_cache(scratch_dir() / "absent.bin", spec, 8).has_value());
}

TEST(CellCache, TableBuildsIdenticallyFromCache) {
  const KernelSpec spec(OperatorExponent(mat2(0.65, 0.05, 0.0, 0.75)));
  const std::vector<double> coords = {0.25, 0.5, 0.75, 1.0};
  const auto dir = scratch_dir() / "table";
  std::filesystem::create_directories(dir);
  const ofbs::AxisCellTable fresh(16, coords, spec);
  const ofbs::AxisCellTable first(16, coords, spec, dir);
  EXPECT_TRUE(std::filesystem::exists(ofbs::cell_cache_path(dir, spec, 16)));
  const ofbs::AxisCellTable cached(16, coords, spec, dir);
  for (std::size_t c = 0; c < coords.size(); ++c)
    for (int i = 1; i <= fresh.count(c); ++i) {
      EXPECT_EQ(first.matrix(c, i), fresh.matrix(c, i));
      EXPECT_EQ(cached.matrix(c, i), fresh.matrix(c, i));
    }
}

TEST(CovIntegral, AxesVanish) {
  const KernelSpec spec(OperatorExponent(mat2(0.6, 0, 0, 0.8)));
  EXPECT_EQ(ofbs::cov_integral(0.0, 0.5, 1.0, 1.0, spec).value, Mat(Mat::Zero(2, 2)));
  EXPECT_EQ(ofbs::cov_integral(0.5, 1.0, 1.0, 0.0, spec).value, Mat(Mat::Zero(2, 2)));
}

TEST(CovIntegral, ScalarVarianceClosedForm) {
  for (double h : {0.55, 0.6, 0.75, 0.9}) {
    const KernelSpec spec = scalar_spec(h);
    for (double t : {0.25, 0.5, 0.75, 1.0})
      for (double s : {0.125, 0.5, 1.0}) {
        const auto b = ofbs::cov_integral(t, s, t, s, spec);
        EXPECT_NEAR(b.value(0, 0), oracle::scalar_var(h, t, s), 1e-8) << "H=" << h << " t=" << t << " s=" << s;
      }
  }
  EXPECT_NEAR(ofbs::cov_integral(1, 1, 1, 1, scalar_spec(0.75)).value(0, 0), 0.64, 1e-12);
  EXPECT_NEAR(ofbs::cov_integral(1, 1, 1, 1, scalar_spec(0.6)).value(0, 0), 1.0 / 1.21, 1e-12);
}

TEST(CovIntegral, ScalarCrossCovarianceMatchesDirectQuadrature) {
  const double h = 0.7, a = h / 2 - 0.25;
  const KernelSpec spec = scalar_spec(h);
  const std::vector<std::pair<double, double>> pairs = {{0.3, 0.9}, {1.0, 0.5}, {0.25, 0.25}, {0.6, 0.61}};
  for (auto [t, t2] : pairs)
    for (auto [s, s2] : pairs) {
      const double ref = oracle::scalar_pair_integral(a, t, t2) * oracle::scalar_pair_integral(a, s, s2);
      EXPECT_NEAR(ofbs::cov_integral(t, s, t2, s2, spec).value(0, 0), ref, 1e-10);
    }
}

TEST(CovIntegral, DiagonalDecouplesIntoScalarCases) {
  const KernelSpec spec(OperatorExponent(mat2(0.6, 0, 0, 0.9)));
  const auto b = ofbs::cov_integral(0.5, 1.0, 0.75, 0.5, spec);
  EXPECT_EQ(b.value(0, 1), 0.0);
  EXPECT_EQ(b.value(1, 0), 0.0);
  EXPECT_NEAR(b.value(0, 0), ofbs::cov_integral(0.5, 1.0, 0.75, 0.5, scalar_spec(0.6)).value(0, 0), 1e-13);
  EXPECT_NEAR(b.value(1, 1), ofbs::cov_integral(0.5, 1.0, 0.75, 0.5, scalar_spec(0.9)).value(0, 0), 1e-13);
}

TEST(CovIntegral, JordanMatchesBruteForce) {
  const KernelSpec spec(OperatorExponent(mat2(0.7, 0.2, 0.0, 0.7)));
  for (auto [t, s, t2, s2] : std::vector<std::array<double, 4>>{{1, 1, 1, 1}, {0.5, 1, 0.75, 0.5}, {0.25, 0.75, 1, 1}}) {
    const Mat got = ofbs::cov_integral(t, s, t2, s2, spec).value;
    const oracle::Matrix ref = oracle::jordan_cov(0.1, 0.1, t, s, t2, s2);
    EXPECT_LT((got - Mat(ref)).norm(), 1e-5 * ref.norm());
  }
}

TEST(CovIntegral, SymmetryAndPSD) {
  const KernelSpec spec(OperatorExponent(mat2(0.7, 0.2, -0.1, 0.8)));
  const Mat ab = ofbs::cov_integral(0.3, 0.8, 0.9, 0.4, spec).value;
  const Mat ba = ofbs::cov_integral(0.9, 0.4, 0.3, 0.8, spec).value;
  EXPECT_LT((ab - ba.transpose()).cwiseAbs().maxCoeff(), 1e-15);
  for (double t : {0.25, 1.0})
    for (double s : {0.5, 1.0}) {
      const Mat v = ofbs::cov_integral(t, s, t, s, spec).value;
      EXPECT_LT((v - v.transpose()).cwiseAbs().maxCoeff(), 1e-15);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{Eigen::MatrixXd(v)};
      EXPECT_GE(es.eigenvalues().minCoeff(), -1e-8 * v.trace());
    }
}

TEST(CovIntegral, RefinementWithinReportedBound) {
  const Mat d = mat2(0.7, 0.2, 0.0, 0.7);
  const std::vector<double> coords = {0.25, 0.5, 1.0};
  const ofbs::CovarianceEngine coarse(KernelSpec(OperatorExponent(d), 16), coords);
  const ofbs::CovarianceEngine fine(KernelSpec(OperatorExponent(d), 32), coords);
  for (double t : coords)
    for (double t2 : coords) {
      const auto c = coarse.block(t, 1.0, t2, 0.5);
      const auto f = fine.block(t, 1.0, t2, 0.5);
      EXPECT_LE((c.value - f.value).cwiseAbs().maxCoeff(), c.error_bound);
      EXPECT_LE(c.error_bound, ofbs::CovarianceEngine::kRelTol * c.value.cwiseAbs().maxCoeff());
    }
}

TEST(CovIntegral, EntryProductScalar) {
  const double h = 0.75;
  const std::vector<double> coords = {0.5, 1.0};
  const ofbs::CovarianceEngine engine(scalar_spec(h), coords);
  const auto e = engine.entry_product(1.0, 1.0, 0, 0);
  EXPECT_NEAR(e.value, 1.0 / 1.25, 1e-12);
  EXPECT_NEAR(engine.entry_product(0.5, 1.0, 0, 0).value, oracle::scalar_pair_integral(h / 2 - 0.25, 0.5, 1.0), 1e-10);
}
