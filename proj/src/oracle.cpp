#include "ofbs/oracle.h"

#include "ofbs/rng.h"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <thread>

namespace ofbs {
namespace {

std::vector<double> coords_of(const std::vector<Point>& points) {
  std::vector<double> xs;
  for (const Point& p : points) {
    xs.push_back(p.t);
    xs.push_back(p.s);
  }
  return xs;
}

void put_block(Eigen::MatrixXd& m, std::size_t k, std::size_t l, int d, const Mat& b) {
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      m(k * d + r, l * d + c) = b(r, c);
      m(l * d + c, k * d + r) = b(r, c);
    }
}

template <class Fn>
void run_chunks(std::int64_t count, int jobs, Fn&& fn) {
  const int workers = static_cast<int>(std::clamp<std::int64_t>(jobs, 1, std::max<std::int64_t>(count, 1)));
  if (workers == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&, w] { fn(count * w / workers, count * (w + 1) / workers); });
}

}  // namespace

Mat CovarianceTensor::block(std::size_t k, std::size_t l) const {
  if (k >= points.size() || l >= points.size()) throw PreconditionError("CovarianceTensor: index out of range");
  Mat b(d, d);
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) b(r, c) = matrix(k * d + r, l * d + c);
  return b;
}

CovarianceTensor quadrature_covariance(const std::vector<Point>& points, const KernelSpec& spec) {
  const std::vector<double> xs = coords_of(points);
  CovarianceEngine engine(spec, xs);
  CovarianceTensor out;
  out.points = points;
  out.d = spec.dim();
  out.provenance = CovarianceTensor::Provenance::quadrature;
  out.quad_order = spec.quad_order;
  const std::size_t q = points.size();
  out.matrix = Eigen::MatrixXd::Zero(q * out.d, q * out.d);
  for (std::size_t k = 0; k < q; ++k)
    for (std::size_t l = k; l < q; ++l) {
      const CovBlock b = engine.block(points[k].t, points[k].s, points[l].t, points[l].s);
      put_block(out.matrix, k, l, out.d, b.value);
      out.max_error_bound = std::max(out.max_error_bound, b.error_bound);
    }
  return out;
}

CovarianceTensor exact_sum_covariance(const XnSimulator& sim) {
  CovarianceTensor out;
  out.points = sim.points();
  out.d = sim.dim();
  out.provenance = CovarianceTensor::Provenance::exact_sum;
  out.n = sim.n();
  const std::size_t q = out.points.size();
  out.matrix = Eigen::MatrixXd::Zero(q * out.d, q * out.d);
  for (std::size_t k = 0; k < q; ++k)
    for (std::size_t l = k; l < q; ++l) put_block(out.matrix, k, l, out.d, sim.exact_covariance(k, l));
  return out;
}

CovarianceTensor empirical_covariance(const Ensemble& ens) {
  if (ens.replicates < 2) throw PreconditionError("empirical_covariance: need at least 2 replicates");
  const std::size_t w = ens.stride();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(w);
  for (std::int64_t r = 0; r < ens.replicates; ++r)
    mean += Eigen::Map<const Eigen::VectorXd>(ens.replicate(r), w);
  mean /= double(ens.replicates);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(w, w);
  Eigen::VectorXd x(w);
  for (std::int64_t r = 0; r < ens.replicates; ++r) {
    x = Eigen::Map<const Eigen::VectorXd>(ens.replicate(r), w) - mean;
    acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
  }
  CovarianceTensor out;
  out.points = ens.points;
  out.d = ens.d;
  out.provenance = CovarianceTensor::Provenance::empirical;
  out.replicates = ens.replicates;
  out.matrix = acc.selfadjointView<Eigen::Lower>();
  out.matrix /= double(ens.replicates - 1);
  return out;
}

OracleModel oracle_from_covariance(const CovarianceTensor& cov) {
  OracleModel model;
  model.points = cov.points;
  model.d = cov.d;
  model.sigma = cov.matrix;
  model.max_error_bound = cov.max_error_bound;
  const Eigen::Index dim = model.sigma.rows();
  if (dim == 0) {
    model.factor = Eigen::MatrixXd(0, 0);
    return model;
  }
  const double max_diag = model.sigma.diagonal().maxCoeff();
  constexpr std::array<double, 4> ladder = {0.0, 1e-14, 1e-12, 1e-10};
  for (double rel : ladder) {
    const double jitter = rel * max_diag;
    Eigen::MatrixXd shifted = model.sigma;
    shifted.diagonal().array() += jitter;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(shifted);
    if (ldlt.info() != Eigen::Success) continue;
    const Eigen::VectorXd dvals = ldlt.vectorD();
    if ((dvals.array() < 0.0).any()) continue;
    Eigen::MatrixXd l = ldlt.matrixL();
    l = l * dvals.cwiseSqrt().asDiagonal();
    Eigen::MatrixXd f = ldlt.transpositionsP().transpose() * l;
    const double resid = (f * f.transpose() - model.sigma).cwiseAbs().maxCoeff();
    if (resid > std::max(1e-10, 10.0 * jitter)) continue;
    model.factor = std::move(f);
    model.jitter = jitter;
    return model;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.sigma, Eigen::EigenvaluesOnly);
  const double smallest = eig.eigenvalues().minCoeff();
  std::ostringstream msg;
  msg << "oracle covariance is indefinite beyond the jitter budget: smallest eigenvalue " << smallest;
  throw NumericError(msg.str(), smallest, 1e-10 * max_diag);
}

OracleModel build_oracle(const std::vector<Point>& points, const KernelSpec& spec) {
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (!(points[k].t > 0.0 && points[k].s > 0.0) || !std::isfinite(points[k].t) || !std::isfinite(points[k].s))
      throw PreconditionError("build_oracle: points must have positive finite coordinates");
    for (std::size_t l = 0; l < k; ++l)
      if (points[k] == points[l]) throw PreconditionError("build_oracle: duplicate point");
  }
  return oracle_from_covariance(quadrature_covariance(points, spec));
}

Ensemble sample_oracle(const OracleModel& model, std::uint64_t seed, std::int64_t replicates, int jobs) {
  return sample_oracle(model, model.points, seed, replicates, jobs);
}

Ensemble sample_oracle(const OracleModel& model, const std::vector<Point>& points, std::uint64_t seed,
                       std::int64_t replicates, int jobs) {
  if (replicates < 1) throw PreconditionError("sample_oracle: replicate count must be >= 1");
  // slot[p] = model index, or -1 for an axis point
  std::vector<std::ptrdiff_t> slot(points.size(), -1);
  for (std::size_t p = 0; p < points.size(); ++p) {
    if (points[p].t == 0.0 || points[p].s == 0.0) continue;
    auto it = std::find(model.points.begin(), model.points.end(), points[p]);
    if (it == model.points.end()) throw PreconditionError("sample_oracle: point not covered by the model");
    slot[p] = it - model.points.begin();
  }
  Ensemble ens;
  ens.points = points;
  ens.d = model.d;
  ens.replicates = replicates;
  ens.seed = seed;
  ens.values.assign(std::size_t(replicates) * ens.stride(), 0.0);
  const Eigen::Index dim = model.factor.rows();
  const int d = model.d;
  run_chunks(replicates, jobs, [&](std::int64_t begin, std::int64_t end) {
    Eigen::VectorXd z(dim), x(dim);
    for (std::int64_t r = begin; r < end; ++r) {
      const CounterStream stream(derive_seed(seed, std::uint64_t(r)), 0);
      for (Eigen::Index i = 0; i < dim; ++i) z(i) = stream.normal(std::uint64_t(i));
      x.noalias() = model.factor * z;
      double* out = ens.values.data() + std::size_t(r) * ens.stride();
      for (std::size_t p = 0; p < points.size(); ++p)
        if (slot[p] >= 0)
          for (int k = 0; k < d; ++k) out[p * d + k] = x(slot[p] * d + k);
    }
  });
  return ens;
}

OracleModel build_grid_oracle(int m, const KernelSpec& spec) {
  std::vector<Point> inner;
  for (const Point& p : grid_points(m))
    if (p.t > 0.0 && p.s > 0.0) inner.push_back(p);
  return build_oracle(inner, spec);
}

}  // namespace ofbs
