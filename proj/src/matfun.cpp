#include "ofbs/matfun.h"

#include <Eigen/LU>
#include <Eigen/SVD>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <sstream>

namespace ofbs {
namespace {

constexpr int kPadeDegree = 6;
constexpr double kScalingThreshold = 0.5;  // ||X||_1 after scaling

void require_finite(const Mat& a, const char* what) {
  if (a.rows() != a.cols()) throw PreconditionError(std::string(what) + ": matrix must be square");
  if (!a.allFinite()) throw PreconditionError(std::string(what) + ": non-finite entries");
}

std::array<double, kPadeDegree + 1> pade_coefficients() {
  // c_k = (2p - k)! p! / ((2p)! k! (p - k)!)
  std::array<double, kPadeDegree + 1> c{};
  c[0] = 1.0;
  for (int k = 1; k <= kPadeDegree; ++k)
    c[k] = c[k - 1] * double(kPadeDegree - k + 1) / (double(k) * double(2 * kPadeDegree - k + 1));
  return c;
}

double norm1(const Mat& a) { return a.cwiseAbs().colwise().sum().maxCoeff(); }

}  // namespace

Mat mat_exp(const Mat& a) {
  require_finite(a, "mat_exp");
  const Eigen::Index n = a.rows();
  if (n == 0) return a;

  static const auto c = pade_coefficients();
  const double nrm = norm1(a);
  int squarings = 0;
  if (nrm > kScalingThreshold)
    squarings = static_cast<int>(std::ceil(std::log2(nrm / kScalingThreshold)));
  const Mat x = a * std::ldexp(1.0, -squarings);

  const Mat id = Mat::Identity(n, n);
  Mat even = c[0] * id;
  Mat odd = c[1] * x;
  Mat xk = x;
  for (int k = 2; k <= kPadeDegree; ++k) {
    xk = xk * x;
    if (k % 2 == 0)
      even += c[k] * xk;
    else
      odd += c[k] * xk;
  }
  const Mat num = even + odd;
  const Mat den = even - odd;
  Mat result = den.partialPivLu().solve(num);
  for (int s = 0; s < squarings; ++s) result = result * result;
  return result;
}

Mat mat_power(double t, const Mat& a) {
  require_finite(a, "mat_power");
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("mat_power: t must be finite and >= 0");
  const Eigen::Index n = a.rows();
  if (t == 1.0) return Mat::Identity(n, n);
  if (t == 0.0) {
    if (n > 0 && spectrum_bounds(a).lambda <= 0.0)
      throw DomainError("mat_power: t = 0 requires a spectrum with positive real parts");
    return Mat::Zero(n, n);
  }
  return mat_exp(std::log(t) * a);
}

namespace {

// Reduction to upper Hessenberg form by stabilised elementary similarity transforms.
// h is (n+1) x (n+1) with 1-based indexing.
void hessenberg(std::vector<std::vector<double>>& h, int n) {
  for (int m = 2; m < n; ++m) {
    double x = 0.0;
    int piv = m;
    for (int j = m; j <= n; ++j) {
      if (std::abs(h[j][m - 1]) > std::abs(x)) {
        x = h[j][m - 1];
        piv = j;
      }
    }
    if (piv != m) {
      for (int j = m - 1; j <= n; ++j) std::swap(h[piv][j], h[m][j]);
      for (int j = 1; j <= n; ++j) std::swap(h[j][piv], h[j][m]);
    }
    if (x != 0.0) {
      for (int i = m + 1; i <= n; ++i) {
        double y = h[i][m - 1];
        if (y != 0.0) {
          y /= x;
          h[i][m - 1] = 0.0;
          for (int j = m; j <= n; ++j) h[i][j] -= y * h[m][j];
          for (int j = 1; j <= n; ++j) h[j][m] += y * h[j][i];
        }
      }
    }
  }
}

double sign_of(double a, double b) { return b >= 0.0 ? std::abs(a) : -std::abs(a); }

// Francis double-shift QR on an upper Hessenberg matrix (1-based), eigenvalues into wr/wi.
void hessenberg_qr(std::vector<std::vector<double>>& a, int n, std::vector<double>& wr,
                   std::vector<double>& wi) {
  constexpr int kMaxIterations = 60;
  double anorm = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = std::max(i - 1, 1); j <= n; ++j) anorm += std::abs(a[i][j]);

  int nn = n;
  double t = 0.0;
  double p = 0, q = 0, r = 0, s = 0, w = 0, x = 0, y = 0, z = 0;
  while (nn >= 1) {
    int its = 0;
    int l = 0;
    do {
      for (l = nn; l >= 2; --l) {
        s = std::abs(a[l - 1][l - 1]) + std::abs(a[l][l]);
        if (s == 0.0) s = anorm;
        if (std::abs(a[l][l - 1]) + s == s) {
          a[l][l - 1] = 0.0;
          break;
        }
      }
      x = a[nn][nn];
      if (l == nn) {
        wr[nn] = x + t;
        wi[nn--] = 0.0;
      } else {
        y = a[nn - 1][nn - 1];
        w = a[nn][nn - 1] * a[nn - 1][nn];
        if (l == nn - 1) {
          p = 0.5 * (y - x);
          q = p * p + w;
          z = std::sqrt(std::abs(q));
          x += t;
          if (q >= 0.0) {
            z = p + sign_of(z, p);
            wr[nn - 1] = wr[nn] = x + z;
            if (z != 0.0) wr[nn] = x - w / z;
            wi[nn - 1] = wi[nn] = 0.0;
          } else {
            wr[nn - 1] = wr[nn] = x + p;
            wi[nn - 1] = -(wi[nn] = z);
          }
          nn -= 2;
        } else {
          if (its == kMaxIterations) {
            std::ostringstream msg;
            msg << "eigenvalues: QR iteration did not converge for eigenvalue index " << nn
                << " after " << its << " iterations (subdiagonal " << a[nn][nn - 1] << ")";
            throw NumericError(msg.str(), x + t, std::abs(a[nn][nn - 1]));
          }
          if (its == 10 || its == 20 || its == 40) {
            // exceptional shift
            t += x;
            for (int i = 1; i <= nn; ++i) a[i][i] -= x;
            s = std::abs(a[nn][nn - 1]) + std::abs(a[nn - 1][nn - 2]);
            y = x = 0.75 * s;
            w = -0.4375 * s * s;
          }
          ++its;
          int m = nn - 2;
          for (; m >= l; --m) {
            z = a[m][m];
            r = x - z;
            s = y - z;
            p = (r * s - w) / a[m + 1][m] + a[m][m + 1];
            q = a[m + 1][m + 1] - z - r - s;
            r = a[m + 2][m + 1];
            s = std::abs(p) + std::abs(q) + std::abs(r);
            p /= s;
            q /= s;
            r /= s;
            if (m == l) break;
            const double u = std::abs(a[m][m - 1]) * (std::abs(q) + std::abs(r));
            const double v =
                std::abs(p) * (std::abs(a[m - 1][m - 1]) + std::abs(z) + std::abs(a[m + 1][m + 1]));
            if (u + v == v) break;
          }
          for (int i = m + 2; i <= nn; ++i) {
            a[i][i - 2] = 0.0;
            if (i != m + 2) a[i][i - 3] = 0.0;
          }
          for (int k = m; k <= nn - 1; ++k) {
            if (k != m) {
              p = a[k][k - 1];
              q = a[k + 1][k - 1];
              r = 0.0;
              if (k != nn - 1) r = a[k + 2][k - 1];
              if ((x = std::abs(p) + std::abs(q) + std::abs(r)) != 0.0) {
                p /= x;
                q /= x;
                r /= x;
              }
            }
            if ((s = sign_of(std::sqrt(p * p + q * q + r * r), p)) != 0.0) {
              if (k == m) {
                if (l != m) a[k][k - 1] = -a[k][k - 1];
              } else {
                a[k][k - 1] = -s * x;
              }
              p += s;
              x = p / s;
              y = q / s;
              z = r / s;
              q /= p;
              r /= p;
              for (int j = k; j <= nn; ++j) {
                p = a[k][j] + q * a[k + 1][j];
                if (k != nn - 1) {
                  p += r * a[k + 2][j];
                  a[k + 2][j] -= p * z;
                }
                a[k + 1][j] -= p * y;
                a[k][j] -= p * x;
              }
              const int mmin = nn < k + 3 ? nn : k + 3;
              for (int i = l; i <= mmin; ++i) {
                p = x * a[i][k] + y * a[i][k + 1];
                if (k != nn - 1) {
                  p += z * a[i][k + 2];
                  a[i][k + 2] -= p * r;
                }
                a[i][k + 1] -= p * q;
                a[i][k] -= p;
              }
            }
          }
        }
      }
    } while (l < nn - 1);
  }
}

}  // namespace

std::vector<std::complex<double>> eigenvalues(const Mat& a) {
  require_finite(a, "eigenvalues");
  const int n = static_cast<int>(a.rows());
  std::vector<std::complex<double>> out;
  if (n == 0) return out;
  if (n == 1) return {std::complex<double>(a(0, 0), 0.0)};
  std::vector<std::vector<double>> h(n + 1, std::vector<double>(n + 1, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h[i + 1][j + 1] = a(i, j);
  hessenberg(h, n);
  std::vector<double> wr(n + 1, 0.0), wi(n + 1, 0.0);
  hessenberg_qr(h, n, wr, wi);
  out.reserve(n);
  for (int i = 1; i <= n; ++i) out.emplace_back(wr[i], wi[i]);
  return out;
}

SpectrumBounds spectrum_bounds(const Mat& a) {
  const auto ev = eigenvalues(a);
  if (ev.empty()) throw PreconditionError("spectrum_bounds: empty matrix");
  SpectrumBounds b{ev.front().real(), ev.front().real()};
  for (const auto& e : ev) {
    b.lambda = std::min(b.lambda, e.real());
    b.Lambda = std::max(b.Lambda, e.real());
  }
  return b;
}

double operator_norm(const Mat& a) {
  require_finite(a, "operator_norm");
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues()(0);
}

OperatorExponent::OperatorExponent(const Mat& d_matrix) : d_(d_matrix) {
  if (d_.rows() < 1 || d_.rows() != d_.cols() || d_.rows() > kMaxDim)
    throw PreconditionError("OperatorExponent: D must be square with 1 <= d <= " +
                            std::to_string(kMaxDim));
  require_finite(d_, "OperatorExponent");
  bounds_ = spectrum_bounds(d_);
  if (!(bounds_.lambda > 0.5 && bounds_.Lambda < 1.0)) {
    std::ostringstream msg;
    msg << "OperatorExponent: spectrum real parts must lie in (1/2, 1); got lambda_D = "
        << bounds_.lambda << ", Lambda_D = " << bounds_.Lambda;
    throw DomainError(msg.str());
  }
  const Eigen::Index n = d_.rows();
  a_ = 0.5 * d_ - 0.25 * Mat::Identity(n, n);
}

std::uint64_t OperatorExponent::hash() const noexcept {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* p, std::size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  const std::int32_t d = dim();
  mix(&d, sizeof d);
  for (Eigen::Index i = 0; i < d_.rows(); ++i)
    for (Eigen::Index j = 0; j < d_.cols(); ++j) {
      const double v = d_(i, j) == 0.0 ? 0.0 : d_(i, j);  // fold -0.0
      mix(&v, sizeof v);
    }
  return h;
}

}  // namespace ofbs
