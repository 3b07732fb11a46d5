#pragma once

#include <vector>

namespace ofbs {

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr int kMaxRuleOrder = 128;

/// Cached rule for 1 <= order <= kMaxRuleOrder.
const GaussLegendreRule& gauss_legendre(int order);

/// A flat list of quadrature nodes and weights.
struct QuadNodes {
  std::vector<double> x;
  std::vector<double> w;

  std::size_t size() const noexcept { return x.size(); }
};

/// Appends the mapped `order`-point rule on [lo, hi].
void append_gauss(QuadNodes& out, double lo, double hi, int order);

/// Appends a geometrically graded rule on [lo, hi]: panels halve in width toward the
/// graded end (hi when toward_hi, lo otherwise), `depth` halvings, `order` points per panel.
/// Intended for integrands behaving like |x - edge|^alpha near the graded end.
void append_graded(QuadNodes& out, double lo, double hi, int order, int depth, bool toward_hi);

/// Number of halvings after which the innermost panel of a graded rule carries a
/// relative share below double epsilon for an integrand ~ |x - edge|^edge_exponent.
int graded_depth(double edge_exponent);

}  // namespace ofbs
