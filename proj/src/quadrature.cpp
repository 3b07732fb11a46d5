#include "ofbs/quadrature.h"

#include "ofbs/core.h"

#include <array>
#include <cmath>
#include <numbers>

namespace ofbs {
namespace {

void legendre(int n, double x, double& pn, double& dpn) {
  double p0 = 1.0, p1 = x;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  pn = p1;
  dpn = n * (x * p1 - p0) / (x * x - 1.0);
}

GaussLegendreRule build_rule(int n) {
  GaussLegendreRule rule;
  if (n == 1) {
    rule.nodes = {0.0};
    rule.weights = {2.0};
    return rule;
  }
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton on P_n from the Tricomi estimate of the i-th largest root
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double pn = 0.0, dpn = 0.0;
    for (int it = 0; it < 100; ++it) {
      legendre(n, x, pn, dpn);
      const double dx = pn / dpn;
      x -= dx;
      if (std::abs(dx) <= 1e-16) break;
    }
    legendre(n, x, pn, dpn);
    const double w = 2.0 / ((1.0 - x * x) * dpn * dpn);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

}  // namespace

const GaussLegendreRule& gauss_legendre(int order) {
  static const std::array<GaussLegendreRule, kMaxRuleOrder + 1> rules = [] {
    std::array<GaussLegendreRule, kMaxRuleOrder + 1> r{};
    for (int n = 1; n <= kMaxRuleOrder; ++n) r[n] = build_rule(n);
    return r;
  }();
  if (order < 1 || order > kMaxRuleOrder)
    throw PreconditionError("gauss_legendre: order out of range [1, 128]");
  return rules[order];
}

void append_gauss(QuadNodes& out, double lo, double hi, int order) {
  const auto& rule = gauss_legendre(order);
  const double half = 0.5 * (hi - lo);
  const double mid = 0.5 * (hi + lo);
  for (int k = 0; k < order; ++k) {
    out.x.push_back(mid + half * rule.nodes[k]);
    out.w.push_back(half * rule.weights[k]);
  }
}

void append_graded(QuadNodes& out, double lo, double hi, int order, int depth, bool toward_hi) {
  const double len = hi - lo;
  if (!(len > 0.0)) return;
  // panel k (k = 0..depth-1) spans distances [len 2^-(k+1), len 2^-k] from the graded edge;
  // the innermost panel spans [0, len 2^-depth]
  for (int k = 0; k <= depth; ++k) {
    const double far = std::ldexp(len, -k);
    const double near = k == depth ? 0.0 : std::ldexp(len, -(k + 1));
    if (toward_hi)
      append_gauss(out, hi - far, hi - near, order);
    else
      append_gauss(out, lo + near, lo + far, order);
  }
}

int graded_depth(double edge_exponent) {
  const double e = edge_exponent > 0.0 ? edge_exponent : 0.0;
  return static_cast<int>(std::ceil(53.0 / (1.0 + e))) + 2;
}

}  // namespace ofbs
