#include "ofbs/mdgen.h"

#include "ofbs/kernel.h"
#include "ofbs/rng.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <tuple>

namespace ofbs {
namespace {

constexpr std::uint64_t kRowStream = 1ULL << 32;
constexpr std::uint64_t kColStream = 2ULL << 32;

void check_shape(int n, int d) {
  if (n < 1) throw PreconditionError("martingale-difference array: n must be >= 1");
  if (d < 1 || d > kMaxDim) throw PreconditionError("martingale-difference array: d out of range");
}

}  // namespace

std::string to_string(Generator g) {
  switch (g) {
    case Generator::rademacher: return "rademacher";
    case Generator::product_sign: return "product_sign";
    case Generator::external: return "external";
  }
  return "unknown";
}

Generator parse_generator(const std::string& name) {
  if (name == "rademacher") return Generator::rademacher;
  if (name == "product_sign") return Generator::product_sign;
  throw ConfigError("unknown generator '" + name + "' (expected rademacher or product_sign)");
}

MDArray::MDArray(int n, int d, std::vector<double> xi, Generator generator, std::uint64_t seed,
                 double c_bound)
    : n_(n), d_(d), xi_(std::move(xi)), generator_(generator), seed_(seed), c_bound_(c_bound) {
  check_shape(n, d);
  if (xi_.size() != std::size_t(n) * n * d)
    throw PreconditionError("MDArray: value count does not match n*n*d");
  if (!(c_bound >= 1.0)) throw PreconditionError("MDArray: C_bound must be >= 1");
}

MDArray gen_rademacher(int n, int d, std::uint64_t seed) {
  check_shape(n, d);
  std::vector<double> xi(std::size_t(n) * n * d);
  const double scale = 1.0 / n;
  for (int k = 0; k < d; ++k) {
    const CounterStream stream(seed, std::uint64_t(k));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        xi[(std::size_t(i) * n + j) * d + k] = stream.sign(std::uint64_t(i) * n + j) * scale;
  }
  return MDArray(n, d, std::move(xi), Generator::rademacher, seed, 1.0);
}

void product_sign_streams(int n, int d, std::uint64_t seed, std::vector<int>& row_signs,
                          std::vector<int>& col_signs) {
  check_shape(n, d);
  row_signs.assign(std::size_t(n) * d, 0);
  col_signs.assign(std::size_t(n) * d, 0);
  for (int k = 0; k < d; ++k) {
    const CounterStream rows(seed, kRowStream + k);
    const CounterStream cols(seed, kColStream + k);
    for (int i = 0; i < n; ++i) {
      row_signs[std::size_t(i) * d + k] = rows.sign(i);
      col_signs[std::size_t(i) * d + k] = cols.sign(i);
    }
  }
}

MDArray product_sign_from(int n, int d, const std::vector<int>& row_signs,
                          const std::vector<int>& col_signs, std::uint64_t seed) {
  check_shape(n, d);
  if (row_signs.size() != std::size_t(n) * d || col_signs.size() != std::size_t(n) * d)
    throw PreconditionError("product_sign_from: sign vectors must have n*d entries");
  std::vector<double> xi(std::size_t(n) * n * d);
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < d; ++k) {
        const int r = row_signs[std::size_t(i) * d + k];
        const int c = col_signs[std::size_t(j) * d + k];
        if ((r != 1 && r != -1) || (c != 1 && c != -1))
          throw PreconditionError("product_sign_from: signs must be +1 or -1");
        xi[(std::size_t(i) * n + j) * d + k] = r * c * scale;
      }
  return MDArray(n, d, std::move(xi), Generator::product_sign, seed, 1.0);
}

MDArray gen_product_sign(int n, int d, std::uint64_t seed) {
  std::vector<int> rows, cols;
  product_sign_streams(n, d, seed, rows, cols);
  return product_sign_from(n, d, rows, cols, seed);
}

MDArray generate(Generator g, int n, int d, std::uint64_t seed) {
  switch (g) {
    case Generator::rademacher: return gen_rademacher(n, d, seed);
    case Generator::product_sign: return gen_product_sign(n, d, seed);
    case Generator::external: break;
  }
  throw PreconditionError("generate: external arrays cannot be generated");
}

ConditionReport check_conditions(const MDArray& arr) {
  ConditionReport rep;
  const int n = arr.n();
  rep.min_scaled_sq = std::numeric_limits<double>::infinity();
  rep.max_scaled_sq = 0.0;
  for (int i = 1; i <= n; ++i)
    for (int j = 1; j <= n; ++j)
      for (int k = 1; k <= arr.dim(); ++k) {
        const double scaled = n * arr.xi(i, j, k);
        const double a = std::abs(scaled);
        rep.max_scaled_abs = std::max(rep.max_scaled_abs, a);
        rep.min_scaled_sq = std::min(rep.min_scaled_sq, scaled * scaled);
        rep.max_scaled_sq = std::max(rep.max_scaled_sq, scaled * scaled);
        if (a > arr.c_bound() * (1.0 + 4e-16)) rep.bound_violations.push_back({i, j, k, arr.xi(i, j, k)});
      }
  rep.c_slack = arr.c_bound() - rep.max_scaled_abs;
  rep.martingale = arr.generator() == Generator::external ? MartingaleStatus::unverified
                                                          : MartingaleStatus::certified;
  return rep;
}

Vec partial_sum_field(const MDArray& arr, double t, double s) {
  const int n = arr.n();
  const int d = arr.dim();
  Vec out = Vec::Zero(d);
  const int ti = std::min(n, lattice_floor(n, t));
  const int sj = std::min(n, lattice_floor(n, s));
  for (int i = 1; i <= ti; ++i)
    for (int j = 1; j <= sj; ++j) {
      const double* e = arr.eta(i, j);
      for (int k = 0; k < d; ++k) out(k) += e[k];
    }
  return out;
}

void write_md_csv(std::ostream& os, const MDArray& arr) {
  os << "i,j,k,value\n";
  os << std::setprecision(17);
  for (int i = 1; i <= arr.n(); ++i)
    for (int j = 1; j <= arr.n(); ++j)
      for (int k = 1; k <= arr.dim(); ++k) os << i << ',' << j << ',' << k << ',' << arr.xi(i, j, k) << '\n';
}

MDArray read_md_csv(std::istream& is, double c_bound) {
  std::string line;
  if (!std::getline(is, line)) throw ConfigError("martingale CSV: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "i,j,k,value") throw ConfigError("martingale CSV: expected header 'i,j,k,value'");
  std::map<std::tuple<int, int, int>, double> entries;
  int n = 0, d = 0;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    int i = 0, j = 0, k = 0;
    double v = 0.0;
    char c1 = 0, c2 = 0, c3 = 0;
    if (!(ls >> i >> c1 >> j >> c2 >> k >> c3 >> v) || c1 != ',' || c2 != ',' || c3 != ',' ||
        i < 1 || j < 1 || k < 1 || !std::isfinite(v))
      throw ConfigError("martingale CSV: malformed row at line " + std::to_string(lineno));
    if (!entries.emplace(std::make_tuple(i, j, k), v).second)
      throw ConfigError("martingale CSV: duplicate entry at line " + std::to_string(lineno));
    n = std::max({n, i, j});
    d = std::max(d, k);
  }
  if (n == 0) throw ConfigError("martingale CSV: no entries");
  if (entries.size() != std::size_t(n) * n * d)
    throw ConfigError("martingale CSV: array is incomplete (expected n*n*d entries)");
  std::vector<double> xi(std::size_t(n) * n * d);
  for (const auto& [key, v] : entries) {
    const auto [i, j, k] = key;
    xi[(std::size_t(i - 1) * n + (j - 1)) * d + (k - 1)] = v;
  }
  return MDArray(n, d, std::move(xi), Generator::external, 0, c_bound);
}

}  // namespace ofbs
