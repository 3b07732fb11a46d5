#include "config.h"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace ofbs::cli {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, sep)) out.push_back(trim(cur));
  return out;
}

std::vector<std::string> words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

double to_double(const std::string& key, const std::string& w) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || p != w.data() + w.size() || !std::isfinite(v))
    throw ConfigError("config: " + key + ": '" + w + "' is not a finite number");
  return v;
}

template <class Int>
Int to_int(const std::string& key, const std::string& w) {
  Int v = 0;
  const auto [p, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
  if (ec != std::errc() || p != w.data() + w.size())
    throw ConfigError("config: " + key + ": '" + w + "' is not an integer");
  return v;
}

std::vector<double> doubles(const std::string& key, const std::string& value) {
  std::vector<double> out;
  for (const std::string& w : words(value)) out.push_back(to_double(key, w));
  return out;
}

double one_double(const std::string& key, const std::string& value) {
  const auto v = doubles(key, value);
  if (v.size() != 1) throw ConfigError("config: " + key + " expects one number");
  return v.front();
}

template <class Int>
Int one_int(const std::string& key, const std::string& value) {
  const auto w = words(value);
  if (w.size() != 1) throw ConfigError("config: " + key + " expects one integer");
  return to_int<Int>(key, w.front());
}

Point to_point(const std::string& key, const std::string& text) {
  const auto v = doubles(key, text);
  if (v.size() != 2) throw ConfigError("config: " + key + ": each point needs exactly two coordinates 't s'");
  return {v[0], v[1]};
}

std::vector<Point> point_list(const std::string& key, const std::string& value) {
  std::vector<Point> out;
  if (trim(value).empty()) return out;
  for (const std::string& item : split(value, ';')) {
    if (item.empty()) continue;
    out.push_back(to_point(key, item));
  }
  return out;
}

void check_unit(const std::string& key, Point p) {
  if (p.t < 0.0 || p.t > 1.0 || p.s < 0.0 || p.s > 1.0)
    throw ConfigError("config: " + key + ": points must lie in [0,1]^2");
}

void check_tol(const std::string& key, double v) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError("config: " + key + " must be a finite number >= 0");
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string points_text(const std::vector<Point>& pts) {
  std::string out;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (k) out += "; ";
    out += num(pts[k].t) + " " + num(pts[k].s);
  }
  return out;
}

template <class T>
std::string list_text(const std::vector<T>& v) {
  std::string out;
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (k) out += ' ';
    if constexpr (std::is_floating_point_v<T>)
      out += num(v[k]);
    else
      out += std::to_string(v[k]);
  }
  return out;
}

std::vector<Point> default_points() {
  std::vector<Point> pts;
  for (int p = 1; p <= 4; ++p)
    for (int q = 1; q <= 4; ++q) pts.push_back({p / 4.0, q / 4.0});
  return pts;
}

}  // namespace

KernelSpec SimConfig::kernel_spec() const { return KernelSpec(OperatorExponent(D), quad_order, staircase); }

std::string SimConfig::canonical() const {
  std::ostringstream os;
  os << "dimension = " << d << '\n';
  for (int r = 0; r < d; ++r) {
    os << "exponent.row" << r << " =";
    for (int c = 0; c < d; ++c) os << ' ' << num(D(r, c));
    os << '\n';
  }
  os << "n = " << n << '\n'
     << "grid_m = " << grid_m << '\n'
     << "replicates = " << replicates << '\n'
     << "seed = " << seed << '\n'
     << "generator = " << to_string(generator) << '\n'
     << "quad_order = " << quad_order << '\n'
     << "staircase = " << (staircase ? "true" : "false") << '\n'
     << "lindeberg.epsilon = " << num(epsilon) << '\n'
     << "selfsim.c = " << list_text(c_list) << '\n'
     << "points = " << points_text(points) << '\n'
     << "verify.n_list = " << list_text(n_list) << '\n'
     << "verify.holder_sides = " << list_text(holder_sides) << '\n'
     << "fdd.points = " << points_text(fdd.points) << '\n'
     << "fdd.a = " << list_text(fdd.a) << '\n'
     << "fdd.b = " << list_text(std::vector<double>(fdd.b.data(), fdd.b.data() + fdd.b.size())) << '\n'
     << "fdd.n = " << fdd_n << '\n'
     << "fdd.replicates = " << fdd_replicates << '\n'
     << "fdd.ks_level = " << num(ks_level) << '\n'
     << "qv.point_k = " << num(qv_k.t) << ' ' << num(qv_k.s) << '\n'
     << "qv.point_l = " << num(qv_l.t) << ' ' << num(qv_l.s) << '\n'
     << "tolerance.cov_error = " << num(tol.cov_error) << '\n'
     << "tolerance.selfsim = " << num(tol.selfsim) << '\n'
     << "tolerance.holder = " << num(tol.holder) << '\n'
     << "tolerance.qv_factor = " << num(tol.qv_factor) << '\n'
     << "tolerance.mc_sigmas = " << num(tol.mc_sigmas) << '\n';
  return os.str();
}

std::string SimConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SimConfig parse_config(std::istream& is) {
  std::map<std::string, std::string> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    if (!kv.emplace(key, trim(line.substr(eq + 1))).second)
      throw ConfigError("config: line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }

  SimConfig cfg;
  auto take = [&](const std::string& key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };

  if (auto v = take("dimension")) cfg.d = one_int<int>("dimension", *v);
  if (cfg.d < 1 || cfg.d > kMaxDim) throw ConfigError("config: dimension must lie in 1.." + std::to_string(kMaxDim));
  cfg.D = Mat(cfg.d, cfg.d);
  for (int r = 0; r < cfg.d; ++r) {
    const std::string key = "exponent.row" + std::to_string(r);
    auto v = take(key);
    if (!v) throw ConfigError("config: missing " + key);
    const auto row = doubles(key, *v);
    if (int(row.size()) != cfg.d) throw ConfigError("config: " + key + " needs " + std::to_string(cfg.d) + " entries");
    for (int c = 0; c < cfg.d; ++c) cfg.D(r, c) = row[c];
  }
  // spectrum gate before anything else is looked at
  [[maybe_unused]] const OperatorExponent gate(cfg.D);

  if (auto v = take("n")) cfg.n = one_int<int>("n", *v);
  if (auto v = take("grid_m")) cfg.grid_m = one_int<int>("grid_m", *v);
  if (auto v = take("replicates")) cfg.replicates = one_int<std::int64_t>("replicates", *v);
  if (auto v = take("seed")) cfg.seed = one_int<std::uint64_t>("seed", *v);
  if (auto v = take("generator")) {
    cfg.generator = parse_generator(trim(*v));
    if (cfg.generator == Generator::external) throw ConfigError("config: generator must be rademacher or product_sign");
  }
  if (auto v = take("quad_order")) cfg.quad_order = one_int<int>("quad_order", *v);
  if (auto v = take("staircase")) {
    if (*v == "true")
      cfg.staircase = true;
    else if (*v == "false")
      cfg.staircase = false;
    else
      throw ConfigError("config: staircase must be true or false");
  }
  if (auto v = take("lindeberg.epsilon")) cfg.epsilon = one_double("lindeberg.epsilon", *v);
  if (auto v = take("selfsim.c")) cfg.c_list = doubles("selfsim.c", *v);
  if (auto v = take("points"))
    cfg.points = point_list("points", *v);
  else
    cfg.points = default_points();
  if (auto v = take("verify.n_list")) {
    cfg.n_list.clear();
    for (const std::string& w : words(*v)) cfg.n_list.push_back(to_int<int>("verify.n_list", w));
  }
  if (auto v = take("verify.holder_sides")) cfg.holder_sides = doubles("verify.holder_sides", *v);

  if (auto v = take("fdd.points"))
    cfg.fdd.points = point_list("fdd.points", *v);
  else
    cfg.fdd.points = {{0.25, 0.5}, {0.5, 1.0}, {1.0, 1.0}};
  if (auto v = take("fdd.a"))
    cfg.fdd.a = doubles("fdd.a", *v);
  else
    cfg.fdd.a = std::vector<double>{1.0, -0.5, 0.75};
  if (auto v = take("fdd.b")) {
    const auto b = doubles("fdd.b", *v);
    cfg.fdd.b = Vec::Map(b.data(), Eigen::Index(b.size()));
  } else {
    cfg.fdd.b = Vec::Ones(cfg.d);
  }
  if (auto v = take("fdd.n")) cfg.fdd_n = one_int<int>("fdd.n", *v);
  if (auto v = take("fdd.replicates")) cfg.fdd_replicates = one_int<std::int64_t>("fdd.replicates", *v);
  if (auto v = take("fdd.ks_level")) cfg.ks_level = one_double("fdd.ks_level", *v);
  if (auto v = take("qv.point_k")) cfg.qv_k = to_point("qv.point_k", *v);
  if (auto v = take("qv.point_l")) cfg.qv_l = to_point("qv.point_l", *v);

  if (auto v = take("tolerance.cov_error")) cfg.tol.cov_error = one_double("tolerance.cov_error", *v);
  if (auto v = take("tolerance.selfsim")) cfg.tol.selfsim = one_double("tolerance.selfsim", *v);
  if (auto v = take("tolerance.holder")) cfg.tol.holder = one_double("tolerance.holder", *v);
  if (auto v = take("tolerance.qv_factor")) cfg.tol.qv_factor = one_double("tolerance.qv_factor", *v);
  if (auto v = take("tolerance.mc_sigmas")) cfg.tol.mc_sigmas = one_double("tolerance.mc_sigmas", *v);

  if (!kv.empty()) throw ConfigError("config: unknown key '" + kv.begin()->first + "'");

  if (cfg.n < 1) throw ConfigError("config: n must be >= 1");
  if (cfg.grid_m < 1) throw ConfigError("config: grid_m must be >= 1");
  if (cfg.replicates < 2) throw ConfigError("config: replicates must be >= 2");
  if (cfg.quad_order < 2 || cfg.quad_order > 64) throw ConfigError("config: quad_order must lie in [2, 64]");
  if (!(cfg.epsilon > 0.0)) throw ConfigError("config: lindeberg.epsilon must be > 0");
  for (double c : cfg.c_list)
    if (!(c > 0.0)) throw ConfigError("config: selfsim.c entries must be > 0");
  for (std::size_t k = 0; k < cfg.points.size(); ++k) {
    check_unit("points", cfg.points[k]);
    for (std::size_t l = 0; l < k; ++l)
      if (cfg.points[k] == cfg.points[l]) throw ConfigError("config: points: duplicate point " + points_text({cfg.points[k]}));
  }
  if (cfg.n_list.empty()) throw ConfigError("config: verify.n_list is empty");
  for (int n : cfg.n_list)
    if (n < 1) throw ConfigError("config: verify.n_list entries must be >= 1");
  if (cfg.holder_sides.size() < 4) throw ConfigError("config: verify.holder_sides needs at least 4 values");
  for (double h : cfg.holder_sides)
    if (!(h > 0.0 && h <= 0.5)) throw ConfigError("config: verify.holder_sides must lie in (0, 1/2]");
  for (const Point& p : cfg.fdd.points) check_unit("fdd.points", p);
  try {
    cfg.fdd.validate(cfg.d);
  } catch (const PreconditionError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (cfg.fdd_n < 1) throw ConfigError("config: fdd.n must be >= 1");
  if (cfg.fdd_replicates < 0 || cfg.fdd_replicates == 1) throw ConfigError("config: fdd.replicates must be 0 or >= 2");
  if (!(cfg.ks_level > 0.0 && cfg.ks_level < 1.0)) throw ConfigError("config: fdd.ks_level must lie in (0, 1)");
  check_unit("qv.point_k", cfg.qv_k);
  check_unit("qv.point_l", cfg.qv_l);
  check_tol("tolerance.cov_error", cfg.tol.cov_error);
  check_tol("tolerance.selfsim", cfg.tol.selfsim);
  check_tol("tolerance.holder", cfg.tol.holder);
  check_tol("tolerance.qv_factor", cfg.tol.qv_factor);
  check_tol("tolerance.mc_sigmas", cfg.tol.mc_sigmas);
  return cfg;
}

SimConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  return parse_config(in);
}

}  // namespace ofbs::cli
