#pragma once

#include "ofbs/core.h"
#include "ofbs/kernel.h"
#include "ofbs/mdgen.h"
#include "ofbs/stats.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace ofbs::cli {

struct Tolerances {
  double cov_error = 0.05;
  double selfsim = 1e-6;
  double holder = 0.1;
  double qv_factor = 10.0;
  double mc_sigmas = 4.0;
};

/// Experiment description read from a flat `key = value` file (grammar in docs/config.md).
struct SimConfig {
  int d = 1;
  Mat D;
  int n = 16;
  int grid_m = 16;
  std::int64_t replicates = 1000;
  std::uint64_t seed = 1;
  Generator generator = Generator::rademacher;
  int quad_order = 16;
  bool staircase = false;
  double epsilon = 0.1;
  std::vector<double> c_list = {0.5, 2.0};
  std::vector<Point> points;

  std::vector<int> n_list = {8, 16, 32, 64};
  std::vector<double> holder_sides = {0.5, 0.25, 0.125, 0.0625};

  FDDTestSpec fdd;
  int fdd_n = 64;
  std::int64_t fdd_replicates = 0;  ///< 0: use `replicates`
  double ks_level = 0.01;

  Point qv_k{1.0, 1.0};
  Point qv_l{1.0, 1.0};

  Tolerances tol;

  KernelSpec kernel_spec() const;
  /// Key/value lines in a fixed order with 17 significant digits.
  std::string canonical() const;
  /// FNV-1a over canonical(), 16 hex digits.
  std::string hash() const;
};

/// Throws ConfigError on syntax or validation errors and DomainError when D fails the
/// spectrum gate.
SimConfig parse_config(std::istream& is);
/// As parse_config; a missing or unreadable file is a ConfigError naming the path.
SimConfig load_config(const std::filesystem::path& path);

}  // namespace ofbs::cli
