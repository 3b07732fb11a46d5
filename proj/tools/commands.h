#pragma once

#include "config.h"

#include "ofbs/stats.h"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>

namespace ofbs::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitPass = 0,
  kExitMetricFailure = 1,
  kExitConfig = 2,   ///< config, validation, missing file, I/O
  kExitNumeric = 3,  ///< quadrature / factorization failure
};

struct Options {
  std::filesystem::path config;
  std::filesystem::path out;
  int jobs = 1;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

/// Directory named by OFBS_CACHE_DIR, if set and non-empty.
std::optional<std::filesystem::path> cache_dir_from_env();

/// All verification rows for a configuration (the body of `ofbs verify`).
ConvergenceReport verify_report(const SimConfig& cfg, int jobs,
                                const std::optional<std::filesystem::path>& cache_dir = std::nullopt);

/// Commands throw the library exceptions; run() maps them to exit codes.
int cmd_simulate(const Options& opt, std::ostream& log);
int cmd_verify(const Options& opt, std::ostream& log, std::ostream& err);
int cmd_cov(const Options& opt, std::ostream& log);

/// Full command line: `ofbs {simulate|verify|cov} --config PATH --out DIR [--jobs N] [--seed U64] [--quiet]`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ofbs::cli
