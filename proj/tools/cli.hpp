#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "cbindex/nbglm.hpp"
#include "cbindex/trial_data.hpp"

namespace cbindex::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kDataError = 2, kDegenerate = 3 };

struct RunConfig {
  std::string command;
  std::string input;
  ColumnSchema columns;
  bool columns_given = false;  ///< false: every non-role column is a covariate
  std::string model = "ridge";
  std::string estimator = "both";
  int bootstrap = 0;
  int optimism = 0;
  double ci_level = 0.95;
  bool refit_shrinkage = true;
  bool stratify_bootstrap = false;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::size_t workers = 1;
  int folds = 10;
  int grid_size = 100;
  double grid_ratio = 1e-4;
  std::string cv_loss = "squared_error";

  std::string scenario;
  std::vector<int> sizes;
  int replicates = 50;
  long population = 1000000;

  std::string model_file;
  int curve_points = 100;
};

/// Entry point behind the `cbindex` executable; also used by tests.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Digest of everything that influences results (not output paths or worker count).
std::string config_digest(const RunConfig& cfg);

}  // namespace cbindex::cli
