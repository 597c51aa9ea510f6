#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "steinflow/config.hpp"

namespace steinflow::cli {

enum ExitCode : int {
  kOk = 0,
  kFail = 1,
  kConfig = 2,
  kNumerical = 3,
  kInternal = 4,
};

struct RunOptions {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out = "steinflow-out";
  std::vector<std::string> overrides;
};

/// Loads the config file (if any) and applies --seed and --override.
Config resolve_config(const RunOptions& opts);

int cmd_simulate(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_pde(const RunOptions& opts, std::ostream& out, std::ostream& err);
int cmd_experiment(const std::string& name, const RunOptions& opts, std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace steinflow::cli
