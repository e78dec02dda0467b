#pragma once

#include <exception>

#include <nlohmann/json.hpp>

#include "gbm/config.hpp"

namespace gbm {

/// Process exit codes.
enum ExitCode : int {
  exit_ok = 0,
  exit_failure = 1,
  exit_config = 2,
  exit_io = 3,
  exit_divergence = 4,
};

/// Maps an exception raised by a command to its exit code.
int exit_code_for(const std::exception& e);

/// Each command writes its artifacts and the resolved config.ini into
/// config.out and returns the summary it also stores as summary.json.
nlohmann::json cmd_simulate(const RunConfig& config);
nlohmann::json cmd_train(const RunConfig& config);
nlohmann::json cmd_sample(const RunConfig& config);
nlohmann::json cmd_validate(const RunConfig& config);
nlohmann::json cmd_egd_demo(const RunConfig& config);

/// Dispatches on config.command.
nlohmann::json run_command(const RunConfig& config);

}  // namespace gbm
