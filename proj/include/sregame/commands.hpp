#pragma once

#include <string>
#include <vector>

#include "sregame/config.hpp"

namespace sregame {

struct CommandResult {
  int code = 0;                     // ErrorCode value; 0 iff every hard check passed
  std::string report;               // "key: value" lines
  std::vector<std::string> files;   // artifacts written under the output directory
};

/// Runs one of validate, solve-sre, solve-game, simulate, verify, portfolio, bounds.
/// Module errors propagate as sregame::Error.
CommandResult run_command(const ScenarioConfig& cfg, const std::string& command,
                          const std::string& out_dir);

const std::vector<std::string>& command_names();

}  // namespace sregame
