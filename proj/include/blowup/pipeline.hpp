#pragma once

#include "blowup/errors.hpp"
#include "blowup/io.hpp"

#include <functional>
#include <string>
#include <vector>

namespace blowup::pipeline {

enum ExitCode : int { kPass = 0, kValidationFailure = 2, kNumericFailure = 3, kIoFailure = 4 };

int exit_code(ErrorKind kind);

/// Outcome of a subcommand: exit status, human-readable lines, written files.
struct CommandResult {
  int exit_code = kPass;
  std::vector<std::string> messages;
  std::vector<std::string> files;
};

/// Curvature points from cfg.input, or a generated battery of cfg.battery_size points.
io::CurvatureFile load_points(const io::RunConfig& cfg);

CommandResult cmd_verify(const io::RunConfig& cfg);
CommandResult cmd_moments(const io::RunConfig& cfg);
CommandResult cmd_solve_vq(const io::RunConfig& cfg);
CommandResult cmd_phi(const io::RunConfig& cfg);
CommandResult cmd_reduce(const io::RunConfig& cfg);
CommandResult cmd_family(const io::RunConfig& cfg);
CommandResult cmd_residual_slope(const io::RunConfig& cfg);
/// load → validate → corrector → φ → reduce → family; failing points are quarantined.
CommandResult cmd_pipeline(const io::RunConfig& cfg);

/// Runs `fn`, mapping library errors to exit codes with the message recorded.
CommandResult guarded(const std::function<CommandResult()>& fn);

}  // namespace blowup::pipeline
