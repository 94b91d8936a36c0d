#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "run_config.hpp"

namespace omnic::cli {

struct Command {
  std::string name;
  std::string help;
  std::function<void(const RunConfig&, const std::filesystem::path& out)> run;
};

const std::vector<Command>& commands();

/// Parses argv, runs the subcommand and maps failures to exit codes:
/// 0 success, 1 usage or validation error, 2 runtime failure.
int dispatch(int argc, char** argv);

}  // namespace omnic::cli
