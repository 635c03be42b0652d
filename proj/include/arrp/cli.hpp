#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace arrp {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitInvariant = 2, kExitCellFailed = 3 };

struct CommandSpec {
  std::string command;  // run | sweep | validate | report
  std::filesystem::path config_path;
  std::filesystem::path output_dir = ".";
  int jobs = 1;
  bool trace = false;
  std::optional<std::uint64_t> seed;
};

int cmd_run(const CommandSpec& spec);
int cmd_sweep(const CommandSpec& spec);
int cmd_validate(const CommandSpec& spec);
int cmd_report(const CommandSpec& spec);

// Parses argv (flags: --config, --out, --jobs, --trace, --seed; ARRP_SIM_JOBS
// is the fallback for --jobs) and dispatches.
int cli_main(int argc, char** argv);

}  // namespace arrp
