#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wavecast/cli/config.hpp"

namespace wavecast::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;
inline constexpr int kExitVerification = 5;

struct CommandOptions {
  std::optional<std::filesystem::path> out;  // overrides io.out_dir (io.data_dir for gen)
  std::vector<std::filesystem::path> checkpoints;
  std::string split = "test";
  std::size_t sample = 0;
  std::optional<std::filesystem::path> resume;
  bool identity = false;  // eval: score ground truth against itself
};

// Each command returns an exit code; errors propagate as exceptions.
int cmd_gen(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_train(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_eval(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_sweep_unroll(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_gradcheck(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_oracle(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_interpret(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);
int cmd_profile(const RunConfig& cfg, const CommandOptions& opts, std::ostream& log);

// Runs a named command and maps library errors onto exit codes, reporting them on `err`.
int run_command(const std::string& name, const RunConfig& cfg, const CommandOptions& opts, std::ostream& log,
                std::ostream& err);

// Column contract of sweep.csv.
std::vector<std::string> sweep_columns();

}  // namespace wavecast::cli
