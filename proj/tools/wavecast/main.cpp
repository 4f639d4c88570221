#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "wavecast/cli/commands.hpp"
#include "wavecast/cli/config.hpp"
#include "wavecast/errors.hpp"
#include "wavecast/parallel.hpp"

namespace cli = wavecast::cli;

int main(int argc, char** argv) {
  CLI::App app{"wavecast: Schrodinger-evolution forecasting of growing structures"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  unsigned threads = 0;
  std::string out, resume, split = "test";
  std::vector<std::string> checkpoints;
  std::size_t sample = 0;
  bool identity = false;

  app.add_option("--config", config_path, "JSON configuration file")->check(CLI::ExistingFile);
  app.add_option("--threads", threads, "worker threads (0 = all cores)");

  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec specs[] = {
      {"gen", "generate a synthetic dataset"},
      {"train", "train the encoder"},
      {"eval", "evaluate a checkpoint against ground truth and persistence"},
      {"sweep-unroll", "accuracy and latency across unroll depths"},
      {"gradcheck", "finite-difference gradient verification"},
      {"oracle", "physics verification against the Crank-Nicolson reference"},
      {"interpret", "dump the potential, wave modulus and energy density for one sample"},
      {"profile", "forecast latency and peak memory"},
  };
  for (const auto& s : specs) {
    auto* sub = app.add_subcommand(s.name, s.help);
    const std::string name = s.name;
    sub->add_option("--out", out, name == "gen" ? "dataset directory" : "output directory");
    if (name == "train") sub->add_option("--resume", resume, "checkpoint to resume from")->check(CLI::ExistingFile);
    if (name == "eval" || name == "sweep-unroll" || name == "interpret" || name == "profile") {
      sub->add_option("--checkpoint", checkpoints, "checkpoint file (repeat once per unroll for sweep-unroll)")
          ->check(CLI::ExistingFile);
    }
    if (name == "eval" || name == "sweep-unroll" || name == "interpret") {
      sub->add_option("--split", split, "dataset split")->check(CLI::IsMember({"train", "test"}));
    }
    if (name == "interpret") sub->add_option("--sample", sample, "sample position within the split");
    if (name == "eval") sub->add_flag("--identity", identity, "score ground truth against itself");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cli::kExitConfig;
  }

  cli::RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = cli::load_config(config_path);
  } catch (const wavecast::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return cli::kExitConfig;
  } catch (const wavecast::Error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return cli::kExitData;
  }
  if (threads > 0) wavecast::set_thread_count(threads);

  cli::CommandOptions opts;
  if (!out.empty()) opts.out = out;
  if (!resume.empty()) opts.resume = resume;
  for (const auto& c : checkpoints) opts.checkpoints.emplace_back(c);
  opts.split = split;
  opts.sample = sample;
  opts.identity = identity;

  return cli::run_command(app.get_subcommands().front()->get_name(), cfg, opts, std::cout, std::cerr);
}
