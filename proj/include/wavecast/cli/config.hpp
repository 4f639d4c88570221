#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "wavecast/autodiff.hpp"
#include "wavecast/report.hpp"
#include "wavecast/synthgen.hpp"
#include "wavecast/train.hpp"

namespace wavecast::cli {

// Parsed and validated run configuration. Every section is optional; missing keys take
// the defaults below, unknown keys are rejected.
struct RunConfig {
  synthgen::DatasetSpec dataset;
  train::TrainConfig train;  // also carries the model and evolution sections

  report::EvalOptions eval;
  std::vector<double> tau_sweep{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  int histogram_bins = 41;
  bool plots = true;

  std::vector<int> sweep_unroll{10, 20, 50, 100};
  bool sweep_retrain = true;
  int profile_warmup = 2;
  int profile_runs = 10;

  autodiff::GradcheckConfig gradcheck;

  std::uint64_t oracle_seed = 1;
  int oracle_instances = 5;
  std::vector<std::int64_t> oracle_dims{8, 8, 8};

  std::filesystem::path data_dir = "data";
  std::filesystem::path out_dir = "out";
};

// Throws ConfigError naming the offending key.
RunConfig parse_config(const nlohmann::json& j);
RunConfig load_config(const std::filesystem::path& path);

// The effective configuration, every key spelled out.
nlohmann::json to_json(const RunConfig& c);

}  // namespace wavecast::cli
