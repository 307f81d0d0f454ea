#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "countdfm/io.hpp"
#include "countdfm/metrics.hpp"
#include "countdfm/selection.hpp"

namespace countdfm {

struct PresetConfig {
  std::string family = "bernoulli";
  int d = 15;
  int r = 2;
  int psi_set = 1;
  int nb_successes = 3;
};

// Experiment configuration; round-trips losslessly through JSON.
struct ExperimentConfig {
  PresetConfig preset;
  std::optional<std::string> model_file;  // explicit model instead of a preset

  int T = 200;
  int replications = 100;
  std::uint64_t seed = 1;
  int burn_in = 500;
  std::vector<std::string> tasks = {"estimation"};

  int fit_r = 0;  // 0: preset value
  int fit_p = 0;  // 0: preset lag order

  int holdout = 5;
  int window = 10;
  int particles = 1000;
  int n_qmc = 1 << 13;
  int gibbs_sweeps = 10;

  int r_max = 6;
  int p_max = 4;
  int blocks = 5;
  std::vector<std::string> rank_methods = {"ED", "IC1", "IC2", "IC3", "BCV_PC"};
  std::vector<std::string> lag_methods = {"AIC", "HQ", "SC", "FPE", "BCV"};

  int threads = 0;  // 0: all cores
};

ExperimentConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const ExperimentConfig& config);
ExperimentConfig load_config(const std::string& path);

struct ExperimentSummary {
  int replications = 0;
  int failures = 0;
  std::vector<std::string> report_files;
  std::vector<std::string> failure_messages;
};

// Runs the configured replications (simulate -> fit/select/forecast ->
// metrics) and writes the aggregate CSV reports into out_dir. Replications
// run concurrently; aggregation and file writes are serialized so identical
// configs produce byte-identical reports.
ExperimentSummary run_experiment(const ExperimentConfig& config, const std::string& out_dir);

}  // namespace countdfm
