#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specshare/config.hpp"
#include "specshare/engine.hpp"
#include "specshare/serialize.hpp"

namespace specshare {

// Scenario generation for one seed (all randomness via named substreams).
Scenario make_scenario(const RunConfig& cfg, const PowerMode& mode, uint64_t seed);

// Two-mode schedule: pre-change mode up to change_at, post-change mode after.
Scenario make_scheduled_scenario(const RunConfig& cfg, uint64_t seed);

// Exact mixture implied by a power mode (per-level Gaussian moments).
MixtureModel true_model(const PowerMode& mode);

struct LearnOut {
  MixtureModel model;
  std::vector<int> labels;  // selected snapshot's assignments (time order)
  double nu_hat = 0.0;
  GibbsChain chain;
  GibbsState warm;  // selected snapshot's state, for online continuation
};

// Stage-I pipeline: Gibbs on x, summarize, duration estimate from smoothed
// MAP labels.
LearnOut learn_pipeline(const RunConfig& cfg, const std::vector<double>& x, uint64_t seed);

struct RunOutput {
  AggRow row;
  SimReport report;
  uint64_t seed = 0;
  std::string name;  // file stem for report emission
};

struct ExperimentOut {
  std::vector<RunOutput> runs;
};

ExperimentOut run_fig6(const RunConfig& cfg);
ExperimentOut run_fig7(const RunConfig& cfg);
ExperimentOut run_fig8(const RunConfig& cfg);
ExperimentOut run_fig9(const RunConfig& cfg);
ExperimentOut run_fig10(const RunConfig& cfg);

// Dispatch on cfg.preset (fig6..fig10).
ExperimentOut run_experiment(const RunConfig& cfg);

// Single-strategy run of cfg.strategy across seeds (no preset sweep).
ExperimentOut run_custom(const RunConfig& cfg);

}  // namespace specshare
