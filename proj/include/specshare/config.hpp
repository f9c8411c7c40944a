#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "specshare/dpgmm.hpp"
#include "specshare/engine.hpp"
#include "specshare/policy.hpp"
#include "specshare/scenario.hpp"

namespace specshare {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Flat view of the block-structured run configuration. Defaults reproduce the
// four-level baseline setting.
struct RunConfig {
  // scenario block: per-level SNR ratios in conventional order (powers
  // ascending, idle last); gamma_st_db is the per-unit-ratio SNR in dB.
  double gamma_st_db = -12.0;
  std::vector<double> ratios = {1.0, 2.0, 3.0, 0.0};
  std::vector<double> prior;  // empty = uniform
  double sigma2_u = 1.0;
  int64_t ns = 10000;  // sensing samples per slot
  double nu = 50.0;    // mean hypothesis duration in slots
  int64_t horizon = 50000;

  // learner block
  double alpha = 1.0;
  int k0 = 3;
  int iters = 8000;
  int burnin = 3000;
  BetaSampler beta_sampler = BetaSampler::Ars;
  int64_t stage1_slots = 1000;
  int label_smooth = 5;  // majority window before duration estimation
  int em_restarts = 8;

  // policy block
  double d = 1.0;  // uniform per-level match reward
  double y = 1.0;  // uniform per-level mismatch penalty
  int tau_s = 4;
  int grid_size = 1001;
  double reanchor_threshold = 0.5;

  // engine block
  std::string strategy = "nonperiodic";  // periodic|nonperiodic|perfect|online
  std::string preset;                     // fig6..fig10 or empty
  std::vector<uint64_t> seeds = {1};
  int refit_every = 50;
  int refit_sweeps = 20;
  int64_t u_every = 100;
  int64_t change_at = 10000;       // online schedule: slot of the level-set change
  std::vector<double> ratios2;     // online schedule: post-change ratios (empty = no change)

  // output block
  std::string out_dir = "out";
  bool write_records = false;
  bool gzip_records = false;
  int jobs = 0;  // 0 = hardware concurrency

  void validate() const;  // throws ConfigError naming the offending field

  PowerMode make_mode() const;    // pre-change mode
  PowerMode make_mode_b() const;  // post-change mode (requires ratios2)

  RewardSpec make_rewards(int K) const;
  EngineConfig make_engine() const;
  GibbsOptions make_gibbs() const;
  OnlineConfig make_online() const;
};

// Level SNRs from a dB figure and power ratios: snr_i = ratio_i * 10^(db/10).
std::vector<double> snr_from_ratios(double gamma_db, const std::vector<double>& ratios);

RunConfig config_from_json_text(const std::string& text);
RunConfig load_config(const std::string& path);
std::string config_to_json_text(const RunConfig& cfg);

// Named parameter bundles for the shipped experiments (fig6..fig10).
RunConfig preset_config(const std::string& name);

}  // namespace specshare
