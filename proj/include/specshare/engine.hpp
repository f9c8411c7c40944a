#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "specshare/dpgmm.hpp"
#include "specshare/policy.hpp"
#include "specshare/scenario.hpp"
#include "specshare/sensing.hpp"

namespace specshare {

enum class SlotAction : uint8_t { Learn, Predict, Transmit, IntraBlock };

struct SlotRecord {
  int64_t tau = 0;
  SlotAction action = SlotAction::Learn;
  int16_t st_level = -1;  // rank transmitted, -1 when not transmitting
  int16_t pt_level = 0;   // true rank
  int16_t obs = -1;       // classified rank on Predict slots
  int8_t ack = -1;        // on Transmit starts: 1 positive, 0 negative
};

struct SimReport {
  std::vector<SlotRecord> records;
  std::vector<std::pair<int64_t, double>> U;  // sampled aggregate-agreement curve
  double U_final = 0.0;
  double p_c_hat = 0.0;  // empirical prediction accuracy over Stage-II predicts
  int K_hat = 0;
  int64_t horizon = 0;
  int64_t blocks = 0;
  int64_t matched_blocks = 0;
  bool online_divergence = false;
  std::string strategy;
};

// Fraction of the first `up_to` slots covered by fully level-matched blocks:
// (tau_s / up_to) * #{matched blocks starting before up_to}.
double npla(const std::vector<SlotRecord>& records, int tau_s, int64_t up_to);

std::vector<std::pair<int64_t, double>> npla_curve(const std::vector<SlotRecord>& records,
                                                   int tau_s, int64_t horizon, int64_t every);

struct EngineConfig {
  int64_t stage1_slots = 1000;
  double reanchor_threshold = 0.5;
  int64_t u_every = 100;
  bool keep_records = true;
};

struct Scenario {
  LevelTrace trace;
  StatStream stats;
};

// Fixed cycle: one sensing slot, then a block at the decided level.
SimReport run_periodic(const Scenario& sc, const MixtureModel& model, const SenseModel& sm,
                       const RewardSpec& rs, const EngineConfig& cfg);

// Threshold-policy strategy over the belief-state machine.
SimReport run_nonperiodic(const Scenario& sc, const MixtureModel& model, const SenseModel& sm,
                          const PolicyTable& table, const EngineConfig& cfg);

// Genie: back-to-back blocks, always matched to the block-start level.
SimReport run_perfect(const LevelTrace& trace, int tau_s);

struct OnlineConfig {
  int refit_every = 50;   // prediction slots between refits
  int refit_sweeps = 20;
  int grid_size = 1001;
  BetaSampler beta_sampler = BetaSampler::Ars;
};

// Non-periodic strategy with a FIFO observation window: every prediction slot
// replaces the oldest window entry, periodic warm-started refits refresh the
// model, sense model, and policy tables (nu_hat stays at its Stage-I value).
SimReport run_online(const Scenario& sc, const GibbsState& warm_state, const MixtureModel& model0,
                     const SenseModel& sm0, const PolicyTable& table0, const RewardSpec& rs0,
                     const EngineConfig& cfg, const OnlineConfig& oc, Rng& rng);

// Realized ACK of a block: positive iff the true rank at the block-end
// decision instant matches the ST rank or the decode table says so.
bool ack_positive(const SenseModel& sm, int st_rank, int pt_rank);

}  // namespace specshare
