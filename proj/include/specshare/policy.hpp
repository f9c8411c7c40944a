#pragma once

#include <cstdint>
#include <vector>

#include "specshare/rng.hpp"
#include "specshare/sensing.hpp"

namespace specshare {

// Hypothesis state of the secondary: anchored level k, slots elapsed since
// the anchor, and the probability the primary is still on that level.
struct BeliefState {
  int k = 0;
  int64_t tau = 0;
  double p = 1.0;
};

struct RewardSpec {
  std::vector<double> D;  // per-level throughput weight of a matched block
  std::vector<double> Y;  // per-level interference penalty weight
  int tau_s = 4;          // block length in slots
  void validate(int K) const;
};

enum class Action { Predict, Transmit };

// Bayes update after a prediction slot observing rank `obs`.
BeliefState belief_update_predict(const BeliefState& b, int obs, const SenseModel& sm);

// Bayes update after a transmission block given the ACK outcome.
BeliefState belief_update_transmit(const BeliefState& b, bool ack_positive, const SenseModel& sm,
                                   int tau_s);

// Immediate expected reward of action a in belief b (0 for Predict).
double expected_reward(const BeliefState& b, Action a, const SenseModel& sm, const RewardSpec& rs);

// Largest tau at which a certainly-present primary still makes transmission
// break-even: the last tau with g_tau(tau_s) >= sum_j C[k][j] Y_j /
// (sum_j C[k][j] Y_j + D_k), clamped at 0. Errors if the scan cap is hit or
// the survival scan is not non-increasing.
int64_t horizon(int k, const SenseModel& sm, const RewardSpec& rs, int64_t scan_cap = 1000000);

struct LevelPolicy {
  int k = 0;
  int64_t T_k = 0;
  int grid_size = 0;
  std::vector<double> p_star;   // per tau in [0, T_k]; 1 where A < E everywhere
  std::vector<double> p_star2;  // upper threshold; 1 encodes "touches certainty"
  // Row-major (T_k+1) x grid_size value tables. V = max(E, A).
  std::vector<std::vector<double>> V, E, A;
};

struct PolicyTable {
  std::vector<LevelPolicy> levels;
  RewardSpec rs;
  int grid_size = 0;
};

// Backward induction on a uniform belief grid with linear interpolation.
// Verifies the structural properties (V, E, A non-decreasing and convex in p;
// at most two sign changes of E-A per column) and throws a diagnostic error
// on violations beyond tolerance.
LevelPolicy solve_value(int k, const SenseModel& sm, const RewardSpec& rs, int grid_size = 1001);

PolicyTable solve_policy(const SenseModel& sm, const RewardSpec& rs, int grid_size = 1001);

// Threshold rule: predict beyond T_k; otherwise predict iff p <= p*(tau) or,
// when the transmit region detaches from certainty (p** < 1), p >= p**(tau).
Action act(const BeliefState& b, const LevelPolicy& lp);

struct McValue {
  double mean = 0.0;
  double se = 0.0;
};

// Monte-Carlo rollout of the threshold policy from (tau=0, p=1, level k),
// generated under the sense model's own assumptions.
McValue monte_carlo_value(const PolicyTable& table, int k, const SenseModel& sm,
                          const RewardSpec& rs, int episodes, Rng& rng);

// E(tau, p) and A(tau, p) for arbitrary p, evaluated against a solved level
// table (linear interpolation of continuation values).
double eval_E(const LevelPolicy& lp, const SenseModel& sm, const RewardSpec& rs, int64_t tau, double p);
double eval_A(const LevelPolicy& lp, const SenseModel& sm, const RewardSpec& rs, int64_t tau, double p);

}  // namespace specshare
