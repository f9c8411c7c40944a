#pragma once

#include <vector>

#include "specshare/dpgmm.hpp"

namespace specshare {

using Mat = std::vector<std::vector<double>>;

// MAP level decision for one statistic under the mixture; ties break to the
// lower rank.
int classify(double x, const MixtureModel& m);

struct DecisionInterval {
  double lo, hi;
  int label;
};

// The MAP decision regions of a 1-D Gaussian mixture: an ordered partition of
// the real line into at most 2K-1 intervals.
std::vector<DecisionInterval> decision_partition(const MixtureModel& m);

// H[k][j] = P(decide j | level k), each entry integrated by adaptive
// quadrature over the decision regions. Rows sum to 1 within the quadrature
// tolerance. Throws on degenerate models (coincident components) and on
// quadrature non-convergence.
Mat estimate_confusion(const MixtureModel& m, double tol = 1e-12);

// Probability mass of generator rows over a (possibly different) classifier's
// decision regions: out[l][j] = P(classify as j | true component l of gen).
Mat cross_confusion(const MixtureModel& gen, const MixtureModel& classifier, double tol = 1e-12);

// C[k][j] = prior_j / (1 - prior_k) off the diagonal, 0 on it.
Mat transition_matrix(const std::vector<double>& prior);

// Mean length of interior (non-censored) constant-label runs. The first and
// last runs of the trace are boundary-truncated and excluded.
double estimate_duration_mean(const std::vector<int>& labels);

// Majority vote over a centered window (odd width; 0 or 1 disables). Label
// smoothing applied before run segmentation.
std::vector<int> majority_smooth(const std::vector<int>& labels, int window);

// g_tau(tau0) = P(T > tau + tau0) / P(T > tau) for T ~ Poisson(nu). Sets
// *saturated when the ratio is no longer representable (treated as 0).
double survival(double nu, int64_t tau, int64_t tau0, bool* saturated = nullptr);

// Probability of correct classification under a prior: sum_l H[l][l] prior_l.
double p_c(const Mat& H, const std::vector<double>& prior);

struct SenseModel {
  Mat H;            // confusion, K x K
  Mat C;            // level transitions, K x K, zero diagonal
  Mat M;            // C * H (mismatch observation law), cached
  Mat ack;          // ack[a][b] = 1 if ST rank a decodes over PT rank b
  double nu_hat = 1.0;
  std::vector<int> paper_index;  // per rank: 1..K-1 for powers, K for idle
  int K = 0;
};

// ack[a][b] = 1 iff paper_index[a] > paper_index[b]; diagonal 1 (a matched
// block always decodes).
Mat default_ack(const std::vector<int>& paper_index);

SenseModel build_sense_model(const MixtureModel& m, double nu_hat, const Mat* ack_override = nullptr);

}  // namespace specshare
