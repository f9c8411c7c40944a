#pragma once

#include <cstdint>
#include <vector>

#include "specshare/rng.hpp"
#include "specshare/samplers.hpp"

namespace specshare {

// Empirical anchors for the vague hyperpriors: mu_y = mean of the data,
// S_y = 1/variance. Fixing them is equivalent to normalizing the inputs.
struct HyperPriors {
  double mu_y = 0.0;
  double S_y = 1.0;
};

struct HyperParams {
  double lambda = 0.0;  // common component-mean prior mean
  double R = 1.0;       // common component-mean prior precision
  double W = 1.0;       // component-precision prior mean-inverse scale
  double beta = 1.0;    // component-precision prior shape
};

struct Component {
  double mu = 0.0;
  double S = 1.0;  // precision
  int count = 0;
};

struct GibbsState {
  std::vector<double> x;
  std::vector<int> z;  // component index per observation
  std::vector<Component> comp;
  HyperPriors hp;
  HyperParams th;
  double alpha = 1.0;
  int k0 = 3;  // auxiliary components per indicator update
};

struct Snapshot {
  int iter = 0;
  std::vector<Component> comp;
  std::vector<uint16_t> z;
  HyperParams th;
  double loglik = 0.0;  // complete-data log likelihood
};

struct GibbsChain {
  std::vector<Snapshot> snaps;
  bool hyper_divergence = false;
};

struct GibbsOptions {
  int iters = 3000;
  int burnin = 1000;
  double alpha = 1.0;
  int k0 = 3;
  BetaSampler beta_sampler = BetaSampler::Ars;
};

struct MixtureModel {
  int K = 0;
  std::vector<double> mu;  // sorted ascending
  std::vector<double> S;
  std::vector<double> pi;
  void validate() const;
};

GibbsState init_state(const std::vector<double>& x, const GibbsOptions& opt, Rng& rng);

// Conjugate redraw of every component's (mu, S); empty components draw from
// the prior.
void sample_component_params(GibbsState& st, Rng& rng);

// lambda, R, W by conjugate draws; beta via ARS or slice on log beta.
void sample_hyperparams(GibbsState& st, BetaSampler method, Rng& rng);

// One auxiliary-parameter indicator sweep (k0 fresh prior draws per
// observation); a singleton is relabeled into the auxiliary block, so its
// parameters are redrawn rather than kept. Empty components are dropped as
// they arise.
void sample_indicators(GibbsState& st, Rng& rng);

// Posterior indicator weights for observation n against the current occupied
// components plus the given auxiliaries. Exposed for direct verification.
std::vector<double> indicator_weights(const GibbsState& st, size_t n,
                                      const std::vector<Component>& aux);

double complete_loglik(const std::vector<double>& x, const std::vector<uint16_t>& z,
                       const std::vector<Component>& comp);
double complete_loglik(const std::vector<double>& x, const std::vector<int>& z,
                       const std::vector<Component>& comp);

// Sliding-window edits for the online flow: detach observation n (dropping an
// emptied component), then re-assign it with one auxiliary indicator draw.
void remove_observation(GibbsState& st, size_t n);
void assign_observation(GibbsState& st, size_t n, Rng& rng);

GibbsChain run_gibbs(const std::vector<double>& x, const GibbsOptions& opt, Rng& rng);

// One full sweep on an existing state (params, hyperparams, indicators).
void gibbs_sweep(GibbsState& st, BetaSampler method, Rng& rng);

struct SummarizeOut {
  MixtureModel model;
  std::vector<int> labels;  // chosen snapshot's assignments, remapped to sorted order
  int snapshot_iter = 0;
  int modal_K = 0;
  double loglik = 0.0;
};

// Modal K over snapshots (ties toward smaller K), then best complete-data log
// likelihood among modal-K snapshots (earliest on ties).
SummarizeOut summarize(const GibbsChain& chain, const std::vector<double>& x);

struct EmOptions {
  int restarts = 8;
  int max_iters = 500;
  double tol = 1e-10;
};

struct EmResult {
  MixtureModel model;
  double loglik = 0.0;
  bool converged = false;
  int iters = 0;
};

// Classical EM fit with a known component count; best of `restarts` seeded
// starts.
EmResult fit_em_gmm(const std::vector<double>& x, int K, const EmOptions& opt, Rng& rng);

}  // namespace specshare
