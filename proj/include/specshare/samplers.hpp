#pragma once

#include <functional>

#include "specshare/rng.hpp"

namespace specshare {

// Tangent-envelope adaptive rejection sampler for a log-concave log-density h
// on the truncated domain [lo, hi]. hp is h's derivative.
double ars_sample(const std::function<double(double)>& h, const std::function<double(double)>& hp,
                  double lo, double hi, Rng& rng);

// Stepping-out slice sampler (one update from t0) for log-density h on [lo, hi].
double slice_sample(const std::function<double(double)>& h, double t0, double width, double lo,
                    double hi, Rng& rng);

enum class BetaSampler { Ars, Slice };

// One draw from the shape conditional p(beta | S_1..S_K, W), sampled on
// t = log beta. state carries the previous value for the slice variant.
double sample_beta_conditional(double beta_prev, int K, double sum_log_SW, double W_sum_S,
                               BetaSampler method, Rng& rng);

// Log of the (unnormalized) beta conditional density, exposed for the
// goodness-of-fit oracle.
double log_beta_conditional_density(double beta, int K, double sum_log_SW, double W_sum_S);

}  // namespace specshare
