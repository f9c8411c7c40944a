#pragma once

#include <cstdint>
#include <vector>

#include "specshare/rng.hpp"

namespace specshare {

// A primary-network operating mode: L power levels, exactly one of them zero
// (idle). Levels are stored sorted by SNR ascending, so rank 0 is idle; the
// conventional index (powers numbered 1..L-1 ascending, idle last) is kept in
// paper_index for reporting and the default ACK rule.
struct PowerMode {
  int L = 0;
  std::vector<double> snr;     // linear SNR per rank, snr[0] == 0
  std::vector<double> prior;   // occupancy prior per rank, sums to 1
  std::vector<int> paper_index;
  double sigma2_u = 1.0;       // noise power at the ST sensor
  double nu = 50.0;            // mean duration parameter (slots)
  int Ns = 10000;              // samples averaged per sensing slot

  // snr/prior given in conventional order (powers ascending, idle last).
  static PowerMode make(const std::vector<double>& snr_in, const std::vector<double>& prior_in,
                        double sigma2_u, double nu, int Ns);

  void validate() const;
  double stat_mean(int rank) const;  // E[X | level]
  double stat_var(int rank) const;   // Var[X | level]
};

struct Hypothesis {
  int64_t start = 0;
  int level = 0;  // rank
  int64_t dur = 0;
};

struct LevelTrace {
  std::vector<int16_t> level;  // rank per slot
  std::vector<Hypothesis> segments;
};

struct StatStream {
  std::vector<double> x;        // sensing statistic per slot
  std::vector<int16_t> truth;   // generating rank per slot
};

// Piecewise-constant level sequence: durations Poisson(nu) conditioned >= 1,
// successor levels drawn from the prior-renormalized transition rule (no
// self-transitions), first level from the prior.
LevelTrace gen_level_sequence(const PowerMode& mode, int64_t horizon, Rng& rng);

// Gaussian shortcut for the per-slot statistic: N((g+1)s2, (2g+1)s2^2/Ns).
StatStream gen_test_statistics(const LevelTrace& trace, const PowerMode& mode, Rng& rng);

// Physical route: averages |sqrt(P) s + u|^2 over Ns QPSK symbols in complex
// noise. Slow; used to validate the shortcut.
StatStream gen_raw_samples(const LevelTrace& trace, const PowerMode& mode, Rng& rng,
                           int64_t sample_cap = 1000000);

struct GaussianCheck {
  std::vector<double> skewness;  // per rank, NaN where a rank never occurs
  std::vector<bool> flagged;     // |skewness| above threshold
  bool any_flagged = false;
};

GaussianCheck validate_gaussian_fit(const StatStream& s, int L, double skew_threshold = 0.5);

}  // namespace specshare
