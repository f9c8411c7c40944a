#include "specshare/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specshare {

PowerMode PowerMode::make(const std::vector<double>& snr_in, const std::vector<double>& prior_in,
                          double sigma2_u, double nu, int Ns) {
  if (snr_in.size() != prior_in.size())
    throw std::invalid_argument("PowerMode: snr and prior size mismatch");
  int L = static_cast<int>(snr_in.size());
  std::vector<int> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return snr_in[a] < snr_in[b]; });
  PowerMode m;
  m.L = L;
  m.sigma2_u = sigma2_u;
  m.nu = nu;
  m.Ns = Ns;
  for (int r = 0; r < L; ++r) {
    int src = order[r];
    m.snr.push_back(snr_in[src]);
    m.prior.push_back(prior_in[src]);
    // conventional numbering: powers 1..L-1 ascending, idle = L
    m.paper_index.push_back(r == 0 ? L : r);
  }
  m.validate();
  return m;
}

void PowerMode::validate() const {
  if (L < 2) throw std::invalid_argument("PowerMode: need at least 2 levels");
  if (static_cast<int>(snr.size()) != L || static_cast<int>(prior.size()) != L)
    throw std::invalid_argument("PowerMode: field sizes disagree with L");
  int zeros = 0;
  for (int r = 0; r < L; ++r) {
    if (snr[r] < 0.0) throw std::invalid_argument("PowerMode: negative snr");
    if (snr[r] == 0.0) ++zeros;
    if (r > 0 && snr[r] < snr[r - 1]) throw std::invalid_argument("PowerMode: snr not sorted");
    if (prior[r] <= 0.0 || prior[r] >= 1.0)
      throw std::invalid_argument("PowerMode: prior entries must lie in (0,1)");
  }
  if (zeros != 1) throw std::invalid_argument("PowerMode: exactly one idle (zero-snr) level required");
  double s = std::accumulate(prior.begin(), prior.end(), 0.0);
  if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument("PowerMode: prior must sum to 1");
  if (sigma2_u <= 0.0) throw std::invalid_argument("PowerMode: sigma2_u must be positive");
  if (nu < 1.0) throw std::invalid_argument("PowerMode: nu must be >= 1");
  if (Ns < 100) throw std::invalid_argument("PowerMode: Ns must be >= 100 for the Gaussian statistic");
}

double PowerMode::stat_mean(int rank) const { return (snr[rank] + 1.0) * sigma2_u; }

double PowerMode::stat_var(int rank) const {
  return (2.0 * snr[rank] + 1.0) * sigma2_u * sigma2_u / static_cast<double>(Ns);
}

namespace {

int64_t draw_duration(double nu, Rng& rng) {
  std::poisson_distribution<int64_t> pois(nu);
  // durations are conditioned on being at least one slot
  for (;;) {
    int64_t d = pois(rng);
    if (d >= 1) return d;
  }
}

int draw_categorical(const std::vector<double>& w, Rng& rng) {
  std::discrete_distribution<int> d(w.begin(), w.end());
  return d(rng);
}

}  // namespace

LevelTrace gen_level_sequence(const PowerMode& mode, int64_t horizon, Rng& rng) {
  mode.validate();
  if (horizon < 1) throw std::invalid_argument("gen_level_sequence: horizon must be >= 1");
  LevelTrace t;
  t.level.reserve(horizon);

  // successor rule: from level k, next level j != k with probability prior_j/(1-prior_k)
  std::vector<std::vector<double>> succ(mode.L, std::vector<double>(mode.L, 0.0));
  for (int k = 0; k < mode.L; ++k)
    for (int j = 0; j < mode.L; ++j)
      if (j != k) succ[k][j] = mode.prior[j] / (1.0 - mode.prior[k]);

  int cur = draw_categorical(mode.prior, rng);
  int64_t written = 0;
  while (written < horizon) {
    int64_t dur = draw_duration(mode.nu, rng);
    int64_t take = std::min(dur, horizon - written);
    t.segments.push_back({written, cur, take});
    for (int64_t i = 0; i < take; ++i) t.level.push_back(static_cast<int16_t>(cur));
    written += take;
    cur = draw_categorical(succ[cur], rng);
  }
  return t;
}

StatStream gen_test_statistics(const LevelTrace& trace, const PowerMode& mode, Rng& rng) {
  StatStream s;
  s.x.reserve(trace.level.size());
  s.truth = trace.level;
  std::normal_distribution<double> n01(0.0, 1.0);
  for (int16_t r : trace.level) {
    double mu = mode.stat_mean(r);
    double sd = std::sqrt(mode.stat_var(r));
    s.x.push_back(mu + sd * n01(rng));
  }
  return s;
}

StatStream gen_raw_samples(const LevelTrace& trace, const PowerMode& mode, Rng& rng,
                           int64_t sample_cap) {
  if (mode.Ns > sample_cap)
    throw std::invalid_argument("gen_raw_samples: Ns exceeds the sample cap");
  StatStream s;
  s.x.reserve(trace.level.size());
  s.truth = trace.level;
  std::normal_distribution<double> n01(0.0, 1.0);
  std::uniform_int_distribution<int> qpsk(0, 3);
  const double half = 0.5 * mode.sigma2_u;  // per-quadrature noise variance
  for (int16_t r : trace.level) {
    double P = mode.snr[r] * mode.sigma2_u;
    double amp = std::sqrt(0.5 * P);  // QPSK symbol (+-1 +-i)/sqrt(2) scaled by sqrt(P)
    double acc = 0.0;
    for (int i = 0; i < mode.Ns; ++i) {
      int q = qpsk(rng);
      double sr = (q & 1) ? -amp : amp;
      double si = (q & 2) ? -amp : amp;
      double ur = std::sqrt(half) * n01(rng);
      double ui = std::sqrt(half) * n01(rng);
      double re = sr + ur, im = si + ui;
      acc += re * re + im * im;
    }
    s.x.push_back(acc / static_cast<double>(mode.Ns));
  }
  return s;
}

GaussianCheck validate_gaussian_fit(const StatStream& s, int L, double skew_threshold) {
  GaussianCheck out;
  out.skewness.assign(L, std::numeric_limits<double>::quiet_NaN());
  out.flagged.assign(L, false);
  for (int r = 0; r < L; ++r) {
    double n = 0, m1 = 0;
    for (size_t i = 0; i < s.x.size(); ++i)
      if (s.truth[i] == r) { n += 1; m1 += s.x[i]; }
    if (n < 8) continue;
    m1 /= n;
    double m2 = 0, m3 = 0;
    for (size_t i = 0; i < s.x.size(); ++i)
      if (s.truth[i] == r) {
        double d = s.x[i] - m1;
        m2 += d * d;
        m3 += d * d * d;
      }
    m2 /= n;
    m3 /= n;
    double sk = m3 / std::pow(m2, 1.5);
    out.skewness[r] = sk;
    if (std::fabs(sk) > skew_threshold) {
      out.flagged[r] = true;
      out.any_flagged = true;
    }
  }
  return out;
}

}  // namespace specshare
