#include "specshare/policy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace specshare {

void RewardSpec::validate(int K) const {
  if (tau_s < 1) throw std::invalid_argument("RewardSpec: tau_s must be >= 1");
  if (static_cast<int>(D.size()) != K || static_cast<int>(Y.size()) != K)
    throw std::invalid_argument("RewardSpec: D/Y size mismatch");
  for (int k = 0; k < K; ++k)
    if (D[k] < 0.0 || Y[k] < 0.0) throw std::invalid_argument("RewardSpec: negative weight");
}

namespace {

double mismatch_penalty(int k, const SenseModel& sm, const RewardSpec& rs) {
  double v = 0.0;
  for (int j = 0; j < sm.K; ++j) v += sm.C[k][j] * rs.Y[j];
  return v;
}

double ack_decode_prob(int k, const SenseModel& sm) {
  double v = 0.0;
  for (int j = 0; j < sm.K; ++j) v += sm.C[k][j] * sm.ack[k][j];
  return v;
}

}  // namespace

BeliefState belief_update_predict(const BeliefState& b, int obs, const SenseModel& sm) {
  if (obs < 0 || obs >= sm.K) throw std::invalid_argument("belief_update_predict: bad observation");
  double g = survival(sm.nu_hat, b.tau, 1);
  double w = b.p * g * sm.H[b.k][obs];
  double den = w + (1.0 - b.p * g) * sm.M[b.k][obs];
  if (den <= 0.0)
    throw std::runtime_error("belief_update_predict: zero observation probability (degenerate model)");
  return {b.k, b.tau + 1, w / den};
}

BeliefState belief_update_transmit(const BeliefState& b, bool ack_positive, const SenseModel& sm,
                                   int tau_s) {
  if (!ack_positive) return {b.k, b.tau + tau_s, 0.0};
  double g = survival(sm.nu_hat, b.tau, tau_s);
  double w = b.p * g;
  double den = w + (1.0 - w) * ack_decode_prob(b.k, sm);
  if (den <= 0.0) return {b.k, b.tau + tau_s, 1.0};  // positive ACK only from a match
  return {b.k, b.tau + tau_s, w / den};
}

double expected_reward(const BeliefState& b, Action a, const SenseModel& sm, const RewardSpec& rs) {
  if (a == Action::Predict) return 0.0;
  double g = survival(sm.nu_hat, b.tau, rs.tau_s);
  double pg = b.p * g;
  return (pg * rs.D[b.k] - (1.0 - pg) * mismatch_penalty(b.k, sm, rs)) * rs.tau_s;
}

int64_t horizon(int k, const SenseModel& sm, const RewardSpec& rs, int64_t scan_cap) {
  rs.validate(sm.K);
  double pen = mismatch_penalty(k, sm, rs);
  double den = pen + rs.D[k];
  if (!(den > 0.0)) throw std::invalid_argument("horizon: D and the expected penalty are both zero");
  double ratio = pen / den;
  double prev = std::numeric_limits<double>::infinity();
  for (int64_t tau = 0; tau <= scan_cap; ++tau) {
    double g = survival(sm.nu_hat, tau, rs.tau_s);
    if (g > prev + 1e-12)
      throw std::runtime_error("horizon: survival not non-increasing along the scan");
    prev = g;
    if (g < ratio) return std::max<int64_t>(tau - 1, 0);
  }
  throw std::runtime_error("horizon: scan cap exceeded");
}

namespace {

inline double grid_p(int i, int G) { return static_cast<double>(i) / (G - 1); }

// Linear interpolation of a grid row at p in [0,1].
inline double interp(const std::vector<double>& row, double p) {
  int G = static_cast<int>(row.size());
  double t = p * (G - 1);
  int i = static_cast<int>(t);
  if (i >= G - 1) return row[G - 1];
  double f = t - i;
  return row[i] * (1.0 - f) + row[i + 1] * f;
}

struct LevelCtx {
  const SenseModel& sm;
  const RewardSpec& rs;
  int k;
  int64_t T_k;
  double q_k;    // P(decode | mismatch)
  double pen;    // expected mismatch penalty
  std::vector<double> g1;   // survival(tau, 1) for tau in [0, T_k]
  std::vector<double> gs;   // survival(tau, tau_s)
};

double value_at(const LevelPolicy& lp, int64_t tau, double p) {
  if (tau > lp.T_k) return 0.0;
  return interp(lp.V[tau], p);
}

double eval_E_ctx(const LevelCtx& c, const LevelPolicy& lp, int64_t tau, double p) {
  double g = c.g1[tau];
  double pg = p * g;
  double e = 0.0;
  for (int j = 0; j < c.sm.K; ++j) {
    double w = pg * c.sm.H[c.k][j];
    double pr = w + (1.0 - pg) * c.sm.M[c.k][j];
    if (pr <= 0.0) continue;
    e += pr * value_at(lp, tau + 1, w / pr);
  }
  return e;
}

double eval_A_ctx(const LevelCtx& c, const LevelPolicy& lp, int64_t tau, double p) {
  double g = c.gs[tau];
  double pg = p * g;
  double pos = pg + (1.0 - pg) * c.q_k;
  double r = (pg * c.rs.D[c.k] - (1.0 - pg) * c.pen) * c.rs.tau_s;
  double v = r;
  if (pos > 0.0) v += pos * value_at(lp, tau + c.rs.tau_s, pg / pos);
  if (pos < 1.0) v += (1.0 - pos) * value_at(lp, tau + c.rs.tau_s, 0.0);
  return v;
}

void check_column_shape(const std::vector<double>& col, const char* what, int k, int64_t tau) {
  double scale = 1.0;
  for (double v : col) scale = std::max(scale, std::fabs(v));
  double tol = 1e-9 * scale;
  for (size_t i = 1; i < col.size(); ++i)
    if (col[i] < col[i - 1] - tol)
      throw std::runtime_error(std::string("solve_value: ") + what +
                               " not non-decreasing in p at level " + std::to_string(k) +
                               ", tau " + std::to_string(tau));
  for (size_t i = 1; i + 1 < col.size(); ++i)
    if (col[i + 1] + col[i - 1] - 2.0 * col[i] < -tol)
      throw std::runtime_error(std::string("solve_value: ") + what + " not convex in p at level " +
                               std::to_string(k) + ", tau " + std::to_string(tau));
}

}  // namespace

double eval_E(const LevelPolicy& lp, const SenseModel& sm, const RewardSpec& rs, int64_t tau,
              double p) {
  LevelCtx c{sm, rs, lp.k, lp.T_k, ack_decode_prob(lp.k, sm), mismatch_penalty(lp.k, sm, rs), {}, {}};
  c.g1.resize(lp.T_k + 1);
  c.gs.resize(lp.T_k + 1);
  for (int64_t t = 0; t <= lp.T_k; ++t) {
    c.g1[t] = survival(sm.nu_hat, t, 1);
    c.gs[t] = survival(sm.nu_hat, t, rs.tau_s);
  }
  return eval_E_ctx(c, lp, tau, p);
}

double eval_A(const LevelPolicy& lp, const SenseModel& sm, const RewardSpec& rs, int64_t tau,
              double p) {
  LevelCtx c{sm, rs, lp.k, lp.T_k, ack_decode_prob(lp.k, sm), mismatch_penalty(lp.k, sm, rs), {}, {}};
  c.g1.resize(lp.T_k + 1);
  c.gs.resize(lp.T_k + 1);
  for (int64_t t = 0; t <= lp.T_k; ++t) {
    c.g1[t] = survival(sm.nu_hat, t, 1);
    c.gs[t] = survival(sm.nu_hat, t, rs.tau_s);
  }
  return eval_A_ctx(c, lp, tau, p);
}

LevelPolicy solve_value(int k, const SenseModel& sm, const RewardSpec& rs, int grid_size) {
  if (grid_size < 3) throw std::invalid_argument("solve_value: grid too small");
  if (k < 0 || k >= sm.K) throw std::invalid_argument("solve_value: bad level index");
  rs.validate(sm.K);

  LevelPolicy lp;
  lp.k = k;
  lp.grid_size = grid_size;
  lp.T_k = horizon(k, sm, rs);

  LevelCtx c{sm, rs, k, lp.T_k, ack_decode_prob(k, sm), mismatch_penalty(k, sm, rs), {}, {}};
  c.g1.resize(lp.T_k + 1);
  c.gs.resize(lp.T_k + 1);
  for (int64_t t = 0; t <= lp.T_k; ++t) {
    c.g1[t] = survival(sm.nu_hat, t, 1);
    c.gs[t] = survival(sm.nu_hat, t, rs.tau_s);
  }

  int64_t rows = lp.T_k + 1;
  lp.V.assign(rows, std::vector<double>(grid_size, 0.0));
  lp.E.assign(rows, std::vector<double>(grid_size, 0.0));
  lp.A.assign(rows, std::vector<double>(grid_size, 0.0));
  lp.p_star.assign(rows, 1.0);
  lp.p_star2.assign(rows, 1.0);

  for (int64_t tau = lp.T_k; tau >= 0; --tau) {
    auto& Ec = lp.E[tau];
    auto& Ac = lp.A[tau];
    auto& Vc = lp.V[tau];
    for (int i = 0; i < grid_size; ++i) {
      double p = grid_p(i, grid_size);
      Ec[i] = eval_E_ctx(c, lp, tau, p);
      Ac[i] = eval_A_ctx(c, lp, tau, p);
      Vc[i] = std::max(Ec[i], Ac[i]);
    }
    check_column_shape(Ec, "E", k, tau);
    check_column_shape(Ac, "A", k, tau);
    check_column_shape(Vc, "V", k, tau);

    // sign pattern of A - E: at most two changes (predict / transmit / predict)
    int changes = 0;
    bool prev_le = Ec[0] <= Ac[0];
    int first_le = prev_le ? 0 : -1, last_le = prev_le ? 0 : -1;
    for (int i = 1; i < grid_size; ++i) {
      bool le = Ec[i] <= Ac[i];
      if (le != prev_le) { ++changes; prev_le = le; }
      if (le) {
        if (first_le < 0) first_le = i;
        last_le = i;
      }
    }
    if (changes > 2)
      throw std::runtime_error("solve_value: more than two E/A sign changes at level " +
                               std::to_string(k) + ", tau " + std::to_string(tau));

    if (first_le >= 0) {
      double lo = grid_p(first_le, grid_size);
      if (first_le > 0) {
        // refine the crossing within the bracketing cell
        double a = grid_p(first_le - 1, grid_size), b = lo;
        for (int it = 0; it < 60; ++it) {
          double m = 0.5 * (a + b);
          if (eval_E_ctx(c, lp, tau, m) <= eval_A_ctx(c, lp, tau, m)) b = m; else a = m;
        }
        lo = b;
      }
      lp.p_star[tau] = lo;
      double hi = grid_p(last_le, grid_size);
      if (last_le < grid_size - 1) {
        double a = hi, b = grid_p(last_le + 1, grid_size);
        for (int it = 0; it < 60; ++it) {
          double m = 0.5 * (a + b);
          if (eval_E_ctx(c, lp, tau, m) <= eval_A_ctx(c, lp, tau, m)) a = m; else b = m;
        }
        hi = a;
      }
      lp.p_star2[tau] = (last_le == grid_size - 1) ? 1.0 : hi;
    }
  }
  return lp;
}

PolicyTable solve_policy(const SenseModel& sm, const RewardSpec& rs, int grid_size) {
  PolicyTable t;
  t.rs = rs;
  t.grid_size = grid_size;
  for (int k = 0; k < sm.K; ++k) t.levels.push_back(solve_value(k, sm, rs, grid_size));
  return t;
}

Action act(const BeliefState& b, const LevelPolicy& lp) {
  if (b.tau > lp.T_k) return Action::Predict;
  double ps = lp.p_star[b.tau], ps2 = lp.p_star2[b.tau];
  if (b.p <= ps) return Action::Predict;
  if (ps2 < 1.0 && b.p >= ps2) return Action::Predict;
  return Action::Transmit;
}

McValue monte_carlo_value(const PolicyTable& table, int k, const SenseModel& sm,
                          const RewardSpec& rs, int episodes, Rng& rng) {
  if (episodes < 1) throw std::invalid_argument("monte_carlo_value: episodes must be >= 1");
  if (k < 0 || k >= static_cast<int>(table.levels.size()))
    throw std::invalid_argument("monte_carlo_value: bad level index");
  const LevelPolicy& lp = table.levels[k];

  std::poisson_distribution<int64_t> pois(sm.nu_hat);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  auto draw_row = [&](const std::vector<double>& row) {
    double u = unif(rng);
    for (int j = 0; j < static_cast<int>(row.size()); ++j) {
      u -= row[j];
      if (u <= 0.0) return j;
    }
    return static_cast<int>(row.size()) - 1;
  };

  double sum = 0.0, sum2 = 0.0;
  for (int ep = 0; ep < episodes; ++ep) {
    int64_t T = 0;
    do { T = pois(rng); } while (T < 1);

    BeliefState b{k, 0, 1.0};
    double total = 0.0;
    while (b.tau <= lp.T_k) {
      if (act(b, lp) == Action::Predict) {
        bool present = T > b.tau + 1;
        int obs = present ? draw_row(sm.H[k]) : draw_row(sm.M[k]);
        b = belief_update_predict(b, obs, sm);
      } else {
        bool matched = T > b.tau + rs.tau_s;
        bool positive;
        if (matched) {
          total += rs.D[k] * rs.tau_s;
          positive = true;
        } else {
          int w = draw_row(sm.C[k]);  // the level the primary moved to
          total -= rs.Y[w] * rs.tau_s;
          positive = sm.ack[k][w] >= 0.5;
        }
        b = belief_update_transmit(b, positive, sm, rs.tau_s);
      }
    }
    sum += total;
    sum2 += total * total;
  }
  McValue v;
  v.mean = sum / episodes;
  double var = std::max(sum2 / episodes - v.mean * v.mean, 0.0);
  v.se = std::sqrt(var / episodes);
  return v;
}

}  // namespace specshare
