#include "specshare/dpgmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "specshare/mathfn.hpp"

namespace specshare {

void MixtureModel::validate() const {
  if (K < 1) throw std::invalid_argument("MixtureModel: K must be >= 1");
  if (static_cast<int>(mu.size()) != K || static_cast<int>(S.size()) != K ||
      static_cast<int>(pi.size()) != K)
    throw std::invalid_argument("MixtureModel: field sizes disagree with K");
  double s = 0.0;
  for (int k = 0; k < K; ++k) {
    if (!(S[k] > 0.0)) throw std::invalid_argument("MixtureModel: precisions must be positive");
    if (!(pi[k] > 0.0)) throw std::invalid_argument("MixtureModel: weights must be positive");
    if (k > 0 && mu[k] < mu[k - 1]) throw std::invalid_argument("MixtureModel: means not sorted");
    s += pi[k];
  }
  if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument("MixtureModel: weights must sum to 1");
}

namespace {

double gamma_draw(double shape, double rate, Rng& rng) {
  std::gamma_distribution<double> g(shape, 1.0 / rate);
  double v = g(rng);
  return std::clamp(v, 1e-300, 1e300);
}

double normal_draw(double mean, double var, Rng& rng) {
  std::normal_distribution<double> n(mean, std::sqrt(var));
  return n(rng);
}

Component draw_prior_component(const HyperParams& th, Rng& rng) {
  Component c;
  c.mu = normal_draw(th.lambda, 1.0 / th.R, rng);
  c.S = gamma_draw(0.5 * th.beta, 0.5 * th.beta * th.W, rng);
  c.count = 0;
  return c;
}

void drop_component(GibbsState& st, int idx) {
  st.comp.erase(st.comp.begin() + idx);
  for (auto& zi : st.z)
    if (zi > idx) --zi;
}

}  // namespace

namespace {

// A constant stream carries no mixture information; rounding in the variance
// accumulation can leave a nonzero residue, so test the range directly.
inline bool degenerate_stream(const std::vector<double>& x, double var) {
  auto [mn, mx] = std::minmax_element(x.begin(), x.end());
  return *mn == *mx || !(var > 0.0);
}

}  // namespace

GibbsState init_state(const std::vector<double>& x, const GibbsOptions& opt, Rng& rng) {
  if (x.size() < 2) throw std::invalid_argument("init_state: need at least 2 observations");
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  if (degenerate_stream(x, var))
    throw std::invalid_argument("init_state: constant stream, variance is zero");

  GibbsState st;
  st.x = x;
  st.hp = {mean, 1.0 / var};
  st.alpha = opt.alpha;
  st.k0 = opt.k0;

  // vague priors anchored at the empirical moments
  st.th.lambda = normal_draw(st.hp.mu_y, var, rng);
  st.th.R = gamma_draw(0.5, 0.5 / st.hp.S_y, rng);
  st.th.W = gamma_draw(0.5, 0.5 * st.hp.S_y, rng);
  st.th.beta = 1.0 / gamma_draw(0.5, 0.5, rng);
  st.th.beta = std::clamp(st.th.beta, 1e-8, 1e8);

  st.z.assign(x.size(), 0);
  st.comp.push_back({mean, 1.0 / var, static_cast<int>(x.size())});
  return st;
}

void sample_component_params(GibbsState& st, Rng& rng) {
  const auto& th = st.th;
  size_t K = st.comp.size();
  std::vector<double> sum(K, 0.0);
  std::vector<int> cnt(K, 0);
  for (size_t n = 0; n < st.x.size(); ++n) {
    sum[st.z[n]] += st.x[n];
    cnt[st.z[n]] += 1;
  }
  for (size_t k = 0; k < K; ++k) {
    st.comp[k].count = cnt[k];
    double Nk = cnt[k];
    double Sk = st.comp[k].S;
    double prec = Nk * Sk + th.R;
    double mean = (Sk * sum[k] + th.R * th.lambda) / prec;
    st.comp[k].mu = normal_draw(mean, 1.0 / prec, rng);
    double rss = 0.0;
    for (size_t n = 0; n < st.x.size(); ++n)
      if (st.z[n] == static_cast<int>(k)) {
        double d = st.x[n] - st.comp[k].mu;
        rss += d * d;
      }
    st.comp[k].S = gamma_draw(0.5 * (th.beta + Nk), 0.5 * (th.beta * th.W + rss), rng);
  }
}

void sample_hyperparams(GibbsState& st, BetaSampler method, Rng& rng) {
  auto& th = st.th;
  const auto& hp = st.hp;
  double K = static_cast<double>(st.comp.size());

  double sum_mu = 0.0;
  for (const auto& c : st.comp) sum_mu += c.mu;
  double prec = hp.S_y + K * th.R;
  th.lambda = normal_draw((hp.mu_y * hp.S_y + th.R * sum_mu) / prec, 1.0 / prec, rng);

  double ss = 0.0;
  for (const auto& c : st.comp) ss += (c.mu - th.lambda) * (c.mu - th.lambda);
  th.R = gamma_draw(0.5 * (K + 1.0), 0.5 * (hp.S_y + ss), rng);

  double sum_S = 0.0, sum_log_S = 0.0;
  for (const auto& c : st.comp) {
    sum_S += c.S;
    sum_log_S += std::log(c.S);
  }
  th.W = gamma_draw(0.5 * (K * th.beta + 1.0), 0.5 * (hp.S_y + th.beta * sum_S), rng);

  double sum_log_SW = sum_log_S + K * std::log(th.W);
  th.beta = sample_beta_conditional(th.beta, static_cast<int>(K), sum_log_SW, th.W * sum_S,
                                    method, rng);
  th.beta = std::clamp(th.beta, 1e-8, 1e8);
}

std::vector<double> indicator_weights(const GibbsState& st, size_t n,
                                      const std::vector<Component>& aux) {
  // Occupied weights use leave-one-out counts; auxiliaries carry alpha/k0.
  std::vector<double> w;
  w.reserve(st.comp.size() + aux.size());
  for (size_t k = 0; k < st.comp.size(); ++k) {
    int m = st.comp[k].count - (st.z[n] == static_cast<int>(k) ? 1 : 0);
    w.push_back(m > 0 ? m * gauss_pdf(st.x[n], st.comp[k].mu, st.comp[k].S) : 0.0);
  }
  double a = st.alpha / static_cast<double>(st.k0);
  for (const auto& c : aux) w.push_back(a * gauss_pdf(st.x[n], c.mu, c.S));
  return w;
}

void sample_indicators(GibbsState& st, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Component> aux(st.k0);
  for (size_t n = 0; n < st.x.size(); ++n) {
    int cur = st.z[n];
    bool singleton = (st.comp[cur].count == 1);
    // A singleton is relabeled into the auxiliary block, whose k0 slots are
    // all redrawn fresh from the prior (its old parameters are discarded).
    for (int j = 0; j < st.k0; ++j) aux[j] = draw_prior_component(st.th, rng);

    std::vector<double> w = indicator_weights(st, n, aux);
    double total = std::accumulate(w.begin(), w.end(), 0.0);
    size_t pick;
    if (total <= 0.0 || !std::isfinite(total)) {
      pick = singleton ? st.comp.size() : static_cast<size_t>(cur);  // keep current assignment
    } else {
      double u = unif(rng) * total;
      pick = 0;
      while (pick + 1 < w.size() && u > w[pick]) u -= w[pick++];
    }

    if (pick < st.comp.size()) {
      if (static_cast<int>(pick) != cur) {
        st.comp[cur].count -= 1;
        st.comp[pick].count += 1;
        st.z[n] = static_cast<int>(pick);
        if (st.comp[cur].count == 0) drop_component(st, cur);
      }
    } else if (singleton) {
      if (total > 0.0 && std::isfinite(total)) {
        st.comp[cur] = aux[pick - st.comp.size()];
        st.comp[cur].count = 1;
      }
    } else {
      st.comp[cur].count -= 1;
      Component nc = aux[pick - st.comp.size()];
      nc.count = 1;
      st.comp.push_back(nc);
      st.z[n] = static_cast<int>(st.comp.size()) - 1;
    }
  }
}

void remove_observation(GibbsState& st, size_t n) {
  int cur = st.z[n];
  if (cur < 0) return;
  st.comp[cur].count -= 1;
  st.z[n] = -1;
  if (st.comp[cur].count == 0) drop_component(st, cur);
}

void assign_observation(GibbsState& st, size_t n, Rng& rng) {
  if (st.z[n] >= 0) return;
  std::vector<Component> aux(st.k0);
  for (int j = 0; j < st.k0; ++j) aux[j] = draw_prior_component(st.th, rng);
  std::vector<double> w = indicator_weights(st, n, aux);
  double total = std::accumulate(w.begin(), w.end(), 0.0);
  size_t pick = 0;
  if (total <= 0.0 || !std::isfinite(total)) {
    // numerically dead weights: attach to the nearest existing mean
    double best = std::numeric_limits<double>::infinity();
    for (size_t k = 0; k < st.comp.size(); ++k) {
      double d = std::abs(st.x[n] - st.comp[k].mu);
      if (d < best) {
        best = d;
        pick = k;
      }
    }
  } else {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng) * total;
    while (pick + 1 < w.size() && u > w[pick]) u -= w[pick++];
  }
  if (pick < st.comp.size()) {
    st.comp[pick].count += 1;
    st.z[n] = static_cast<int>(pick);
  } else {
    Component nc = aux[pick - st.comp.size()];
    nc.count = 1;
    st.comp.push_back(nc);
    st.z[n] = static_cast<int>(st.comp.size()) - 1;
  }
}

namespace {

template <typename Label>
double loglik_impl(const std::vector<double>& x, const std::vector<Label>& z,
                   const std::vector<Component>& comp) {
  double N = static_cast<double>(x.size());
  double ll = 0.0;
  for (size_t n = 0; n < x.size(); ++n) {
    const Component& c = comp[z[n]];
    ll += std::log(c.count / N) + log_gauss_pdf(x[n], c.mu, c.S);
  }
  return ll;
}

}  // namespace

double complete_loglik(const std::vector<double>& x, const std::vector<uint16_t>& z,
                       const std::vector<Component>& comp) {
  return loglik_impl(x, z, comp);
}

double complete_loglik(const std::vector<double>& x, const std::vector<int>& z,
                       const std::vector<Component>& comp) {
  return loglik_impl(x, z, comp);
}

void gibbs_sweep(GibbsState& st, BetaSampler method, Rng& rng) {
  sample_component_params(st, rng);
  sample_hyperparams(st, method, rng);
  sample_indicators(st, rng);
}

namespace {

Snapshot take_snapshot(const GibbsState& st, int iter) {
  Snapshot s;
  s.iter = iter;
  s.comp = st.comp;
  s.z.assign(st.z.begin(), st.z.end());
  s.th = st.th;
  s.loglik = complete_loglik(st.x, s.z, s.comp);
  return s;
}

}  // namespace

GibbsChain run_gibbs(const std::vector<double>& x, const GibbsOptions& opt, Rng& rng) {
  if (opt.iters < 1 || opt.burnin < 0 || opt.burnin >= opt.iters)
    throw std::invalid_argument("run_gibbs: need 0 <= burnin < iters");
  if (opt.k0 < 1) throw std::invalid_argument("run_gibbs: k0 must be >= 1");
  GibbsState st = init_state(x, opt, rng);
  GibbsChain chain;
  chain.snaps.reserve(opt.iters - opt.burnin);
  for (int it = 0; it < opt.iters; ++it) {
    gibbs_sweep(st, opt.beta_sampler, rng);
    if (!std::isfinite(st.th.lambda) || !std::isfinite(st.th.R) || !std::isfinite(st.th.W) ||
        !std::isfinite(st.th.beta))
      chain.hyper_divergence = true;
    if (it >= opt.burnin) chain.snaps.push_back(take_snapshot(st, it));
  }
  return chain;
}

SummarizeOut summarize(const GibbsChain& chain, const std::vector<double>& x) {
  if (chain.snaps.empty()) throw std::invalid_argument("summarize: empty chain");

  std::vector<int> count;  // occurrences per K
  for (const auto& s : chain.snaps) {
    size_t K = s.comp.size();
    if (count.size() <= K) count.resize(K + 1, 0);
    count[K] += 1;
  }
  int modal_K = 0, best = -1;
  for (size_t K = 1; K < count.size(); ++K)
    if (count[K] > best) { best = count[K]; modal_K = static_cast<int>(K); }

  const Snapshot* pick = nullptr;
  for (const auto& s : chain.snaps) {
    if (static_cast<int>(s.comp.size()) != modal_K) continue;
    if (!pick || s.loglik > pick->loglik) pick = &s;
  }

  std::vector<int> order(modal_K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return pick->comp[a].mu < pick->comp[b].mu; });
  std::vector<int> rank(modal_K);
  for (int r = 0; r < modal_K; ++r) rank[order[r]] = r;

  SummarizeOut out;
  out.model.K = modal_K;
  out.model.mu.resize(modal_K);
  out.model.S.resize(modal_K);
  out.model.pi.resize(modal_K);
  double N = static_cast<double>(x.size());
  for (int r = 0; r < modal_K; ++r) {
    const Component& c = pick->comp[order[r]];
    out.model.mu[r] = c.mu;
    out.model.S[r] = c.S;
    out.model.pi[r] = c.count / N;
  }
  out.labels.reserve(pick->z.size());
  for (uint16_t zi : pick->z) out.labels.push_back(rank[zi]);
  out.snapshot_iter = pick->iter;
  out.modal_K = modal_K;
  out.loglik = pick->loglik;
  out.model.validate();
  return out;
}

EmResult fit_em_gmm(const std::vector<double>& x, int K, const EmOptions& opt, Rng& rng) {
  if (K < 1) throw std::invalid_argument("fit_em_gmm: K must be >= 1");
  if (static_cast<int>(x.size()) < 2 * K)
    throw std::invalid_argument("fit_em_gmm: too few observations for K components");

  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  if (degenerate_stream(x, var)) throw std::invalid_argument("fit_em_gmm: constant stream");
  const double var_floor = std::max(1e-12 * var, 1e-300);

  std::normal_distribution<double> jitter(0.0, std::sqrt(var) / (4.0 * K));
  EmResult best;
  best.loglik = -std::numeric_limits<double>::infinity();

  size_t N = x.size();
  std::vector<double> resp(N * K);
  for (int rs = 0; rs < opt.restarts; ++rs) {
    std::vector<double> mu(K), v(K, var / (K * K) + var_floor), pi(K, 1.0 / K);
    for (int k = 0; k < K; ++k) {
      size_t q = static_cast<size_t>((k + 0.5) / K * (N - 1));
      mu[k] = sorted[q] + (rs == 0 ? 0.0 : jitter(rng));
    }
    double prev_ll = -std::numeric_limits<double>::infinity();
    double ll = prev_ll;
    bool conv = false;
    int it = 0;
    for (; it < opt.max_iters; ++it) {
      ll = 0.0;
      for (size_t n = 0; n < N; ++n) {
        double mx = -std::numeric_limits<double>::infinity();
        for (int k = 0; k < K; ++k) {
          double lw = std::log(pi[k]) + log_gauss_pdf(x[n], mu[k], 1.0 / v[k]);
          resp[n * K + k] = lw;
          mx = std::max(mx, lw);
        }
        double norm = 0.0;
        for (int k = 0; k < K; ++k) norm += std::exp(resp[n * K + k] - mx);
        ll += mx + std::log(norm);
        for (int k = 0; k < K; ++k)
          resp[n * K + k] = std::exp(resp[n * K + k] - mx) / norm;
      }
      for (int k = 0; k < K; ++k) {
        double nk = 0.0, sx = 0.0;
        for (size_t n = 0; n < N; ++n) {
          nk += resp[n * K + k];
          sx += resp[n * K + k] * x[n];
        }
        nk = std::max(nk, 1e-12);
        mu[k] = sx / nk;
        double sv = 0.0;
        for (size_t n = 0; n < N; ++n) {
          double d = x[n] - mu[k];
          sv += resp[n * K + k] * d * d;
        }
        v[k] = std::max(sv / nk, var_floor);
        pi[k] = nk / static_cast<double>(N);
      }
      if (std::fabs(ll - prev_ll) < opt.tol * (1.0 + std::fabs(ll))) {
        conv = true;
        break;
      }
      prev_ll = ll;
    }
    if (ll > best.loglik) {
      std::vector<int> order(K);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return mu[a] < mu[b]; });
      best.model.K = K;
      best.model.mu.clear();
      best.model.S.clear();
      best.model.pi.clear();
      for (int r = 0; r < K; ++r) {
        best.model.mu.push_back(mu[order[r]]);
        best.model.S.push_back(1.0 / v[order[r]]);
        best.model.pi.push_back(std::max(pi[order[r]], 1e-300));
      }
      double psum = std::accumulate(best.model.pi.begin(), best.model.pi.end(), 0.0);
      for (auto& p : best.model.pi) p /= psum;
      best.loglik = ll;
      best.converged = conv;
      best.iters = it + 1;
    }
  }
  best.model.validate();
  return best;
}

}  // namespace specshare
