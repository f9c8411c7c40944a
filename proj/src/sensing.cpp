#include "specshare/sensing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "specshare/mathfn.hpp"

namespace specshare {

namespace {

// log posterior score (up to a common constant) of component k at x
inline double map_score(const MixtureModel& m, int k, double x) {
  return std::log(m.pi[k]) + 0.5 * std::log(m.S[k]) - 0.5 * m.S[k] * (x - m.mu[k]) * (x - m.mu[k]);
}

void check_not_degenerate(const MixtureModel& m) {
  m.validate();
  double span = m.mu.back() - m.mu.front() + 1.0;
  for (int k = 1; k < m.K; ++k)
    if (m.mu[k] - m.mu[k - 1] < 1e-12 * span && std::fabs(m.S[k] - m.S[k - 1]) < 1e-9 * (m.S[k] + m.S[k - 1]))
      throw std::invalid_argument("sensing: degenerate model, coincident components");
}

}  // namespace

int classify(double x, const MixtureModel& m) {
  m.validate();
  int best = 0;
  double bs = map_score(m, 0, x);
  for (int k = 1; k < m.K; ++k) {
    double s = map_score(m, k, x);
    if (s > bs) { bs = s; best = k; }
  }
  return best;
}

std::vector<DecisionInterval> decision_partition(const MixtureModel& m) {
  check_not_degenerate(m);
  const double inf = std::numeric_limits<double>::infinity();
  if (m.K == 1) return {{-inf, inf, 0}};

  // Pairwise equal-score points: roots of quadratics in x.
  std::vector<double> cuts;
  for (int i = 0; i < m.K; ++i) {
    for (int j = i + 1; j < m.K; ++j) {
      double a = 0.5 * (m.S[j] - m.S[i]);
      double b = m.S[i] * m.mu[i] - m.S[j] * m.mu[j];
      double c = std::log(m.pi[i] / m.pi[j]) + 0.5 * std::log(m.S[i] / m.S[j]) -
                 0.5 * m.S[i] * m.mu[i] * m.mu[i] + 0.5 * m.S[j] * m.mu[j] * m.mu[j];
      if (std::fabs(a) < 1e-300) {
        if (std::fabs(b) > 0.0) cuts.push_back(-c / b);
      } else {
        double disc = b * b - 4.0 * a * c;
        if (disc >= 0.0) {
          double r = std::sqrt(disc);
          cuts.push_back((-b + r) / (2.0 * a));
          cuts.push_back((-b - r) / (2.0 * a));
        }
      }
    }
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end(),
                         [](double a, double b) { return std::fabs(a - b) < 1e-13; }),
             cuts.end());

  std::vector<DecisionInterval> parts;
  double lo = -inf;
  auto label_at = [&](double x) {
    int best = 0;
    double bs = map_score(m, 0, x);
    for (int k = 1; k < m.K; ++k) {
      double s = map_score(m, k, x);
      if (s > bs) { bs = s; best = k; }
    }
    return best;
  };
  double left_probe = m.mu.front() - 100.0 / std::sqrt(m.S[0]);
  for (size_t i = 0; i <= cuts.size(); ++i) {
    double hi = (i < cuts.size()) ? cuts[i] : inf;
    double probe;
    if (std::isinf(lo) && std::isinf(hi)) probe = 0.0;
    else if (std::isinf(lo)) probe = std::min(hi - 1.0, left_probe);
    else if (std::isinf(hi)) probe = std::max(lo + 1.0, m.mu.back() + 100.0 / std::sqrt(m.S.back()));
    else probe = 0.5 * (lo + hi);
    int lab = label_at(probe);
    if (!parts.empty() && parts.back().label == lab)
      parts.back().hi = hi;
    else
      parts.push_back({lo, hi, lab});
    lo = hi;
  }
  return parts;
}

namespace {

// Mass of N(mu, 1/S) over [a, b] by adaptive Simpson; infinite ends clamped
// far beyond any representable tail mass.
double interval_mass(double mu, double S, double a, double b, double tol) {
  double sd = 1.0 / std::sqrt(S);
  double lo = std::max(a, mu - 60.0 * sd);
  double hi = std::min(b, mu + 60.0 * sd);
  if (lo >= hi) return 0.0;
  bool ok = true;
  double v = adaptive_simpson([&](double x) { return gauss_pdf(x, mu, S); }, lo, hi, tol, 60, &ok);
  if (!ok) throw std::runtime_error("estimate_confusion: quadrature did not converge");
  return std::max(v, 0.0);
}

Mat confusion_against(const MixtureModel& gen, const std::vector<DecisionInterval>& parts,
                      int Kout, double tol) {
  Mat H(gen.K, std::vector<double>(Kout, 0.0));
  for (int k = 0; k < gen.K; ++k)
    for (const auto& p : parts)
      H[k][p.label] += interval_mass(gen.mu[k], gen.S[k], p.lo, p.hi, tol);
  return H;
}

}  // namespace

Mat estimate_confusion(const MixtureModel& m, double tol) {
  auto parts = decision_partition(m);
  return confusion_against(m, parts, m.K, tol);
}

Mat cross_confusion(const MixtureModel& gen, const MixtureModel& classifier, double tol) {
  auto parts = decision_partition(classifier);
  return confusion_against(gen, parts, classifier.K, tol);
}

Mat transition_matrix(const std::vector<double>& prior) {
  int K = static_cast<int>(prior.size());
  if (K < 2) throw std::invalid_argument("transition_matrix: need at least 2 levels");
  double s = 0.0;
  for (double p : prior) {
    if (!(p > 0.0 && p < 1.0))
      throw std::invalid_argument("transition_matrix: prior entries must lie in (0,1)");
    s += p;
  }
  if (std::fabs(s - 1.0) > 1e-9) throw std::invalid_argument("transition_matrix: prior must sum to 1");
  Mat C(K, std::vector<double>(K, 0.0));
  for (int k = 0; k < K; ++k)
    for (int j = 0; j < K; ++j)
      if (j != k) C[k][j] = prior[j] / (1.0 - prior[k]);
  return C;
}

double estimate_duration_mean(const std::vector<int>& labels) {
  if (labels.size() < 3) throw std::invalid_argument("estimate_duration_mean: trace too short");
  std::vector<int64_t> runs;
  int64_t len = 1;
  for (size_t i = 1; i < labels.size(); ++i) {
    if (labels[i] == labels[i - 1]) {
      ++len;
    } else {
      runs.push_back(len);
      len = 1;
    }
  }
  runs.push_back(len);
  // first and last runs are censored by the trace boundaries
  if (runs.size() < 4) throw std::invalid_argument("estimate_duration_mean: fewer than 2 interior runs");
  double sum = 0.0;
  for (size_t i = 1; i + 1 < runs.size(); ++i) sum += static_cast<double>(runs[i]);
  return sum / static_cast<double>(runs.size() - 2);
}

std::vector<int> majority_smooth(const std::vector<int>& labels, int window) {
  if (window <= 1) return labels;
  if (window % 2 == 0) throw std::invalid_argument("majority_smooth: window must be odd");
  int half = window / 2;
  int n = static_cast<int>(labels.size());
  int maxl = 0;
  for (int l : labels) maxl = std::max(maxl, l);
  std::vector<int> out(labels.size());
  std::vector<int> cnt(maxl + 1, 0);
  for (int i = 0; i < n; ++i) {
    int lo = std::max(0, i - half), hi = std::min(n - 1, i + half);
    std::fill(cnt.begin(), cnt.end(), 0);
    for (int j = lo; j <= hi; ++j) cnt[labels[j]] += 1;
    int best = labels[i];
    for (int l = 0; l <= maxl; ++l)
      if (cnt[l] > cnt[best]) best = l;
    out[i] = best;
  }
  return out;
}

double survival(double nu, int64_t tau, int64_t tau0, bool* saturated) {
  if (saturated) *saturated = false;
  if (!(nu > 0.0)) throw std::invalid_argument("survival: nu must be positive");
  if (tau < 0 || tau0 < 0) throw std::invalid_argument("survival: negative time");
  if (tau0 == 0) return 1.0;
  double lg = log_poisson_sf(static_cast<double>(tau + tau0), nu) -
              log_poisson_sf(static_cast<double>(tau), nu);
  double g = std::exp(lg);
  if (!std::isfinite(g) || g <= 0.0) {
    if (saturated) *saturated = true;
    return 0.0;
  }
  return std::min(g, 1.0);
}

double p_c(const Mat& H, const std::vector<double>& prior) {
  if (H.size() != prior.size()) throw std::invalid_argument("p_c: size mismatch");
  double v = 0.0;
  for (size_t l = 0; l < H.size(); ++l) v += H[l][l] * prior[l];
  return v;
}

Mat default_ack(const std::vector<int>& paper_index) {
  int K = static_cast<int>(paper_index.size());
  Mat a(K, std::vector<double>(K, 0.0));
  for (int i = 0; i < K; ++i)
    for (int j = 0; j < K; ++j)
      a[i][j] = (i == j || paper_index[i] > paper_index[j]) ? 1.0 : 0.0;
  return a;
}

SenseModel build_sense_model(const MixtureModel& m, double nu_hat, const Mat* ack_override) {
  if (!(nu_hat >= 1.0)) throw std::invalid_argument("build_sense_model: nu_hat must be >= 1");
  SenseModel sm;
  sm.K = m.K;
  sm.H = estimate_confusion(m);
  sm.C = transition_matrix(m.pi);
  sm.paper_index.resize(m.K);
  for (int r = 0; r < m.K; ++r) sm.paper_index[r] = (r == 0) ? m.K : r;
  sm.ack = ack_override ? *ack_override : default_ack(sm.paper_index);
  if (static_cast<int>(sm.ack.size()) != m.K)
    throw std::invalid_argument("build_sense_model: ack table size mismatch");
  sm.nu_hat = nu_hat;
  sm.M.assign(m.K, std::vector<double>(m.K, 0.0));
  for (int k = 0; k < m.K; ++k)
    for (int j = 0; j < m.K; ++j)
      for (int i = 0; i < m.K; ++i) sm.M[k][j] += sm.C[k][i] * sm.H[i][j];
  return sm;
}

}  // namespace specshare
