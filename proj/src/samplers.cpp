#include "specshare/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "specshare/mathfn.hpp"

namespace specshare {

namespace {

struct HullPoint {
  double t, h, hp;
};

// Integral of exp(h + hp*(t - t0)) over [a, b], returned as a log.
double log_segment_mass(const HullPoint& p, double a, double b) {
  double la = p.h + p.hp * (a - p.t);
  double lb = p.h + p.hp * (b - p.t);
  if (std::fabs(p.hp) < 1e-12) return 0.5 * (la + lb) + std::log(b - a);
  if (p.hp > 0.0) return lb + std::log1p(-std::exp(la - lb)) - std::log(p.hp);
  return la + std::log1p(-std::exp(lb - la)) - std::log(-p.hp);
}

// Inverse-CDF draw within one tangent segment.
double draw_in_segment(const HullPoint& p, double a, double b, double u) {
  if (std::fabs(p.hp) < 1e-12) return a + u * (b - a);
  // F(t) ~ exp(hp*(t-a)). For c > 0 factor out exp(c) so the draw stays finite
  // for arbitrarily steep segments; the naive expm1 form overflows past c ~ 709
  // and the runaway abscissa then poisons the hull refinement.
  double c = p.hp * (b - a);
  double v = c > 0.0 ? 1.0 + std::log(u + (1.0 - u) * std::exp(-c)) / c
                     : std::log1p(u * std::expm1(c)) / c;
  v = std::clamp(v, 0.0, 1.0);
  return a + v * (b - a);
}

}  // namespace

double ars_sample(const std::function<double(double)>& h, const std::function<double(double)>& hp,
                  double lo, double hi, Rng& rng) {
  if (!(lo < hi)) throw std::invalid_argument("ars_sample: empty domain");

  // Seed abscissae around the mode found by a coarse scan.
  int grid_n = 64;
  double best_t = lo, best_h = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < grid_n; ++i) {
    double t = lo + (hi - lo) * (i + 0.5) / grid_n;
    double v = h(t);
    if (v > best_h) { best_h = v; best_t = t; }
  }
  std::vector<HullPoint> pts;
  double span = (hi - lo) / grid_n;
  for (double off : {-4.0, -1.5, 0.0, 1.5, 4.0}) {
    double t = std::clamp(best_t + off * span * 4.0, lo + 1e-9, hi - 1e-9);
    pts.push_back({t, h(t), hp(t)});
  }
  std::sort(pts.begin(), pts.end(), [](const HullPoint& a, const HullPoint& b) { return a.t < b.t; });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const HullPoint& a, const HullPoint& b) { return std::fabs(a.t - b.t) < 1e-12; }),
            pts.end());

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int iter = 0; iter < 200; ++iter) {
    // Tangent-intersection breakpoints; segment i uses the tangent at pts[i].
    size_t n = pts.size();
    std::vector<double> brk(n + 1);
    brk[0] = lo;
    brk[n] = hi;
    bool ok = true;
    for (size_t i = 0; i + 1 < n; ++i) {
      double d = pts[i].hp - pts[i + 1].hp;
      double z;
      if (std::fabs(d) < 1e-14) {
        z = 0.5 * (pts[i].t + pts[i + 1].t);
      } else {
        z = (pts[i + 1].h - pts[i].h - pts[i + 1].t * pts[i + 1].hp + pts[i].t * pts[i].hp) / d;
      }
      // log-concavity puts the crossing between the abscissae; clamp raggedness
      z = std::clamp(z, pts[i].t, pts[i + 1].t);
      brk[i + 1] = z;
      if (!(z >= brk[i])) ok = false;
    }
    if (!ok) throw std::runtime_error("ars_sample: envelope construction failed (density not log-concave?)");

    std::vector<double> lmass(n);
    double lmax = -std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < n; ++i) {
      lmass[i] = (brk[i + 1] > brk[i]) ? log_segment_mass(pts[i], brk[i], brk[i + 1])
                                       : -std::numeric_limits<double>::infinity();
      lmax = std::max(lmax, lmass[i]);
    }
    double total = 0.0;
    for (size_t i = 0; i < n; ++i) total += std::exp(lmass[i] - lmax);

    double u = unif(rng) * total;
    size_t seg = 0;
    for (; seg < n; ++seg) {
      double w = std::exp(lmass[seg] - lmax);
      if (u <= w || seg == n - 1) break;
      u -= w;
    }
    double t = draw_in_segment(pts[seg], brk[seg], brk[seg + 1], unif(rng));
    double env = pts[seg].h + pts[seg].hp * (t - pts[seg].t);
    double ht = h(t);
    if (std::log(unif(rng) + 1e-300) <= ht - env) return t;
    // Rejected: refine the hull at the rejected point.
    HullPoint np{t, ht, hp(t)};
    auto pos = std::lower_bound(pts.begin(), pts.end(), np,
                                [](const HullPoint& a, const HullPoint& b) { return a.t < b.t; });
    if (pos == pts.end() || std::fabs(pos->t - t) > 1e-12) pts.insert(pos, np);
  }
  throw std::runtime_error("ars_sample: acceptance failed after 200 refinements");
}

double slice_sample(const std::function<double(double)>& h, double t0, double width, double lo,
                    double hi, Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double h0 = h(t0);
  double logy = h0 + std::log(unif(rng) + 1e-300);
  // stepping out
  double l = t0 - width * unif(rng);
  double r = l + width;
  int m = 1000;
  while (m-- > 0 && l > lo && h(l) > logy) l -= width;
  l = std::max(l, lo);
  m = 1000;
  while (m-- > 0 && r < hi && h(r) > logy) r += width;
  r = std::min(r, hi);
  // shrinkage
  for (int i = 0; i < 1000; ++i) {
    double t = l + (r - l) * unif(rng);
    if (h(t) > logy) return t;
    if (t < t0) l = t; else r = t;
  }
  return t0;
}

double log_beta_conditional_density(double beta, int K, double sum_log_SW, double W_sum_S) {
  // Gamma(b/2)^-K exp(-1/(2b)) (b/2)^((Kb-3)/2) prod_k (S_k W)^(b/2) exp(-b S_k W / 2)
  double b2 = 0.5 * beta;
  return -K * std::lgamma(b2) - 0.5 / beta + 0.5 * (K * beta - 3.0) * std::log(b2) +
         0.5 * beta * sum_log_SW - 0.5 * beta * W_sum_S;
}

double sample_beta_conditional(double beta_prev, int K, double sum_log_SW, double W_sum_S,
                               BetaSampler method, Rng& rng) {
  const double lo = std::log(1e-8), hi = std::log(1e8);
  auto h = [=](double t) {
    double beta = std::exp(t);
    return log_beta_conditional_density(beta, K, sum_log_SW, W_sum_S) + t;  // Jacobian
  };
  if (method == BetaSampler::Slice) {
    double t0 = std::clamp(std::log(std::max(beta_prev, 1e-8)), lo + 1e-6, hi - 1e-6);
    return std::exp(slice_sample(h, t0, 1.0, lo, hi, rng));
  }
  auto hp = [=](double t) {
    double beta = std::exp(t);
    double b2 = 0.5 * beta;
    double d = -0.5 * K * digamma(b2) + 0.5 / (beta * beta) + 0.5 * K * std::log(b2) +
               0.5 * (K * beta - 3.0) / beta + 0.5 * sum_log_SW - 0.5 * W_sum_S;
    return beta * d + 1.0;
  };
  return std::exp(ars_sample(h, hp, lo, hi, rng));
}

}  // namespace specshare
