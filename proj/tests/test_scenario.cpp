#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "specshare/rng.hpp"
#include "specshare/scenario.hpp"

using namespace specshare;

namespace {

PowerMode baseline_mode(double gamma_unit = std::pow(10.0, -1.2), double nu = 50.0,
                        int Ns = 10000) {
  // conventional order: powers ascending, idle last
  return PowerMode::make({gamma_unit, 2 * gamma_unit, 3 * gamma_unit, 0.0},
                         {0.25, 0.25, 0.25, 0.25}, 1.0, nu, Ns);
}

}  // namespace

TEST_CASE("mode construction sorts ranks and validates") {
  PowerMode m = baseline_mode();
  CHECK(m.L == 4);
  CHECK(m.snr[0] == 0.0);  // idle at rank 0
  CHECK(std::is_sorted(m.snr.begin(), m.snr.end()));
  double ps = 0.0;
  for (double p : m.prior) ps += p;
  CHECK(ps == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS(PowerMode::make({0.1, 0.2}, {0.5, 0.5}, 1.0, 50.0, 10000));       // no idle level
  CHECK_THROWS(PowerMode::make({0.0, 0.0, 0.1}, {0.3, 0.3, 0.4}, 1.0, 50.0, 10000));  // two idle levels
  CHECK_THROWS(PowerMode::make({0.1, 0.0}, {0.5, 0.5}, 1.0, 50.0, 50));          // Ns below regime
}

TEST_CASE("two levels force strict alternation") {
  PowerMode m = PowerMode::make({0.5, 0.0}, {0.5, 0.5}, 1.0, 5.0, 1000);
  Rng rng = substream(11, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 5000, rng);
  for (size_t i = 1; i < t.segments.size(); ++i)
    CHECK(t.segments[i].level != t.segments[i - 1].level);
  for (size_t i = 1; i < t.segments.size(); ++i)
    CHECK(t.segments[i].level == 1 - t.segments[i - 1].level);
}

TEST_CASE("durations are conditioned-positive Poisson draws") {
  PowerMode m = baseline_mode();
  Rng rng = substream(3, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 100000, rng);
  int64_t covered = 0;
  for (const auto& s : t.segments) {
    CHECK(s.dur >= 1);
    covered += s.dur;
  }
  CHECK(covered == 100000);
  CHECK(static_cast<int64_t>(t.level.size()) == 100000);

  // empirical mean within 3 nu / sqrt(M) of nu (interior segments only; the
  // final one is horizon-truncated)
  double sum = 0.0;
  size_t M = t.segments.size() - 1;
  for (size_t i = 0; i < M; ++i) sum += static_cast<double>(t.segments[i].dur);
  double mean = sum / static_cast<double>(M);
  CHECK(std::fabs(mean - 50.0) < 3.0 * 50.0 / std::sqrt(static_cast<double>(M)));
}

TEST_CASE("duration variance matches the mean at nu=100") {
  PowerMode m = baseline_mode(std::pow(10.0, -1.2), 100.0);
  Rng rng = substream(5, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 130000, rng);
  std::vector<double> durs;
  for (size_t i = 0; i + 1 < t.segments.size(); ++i)
    durs.push_back(static_cast<double>(t.segments[i].dur));
  REQUIRE(durs.size() >= 1000);
  auto ms = oracle::mean_se(durs);
  double var = 0.0;
  for (double d : durs) var += (d - ms.mean) * (d - ms.mean);
  var /= static_cast<double>(durs.size() - 1);
  CHECK(var == doctest::Approx(100.0).epsilon(0.10));
  CHECK(var / ms.mean > 0.9);
  CHECK(var / ms.mean < 1.1);
}

TEST_CASE("level occupancy converges to the prior") {
  PowerMode m = baseline_mode();
  Rng rng = substream(17, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 100000, rng);
  std::vector<double> occ(m.L, 0.0);
  for (int16_t l : t.level) occ[l] += 1.0;
  double chi2 = 0.0;
  // effective sample count is the hypothesis count, not the slot count: slots
  // within a hypothesis share one level draw
  double M = static_cast<double>(t.segments.size());
  for (int l = 0; l < m.L; ++l) {
    double obs = occ[l] / 100000.0;
    double exp = m.prior[l];
    chi2 += M * (obs - exp) * (obs - exp) / exp;
  }
  CHECK(chi2 < 11.34);  // chi-square 0.99 quantile, 3 dof
}

TEST_CASE("statistics follow the per-level Gaussian shortcut") {
  PowerMode m = baseline_mode();
  Rng rng = substream(23, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 40000, rng);
  StatStream s = gen_test_statistics(t, m, rng);
  REQUIRE(s.x.size() == t.level.size());
  for (double v : s.x) CHECK(v > 0.0);

  // idle level: X ~ N(1, 1/Ns)
  std::vector<double> idle;
  for (size_t i = 0; i < s.x.size(); ++i)
    if (s.truth[i] == 0) idle.push_back(s.x[i]);
  auto ms = oracle::mean_se(idle);
  CHECK(std::fabs(ms.mean - 1.0) < 4.0 * ms.se);
  double var = 0.0;
  for (double v : idle) var += (v - ms.mean) * (v - ms.mean);
  var /= static_cast<double>(idle.size() - 1);
  CHECK(var == doctest::Approx(1.0 / m.Ns).epsilon(0.10));

  // every level's sample mean within 4 sigma / sqrt(n) of (gamma+1) sigma2
  for (int l = 0; l < m.L; ++l) {
    std::vector<double> v;
    for (size_t i = 0; i < s.x.size(); ++i)
      if (s.truth[i] == l) v.push_back(s.x[i]);
    auto lm = oracle::mean_se(v);
    double sd = std::sqrt(m.stat_var(l));
    CHECK(std::fabs(lm.mean - m.stat_mean(l)) < 4.0 * sd / std::sqrt(static_cast<double>(v.size())));
  }
}

TEST_CASE("identical SNRs are statistically indistinguishable") {
  PowerMode m = baseline_mode();
  Rng rng = substream(29, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 30000, rng);
  // generate two streams at the same SNR by reusing one level's parameters
  StatStream a = gen_test_statistics(t, m, rng);
  std::vector<double> s1, s2;
  for (size_t i = 0; i < a.x.size(); ++i) {
    if (a.truth[i] == 1) s1.push_back(a.x[i]);
  }
  // second sample of the same level from an independent stream
  Rng rng2 = substream(31, "scenario", 1);
  StatStream b = gen_test_statistics(t, m, rng2);
  for (size_t i = 0; i < b.x.size(); ++i)
    if (b.truth[i] == 1) s2.push_back(b.x[i]);
  CHECK(oracle::ks_two_sample(s1, s2) < 1.358);  // 5% critical value
}

TEST_CASE("raw-sample generator agrees with the shortcut") {
  PowerMode m = baseline_mode(std::pow(10.0, -1.2), 50.0, 100);
  Rng rng = substream(37, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 10000, rng);
  Rng r1 = substream(37, "scenario", 1), r2 = substream(37, "scenario", 2);
  StatStream raw = gen_raw_samples(t, m, r1);
  StatStream gauss = gen_test_statistics(t, m, r2);

  for (int l = 0; l < m.L; ++l) {
    std::vector<double> vr, vg;
    for (size_t i = 0; i < raw.x.size(); ++i) {
      if (raw.truth[i] == l) vr.push_back(raw.x[i]);
      if (gauss.truth[i] == l) vg.push_back(gauss.x[i]);
    }
    auto mr = oracle::mean_se(vr), mg = oracle::mean_se(vg);
    CHECK(std::fabs(mr.mean - mg.mean) / mg.mean < 0.05);
    double varr = 0.0, varg = 0.0;
    for (double v : vr) varr += (v - mr.mean) * (v - mr.mean);
    for (double v : vg) varg += (v - mg.mean) * (v - mg.mean);
    varr /= static_cast<double>(vr.size() - 1);
    varg /= static_cast<double>(vg.size() - 1);
    CHECK(std::fabs(varr - varg) / varg < 0.05);
  }

  // idle mean equals the noise power within standard error
  std::vector<double> idle;
  for (size_t i = 0; i < raw.x.size(); ++i)
    if (raw.truth[i] == 0) idle.push_back(raw.x[i]);
  auto mi = oracle::mean_se(idle);
  CHECK(std::fabs(mi.mean - m.sigma2_u) < 4.0 * mi.se);
}

TEST_CASE("single-sample slots flunk the Gaussian check") {
  PowerMode m = PowerMode::make({0.5, 0.0}, {0.5, 0.5}, 1.0, 50.0, 100);
  Rng rng = substream(41, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 4000, rng);
  PowerMode one = m;
  one.Ns = 1;  // CLT not applicable at a single sample per slot
  StatStream raw = gen_raw_samples(t, one, rng);
  GaussianCheck gc = validate_gaussian_fit(raw, one.L);
  CHECK(gc.any_flagged);

  // and a healthy Ns passes
  PowerMode m2 = PowerMode::make({0.5, 0.0}, {0.5, 0.5}, 1.0, 50.0, 400);
  Rng rng2 = substream(43, "scenario", 0);
  LevelTrace t2 = gen_level_sequence(m2, 4000, rng2);
  StatStream g2 = gen_test_statistics(t2, m2, rng2);
  CHECK_FALSE(validate_gaussian_fit(g2, m2.L).any_flagged);
}

TEST_CASE("raw-sample cap is enforced") {
  PowerMode m = baseline_mode();  // Ns = 1e4
  Rng rng = substream(47, "scenario", 0);
  LevelTrace t = gen_level_sequence(m, 1000, rng);
  CHECK_THROWS(gen_raw_samples(t, m, rng, 5000));  // Ns above the memory guard
}

TEST_CASE("sequence generation rejects degenerate modes") {
  PowerMode m = baseline_mode();
  Rng rng = substream(53, "scenario", 0);
  CHECK_THROWS(gen_level_sequence(m, 0, rng));
  PowerMode single;
  single.L = 1;
  single.snr = {0.0};
  single.prior = {1.0};
  single.paper_index = {1};
  CHECK_THROWS(gen_level_sequence(single, 100, rng));
}
