#include "specshare/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace specshare {

namespace {

// Seed-indexed parallel map with deterministic result placement.
template <typename Fn>
void parallel_seeds(const std::vector<uint64_t>& seeds, int jobs, Fn&& fn) {
  int n = jobs > 0 ? jobs : static_cast<int>(std::thread::hardware_concurrency());
  n = std::max(1, std::min<int>(n, static_cast<int>(seeds.size())));
  std::atomic<size_t> next{0};
  std::mutex err_mtx;
  std::string err;
  auto worker = [&]() {
    for (size_t idx; (idx = next.fetch_add(1)) < seeds.size();) {
      try {
        fn(idx, seeds[idx]);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> g(err_mtx);
        if (err.empty()) err = e.what();
      }
    }
  };
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> ts;
    ts.reserve(n);
    for (int i = 0; i < n; ++i) ts.emplace_back(worker);
    for (auto& t : ts) t.join();
  }
  if (!err.empty()) throw std::runtime_error(err);
}

std::vector<double> stage1_stats(const Scenario& sc, int64_t stage1) {
  int64_t n = std::min<int64_t>(stage1, static_cast<int64_t>(sc.stats.x.size()));
  return std::vector<double>(sc.stats.x.begin(), sc.stats.x.begin() + n);
}

double cross_pc(const MixtureModel& gen, const std::vector<double>& prior,
                const MixtureModel& cls) {
  Mat cross = cross_confusion(gen, cls);
  double pc = 0.0;
  int diag = std::min(gen.K, cls.K);
  for (int l = 0; l < diag; ++l) pc += prior[l] * cross[l][l];
  return pc;
}

}  // namespace

Scenario make_scenario(const RunConfig& cfg, const PowerMode& mode, uint64_t seed) {
  Scenario sc;
  Rng r1 = substream(seed, "scenario", 0);
  sc.trace = gen_level_sequence(mode, cfg.horizon, r1);
  Rng r2 = substream(seed, "scenario", 1);
  sc.stats = gen_test_statistics(sc.trace, mode, r2);
  return sc;
}

Scenario make_scheduled_scenario(const RunConfig& cfg, uint64_t seed) {
  PowerMode a = cfg.make_mode();
  PowerMode b = cfg.make_mode_b();
  Rng r1 = substream(seed, "scenario", 0);
  LevelTrace ta = gen_level_sequence(a, cfg.change_at, r1);
  Rng r2 = substream(seed, "scenario", 1);
  LevelTrace tb = gen_level_sequence(b, cfg.horizon - cfg.change_at, r2);
  Rng r3 = substream(seed, "scenario", 2);
  StatStream sa = gen_test_statistics(ta, a, r3);
  Rng r4 = substream(seed, "scenario", 3);
  StatStream sb = gen_test_statistics(tb, b, r4);

  Scenario sc;
  sc.trace.level = std::move(ta.level);
  sc.trace.level.insert(sc.trace.level.end(), tb.level.begin(), tb.level.end());
  sc.trace.segments = std::move(ta.segments);
  for (auto h : tb.segments) {
    h.start += cfg.change_at;
    sc.trace.segments.push_back(h);
  }
  sc.stats.x = std::move(sa.x);
  sc.stats.x.insert(sc.stats.x.end(), sb.x.begin(), sb.x.end());
  sc.stats.truth = std::move(sa.truth);
  sc.stats.truth.insert(sc.stats.truth.end(), sb.truth.begin(), sb.truth.end());
  return sc;
}

MixtureModel true_model(const PowerMode& mode) {
  MixtureModel m;
  m.K = mode.L;
  m.mu.resize(mode.L);
  m.S.resize(mode.L);
  m.pi = mode.prior;
  for (int r = 0; r < mode.L; ++r) {
    m.mu[r] = mode.stat_mean(r);
    m.S[r] = 1.0 / mode.stat_var(r);
  }
  m.validate();
  return m;
}

LearnOut learn_pipeline(const RunConfig& cfg, const std::vector<double>& x, uint64_t seed) {
  Rng rng = substream(seed, "learner", 0);
  LearnOut out;
  out.chain = run_gibbs(x, cfg.make_gibbs(), rng);
  SummarizeOut sum = summarize(out.chain, x);
  out.model = sum.model;
  out.labels = sum.labels;

  // Duration estimate: MAP labels in slot order, majority-smoothed.
  std::vector<int> map_labels(x.size());
  for (size_t n = 0; n < x.size(); ++n) map_labels[n] = classify(x[n], out.model);
  std::vector<int> smooth = majority_smooth(map_labels, cfg.label_smooth);
  try {
    out.nu_hat = std::max(1.0, estimate_duration_mean(smooth));
  } catch (const std::exception&) {
    // Too few completed runs (short stream): fall back to the mean run
    // length over all runs, boundary runs included.
    int64_t runs = smooth.empty() ? 0 : 1;
    for (size_t n = 1; n < smooth.size(); ++n)
      if (smooth[n] != smooth[n - 1]) ++runs;
    out.nu_hat = std::max(1.0, runs > 0 ? static_cast<double>(smooth.size()) / runs : 1.0);
  }

  // Reconstruct the selected snapshot's sampler state for warm continuation.
  const Snapshot* snap = nullptr;
  for (const auto& s : out.chain.snaps)
    if (s.iter == sum.snapshot_iter) {
      snap = &s;
      break;
    }
  if (!snap) throw std::logic_error("learn_pipeline: selected snapshot not found");
  GibbsState st;
  st.x = x;
  st.z.assign(snap->z.begin(), snap->z.end());
  st.comp = snap->comp;
  double mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= x.size();
  st.hp = {mean, 1.0 / var};
  st.th = snap->th;
  st.alpha = cfg.alpha;
  st.k0 = cfg.k0;
  out.warm = std::move(st);
  return out;
}

ExperimentOut run_fig6(const RunConfig& cfg) {
  struct Point {
    const char* param;
    double value;
    double db;
    int64_t ns;
  };
  std::vector<Point> points;
  for (double db : {-16.0, -14.0, -12.0, -10.0, -8.0})
    points.push_back({"gamma_db", db, db, 10000});
  for (int64_t ns : {1000, 5000, 10000, 20000})
    points.push_back({"ns", static_cast<double>(ns), -12.0, ns});

  std::vector<std::vector<RunOutput>> per_seed(cfg.seeds.size());
  parallel_seeds(cfg.seeds, cfg.jobs, [&](size_t idx, uint64_t seed) {
    std::vector<RunOutput> outs;
    for (size_t pi = 0; pi < points.size(); ++pi) {
      RunConfig c2 = cfg;
      c2.gamma_st_db = points[pi].db;
      c2.ns = points[pi].ns;
      c2.horizon = cfg.stage1_slots;
      PowerMode mode = c2.make_mode();
      // distinct substream per sweep point
      uint64_t pseed = mix64(seed ^ mix64(0x5157ULL + pi));
      Scenario sc = make_scenario(c2, mode, pseed);
      std::vector<double> x = stage1_stats(sc, c2.stage1_slots);
      MixtureModel gen = true_model(mode);

      Rng lrng = substream(pseed, "learner", 0);
      GibbsChain chain = run_gibbs(x, c2.make_gibbs(), lrng);
      SummarizeOut sum = summarize(chain, x);

      Rng erng = substream(pseed, "learner", 1);
      EmOptions eo;
      eo.restarts = c2.em_restarts;
      EmResult em = fit_em_gmm(x, mode.L, eo, erng);

      for (int variant = 0; variant < 2; ++variant) {
        const MixtureModel& m = variant == 0 ? sum.model : em.model;
        RunOutput ro;
        ro.seed = seed;
        ro.row.preset = "fig6";
        ro.row.sweep_param = points[pi].param;
        ro.row.sweep_value = points[pi].value;
        ro.row.variant = variant == 0 ? "dpgmm" : "em";
        ro.row.seed = seed;
        ro.row.P_c = cross_pc(gen, mode.prior, m);
        ro.row.K_hat = m.K;
        ro.name = "fig6_" + std::string(points[pi].param) + "_" +
                  std::to_string(static_cast<long long>(points[pi].value)) + "_" + ro.row.variant +
                  "_s" + std::to_string(seed);
        outs.push_back(std::move(ro));
      }
    }
    per_seed[idx] = std::move(outs);
  });

  ExperimentOut out;
  for (auto& v : per_seed)
    for (auto& r : v) out.runs.push_back(std::move(r));
  return out;
}

ExperimentOut run_fig7(const RunConfig& cfg) {
  PowerMode mode = cfg.make_mode();
  MixtureModel model = true_model(mode);
  SenseModel sm = build_sense_model(model, cfg.nu);
  uint64_t seed = cfg.seeds.front();

  ExperimentOut out;
  std::vector<int> taus = {2, 4, 6, 8};
  for (size_t ti = 0; ti < taus.size(); ++ti) {
    RewardSpec rs = cfg.make_rewards(model.K);
    rs.tau_s = taus[ti];
    PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
    for (int k = 0; k < model.K; ++k) {
      Rng mcr = substream(seed, "policy_mc", ti * 16 + static_cast<uint64_t>(k));
      McValue mc = monte_carlo_value(table, k, sm, rs, 10000, mcr);
      RunOutput ro;
      ro.seed = seed;
      ro.row.preset = "fig7";
      ro.row.sweep_param = "tau_s";
      ro.row.sweep_value = taus[ti];
      ro.row.variant = "k" + std::to_string(k);
      ro.row.seed = seed;
      ro.row.V_theory = table.levels[k].V[0].back();
      ro.row.V_hat = mc.mean;
      ro.name = "fig7_tau" + std::to_string(taus[ti]) + "_k" + std::to_string(k);
      out.runs.push_back(std::move(ro));
    }
  }
  return out;
}

namespace {

// Shared per-seed pipeline for the strategy-comparison presets: learn once,
// then run all three strategies for each block length.
std::vector<RunOutput> strategy_runs(const RunConfig& cfg, uint64_t seed, const char* preset,
                                     const std::vector<int>& taus) {
  PowerMode mode = cfg.make_mode();
  Scenario sc = make_scenario(cfg, mode, seed);
  LearnOut lo = learn_pipeline(cfg, stage1_stats(sc, cfg.stage1_slots), seed);
  SenseModel sm = build_sense_model(lo.model, lo.nu_hat);
  EngineConfig ec = cfg.make_engine();

  std::vector<RunOutput> outs;
  for (int ts : taus) {
    RewardSpec rs = cfg.make_rewards(lo.model.K);
    rs.tau_s = ts;
    PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
    SimReport reps[3] = {run_periodic(sc, lo.model, sm, rs, ec),
                         run_nonperiodic(sc, lo.model, sm, table, ec),
                         run_perfect(sc.trace, ts)};
    const char* names[3] = {"periodic", "nonperiodic", "perfect"};
    for (int v = 0; v < 3; ++v) {
      RunOutput ro;
      ro.seed = seed;
      ro.report = std::move(reps[v]);
      ro.row.preset = preset;
      ro.row.sweep_param = "tau_s";
      ro.row.sweep_value = ts;
      ro.row.variant = names[v];
      ro.row.seed = seed;
      ro.row.U_final = ro.report.U_final;
      ro.row.P_c = ro.report.p_c_hat;
      ro.row.K_hat = v == 2 ? mode.L : lo.model.K;
      ro.name = std::string(preset) + "_tau" + std::to_string(ts) + "_" + names[v] + "_s" +
                std::to_string(seed);
      outs.push_back(std::move(ro));
    }
  }
  return outs;
}

}  // namespace

ExperimentOut run_fig8(const RunConfig& cfg) {
  std::vector<std::vector<RunOutput>> per_seed(cfg.seeds.size());
  parallel_seeds(cfg.seeds, cfg.jobs, [&](size_t idx, uint64_t seed) {
    per_seed[idx] = strategy_runs(cfg, seed, "fig8", {cfg.tau_s});
  });
  ExperimentOut out;
  for (auto& v : per_seed)
    for (auto& r : v) out.runs.push_back(std::move(r));
  return out;
}

ExperimentOut run_fig9(const RunConfig& cfg) {
  std::vector<std::vector<RunOutput>> per_seed(cfg.seeds.size());
  parallel_seeds(cfg.seeds, cfg.jobs, [&](size_t idx, uint64_t seed) {
    per_seed[idx] = strategy_runs(cfg, seed, "fig9", {2, 4, 6, 8});
  });
  ExperimentOut out;
  for (auto& v : per_seed)
    for (auto& r : v) out.runs.push_back(std::move(r));
  return out;
}

ExperimentOut run_fig10(const RunConfig& cfg) {
  if (cfg.ratios2.empty())
    throw ConfigError("config: engine.ratios2: fig10 requires a post-change level set");
  std::vector<std::vector<RunOutput>> per_seed(cfg.seeds.size());
  parallel_seeds(cfg.seeds, cfg.jobs, [&](size_t idx, uint64_t seed) {
    Scenario sc = make_scheduled_scenario(cfg, seed);
    LearnOut lo = learn_pipeline(cfg, stage1_stats(sc, cfg.stage1_slots), seed);
    SenseModel sm = build_sense_model(lo.model, lo.nu_hat);
    RewardSpec rs = cfg.make_rewards(lo.model.K);
    PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
    EngineConfig ec = cfg.make_engine();

    SimReport stat_rep = run_nonperiodic(sc, lo.model, sm, table, ec);
    Rng orng = substream(seed, "online", 0);
    SimReport on_rep = run_online(sc, lo.warm, lo.model, sm, table, rs, ec, cfg.make_online(), orng);

    std::vector<RunOutput> outs;
    const SimReport* reps[2] = {&stat_rep, &on_rep};
    const char* names[2] = {"static", "online"};
    for (int v = 0; v < 2; ++v) {
      RunOutput ro;
      ro.seed = seed;
      ro.report = *reps[v];
      ro.row.preset = "fig10";
      ro.row.sweep_param = "change_at";
      ro.row.sweep_value = static_cast<double>(cfg.change_at);
      ro.row.variant = names[v];
      ro.row.seed = seed;
      ro.row.U_final = ro.report.U_final;
      ro.row.P_c = ro.report.p_c_hat;
      ro.row.K_hat = ro.report.K_hat;
      ro.name = std::string("fig10_") + names[v] + "_s" + std::to_string(seed);
      outs.push_back(std::move(ro));
    }
    per_seed[idx] = std::move(outs);
  });
  ExperimentOut out;
  for (auto& v : per_seed)
    for (auto& r : v) out.runs.push_back(std::move(r));
  return out;
}

ExperimentOut run_experiment(const RunConfig& cfg) {
  if (cfg.preset == "fig6") return run_fig6(cfg);
  if (cfg.preset == "fig7") return run_fig7(cfg);
  if (cfg.preset == "fig8") return run_fig8(cfg);
  if (cfg.preset == "fig9") return run_fig9(cfg);
  if (cfg.preset == "fig10") return run_fig10(cfg);
  throw ConfigError("config: engine.preset: unknown preset '" + cfg.preset + "'");
}

ExperimentOut run_custom(const RunConfig& cfg) {
  std::vector<std::vector<RunOutput>> per_seed(cfg.seeds.size());
  parallel_seeds(cfg.seeds, cfg.jobs, [&](size_t idx, uint64_t seed) {
    Scenario sc = cfg.ratios2.empty() ? make_scenario(cfg, cfg.make_mode(), seed)
                                      : make_scheduled_scenario(cfg, seed);
    SimReport rep;
    int K_hat = 0;
    if (cfg.strategy == "perfect") {
      rep = run_perfect(sc.trace, cfg.tau_s);
      K_hat = static_cast<int>(cfg.ratios.size());
    } else {
      LearnOut lo = learn_pipeline(cfg, stage1_stats(sc, cfg.stage1_slots), seed);
      SenseModel sm = build_sense_model(lo.model, lo.nu_hat);
      RewardSpec rs = cfg.make_rewards(lo.model.K);
      EngineConfig ec = cfg.make_engine();
      if (cfg.strategy == "periodic") {
        rep = run_periodic(sc, lo.model, sm, rs, ec);
      } else if (cfg.strategy == "nonperiodic") {
        PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
        rep = run_nonperiodic(sc, lo.model, sm, table, ec);
      } else {
        PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
        Rng orng = substream(seed, "online", 0);
        rep = run_online(sc, lo.warm, lo.model, sm, table, rs, ec, cfg.make_online(), orng);
      }
      K_hat = rep.K_hat;
    }
    RunOutput ro;
    ro.seed = seed;
    ro.row.preset = "custom";
    ro.row.sweep_param = "tau_s";
    ro.row.sweep_value = cfg.tau_s;
    ro.row.variant = cfg.strategy;
    ro.row.seed = seed;
    ro.row.U_final = rep.U_final;
    ro.row.P_c = rep.p_c_hat;
    ro.row.K_hat = K_hat;
    ro.name = "custom_" + cfg.strategy + "_s" + std::to_string(seed);
    ro.report = std::move(rep);
    per_seed[idx] = {std::move(ro)};
  });
  ExperimentOut out;
  for (auto& v : per_seed)
    for (auto& r : v) out.runs.push_back(std::move(r));
  return out;
}

}  // namespace specshare
