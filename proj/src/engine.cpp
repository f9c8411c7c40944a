#include "specshare/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace specshare {

namespace {

// Per-block bookkeeping shared by all strategies.
struct Accounting {
  std::vector<SlotRecord> records;
  int64_t blocks = 0;
  int64_t matched_blocks = 0;
  int64_t predicts = 0;
  int64_t predict_hits = 0;
};

void record_learn_prefix(Accounting& acc, const LevelTrace& tr, int64_t stage1) {
  for (int64_t t = 0; t < stage1 && t < static_cast<int64_t>(tr.level.size()); ++t)
    acc.records.push_back({t, SlotAction::Learn, -1, tr.level[t], -1, -1});
}

void record_predict(Accounting& acc, const LevelTrace& tr, int64_t t, int obs) {
  acc.records.push_back(
      {t, SlotAction::Predict, -1, tr.level[t], static_cast<int16_t>(obs), -1});
  ++acc.predicts;
  if (obs == tr.level[t]) ++acc.predict_hits;
}

// Emit a full block starting at t; returns the realized ACK. Matched means
// every slot of the block carries the transmitted rank.
bool record_block(Accounting& acc, const LevelTrace& tr, const SenseModel& sm, int64_t t, int st,
                  int tau_s) {
  bool matched = true;
  for (int64_t u = t; u < t + tau_s; ++u)
    if (tr.level[u] != st) {
      matched = false;
      break;
    }
  int pt_end = tr.level[t + tau_s - 1];
  bool ack = ack_positive(sm, st, pt_end);
  acc.records.push_back({t, SlotAction::Transmit, static_cast<int16_t>(st), tr.level[t], -1,
                         static_cast<int8_t>(ack ? 1 : 0)});
  for (int64_t u = t + 1; u < t + tau_s; ++u)
    acc.records.push_back(
        {u, SlotAction::IntraBlock, static_cast<int16_t>(st), tr.level[u], -1, -1});
  ++acc.blocks;
  if (matched) ++acc.matched_blocks;
  return ack;
}

SimReport finalize(Accounting&& acc, int tau_s, int64_t horizon, int K, const EngineConfig& cfg,
                   const char* strategy) {
  SimReport rep;
  rep.horizon = horizon;
  rep.blocks = acc.blocks;
  rep.matched_blocks = acc.matched_blocks;
  rep.p_c_hat = acc.predicts > 0 ? static_cast<double>(acc.predict_hits) / acc.predicts : 0.0;
  rep.K_hat = K;
  rep.strategy = strategy;
  rep.U = npla_curve(acc.records, tau_s, horizon, cfg.u_every);
  rep.U_final = npla(acc.records, tau_s, horizon);
  if (cfg.keep_records) rep.records = std::move(acc.records);
  return rep;
}

void mean_var(const std::vector<double>& x, double& mu, double& var) {
  mu = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= x.size();
}

RewardSpec extend_rewards(const RewardSpec& rs, int K) {
  RewardSpec out = rs;
  out.D.resize(K, rs.D.empty() ? 1.0 : rs.D.back());
  out.Y.resize(K, rs.Y.empty() ? 1.0 : rs.Y.back());
  return out;
}

// Mutable learner state threaded through the online variant's belief loop.
struct OnlineState {
  GibbsState gs;
  MixtureModel model;
  SenseModel sm;
  PolicyTable table;
  double nu_frozen = 0.0;
  size_t pos = 0;  // FIFO ring position in the window
  int64_t pred_count = 0;
  int prev_K = 0;
  int flips = 0;
  bool divergence = false;
  OnlineConfig oc;
  Rng* rng = nullptr;
};

// Push one statistic into the window and give it a fresh indicator draw.
void online_absorb(OnlineState& os, double x) {
  remove_observation(os.gs, os.pos);
  os.gs.x[os.pos] = x;
  assign_observation(os.gs, os.pos, *os.rng);
  os.pos = (os.pos + 1) % os.gs.x.size();
  ++os.pred_count;
}

// Warm-started sweeps on the updated window; refreshes model, sense model,
// and policy tables. nu_hat stays frozen at its Stage-I estimate.
bool online_refit(OnlineState& os, const RewardSpec& rs0, int& sweep_counter) {
  double mu, var;
  mean_var(os.gs.x, mu, var);
  if (!(var > 0.0)) return false;
  os.gs.hp = HyperPriors{mu, 1.0 / var};
  GibbsChain tmp;
  tmp.snaps.reserve(os.oc.refit_sweeps);
  for (int s = 0; s < os.oc.refit_sweeps; ++s) {
    gibbs_sweep(os.gs, os.oc.beta_sampler, *os.rng);
    Snapshot snap;
    snap.iter = sweep_counter++;
    snap.comp = os.gs.comp;
    snap.z.assign(os.gs.z.begin(), os.gs.z.end());
    snap.th = os.gs.th;
    snap.loglik = complete_loglik(os.gs.x, os.gs.z, os.gs.comp);
    tmp.snaps.push_back(std::move(snap));
  }
  auto sum = summarize(tmp, os.gs.x);
  os.model = sum.model;
  if (os.model.K != os.prev_K) {
    ++os.flips;
    if (os.flips > 10) os.divergence = true;
  } else {
    os.flips = 0;
  }
  os.prev_K = os.model.K;
  os.sm = build_sense_model(os.model, os.nu_frozen);
  RewardSpec rs = extend_rewards(rs0, os.model.K);
  os.table = solve_policy(os.sm, rs, os.oc.grid_size);
  return true;
}

// Shared Stage-II loop for the non-periodic strategies; `os` non-null selects
// the online variant (window absorption + periodic refits).
SimReport belief_loop(const Scenario& sc, const MixtureModel& model0, const SenseModel& sm0,
                      const PolicyTable& table0, const EngineConfig& cfg, OnlineState* os,
                      const RewardSpec& rs0) {
  const LevelTrace& tr = sc.trace;
  const int64_t horizon = static_cast<int64_t>(tr.level.size());
  if (static_cast<int64_t>(sc.stats.x.size()) != horizon)
    throw std::invalid_argument("engine: trace/statistic length mismatch");
  const MixtureModel* model = &model0;
  const SenseModel* sm = &sm0;
  const PolicyTable* table = &table0;
  const int tau_s = table0.rs.tau_s;

  Accounting acc;
  acc.records.reserve(horizon);
  record_learn_prefix(acc, tr, cfg.stage1_slots);

  BeliefState b{0, 0, 1.0};
  bool need_anchor = true;
  int sweep_counter = 1 << 20;  // refit snapshot iteration tags
  int64_t t = std::min(cfg.stage1_slots, horizon);
  while (t < horizon) {
    bool transmit = false;
    if (!need_anchor) {
      const LevelPolicy& lp = table->levels[b.k];
      transmit = act(b, lp) == Action::Transmit && t + tau_s <= horizon;
    }
    if (!transmit) {
      double x = sc.stats.x[t];
      int obs = classify(x, *model);
      record_predict(acc, tr, t, obs);
      if (need_anchor) {
        b = BeliefState{obs, 0, 1.0};
        need_anchor = false;
      } else {
        int prev_k = b.k;
        bool ok = true;
        try {
          b = belief_update_predict(b, obs, *sm);
        } catch (const std::exception&) {
          ok = false;
        }
        if (!ok) {
          need_anchor = true;
        } else if (obs != prev_k && b.p < cfg.reanchor_threshold) {
          b = BeliefState{obs, 0, 1.0};
        }
      }
      if (os) {
        online_absorb(*os, x);
        if (os->pred_count % os->oc.refit_every == 0) {
          if (online_refit(*os, rs0, sweep_counter)) {
            model = &os->model;
            sm = &os->sm;
            table = &os->table;
            need_anchor = true;
          }
        }
      }
      ++t;
    } else {
      bool ack = record_block(acc, tr, *sm, t, b.k, tau_s);
      if (ack) {
        b = belief_update_transmit(b, true, *sm, tau_s);
      } else {
        need_anchor = true;  // level identity unknown after a collision
      }
      t += tau_s;
    }
  }
  SimReport rep = finalize(std::move(acc), tau_s, horizon, sm->K, cfg,
                           os ? "online" : "nonperiodic");
  if (os) rep.online_divergence = os->divergence;
  return rep;
}

}  // namespace

bool ack_positive(const SenseModel& sm, int st_rank, int pt_rank) {
  if (st_rank == pt_rank) return true;
  if (pt_rank < sm.K) return sm.ack[st_rank][pt_rank] >= 0.5;
  // True rank outside the learned model (online transition window): compare
  // as if it were a fresh non-idle index.
  return sm.paper_index[st_rank] > pt_rank;
}

double npla(const std::vector<SlotRecord>& records, int tau_s, int64_t up_to) {
  if (up_to < 1) throw std::invalid_argument("npla: up_to must be >= 1");
  int64_t matched = 0;
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].action != SlotAction::Transmit || records[i].tau >= up_to) continue;
    bool all = true;
    for (int u = 0; u < tau_s; ++u) {
      const SlotRecord& r = records[i + u];
      if (r.st_level != r.pt_level) {
        all = false;
        break;
      }
    }
    if (all) ++matched;
  }
  return static_cast<double>(tau_s) * matched / static_cast<double>(up_to);
}

std::vector<std::pair<int64_t, double>> npla_curve(const std::vector<SlotRecord>& records,
                                                   int tau_s, int64_t horizon, int64_t every) {
  if (every < 1) every = 1;
  // One pass: cumulative matched-block starts, then normalize at sample points.
  std::vector<std::pair<int64_t, int64_t>> starts;  // (slot, matched)
  for (size_t i = 0; i < records.size(); ++i) {
    if (records[i].action != SlotAction::Transmit) continue;
    bool all = true;
    for (int u = 0; u < tau_s; ++u)
      if (records[i + u].st_level != records[i + u].pt_level) {
        all = false;
        break;
      }
    starts.push_back({records[i].tau, all ? 1 : 0});
  }
  std::vector<std::pair<int64_t, double>> curve;
  size_t si = 0;
  int64_t matched = 0;
  for (int64_t n = every; n <= horizon; n += every) {
    while (si < starts.size() && starts[si].first < n) matched += starts[si++].second;
    curve.push_back({n, static_cast<double>(tau_s) * matched / static_cast<double>(n)});
  }
  if (horizon % every != 0) {
    while (si < starts.size() && starts[si].first < horizon) matched += starts[si++].second;
    curve.push_back({horizon, static_cast<double>(tau_s) * matched / static_cast<double>(horizon)});
  }
  return curve;
}

SimReport run_periodic(const Scenario& sc, const MixtureModel& model, const SenseModel& sm,
                       const RewardSpec& rs, const EngineConfig& cfg) {
  const LevelTrace& tr = sc.trace;
  const int64_t horizon = static_cast<int64_t>(tr.level.size());
  if (static_cast<int64_t>(sc.stats.x.size()) != horizon)
    throw std::invalid_argument("engine: trace/statistic length mismatch");
  const int tau_s = rs.tau_s;
  Accounting acc;
  acc.records.reserve(horizon);
  record_learn_prefix(acc, tr, cfg.stage1_slots);
  int64_t t = std::min(cfg.stage1_slots, horizon);
  while (t < horizon) {
    int obs = classify(sc.stats.x[t], model);
    record_predict(acc, tr, t, obs);
    ++t;
    if (t + tau_s <= horizon) {
      record_block(acc, tr, sm, t, obs, tau_s);
      t += tau_s;
    }
    // else: remaining tail is spent on prediction slots only
  }
  return finalize(std::move(acc), tau_s, horizon, sm.K, cfg, "periodic");
}

SimReport run_nonperiodic(const Scenario& sc, const MixtureModel& model, const SenseModel& sm,
                          const PolicyTable& table, const EngineConfig& cfg) {
  return belief_loop(sc, model, sm, table, cfg, nullptr, table.rs);
}

SimReport run_perfect(const LevelTrace& trace, int tau_s) {
  const int64_t horizon = static_cast<int64_t>(trace.level.size());
  Accounting acc;
  acc.records.reserve(horizon);
  // Oracle ACK table is irrelevant: build a permissive stand-in for logging.
  SenseModel dummy;
  dummy.K = 32767;
  int64_t t = 0;
  while (t + tau_s <= horizon) {
    int st = trace.level[t];
    bool matched = true;
    for (int64_t u = t; u < t + tau_s; ++u)
      if (trace.level[u] != st) {
        matched = false;
        break;
      }
    acc.records.push_back({t, SlotAction::Transmit, static_cast<int16_t>(st), trace.level[t], -1,
                           static_cast<int8_t>(matched ? 1 : 0)});
    for (int64_t u = t + 1; u < t + tau_s; ++u)
      acc.records.push_back(
          {u, SlotAction::IntraBlock, static_cast<int16_t>(st), trace.level[u], -1, -1});
    ++acc.blocks;
    if (matched) ++acc.matched_blocks;
    t += tau_s;
  }
  for (; t < horizon; ++t) record_predict(acc, trace, t, trace.level[t]);
  EngineConfig cfg;
  return finalize(std::move(acc), tau_s, horizon, 0, cfg, "perfect");
}

SimReport run_online(const Scenario& sc, const GibbsState& warm_state, const MixtureModel& model0,
                     const SenseModel& sm0, const PolicyTable& table0, const RewardSpec& rs0,
                     const EngineConfig& cfg, const OnlineConfig& oc, Rng& rng) {
  if (oc.refit_every < 1) throw std::invalid_argument("run_online: refit_every must be >= 1");
  if (oc.refit_sweeps < 1) throw std::invalid_argument("run_online: refit_sweeps must be >= 1");
  OnlineState os;
  os.gs = warm_state;
  os.model = model0;
  os.sm = sm0;
  os.table = table0;
  os.nu_frozen = sm0.nu_hat;
  os.prev_K = model0.K;
  os.oc = oc;
  os.rng = &rng;
  return belief_loop(sc, os.model, os.sm, os.table, cfg, &os, rs0);
}

}  // namespace specshare
