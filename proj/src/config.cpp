#include "specshare/config.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

namespace specshare {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw ConfigError("config: " + field + ": " + why);
}

void check_keys(const json& block, const std::string& name, const std::set<std::string>& allowed) {
  for (auto it = block.begin(); it != block.end(); ++it)
    if (!allowed.count(it.key())) bad(name + "." + it.key(), "unrecognized field");
}

double get_num(const json& b, const std::string& blk, const char* key, double dflt) {
  if (!b.contains(key)) return dflt;
  if (!b[key].is_number()) bad(blk + "." + key, "expected a number");
  return b[key].get<double>();
}

int64_t get_i64(const json& b, const std::string& blk, const char* key, int64_t dflt) {
  double v = get_num(b, blk, key, static_cast<double>(dflt));
  double r = std::llround(v);
  if (std::abs(v - r) > 1e-9) bad(blk + "." + std::string(key), "expected an integer");
  return static_cast<int64_t>(r);
}

bool get_bool(const json& b, const std::string& blk, const char* key, bool dflt) {
  if (!b.contains(key)) return dflt;
  if (!b[key].is_boolean()) bad(blk + "." + key, "expected a boolean");
  return b[key].get<bool>();
}

std::string get_str(const json& b, const std::string& blk, const char* key,
                    const std::string& dflt) {
  if (!b.contains(key)) return dflt;
  if (!b[key].is_string()) bad(blk + "." + key, "expected a string");
  return b[key].get<std::string>();
}

std::vector<double> get_dvec(const json& b, const std::string& blk, const char* key,
                             const std::vector<double>& dflt) {
  if (!b.contains(key)) return dflt;
  if (!b[key].is_array()) bad(blk + "." + key, "expected an array of numbers");
  std::vector<double> out;
  for (const auto& v : b[key]) {
    if (!v.is_number()) bad(blk + "." + key, "expected an array of numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<uint64_t> seeds_upto(uint64_t n) {
  std::vector<uint64_t> s(n);
  for (uint64_t i = 0; i < n; ++i) s[i] = i + 1;
  return s;
}

}  // namespace

std::vector<double> snr_from_ratios(double gamma_db, const std::vector<double>& ratios) {
  double sum = std::accumulate(ratios.begin(), ratios.end(), 0.0);
  if (!(sum > 0.0)) throw ConfigError("config: scenario.ratios: ratios must sum to > 0");
  // gamma_db is the per-unit-ratio SNR; each level scales it by its ratio.
  double base = std::pow(10.0, gamma_db / 10.0);
  std::vector<double> snr(ratios.size());
  for (size_t i = 0; i < ratios.size(); ++i) snr[i] = ratios[i] * base;
  return snr;
}

void RunConfig::validate() const {
  if (ratios.size() < 2) bad("scenario.ratios", "need at least two levels");
  int zeros = 0;
  for (double r : ratios) {
    if (r < 0.0) bad("scenario.ratios", "ratios must be nonnegative");
    if (r == 0.0) ++zeros;
  }
  if (zeros != 1) bad("scenario.ratios", "exactly one idle (zero) level required");
  if (!prior.empty() && prior.size() != ratios.size())
    bad("scenario.prior", "length must match ratios");
  if (!(sigma2_u > 0.0)) bad("scenario.sigma2_u", "must be positive");
  if (ns < 100) bad("scenario.ns", "must be >= 100");
  if (!(nu >= 1.0)) bad("scenario.nu", "must be >= 1");
  if (horizon < 1) bad("scenario.horizon", "must be >= 1");
  if (!(alpha > 0.0)) bad("learner.alpha", "must be positive");
  if (k0 < 1) bad("learner.k0", "must be >= 1");
  if (burnin < 0 || iters <= burnin) bad("learner.iters", "need iters > burnin >= 0");
  if (stage1_slots < 2) bad("learner.stage1_slots", "must be >= 2");
  if (label_smooth > 1 && label_smooth % 2 == 0) bad("learner.label_smooth", "must be odd");
  if (em_restarts < 1) bad("learner.em_restarts", "must be >= 1");
  if (!(d > 0.0)) bad("policy.d", "must be positive");
  if (y < 0.0) bad("policy.y", "must be nonnegative");
  if (tau_s < 1) bad("policy.tau_s", "must be >= 1");
  if (grid_size < 2) bad("policy.grid_size", "must be >= 2");
  if (!(reanchor_threshold >= 0.0 && reanchor_threshold <= 1.0))
    bad("policy.reanchor_threshold", "must be in [0, 1]");
  if (strategy != "periodic" && strategy != "nonperiodic" && strategy != "perfect" &&
      strategy != "online")
    bad("engine.strategy", "unknown strategy '" + strategy + "'");
  if (seeds.empty()) bad("engine.seeds", "must be nonempty");
  if (refit_every < 1) bad("engine.refit_every", "must be >= 1");
  if (refit_sweeps < 1) bad("engine.refit_sweeps", "must be >= 1");
  if (u_every < 1) bad("engine.u_every", "must be >= 1");
  if (!ratios2.empty()) {
    if (change_at < 1 || change_at >= horizon)
      bad("engine.change_at", "must lie inside the horizon");
    int z2 = 0;
    for (double r : ratios2) {
      if (r < 0.0) bad("engine.ratios2", "ratios must be nonnegative");
      if (r == 0.0) ++z2;
    }
    if (ratios2.size() < 2 || z2 != 1)
      bad("engine.ratios2", "exactly one idle (zero) level required");
  }
  if (jobs < 0) bad("output.jobs", "must be >= 0");
}

PowerMode RunConfig::make_mode() const {
  std::vector<double> p = prior;
  if (p.empty()) p.assign(ratios.size(), 1.0 / static_cast<double>(ratios.size()));
  return PowerMode::make(snr_from_ratios(gamma_st_db, ratios), p, sigma2_u, nu, ns);
}

PowerMode RunConfig::make_mode_b() const {
  if (ratios2.empty()) throw ConfigError("config: engine.ratios2: required for the online schedule");
  // The post-change SNRs reuse the same per-unit base, so existing levels
  // keep their values and new ratios extend the ladder.
  std::vector<double> snr = snr_from_ratios(gamma_st_db, ratios2);
  std::vector<double> p(ratios2.size(), 1.0 / static_cast<double>(ratios2.size()));
  return PowerMode::make(snr, p, sigma2_u, nu, ns);
}

RewardSpec RunConfig::make_rewards(int K) const {
  RewardSpec rs;
  rs.D.assign(K, d);
  rs.Y.assign(K, y);
  rs.tau_s = tau_s;
  return rs;
}

EngineConfig RunConfig::make_engine() const {
  EngineConfig ec;
  ec.stage1_slots = stage1_slots;
  ec.reanchor_threshold = reanchor_threshold;
  ec.u_every = u_every;
  ec.keep_records = write_records;
  return ec;
}

GibbsOptions RunConfig::make_gibbs() const {
  GibbsOptions go;
  go.iters = iters;
  go.burnin = burnin;
  go.alpha = alpha;
  go.k0 = k0;
  go.beta_sampler = beta_sampler;
  return go;
}

OnlineConfig RunConfig::make_online() const {
  OnlineConfig oc;
  oc.refit_every = refit_every;
  oc.refit_sweeps = refit_sweeps;
  oc.grid_size = grid_size;
  oc.beta_sampler = beta_sampler;
  return oc;
}

RunConfig config_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: parse error: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config: top level must be an object");
  check_keys(j, "config", {"scenario", "learner", "policy", "engine", "output"});
  if (!j.contains("scenario")) bad("scenario", "missing block");

  RunConfig c;
  {
    const json& b = j["scenario"];
    check_keys(b, "scenario", {"gamma_st_db", "ratios", "prior", "sigma2_u", "ns", "nu", "horizon"});
    c.gamma_st_db = get_num(b, "scenario", "gamma_st_db", c.gamma_st_db);
    c.ratios = get_dvec(b, "scenario", "ratios", c.ratios);
    c.prior = get_dvec(b, "scenario", "prior", c.prior);
    c.sigma2_u = get_num(b, "scenario", "sigma2_u", c.sigma2_u);
    c.ns = get_i64(b, "scenario", "ns", c.ns);
    c.nu = get_num(b, "scenario", "nu", c.nu);
    c.horizon = get_i64(b, "scenario", "horizon", c.horizon);
  }
  if (j.contains("learner")) {
    const json& b = j["learner"];
    check_keys(b, "learner",
               {"alpha", "k0", "iters", "burnin", "beta_sampler", "stage1_slots", "label_smooth",
                "em_restarts"});
    c.alpha = get_num(b, "learner", "alpha", c.alpha);
    c.k0 = static_cast<int>(get_i64(b, "learner", "k0", c.k0));
    c.iters = static_cast<int>(get_i64(b, "learner", "iters", c.iters));
    c.burnin = static_cast<int>(get_i64(b, "learner", "burnin", c.burnin));
    std::string bs = get_str(b, "learner", "beta_sampler", "ars");
    if (bs == "ars")
      c.beta_sampler = BetaSampler::Ars;
    else if (bs == "slice")
      c.beta_sampler = BetaSampler::Slice;
    else
      bad("learner.beta_sampler", "expected 'ars' or 'slice'");
    c.stage1_slots = get_i64(b, "learner", "stage1_slots", c.stage1_slots);
    c.label_smooth = static_cast<int>(get_i64(b, "learner", "label_smooth", c.label_smooth));
    c.em_restarts = static_cast<int>(get_i64(b, "learner", "em_restarts", c.em_restarts));
  }
  if (j.contains("policy")) {
    const json& b = j["policy"];
    check_keys(b, "policy", {"d", "y", "tau_s", "grid_size", "reanchor_threshold"});
    c.d = get_num(b, "policy", "d", c.d);
    c.y = get_num(b, "policy", "y", c.y);
    c.tau_s = static_cast<int>(get_i64(b, "policy", "tau_s", c.tau_s));
    c.grid_size = static_cast<int>(get_i64(b, "policy", "grid_size", c.grid_size));
    c.reanchor_threshold = get_num(b, "policy", "reanchor_threshold", c.reanchor_threshold);
  }
  if (j.contains("engine")) {
    const json& b = j["engine"];
    check_keys(b, "engine",
               {"strategy", "preset", "seeds", "refit_every", "refit_sweeps", "u_every",
                "change_at", "ratios2"});
    c.strategy = get_str(b, "engine", "strategy", c.strategy);
    c.preset = get_str(b, "engine", "preset", c.preset);
    if (b.contains("seeds")) {
      if (!b["seeds"].is_array()) bad("engine.seeds", "expected an array");
      c.seeds.clear();
      for (const auto& v : b["seeds"]) {
        if (!v.is_number()) bad("engine.seeds", "expected numeric seeds");
        c.seeds.push_back(v.get<uint64_t>());
      }
    }
    c.refit_every = static_cast<int>(get_i64(b, "engine", "refit_every", c.refit_every));
    c.refit_sweeps = static_cast<int>(get_i64(b, "engine", "refit_sweeps", c.refit_sweeps));
    c.u_every = get_i64(b, "engine", "u_every", c.u_every);
    c.change_at = get_i64(b, "engine", "change_at", c.change_at);
    c.ratios2 = get_dvec(b, "engine", "ratios2", c.ratios2);
  }
  if (j.contains("output")) {
    const json& b = j["output"];
    check_keys(b, "output", {"out_dir", "write_records", "gzip_records", "jobs"});
    c.out_dir = get_str(b, "output", "out_dir", c.out_dir);
    c.write_records = get_bool(b, "output", "write_records", c.write_records);
    c.gzip_records = get_bool(b, "output", "gzip_records", c.gzip_records);
    c.jobs = static_cast<int>(get_i64(b, "output", "jobs", c.jobs));
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json_text(ss.str());
}

std::string config_to_json_text(const RunConfig& c) {
  json j;
  j["scenario"] = {{"gamma_st_db", c.gamma_st_db}, {"ratios", c.ratios},
                   {"sigma2_u", c.sigma2_u},       {"ns", c.ns},
                   {"nu", c.nu},                   {"horizon", c.horizon}};
  if (!c.prior.empty()) j["scenario"]["prior"] = c.prior;
  j["learner"] = {{"alpha", c.alpha},
                  {"k0", c.k0},
                  {"iters", c.iters},
                  {"burnin", c.burnin},
                  {"beta_sampler", c.beta_sampler == BetaSampler::Ars ? "ars" : "slice"},
                  {"stage1_slots", c.stage1_slots},
                  {"label_smooth", c.label_smooth},
                  {"em_restarts", c.em_restarts}};
  j["policy"] = {{"d", c.d},
                 {"y", c.y},
                 {"tau_s", c.tau_s},
                 {"grid_size", c.grid_size},
                 {"reanchor_threshold", c.reanchor_threshold}};
  j["engine"] = {{"strategy", c.strategy},   {"preset", c.preset},
                 {"seeds", c.seeds},         {"refit_every", c.refit_every},
                 {"refit_sweeps", c.refit_sweeps}, {"u_every", c.u_every},
                 {"change_at", c.change_at}};
  if (!c.ratios2.empty()) j["engine"]["ratios2"] = c.ratios2;
  j["output"] = {{"out_dir", c.out_dir},
                 {"write_records", c.write_records},
                 {"gzip_records", c.gzip_records},
                 {"jobs", c.jobs}};
  return j.dump(2) + "\n";
}

RunConfig preset_config(const std::string& name) {
  RunConfig c;
  if (name == "fig6") {
    // classification-accuracy sweeps; learning-only horizon
    c.ns = 10000;
    c.nu = 50.0;
    c.stage1_slots = 1000;
    c.horizon = 1000;
    c.seeds = seeds_upto(10);
    c.preset = name;
  } else if (name == "fig7") {
    // theory-vs-simulation value curves on the true model
    c.ns = 10000;
    c.nu = 100.0;
    c.tau_s = 4;
    c.horizon = 1000;
    c.seeds = seeds_upto(1);
    c.preset = name;
  } else if (name == "fig8") {
    c.ns = 5000;
    c.nu = 50.0;
    c.tau_s = 4;
    c.horizon = 50000;
    c.seeds = seeds_upto(20);
    c.preset = name;
  } else if (name == "fig9") {
    // strategy comparison across block lengths at the fig8 setting
    c.ns = 5000;
    c.nu = 50.0;
    c.tau_s = 4;
    c.horizon = 50000;
    c.seeds = seeds_upto(20);
    c.preset = name;
  } else if (name == "fig10") {
    c.ns = 10000;
    c.nu = 50.0;
    c.tau_s = 4;
    c.horizon = 30000;
    c.change_at = 10000;
    c.ratios2 = {1.0, 2.0, 3.0, 4.0, 0.0};
    c.strategy = "online";
    c.seeds = seeds_upto(20);
    c.preset = name;
  } else {
    throw ConfigError("config: unknown preset '" + name + "'");
  }
  c.validate();
  return c;
}

}  // namespace specshare
