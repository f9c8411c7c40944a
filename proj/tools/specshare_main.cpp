#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specshare/config.hpp"
#include "specshare/experiment.hpp"
#include "specshare/serialize.hpp"

namespace fs = std::filesystem;
using namespace specshare;

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::vector<uint64_t> seeds;
  std::string out;
  int grid = 0;
  int jobs = -1;
  long long horizon = 0;
};

RunConfig resolve_config(const CommonOpts& o) {
  RunConfig cfg;
  if (!o.config_path.empty())
    cfg = load_config(o.config_path);
  else if (!o.preset.empty())
    cfg = preset_config(o.preset);
  if (o.config_path.empty() && o.preset.empty()) cfg.validate();
  if (!o.preset.empty()) cfg.preset = o.preset;
  if (!o.seeds.empty()) cfg.seeds = o.seeds;
  if (!o.out.empty()) cfg.out_dir = o.out;
  if (o.grid > 0) cfg.grid_size = o.grid;
  if (o.jobs >= 0) cfg.jobs = o.jobs;
  if (o.horizon > 0) cfg.horizon = o.horizon;
  cfg.validate();
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--config", o.config_path, "JSON run configuration");
  cmd->add_option("--preset", o.preset, "named parameter bundle (fig6..fig10)");
  cmd->add_option("--seed,--seeds", o.seeds, "master seeds (repeatable)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--grid", o.grid, "belief grid size override");
  cmd->add_option("--jobs", o.jobs, "worker threads (0 = all cores)");
  cmd->add_option("--horizon", o.horizon, "horizon override in slots");
}

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

void warn_coarse_grid(int grid) {
  if (grid < 201)
    std::cerr << "warning: belief grid of " << grid
              << " points is coarse; thresholds and values may be biased\n";
}

void emit_records(const RunConfig& cfg, const RunOutput& ro) {
  if (!cfg.write_records || ro.report.records.empty()) return;
  std::string base = cfg.out_dir + "/" + ro.name + "_records";
  if (cfg.gzip_records) {
    write_records_gz(base + ".gz", ro.report.records);
  } else {
    std::string text;
    for (const auto& r : ro.report.records) {
      char a = r.action == SlotAction::Learn     ? 'L'
               : r.action == SlotAction::Predict ? 'P'
               : r.action == SlotAction::Transmit ? 'T'
                                                  : 'I';
      text += std::to_string(r.tau) + ',' + a + ',' + std::to_string(r.st_level) + ',' +
              std::to_string(r.pt_level) + ',' + std::to_string(r.obs) + ',' +
              std::to_string(r.ack) + '\n';
    }
    write_text_file(base + ".csv", text);
  }
}

void emit_experiment(const RunConfig& cfg, const ExperimentOut& xo, const std::string& csv_name) {
  ensure_dir(cfg.out_dir);
  std::string echo = config_to_json_text(cfg);
  std::vector<AggRow> rows;
  for (const auto& ro : xo.runs) {
    rows.push_back(ro.row);
    if (!ro.report.strategy.empty())
      write_text_file(cfg.out_dir + "/" + ro.name + ".json",
                      report_to_json(ro.report, echo, ro.seed));
    emit_records(cfg, ro);
  }
  write_text_file(cfg.out_dir + "/" + csv_name, aggregate_csv(rows));
  write_text_file(cfg.out_dir + "/config_echo.json", echo);
  std::cout << "wrote " << rows.size() << " rows to " << cfg.out_dir << "/" << csv_name << "\n";
}

int cmd_learn(const CommonOpts& o, const std::string& baseline) {
  RunConfig cfg = resolve_config(o);
  ensure_dir(cfg.out_dir);
  for (uint64_t seed : cfg.seeds) {
    Scenario sc = make_scenario(cfg, cfg.make_mode(), seed);
    std::vector<double> x(sc.stats.x.begin(),
                          sc.stats.x.begin() +
                              std::min<int64_t>(cfg.stage1_slots, sc.stats.x.size()));
    MixtureModel model;
    std::vector<int> labels;
    double nu_hat = 0.0;
    if (baseline == "em") {
      Rng erng = substream(seed, "learner", 1);
      EmOptions eo;
      eo.restarts = cfg.em_restarts;
      EmResult em = fit_em_gmm(x, static_cast<int>(cfg.ratios.size()), eo, erng);
      model = em.model;
      labels.resize(x.size());
      for (size_t n = 0; n < x.size(); ++n) labels[n] = classify(x[n], model);
      nu_hat = std::max(1.0, estimate_duration_mean(majority_smooth(labels, cfg.label_smooth)));
      if (!em.converged) std::cerr << "warning: EM hit max iterations (seed " << seed << ")\n";
    } else {
      LearnOut lo = learn_pipeline(cfg, x, seed);
      model = lo.model;
      labels = lo.labels;
      nu_hat = lo.nu_hat;
      write_text_file(cfg.out_dir + "/chain_s" + std::to_string(seed) + ".csv",
                      chain_csv(lo.chain));
      if (lo.chain.hyper_divergence)
        std::cerr << "warning: hyperparameter divergence flagged (seed " << seed << ")\n";
    }
    std::string path = cfg.out_dir + "/model_s" + std::to_string(seed) + ".json";
    write_text_file(path, model_to_json(model, nu_hat, labels));
    std::cout << "seed=" << seed << " K=" << model.K << " nu_hat=" << nu_hat << " -> " << path
              << "\n";
  }
  return 0;
}

int cmd_plan(const CommonOpts& o, const std::string& model_path, bool dump) {
  RunConfig cfg = resolve_config(o);
  warn_coarse_grid(cfg.grid_size);
  MixtureModel model;
  double nu_hat = 0.0;
  model_from_json(read_text_file(model_path), model, nu_hat);
  SenseModel sm = build_sense_model(model, nu_hat);
  RewardSpec rs = cfg.make_rewards(model.K);
  PolicyTable table = solve_policy(sm, rs, cfg.grid_size);
  ensure_dir(cfg.out_dir);
  write_text_file(cfg.out_dir + "/sense.json", sense_to_json(sm));
  write_text_file(cfg.out_dir + "/policy.json", policy_to_json(table));
  for (const auto& lp : table.levels) {
    double pen = 0.0;
    for (int j = 0; j < model.K; ++j) pen += sm.C[lp.k][j] * rs.Y[j];
    double ratio = pen / (pen + rs.D[lp.k]);
    std::cout << "level " << lp.k << ": T_k=" << lp.T_k << " ratio=" << ratio
              << " V(0,1)=" << lp.V[0].back() << "\n";
  }
  if (dump) {
    std::cout << "tau,k,p_star,p_star2\n";
    for (const auto& lp : table.levels)
      for (int64_t t = 0; t <= lp.T_k; ++t)
        std::cout << t << ',' << lp.k << ',' << lp.p_star[t] << ',' << lp.p_star2[t] << "\n";
  }
  return 0;
}

int cmd_simulate(const CommonOpts& o) {
  RunConfig cfg = resolve_config(o);
  warn_coarse_grid(cfg.grid_size);
  ExperimentOut xo = cfg.preset.empty() ? run_custom(cfg) : run_experiment(cfg);
  emit_experiment(cfg, xo, cfg.preset.empty() ? "aggregate.csv" : cfg.preset + "_aggregate.csv");
  return 0;
}

int cmd_reproduce(const CommonOpts& o) {
  std::vector<std::string> presets;
  if (!o.preset.empty())
    presets.push_back(o.preset);
  else
    presets = {"fig6", "fig7", "fig8", "fig9", "fig10"};
  for (const auto& p : presets) {
    CommonOpts po = o;
    po.preset = p;
    po.config_path.clear();
    RunConfig cfg = resolve_config(po);
    std::cout << "== " << p << " ==\n";
    ExperimentOut xo = run_experiment(cfg);
    emit_experiment(cfg, xo, p + "_aggregate.csv");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spectrum-sharing simulation laboratory"};
  app.require_subcommand(1);

  CommonOpts lo, po, so, ro;
  std::string baseline, model_path;
  bool dump = false;

  CLI::App* learn = app.add_subcommand("learn", "fit the level mixture on a Stage-I stream");
  add_common(learn, lo);
  learn->add_option("--baseline", baseline, "baseline learner (em)");

  CLI::App* plan = app.add_subcommand("plan", "build sense model and policy tables from a model");
  add_common(plan, po);
  plan->add_option("--model", model_path, "model JSON file")->required();
  plan->add_flag("--dump", dump, "print threshold curves as CSV");

  CLI::App* sim = app.add_subcommand("simulate", "run strategies against generated scenarios");
  add_common(sim, so);

  CLI::App* rep = app.add_subcommand("reproduce", "run the shipped experiment presets");
  add_common(rep, ro);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(learn)) return cmd_learn(lo, baseline);
    if (app.got_subcommand(plan)) return cmd_plan(po, model_path, dump);
    if (app.got_subcommand(sim)) return cmd_simulate(so);
    if (app.got_subcommand(rep)) return cmd_reproduce(ro);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
