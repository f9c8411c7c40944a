#include "specshare/serialize.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace specshare {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json mat_to_json(const Mat& m) {
  json j = json::array();
  for (const auto& row : m) j.push_back(row);
  return j;
}

Mat mat_from_json(const json& j) {
  Mat m;
  for (const auto& row : j) m.push_back(row.get<std::vector<double>>());
  return m;
}

}  // namespace

std::string model_to_json(const MixtureModel& m, double nu_hat, const std::vector<int>& labels) {
  json j;
  j["K"] = m.K;
  j["mu"] = m.mu;
  j["S"] = m.S;
  j["pi"] = m.pi;
  j["nu_hat"] = nu_hat;
  j["labels"] = labels;
  return j.dump(2) + "\n";
}

void model_from_json(const std::string& text, MixtureModel& m, double& nu_hat,
                     std::vector<int>* labels) {
  json j = json::parse(text);
  m.K = j.at("K").get<int>();
  m.mu = j.at("mu").get<std::vector<double>>();
  m.S = j.at("S").get<std::vector<double>>();
  m.pi = j.at("pi").get<std::vector<double>>();
  nu_hat = j.at("nu_hat").get<double>();
  if (labels && j.contains("labels")) *labels = j["labels"].get<std::vector<int>>();
  m.validate();
}

std::string sense_to_json(const SenseModel& sm) {
  json j;
  j["K"] = sm.K;
  j["H"] = mat_to_json(sm.H);
  j["C"] = mat_to_json(sm.C);
  j["M"] = mat_to_json(sm.M);
  j["ack"] = mat_to_json(sm.ack);
  j["paper_index"] = sm.paper_index;
  j["nu_hat"] = sm.nu_hat;
  return j.dump(2) + "\n";
}

SenseModel sense_from_json(const std::string& text) {
  json j = json::parse(text);
  SenseModel sm;
  sm.K = j.at("K").get<int>();
  sm.H = mat_from_json(j.at("H"));
  sm.C = mat_from_json(j.at("C"));
  sm.M = mat_from_json(j.at("M"));
  sm.ack = mat_from_json(j.at("ack"));
  sm.paper_index = j.at("paper_index").get<std::vector<int>>();
  sm.nu_hat = j.at("nu_hat").get<double>();
  return sm;
}

std::string policy_to_json(const PolicyTable& t, bool include_values) {
  json j;
  j["grid_size"] = t.grid_size;
  j["rs"] = {{"D", t.rs.D}, {"Y", t.rs.Y}, {"tau_s", t.rs.tau_s}};
  json levels = json::array();
  for (const auto& lp : t.levels) {
    json l;
    l["k"] = lp.k;
    l["T_k"] = lp.T_k;
    l["grid_size"] = lp.grid_size;
    l["p_star"] = lp.p_star;
    l["p_star2"] = lp.p_star2;
    if (include_values) l["V"] = lp.V;
    levels.push_back(std::move(l));
  }
  j["levels"] = std::move(levels);
  return j.dump(2) + "\n";
}

PolicyTable policy_from_json(const std::string& text) {
  json j = json::parse(text);
  PolicyTable t;
  t.grid_size = j.at("grid_size").get<int>();
  t.rs.D = j.at("rs").at("D").get<std::vector<double>>();
  t.rs.Y = j.at("rs").at("Y").get<std::vector<double>>();
  t.rs.tau_s = j.at("rs").at("tau_s").get<int>();
  for (const auto& l : j.at("levels")) {
    LevelPolicy lp;
    lp.k = l.at("k").get<int>();
    lp.T_k = l.at("T_k").get<int64_t>();
    lp.grid_size = l.at("grid_size").get<int>();
    lp.p_star = l.at("p_star").get<std::vector<double>>();
    lp.p_star2 = l.at("p_star2").get<std::vector<double>>();
    if (l.contains("V")) lp.V = l["V"].get<std::vector<std::vector<double>>>();
    t.levels.push_back(std::move(lp));
  }
  return t;
}

std::string report_to_json(const SimReport& rep, const std::string& config_echo, uint64_t seed) {
  json j;
  j["strategy"] = rep.strategy;
  j["seed"] = seed;
  j["horizon"] = rep.horizon;
  j["U_final"] = rep.U_final;
  j["p_c_hat"] = rep.p_c_hat;
  j["K_hat"] = rep.K_hat;
  j["blocks"] = rep.blocks;
  j["matched_blocks"] = rep.matched_blocks;
  j["online_divergence"] = rep.online_divergence;
  json u = json::array();
  for (const auto& pt : rep.U) u.push_back({pt.first, pt.second});
  j["U"] = std::move(u);
  j["config"] = config_echo;
  return j.dump(2) + "\n";
}

SimReport report_from_json(const std::string& text) {
  json j = json::parse(text);
  SimReport rep;
  rep.strategy = j.at("strategy").get<std::string>();
  rep.horizon = j.at("horizon").get<int64_t>();
  rep.U_final = j.at("U_final").get<double>();
  rep.p_c_hat = j.at("p_c_hat").get<double>();
  rep.K_hat = j.at("K_hat").get<int>();
  rep.blocks = j.at("blocks").get<int64_t>();
  rep.matched_blocks = j.at("matched_blocks").get<int64_t>();
  rep.online_divergence = j.at("online_divergence").get<bool>();
  for (const auto& pt : j.at("U"))
    rep.U.push_back({pt.at(0).get<int64_t>(), pt.at(1).get<double>()});
  return rep;
}

std::string chain_csv(const GibbsChain& chain) {
  std::ostringstream out;
  out << "iter,K,loglik,lambda,R,W,beta,mu,S,count\n";
  for (const auto& s : chain.snaps) {
    out << s.iter << ',' << s.comp.size() << ',' << fmt(s.loglik) << ',' << fmt(s.th.lambda) << ','
        << fmt(s.th.R) << ',' << fmt(s.th.W) << ',' << fmt(s.th.beta) << ',';
    for (size_t k = 0; k < s.comp.size(); ++k) out << (k ? ";" : "") << fmt(s.comp[k].mu);
    out << ',';
    for (size_t k = 0; k < s.comp.size(); ++k) out << (k ? ";" : "") << fmt(s.comp[k].S);
    out << ',';
    for (size_t k = 0; k < s.comp.size(); ++k) out << (k ? ";" : "") << s.comp[k].count;
    out << '\n';
  }
  return out.str();
}

std::string aggregate_csv(const std::vector<AggRow>& rows) {
  std::ostringstream out;
  out << "preset,sweep_param,sweep_value,variant,seed,U_final,P_c,K_hat,V_hat,V_theory\n";
  for (const auto& r : rows) {
    out << r.preset << ',' << r.sweep_param << ',' << fmt(r.sweep_value) << ',' << r.variant << ','
        << r.seed << ',' << fmt(r.U_final) << ',' << fmt(r.P_c) << ','
        << (r.K_hat < 0 ? std::string() : std::to_string(r.K_hat)) << ',' << fmt(r.V_hat) << ','
        << fmt(r.V_theory) << '\n';
  }
  return out.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("short write to '" + path + "'");
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

char action_code(SlotAction a) {
  switch (a) {
    case SlotAction::Learn: return 'L';
    case SlotAction::Predict: return 'P';
    case SlotAction::Transmit: return 'T';
    case SlotAction::IntraBlock: return 'I';
  }
  return '?';
}

SlotAction action_from(char c) {
  switch (c) {
    case 'L': return SlotAction::Learn;
    case 'P': return SlotAction::Predict;
    case 'T': return SlotAction::Transmit;
    case 'I': return SlotAction::IntraBlock;
  }
  throw std::runtime_error("records: bad action code");
}

}  // namespace

void write_records_gz(const std::string& path, const std::vector<SlotRecord>& records) {
  gzFile f = gzopen(path.c_str(), "wb");
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  char line[96];
  for (const auto& r : records) {
    int n = std::snprintf(line, sizeof line, "%lld,%c,%d,%d,%d,%d\n",
                          static_cast<long long>(r.tau), action_code(r.action), r.st_level,
                          r.pt_level, r.obs, r.ack);
    if (gzwrite(f, line, static_cast<unsigned>(n)) != n) {
      gzclose(f);
      throw std::runtime_error("short gz write to '" + path + "'");
    }
  }
  if (gzclose(f) != Z_OK) throw std::runtime_error("gzclose failed for '" + path + "'");
}

std::vector<SlotRecord> read_records_gz(const std::string& path) {
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw std::runtime_error("cannot read '" + path + "'");
  std::vector<SlotRecord> out;
  char line[256];
  while (gzgets(f, line, sizeof line)) {
    long long tau;
    char a;
    int st, pt, obs, ack;
    if (std::sscanf(line, "%lld,%c,%d,%d,%d,%d", &tau, &a, &st, &pt, &obs, &ack) != 6) {
      gzclose(f);
      throw std::runtime_error("records: malformed line in '" + path + "'");
    }
    out.push_back({tau, action_from(a), static_cast<int16_t>(st), static_cast<int16_t>(pt),
                   static_cast<int16_t>(obs), static_cast<int8_t>(ack)});
  }
  gzclose(f);
  return out;
}

}  // namespace specshare
