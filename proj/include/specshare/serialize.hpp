#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "specshare/dpgmm.hpp"
#include "specshare/engine.hpp"
#include "specshare/policy.hpp"
#include "specshare/sensing.hpp"

namespace specshare {

// All emitters are deterministic: sorted keys, shortest-round-trip doubles.

std::string model_to_json(const MixtureModel& m, double nu_hat, const std::vector<int>& labels);
void model_from_json(const std::string& text, MixtureModel& m, double& nu_hat,
                     std::vector<int>* labels = nullptr);

std::string sense_to_json(const SenseModel& sm);
SenseModel sense_from_json(const std::string& text);

std::string policy_to_json(const PolicyTable& t, bool include_values = false);
PolicyTable policy_from_json(const std::string& text);

std::string report_to_json(const SimReport& rep, const std::string& config_echo, uint64_t seed);
SimReport report_from_json(const std::string& text);

// One line per snapshot: iter,K,loglik,lambda,R,W,beta,mu;..,S;..,count;..
std::string chain_csv(const GibbsChain& chain);

struct AggRow {
  std::string preset;
  std::string sweep_param;
  double sweep_value = 0.0;
  std::string variant;
  uint64_t seed = 0;
  double U_final = std::numeric_limits<double>::quiet_NaN();
  double P_c = std::numeric_limits<double>::quiet_NaN();
  int K_hat = -1;
  double V_hat = std::numeric_limits<double>::quiet_NaN();
  double V_theory = std::numeric_limits<double>::quiet_NaN();
};

std::string aggregate_csv(const std::vector<AggRow>& rows);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// Compressed line-delimited slot log (tau,action,st,pt,obs,ack).
void write_records_gz(const std::string& path, const std::vector<SlotRecord>& records);
std::vector<SlotRecord> read_records_gz(const std::string& path);

}  // namespace specshare
