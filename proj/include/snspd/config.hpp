#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "snspd/experiments.hpp"

namespace snspd {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ScenarioDefaults {
  double signal_rate_hz = 10000.0;
  double dark_rate_hz = 2.5;
  int n_per_class = 5000;
  int study_n_per_class = 2500;
  std::vector<double> wavelength_deltas_nm{0.4, 1.0, 2.0, 5.0, 10.0, 15.0};
};

struct SweepSpec {
  double grid_start_ma = 0.040;
  double grid_stop_ma = 0.100;
  double grid_step_ma = 0.005;
  double i_th_ma = 0.068;
  double s_rise_ma = 0.0015;
  double i_latch_ma = 0.0765;
  double flux_hz = 10000.0;

  std::vector<double> grid_amps() const;
  BiasResponseSpec response() const;
};

struct SimulateDefaults {
  double duration_s = 1e-4;
};

struct NnSpec {
  NetworkArch arch;
  Hyper hyper;
};

struct PipelineConfig {
  int format_version = 1;
  uint64_t seed = 12345;
  SnspdParams physics;
  ReadoutChain chain;
  SynthSpec synth;
  FilterSpec filter;
  CalibSpec calib;
  NnSpec nn;
  ScenarioDefaults scenario;
  DecayExperiment emitter;
  SweepSpec sweep;
  SimulateDefaults simulate;

  void validate() const;  // throws config_error naming the failing invariant
};

nlohmann::json to_json(const PipelineConfig& cfg);

// Merge a (possibly partial) JSON document over cfg. Unknown keys anywhere in
// the document are rejected.
void apply_json(PipelineConfig& cfg, const nlohmann::json& j);

PipelineConfig load_config(const std::string& path);

// FNV-1a 64-bit over the canonical JSON dump; hex string for provenance.
uint64_t fnv1a64(const std::string& bytes);
std::string config_hash(const PipelineConfig& cfg);

}  // namespace snspd
