#include "snspd/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace snspd {

std::vector<double> SweepSpec::grid_amps() const {
  std::vector<double> grid;
  for (int i = 0;; ++i) {
    double ma = grid_start_ma + i * grid_step_ma;
    if (ma > grid_stop_ma + 1e-12) break;
    // snap to nano-mA so grid points print as exact decimals
    ma = std::round(ma * 1e9) / 1e9;
    grid.push_back(ma * 1e-3);
  }
  return grid;
}

BiasResponseSpec SweepSpec::response() const {
  return BiasResponseSpec{i_th_ma * 1e-3, s_rise_ma * 1e-3, i_latch_ma * 1e-3};
}

void PipelineConfig::validate() const {
  if (format_version != 1)
    throw config_error("config: unsupported format_version");
  try {
    physics.validate();
    chain.validate();
    nn.arch.validate();
    emitter.validate();
  } catch (const std::invalid_argument& e) {
    throw config_error(std::string("config: ") + e.what());
  }
  if (!(synth.pulse_window > 0.0))
    throw config_error("config: synth.pulse_window_s must be > 0");
  if (synth.jitter_sd < 0.0)
    throw config_error("config: synth.jitter_sd must be >= 0");
  if (!(synth.pol_ratio > 0.0 && synth.pol_ratio <= 1.0))
    throw config_error("config: synth.pol_ratio must be in (0, 1]");
  if (!(synth.signal_wavelength > 0.0) || !(synth.dark_wavelength_mean > 0.0))
    throw config_error("config: wavelengths must be > 0");
  if (synth.dark_wavelength_mean >= synth.signal_wavelength)
    throw config_error(
        "config: dark wavelength mean must be below the signal wavelength");
  if (filter.k_sigma <= 0.0)
    throw config_error("config: filter.k_sigma must be > 0");
  if (filter.pre_pad < 0 || filter.post_pad < 0)
    throw config_error("config: filter pads must be >= 0");
  if (!(calib.bin_width >= 1.0))
    throw config_error("config: calib.bin_width must be >= 1");
  if (!(nn.hyper.lr > 0.0) || nn.hyper.epochs <= 0 || nn.hyper.batch_size <= 0)
    throw config_error("config: nn lr/epochs/batch must be positive");
  if (scenario.signal_rate_hz < 0.0 || scenario.dark_rate_hz < 0.0)
    throw config_error("config: scenario rates must be >= 0");
  if (scenario.n_per_class < 100 || scenario.study_n_per_class < 100)
    throw config_error("config: n_per_class must be >= 100");
  for (double d : scenario.wavelength_deltas_nm)
    if (!(d > 0.0))
      throw config_error("config: wavelength deltas must be > 0");
  if (!(sweep.grid_step_ma > 0.0) || !(sweep.grid_stop_ma >= sweep.grid_start_ma))
    throw config_error("config: bad sweep grid");
  if (!(sweep.flux_hz > 0.0)) throw config_error("config: sweep.flux_hz must be > 0");
  if (!(simulate.duration_s > 0.0))
    throw config_error("config: simulate.duration_s must be > 0");
}

nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["format_version"] = c.format_version;
  j["seed"] = c.seed;
  j["physics"] = {{"c_e", c.physics.c_e},
                  {"c_p", c.physics.c_p},
                  {"tau_ep", c.physics.tau_ep},
                  {"tau_es", c.physics.tau_es},
                  {"t0", c.physics.t0},
                  {"t_c", c.physics.t_c},
                  {"gamma", c.physics.gamma},
                  {"d", c.physics.d},
                  {"tau_pulse", c.physics.tau_pulse},
                  {"m_shape", c.physics.m_shape},
                  {"n_shape", c.physics.n_shape},
                  {"i_bias", c.physics.i_bias},
                  {"z0", c.physics.z0},
                  {"spot_area", c.physics.spot_area}};
  j["chain"] = {{"sample_rate", c.chain.sample_rate},
                {"gain", c.chain.gain},
                {"noise_sigma", c.chain.noise_sigma},
                {"baseline", c.chain.baseline},
                {"adc_bits", c.chain.adc_bits},
                {"full_scale", c.chain.full_scale}};
  j["synth"] = {{"pulse_window_s", c.synth.pulse_window},
                {"jitter_sd", c.synth.jitter_sd},
                {"pol_ratio", c.synth.pol_ratio},
                {"signal_wavelength_m", c.synth.signal_wavelength},
                {"dark_wavelength_mean_m", c.synth.dark_wavelength_mean},
                {"dark_wavelength_sd_m", c.synth.dark_wavelength_sd}};
  j["filter"] = {{"auto_threshold", c.filter.auto_threshold},
                 {"k_sigma", c.filter.k_sigma},
                 {"fixed_threshold", c.filter.fixed_threshold},
                 {"pre_pad", c.filter.pre_pad},
                 {"post_pad", c.filter.post_pad}};
  j["calib"] = {{"bin_width", c.calib.bin_width},
                {"alpha", c.calib.alpha},
                {"beta", c.calib.beta}};
  j["nn"] = {{"arch", c.nn.arch.layer_sizes},
             {"lr", c.nn.hyper.lr},
             {"epochs", c.nn.hyper.epochs},
             {"batch", c.nn.hyper.batch_size},
             {"init_scale", c.nn.hyper.init_scale}};
  j["scenario"] = {{"signal_rate_hz", c.scenario.signal_rate_hz},
                   {"dark_rate_hz", c.scenario.dark_rate_hz},
                   {"n_per_class", c.scenario.n_per_class},
                   {"study_n_per_class", c.scenario.study_n_per_class},
                   {"wavelength_deltas_nm", c.scenario.wavelength_deltas_nm}};
  j["emitter"] = {{"lifetime_s", c.emitter.lifetime},
                  {"pulse_period_s", c.emitter.pulse_period},
                  {"n_cycles", c.emitter.n_cycles},
                  {"dark_rate_hz", c.emitter.dark_rate},
                  {"bin_width_s", c.emitter.bin_width},
                  {"window_s", c.emitter.window},
                  {"p_emit", c.emitter.p_emit}};
  j["sweep"] = {{"grid_start_ma", c.sweep.grid_start_ma},
                {"grid_stop_ma", c.sweep.grid_stop_ma},
                {"grid_step_ma", c.sweep.grid_step_ma},
                {"i_th_ma", c.sweep.i_th_ma},
                {"s_rise_ma", c.sweep.s_rise_ma},
                {"i_latch_ma", c.sweep.i_latch_ma},
                {"flux_hz", c.sweep.flux_hz}};
  j["simulate"] = {{"duration_s", c.simulate.duration_s}};
  return j;
}

namespace {

// Every key in `doc` must exist in `ref` at the same path.
void reject_unknown_keys(const nlohmann::json& doc, const nlohmann::json& ref,
                         const std::string& path) {
  if (!doc.is_object()) return;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    std::string here = path.empty() ? it.key() : path + "." + it.key();
    if (!ref.is_object() || !ref.contains(it.key()))
      throw config_error("config: unknown key '" + here + "'");
    reject_unknown_keys(it.value(), ref.at(it.key()), here);
  }
}

template <class T>
void get_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

void apply_json(PipelineConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw config_error("config: document must be a JSON object");
  reject_unknown_keys(j, to_json(c), "");

  get_if(j, "format_version", c.format_version);
  get_if(j, "seed", c.seed);
  if (j.contains("physics")) {
    const auto& p = j.at("physics");
    get_if(p, "c_e", c.physics.c_e);
    get_if(p, "c_p", c.physics.c_p);
    get_if(p, "tau_ep", c.physics.tau_ep);
    get_if(p, "tau_es", c.physics.tau_es);
    get_if(p, "t0", c.physics.t0);
    get_if(p, "t_c", c.physics.t_c);
    get_if(p, "gamma", c.physics.gamma);
    get_if(p, "d", c.physics.d);
    get_if(p, "tau_pulse", c.physics.tau_pulse);
    get_if(p, "m_shape", c.physics.m_shape);
    get_if(p, "n_shape", c.physics.n_shape);
    get_if(p, "i_bias", c.physics.i_bias);
    get_if(p, "z0", c.physics.z0);
    get_if(p, "spot_area", c.physics.spot_area);
  }
  if (j.contains("chain")) {
    const auto& p = j.at("chain");
    get_if(p, "sample_rate", c.chain.sample_rate);
    get_if(p, "gain", c.chain.gain);
    get_if(p, "noise_sigma", c.chain.noise_sigma);
    get_if(p, "baseline", c.chain.baseline);
    get_if(p, "adc_bits", c.chain.adc_bits);
    get_if(p, "full_scale", c.chain.full_scale);
  }
  if (j.contains("synth")) {
    const auto& p = j.at("synth");
    get_if(p, "pulse_window_s", c.synth.pulse_window);
    get_if(p, "jitter_sd", c.synth.jitter_sd);
    get_if(p, "pol_ratio", c.synth.pol_ratio);
    get_if(p, "signal_wavelength_m", c.synth.signal_wavelength);
    get_if(p, "dark_wavelength_mean_m", c.synth.dark_wavelength_mean);
    get_if(p, "dark_wavelength_sd_m", c.synth.dark_wavelength_sd);
  }
  if (j.contains("filter")) {
    const auto& p = j.at("filter");
    get_if(p, "auto_threshold", c.filter.auto_threshold);
    get_if(p, "k_sigma", c.filter.k_sigma);
    get_if(p, "fixed_threshold", c.filter.fixed_threshold);
    get_if(p, "pre_pad", c.filter.pre_pad);
    get_if(p, "post_pad", c.filter.post_pad);
  }
  if (j.contains("calib")) {
    const auto& p = j.at("calib");
    get_if(p, "bin_width", c.calib.bin_width);
    get_if(p, "alpha", c.calib.alpha);
    get_if(p, "beta", c.calib.beta);
  }
  if (j.contains("nn")) {
    const auto& p = j.at("nn");
    get_if(p, "arch", c.nn.arch.layer_sizes);
    get_if(p, "lr", c.nn.hyper.lr);
    get_if(p, "epochs", c.nn.hyper.epochs);
    get_if(p, "batch", c.nn.hyper.batch_size);
    get_if(p, "init_scale", c.nn.hyper.init_scale);
  }
  if (j.contains("scenario")) {
    const auto& p = j.at("scenario");
    get_if(p, "signal_rate_hz", c.scenario.signal_rate_hz);
    get_if(p, "dark_rate_hz", c.scenario.dark_rate_hz);
    get_if(p, "n_per_class", c.scenario.n_per_class);
    get_if(p, "study_n_per_class", c.scenario.study_n_per_class);
    get_if(p, "wavelength_deltas_nm", c.scenario.wavelength_deltas_nm);
  }
  if (j.contains("emitter")) {
    const auto& p = j.at("emitter");
    get_if(p, "lifetime_s", c.emitter.lifetime);
    get_if(p, "pulse_period_s", c.emitter.pulse_period);
    get_if(p, "n_cycles", c.emitter.n_cycles);
    get_if(p, "dark_rate_hz", c.emitter.dark_rate);
    get_if(p, "bin_width_s", c.emitter.bin_width);
    get_if(p, "window_s", c.emitter.window);
    get_if(p, "p_emit", c.emitter.p_emit);
  }
  if (j.contains("sweep")) {
    const auto& p = j.at("sweep");
    get_if(p, "grid_start_ma", c.sweep.grid_start_ma);
    get_if(p, "grid_stop_ma", c.sweep.grid_stop_ma);
    get_if(p, "grid_step_ma", c.sweep.grid_step_ma);
    get_if(p, "i_th_ma", c.sweep.i_th_ma);
    get_if(p, "s_rise_ma", c.sweep.s_rise_ma);
    get_if(p, "i_latch_ma", c.sweep.i_latch_ma);
    get_if(p, "flux_hz", c.sweep.flux_hz);
  }
  if (j.contains("simulate")) {
    get_if(j.at("simulate"), "duration_s", c.simulate.duration_s);
  }
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw config_error("config: cannot open " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw config_error("config: parse error in " + path + ": " + e.what());
  }
  PipelineConfig cfg;
  try {
    apply_json(cfg, j);
  } catch (const nlohmann::json::exception& e) {
    throw config_error("config: bad value in " + path + ": " + e.what());
  }
  return cfg;
}

uint64_t fnv1a64(const std::string& bytes) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string config_hash(const PipelineConfig& cfg) {
  uint64_t h = fnv1a64(to_json(cfg).dump());
  std::ostringstream os;
  os << std::hex;
  for (int shift = 60; shift >= 0; shift -= 4) os << ((h >> shift) & 0xF);
  return os.str();
}

}  // namespace snspd
