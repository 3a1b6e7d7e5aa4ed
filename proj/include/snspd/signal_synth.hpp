#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "snspd/exec.hpp"
#include "snspd/physics.hpp"
#include "snspd/rng.hpp"

namespace snspd {

struct ReadoutChain {
  double sample_rate = 4e9;  // samples/s
  double gain = 250.0;       // V/V
  double noise_sigma = 2.0;  // additive Gaussian noise std, ADC codes
  int baseline = 500;        // resting ADC code
  int adc_bits = 12;
  double full_scale = 1.0;   // V mapped to the top ADC code

  int top_code() const { return (1 << adc_bits) - 1; }
  void validate() const;
};

// Synthesis knobs that sit between the physics and the digitizer.
struct SynthSpec {
  double pulse_window = 1.5e-6;      // s of trace rendered per event
  double jitter_sd = 2.0e-4;         // per-event multiplicative amplitude jitter
  double pol_ratio = 0.7;            // horizontal/vertical absorption ratio
  double signal_wavelength = 1535e-9;  // m
  double dark_wavelength_mean = 1352.9e-9;  // m, calibrated to the dark anchor
  double dark_wavelength_sd = 5e-9;  // m
};

struct EventStream {
  double duration = 0.0;  // s
  std::vector<PhotonEvent> events;  // sorted by arrival
  uint64_t seed = 0;
};

struct AdcTrace {
  double sample_rate;
  int64_t start_index;  // sample index of codes[0]; t_start = start_index/rate
  std::vector<uint16_t> codes;

  double t_start() const { return static_cast<double>(start_index) / sample_rate; }
};

struct BiasSweepResult {
  std::vector<std::pair<double, double>> bias_points;  // (i_bias A, counts/s)
};

struct BiasResponseSpec {
  double i_th = 0.068e-3;     // A, exponential-rise knee
  double s_rise = 0.0015e-3;  // A, rise scale
  double i_latch = 0.0765e-3; // A, hard cutoff
};

// Scenario driving event generation and dataset construction.
enum class ScenarioKind { dark_vs_photon, wavelength_pair, polarization_pair };

struct ClassSpec {
  double wavelength = 1535e-9;  // m; ignored for the dark class
  Polarization polarization = Polarization::vertical;
  bool is_dark = false;
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::dark_vs_photon;
  ClassSpec class_a;  // label 0
  ClassSpec class_b;  // label 1
  double signal_rate = 10000.0;  // Hz
  double dark_rate = 2.5;        // Hz
  int n_per_class = 5000;
};

// Poisson signal + dark arrivals over [0, duration), labels attached,
// sorted by arrival. Deterministic given the seed.
EventStream generate_event_stream(const ScenarioSpec& scenario,
                                  const SynthSpec& synth, double duration,
                                  uint64_t seed);

// One dark-kind event with wavelength from Normal(mean, sd) truncated > 0.
PhotonEvent dark_event_sampler(const SynthSpec& synth, CounterRng& rng);

// Absorption fraction scaling for polarization: vertical keeps gamma,
// horizontal scales it by pol_ratio.
double polarization_factor(Polarization pol, const SynthSpec& synth);

// Unamplified voltage samples of one event's pulse on the chain's sample
// grid (gain, jitter and noise are applied by the render step). Zero-energy
// events give an all-zero pulse. Cacheable: the result depends only on the
// effective energy and the physics parameters.
std::vector<double> event_pulse_volts(const PhotonEvent& event,
                                      const SnspdParams& params,
                                      double sample_rate, double pulse_window,
                                      double pol_factor);

// RNG addressing for one rendered event. Noise is a pure function of
// (seed, noise_stream purpose+index, absolute sample index), so a segment of
// a stream render is bitwise-identical to the isolated render of that event.
struct RenderCtx {
  uint64_t seed = 0;
  Stream jitter_purpose = Stream::jitter;
  uint64_t jitter_index = 0;
  Stream noise_purpose = Stream::sample_noise;
  uint64_t noise_index = 0;
};

// Pipeline: simulate_pulse -> gain -> per-event amplitude jitter ->
// per-sample Gaussian noise (sigma_codes * full_scale / 2^bits volts) ->
// baseline offset -> round-half-even quantization -> clamp.
// The event arrival is snapped to the sample grid (first sample at
// ceil(arrival * rate)).
AdcTrace render_event(const PhotonEvent& event, const SnspdParams& params,
                      const ReadoutChain& chain, const SynthSpec& synth,
                      const RenderCtx& ctx);

uint16_t quantize_code(double volts, const ReadoutChain& chain);

struct StreamRender {
  AdcTrace trace;
  // [start, end) sample-index intervals where two or more pulses overlap.
  std::vector<std::pair<int64_t, int64_t>> overlaps;
};

// Superposition of all event pulses on one timeline, then a single
// noise/quantization pass. Length = ceil(duration * sample_rate).
StreamRender render_stream(const EventStream& stream, const SnspdParams& params,
                           const ReadoutChain& chain, const SynthSpec& synth,
                           ExecPolicy policy);

// counts(i) = flux * eta(i), eta = min(1, exp((i - i_th)/s_rise)) below the
// latching current and 0 above it; counts Poisson-sampled per grid point.
BiasSweepResult bias_sweep(const std::vector<double>& bias_grid, double flux,
                           const BiasResponseSpec& model, uint64_t seed);

// Smallest bias achieving the maximum count.
double select_optimal_bias(const BiasSweepResult& sweep);

}  // namespace snspd
