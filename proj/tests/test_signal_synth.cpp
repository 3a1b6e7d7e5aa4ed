#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "snspd/signal_synth.hpp"

using namespace snspd;

TEST_SUITE("signal_synth") {

TEST_CASE("quantizer anchors, rounding and clamping") {
  ReadoutChain chain;  // baseline 500, 12 bit, 1 V full scale
  // Half scale: 500 + 0.5 * 4095 = 2547.5 -> round half to even -> 2548.
  CHECK(quantize_code(0.5, chain) == 2548);
  CHECK(quantize_code(0.0, chain) == 500);
  // Ties round to the even code in both directions.
  CHECK(quantize_code(1.5 / 4095.0, chain) == 502);   // 501.5 -> 502
  CHECK(quantize_code(0.5 / 4095.0, chain) == 500);   // 500.5 -> 500
  CHECK(quantize_code(2.0, chain) == 4095);
  CHECK(quantize_code(-1.0, chain) == 0);
}

TEST_CASE("noiseless photon render hits the frozen peak code") {
  ReadoutChain chain;
  chain.noise_sigma = 0.0;
  SynthSpec synth;
  synth.jitter_sd = 0.0;
  SnspdParams params;
  PhotonEvent e;  // 1535 nm, vertical
  RenderCtx ctx{1, Stream::jitter, 0, Stream::sample_noise, 0};
  AdcTrace t = render_event(e, params, chain, synth, ctx);
  REQUIRE(!t.codes.empty());
  uint16_t peak = *std::max_element(t.codes.begin(), t.codes.end());
  CHECK(peak >= 3395);
  CHECK(peak <= 3397);
  // At rest T_e = T_0 = 0.1 K, and Eq-style response v(T_0) is ~5 uV, not 0:
  // amplified that is 5 codes above baseline.
  CHECK(t.codes.front() >= 504);
  CHECK(t.codes.front() <= 506);
}

TEST_CASE("zero-energy render is baseline plus calibrated noise") {
  ReadoutChain chain;
  SynthSpec synth;
  SnspdParams params;
  PhotonEvent e;
  e.wavelength = 0.0;
  RenderCtx ctx{7, Stream::jitter, 0, Stream::sample_noise, 0};
  AdcTrace t = render_event(e, params, chain, synth, ctx);
  REQUIRE(t.codes.size() >= 6000);
  double sum = 0.0, sum2 = 0.0;
  auto n = static_cast<double>(t.codes.size());
  for (uint16_t c : t.codes) {
    sum += c;
    sum2 += static_cast<double>(c) * c;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  // sigma = 2 codes (times 4095/4096) plus 1/12 quantization variance.
  CHECK(std::fabs(mean - 500.0) < 0.15);
  CHECK(sd > 1.8);
  CHECK(sd < 2.25);

  AdcTrace again = render_event(e, params, chain, synth, ctx);
  CHECK(t.codes == again.codes);
  RenderCtx other{8, Stream::jitter, 0, Stream::sample_noise, 0};
  CHECK(render_event(e, params, chain, synth, other).codes != t.codes);
}

TEST_CASE("event pulse volts basics") {
  SnspdParams params;
  SynthSpec synth;
  PhotonEvent e;
  auto v = event_pulse_volts(e, params, 4e9, synth.pulse_window, 1.0);
  REQUIRE(v.size() >= 6000);
  double peak = *std::max_element(v.begin(), v.end());
  CHECK(peak > 2e-3);
  auto h = event_pulse_volts(e, params, 4e9, synth.pulse_window, synth.pol_ratio);
  double peak_h = *std::max_element(h.begin(), h.end());
  CHECK(peak_h < peak);
  CHECK(peak_h > 0.0);
  e.wavelength = 0.0;
  auto z = event_pulse_volts(e, params, 4e9, synth.pulse_window, 1.0);
  for (double s : z) CHECK(s == 0.0);
}

TEST_CASE("polarization factor") {
  SynthSpec synth;  // pol_ratio 0.7
  CHECK(polarization_factor(Polarization::vertical, synth) == 1.0);
  CHECK(polarization_factor(Polarization::horizontal, synth) ==
        doctest::Approx(0.7).epsilon(1e-15));
}

TEST_CASE("dark wavelength sampler statistics") {
  SynthSpec synth;
  CounterRng rng(123, Stream::dark_wavelength, 0);
  const int n = 20000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    PhotonEvent e = dark_event_sampler(synth, rng);
    CHECK(e.kind == EventKind::dark);
    CHECK(e.wavelength > 0.0);
    sum += e.wavelength;
    sum2 += e.wavelength * e.wavelength;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(mean == doctest::Approx(1352.9e-9).epsilon(2e-4));
  CHECK(sd == doctest::Approx(5e-9).epsilon(0.05));
}

TEST_CASE("event stream generation properties") {
  ScenarioSpec scen;  // dark_vs_photon, 10 kHz signal, 2.5 Hz dark
  SynthSpec synth;
  double duration = 0.05;
  EventStream s = generate_event_stream(scen, synth, duration, 42);
  CHECK(s.duration == duration);
  CHECK(s.seed == 42);
  REQUIRE(s.events.size() > 300);  // ~500 expected
  size_t n_signal = 0, n_dark = 0;
  double prev = -1.0;
  for (const auto& e : s.events) {
    CHECK(e.arrival >= 0.0);
    CHECK(e.arrival < duration);
    CHECK(e.arrival >= prev);
    prev = e.arrival;
    if (e.kind == EventKind::signal) {
      ++n_signal;
      CHECK(e.wavelength == doctest::Approx(synth.signal_wavelength).epsilon(1e-12));
    } else {
      ++n_dark;
      CHECK(e.wavelength > 0.0);
    }
  }
  // Poisson(500) within 5 sigma.
  CHECK(n_signal > 380);
  CHECK(n_signal < 620);

  EventStream again = generate_event_stream(scen, synth, duration, 42);
  REQUIRE(again.events.size() == s.events.size());
  for (size_t i = 0; i < s.events.size(); ++i)
    CHECK(again.events[i].arrival == s.events[i].arrival);
  EventStream other = generate_event_stream(scen, synth, duration, 43);
  CHECK(other.events.size() != s.events.size());
}

TEST_CASE("stream render equals isolated event renders") {
  ScenarioSpec scen;
  SynthSpec synth;
  SnspdParams params;
  ReadoutChain chain;
  EventStream stream;
  stream.duration = 1e-4;
  stream.seed = 99;
  PhotonEvent a;
  a.arrival = 10e-6;
  PhotonEvent b;
  b.arrival = 50e-6;
  b.polarization = Polarization::horizontal;
  stream.events = {a, b};

  StreamRender r = render_stream(stream, params, chain, synth, ExecPolicy::serial);
  CHECK(r.overlaps.empty());
  REQUIRE(r.trace.codes.size() == 400000);

  for (size_t k = 0; k < stream.events.size(); ++k) {
    RenderCtx ctx{stream.seed, Stream::jitter, k, Stream::sample_noise, 0};
    AdcTrace iso = render_event(stream.events[k], params, chain, synth, ctx);
    REQUIRE(iso.start_index >= 0);
    REQUIRE(static_cast<size_t>(iso.start_index) + iso.codes.size() <=
            r.trace.codes.size());
    for (size_t i = 0; i < iso.codes.size(); ++i)
      CHECK(iso.codes[i] ==
            r.trace.codes[static_cast<size_t>(iso.start_index) + i]);
  }
}

TEST_CASE("pileup intervals are reported") {
  SynthSpec synth;
  SnspdParams params;
  ReadoutChain chain;
  EventStream stream;
  stream.duration = 1e-4;
  stream.seed = 5;
  PhotonEvent a;
  a.arrival = 10e-6;
  PhotonEvent b;
  b.arrival = 10.5e-6;  // inside a's 1.5 us window
  stream.events = {a, b};
  StreamRender r = render_stream(stream, params, chain, synth, ExecPolicy::serial);
  REQUIRE(r.overlaps.size() == 1);
  auto [lo, hi] = r.overlaps[0];
  CHECK(lo == static_cast<int64_t>(std::ceil(b.arrival * chain.sample_rate)));
  CHECK(hi > lo);
}

TEST_CASE("bias sweep zeros above latch and plateau at the knee") {
  BiasResponseSpec model;
  std::vector<double> grid;
  for (int i = 0; i <= 12; ++i) grid.push_back((0.040 + 0.005 * i) * 1e-3);
  BiasSweepResult r = bias_sweep(grid, 10000.0, model, 2024);
  REQUIRE(r.bias_points.size() == grid.size());
  for (auto [bias, counts] : r.bias_points) {
    if (bias > model.i_latch) CHECK(counts == 0.0);
    CHECK(counts >= 0.0);
  }
  // eta = 1 from 0.068 mA up to the latch: Poisson(10000) within 5 sigma.
  for (auto [bias, counts] : r.bias_points) {
    if (bias > model.i_th && bias < model.i_latch) {
      CHECK(counts > 9500.0);
      CHECK(counts < 10500.0);
    }
  }
  double opt = select_optimal_bias(r);
  bool ok = std::fabs(opt - 0.070e-3) < 1e-9 || std::fabs(opt - 0.075e-3) < 1e-9;
  CHECK(ok);
}

TEST_CASE("optimal bias picks the smallest maximizer") {
  BiasSweepResult r;
  r.bias_points = {{1e-3, 5.0}, {2e-3, 9.0}, {3e-3, 9.0}, {4e-3, 1.0}};
  CHECK(select_optimal_bias(r) == doctest::Approx(2e-3).epsilon(1e-15));
}

}  // TEST_SUITE
