#include "snspd/signal_synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace snspd {

void ReadoutChain::validate() const {
  if (!(sample_rate > 0.0))
    throw std::invalid_argument("ReadoutChain: sample_rate must be > 0");
  if (adc_bits < 8 || adc_bits > 16)
    throw std::invalid_argument("ReadoutChain: adc_bits must be in [8, 16]");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("ReadoutChain: noise_sigma must be >= 0");
  if (baseline < 0 || baseline >= (1 << adc_bits))
    throw std::invalid_argument("ReadoutChain: baseline outside ADC range");
  if (!(full_scale > 0.0))
    throw std::invalid_argument("ReadoutChain: full_scale must be > 0");
  if (!(gain > 0.0))
    throw std::invalid_argument("ReadoutChain: gain must be > 0");
}

PhotonEvent dark_event_sampler(const SynthSpec& synth, CounterRng& rng) {
  double wl;
  do {
    wl = synth.dark_wavelength_mean + synth.dark_wavelength_sd * rng.normal();
  } while (wl <= 0.0);
  PhotonEvent ev;
  ev.wavelength = wl;
  ev.polarization = Polarization::vertical;
  ev.kind = EventKind::dark;
  return ev;
}

double polarization_factor(Polarization pol, const SynthSpec& synth) {
  return pol == Polarization::vertical ? 1.0 : synth.pol_ratio;
}

EventStream generate_event_stream(const ScenarioSpec& scenario,
                                  const SynthSpec& synth, double duration,
                                  uint64_t seed) {
  if (!(duration > 0.0))
    throw std::invalid_argument("generate_event_stream: duration must be > 0");
  if (scenario.signal_rate < 0.0 || scenario.dark_rate < 0.0)
    throw std::invalid_argument("generate_event_stream: rates must be >= 0");

  std::vector<PhotonEvent> signal;
  if (scenario.signal_rate > 0.0) {
    CounterRng rng(seed, Stream::arrivals_signal);
    double t = rng.exponential() / scenario.signal_rate;
    while (t < duration) {
      PhotonEvent ev;
      ev.arrival = t;
      ev.wavelength = synth.signal_wavelength;
      ev.polarization = Polarization::vertical;
      ev.kind = EventKind::signal;
      signal.push_back(ev);
      t += rng.exponential() / scenario.signal_rate;
    }
  }

  std::vector<PhotonEvent> dark;
  if (scenario.dark_rate > 0.0) {
    CounterRng arr(seed, Stream::arrivals_dark);
    double t = arr.exponential() / scenario.dark_rate;
    size_t i = 0;
    while (t < duration) {
      CounterRng wl_rng(seed, Stream::dark_wavelength, i++);
      PhotonEvent ev = dark_event_sampler(synth, wl_rng);
      ev.arrival = t;
      dark.push_back(ev);
      t += arr.exponential() / scenario.dark_rate;
    }
  }

  EventStream out;
  out.duration = duration;
  out.seed = seed;
  out.events.resize(signal.size() + dark.size());
  std::merge(signal.begin(), signal.end(), dark.begin(), dark.end(),
             out.events.begin(),
             [](const PhotonEvent& a, const PhotonEvent& b) {
               return a.arrival < b.arrival;
             });
  return out;
}

uint16_t quantize_code(double volts, const ReadoutChain& chain) {
  double scaled = static_cast<double>(chain.baseline) +
                  volts * chain.top_code() / chain.full_scale;
  double r = std::nearbyint(scaled);  // round half to even (default FP mode)
  if (r < 0.0) r = 0.0;
  double top = chain.top_code();
  if (r > top) r = top;
  return static_cast<uint16_t>(r);
}

std::vector<double> event_pulse_volts(const PhotonEvent& event,
                                      const SnspdParams& params,
                                      double sample_rate, double pulse_window,
                                      double pol_factor) {
  double dt = 1.0 / sample_rate;
  auto n = static_cast<size_t>(std::llround(pulse_window / dt));
  if (event.wavelength == 0.0) return std::vector<double>(n + 1, 0.0);

  double energy = photon_energy(event) * pol_factor;
  auto power = [energy, &params](double t) {
    return absorbed_power(t, energy, params);
  };
  std::vector<double> v;
  v.reserve(n + 1);
  ThermalState s{0.0, params.t0, params.t0};
  v.push_back(voltage_response(s.t_e, params));
  for (size_t k = 0; k < n; ++k) {
    s = thermal_step(s, dt, power, params);
    v.push_back(voltage_response(s.t_e, params));
  }
  return v;
}

namespace {

double jitter_amp(const ReadoutChain& chain, const SynthSpec& synth,
                  const RenderCtx& ctx) {
  CounterRng jit(ctx.seed, ctx.jitter_purpose, ctx.jitter_index);
  return (1.0 + synth.jitter_sd * jit.normal_at(0)) * chain.gain;
}

}  // namespace

AdcTrace render_event(const PhotonEvent& event, const SnspdParams& params,
                      const ReadoutChain& chain, const SynthSpec& synth,
                      const RenderCtx& ctx) {
  auto i0 = static_cast<int64_t>(std::ceil(event.arrival * chain.sample_rate));
  std::vector<double> v = event_pulse_volts(
      event, params, chain.sample_rate, synth.pulse_window,
      polarization_factor(event.polarization, synth));
  double amp = jitter_amp(chain, synth, ctx);

  CounterRng noise(ctx.seed, ctx.noise_purpose, ctx.noise_index);
  double sigma_v = chain.noise_sigma * chain.full_scale /
                   static_cast<double>(1 << chain.adc_bits);

  AdcTrace trace;
  trace.sample_rate = chain.sample_rate;
  trace.start_index = i0;
  trace.codes.reserve(v.size());
  for (size_t k = 0; k < v.size(); ++k) {
    double n = sigma_v == 0.0
                   ? 0.0
                   : sigma_v * noise.normal_at(static_cast<uint64_t>(i0) + k);
    trace.codes.push_back(quantize_code(amp * v[k] + n, chain));
  }
  return trace;
}

StreamRender render_stream(const EventStream& stream, const SnspdParams& params,
                           const ReadoutChain& chain, const SynthSpec& synth,
                           ExecPolicy policy) {
  auto n_total = static_cast<int64_t>(
      std::ceil(stream.duration * chain.sample_rate));
  std::vector<double> volts(static_cast<size_t>(n_total), 0.0);

  double dt = 1.0 / chain.sample_rate;
  auto pulse_len =
      static_cast<int64_t>(std::llround(synth.pulse_window / dt)) + 1;

  // Pulses are synthesized in parallel one chunk at a time (bounds memory),
  // then superposed serially in event order so pileup sums are ordered.
  const size_t chunk = 64;
  std::vector<std::vector<double>> scratch(
      std::min(chunk, stream.events.size()));
  std::vector<std::pair<int64_t, int64_t>> spans;
  spans.reserve(stream.events.size());
  auto synth_one = [&](size_t c, size_t base) {
    const PhotonEvent& ev = stream.events[base + c];
    RenderCtx ctx{stream.seed, Stream::jitter, base + c, Stream::sample_noise, 0};
    scratch[c] = event_pulse_volts(ev, params, chain.sample_rate,
                                   synth.pulse_window,
                                   polarization_factor(ev.polarization, synth));
    CounterRng jit(ctx.seed, ctx.jitter_purpose, ctx.jitter_index);
    double amp = (1.0 + synth.jitter_sd * jit.normal_at(0)) * chain.gain;
    for (auto& s : scratch[c]) s = amp * s;
  };
  for (size_t base = 0; base < stream.events.size(); base += chunk) {
    size_t count = std::min(chunk, stream.events.size() - base);
    if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic)
      for (size_t c = 0; c < count; ++c) synth_one(c, base);
    } else {
      for (size_t c = 0; c < count; ++c) synth_one(c, base);
    }
    for (size_t c = 0; c < count; ++c) {
      const PhotonEvent& ev = stream.events[base + c];
      auto i0 = static_cast<int64_t>(std::ceil(ev.arrival * chain.sample_rate));
      const auto& p = scratch[c];
      for (size_t k = 0; k < p.size(); ++k) {
        int64_t idx = i0 + static_cast<int64_t>(k);
        if (idx >= 0 && idx < n_total) volts[static_cast<size_t>(idx)] += p[k];
      }
      spans.emplace_back(i0, std::min(i0 + pulse_len, n_total));
    }
  }

  StreamRender out;
  out.trace.sample_rate = chain.sample_rate;
  out.trace.start_index = 0;
  out.trace.codes.resize(static_cast<size_t>(n_total));

  CounterRng noise(stream.seed, Stream::sample_noise, 0);
  double sigma_v = chain.noise_sigma * chain.full_scale /
                   static_cast<double>(1 << chain.adc_bits);
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (int64_t i = 0; i < n_total; ++i) {
      double n = sigma_v == 0.0
                     ? 0.0
                     : sigma_v * noise.normal_at(static_cast<uint64_t>(i));
      out.trace.codes[static_cast<size_t>(i)] =
          quantize_code(volts[static_cast<size_t>(i)] + n, chain);
    }
  } else {
    for (int64_t i = 0; i < n_total; ++i) {
      double n = sigma_v == 0.0
                     ? 0.0
                     : sigma_v * noise.normal_at(static_cast<uint64_t>(i));
      out.trace.codes[static_cast<size_t>(i)] =
          quantize_code(volts[static_cast<size_t>(i)] + n, chain);
    }
  }

  for (size_t e = 1; e < spans.size(); ++e) {
    int64_t hi = spans[e - 1].second;
    if (spans[e].first < hi) {
      out.overlaps.emplace_back(spans[e].first,
                                std::min(hi, spans[e].second));
    }
  }
  return out;
}

BiasSweepResult bias_sweep(const std::vector<double>& bias_grid, double flux,
                           const BiasResponseSpec& model, uint64_t seed) {
  BiasSweepResult out;
  out.bias_points.reserve(bias_grid.size());
  for (size_t g = 0; g < bias_grid.size(); ++g) {
    double i = bias_grid[g];
    double eta = 0.0;
    if (i <= model.i_latch)
      eta = std::min(1.0, std::exp((i - model.i_th) / model.s_rise));
    CounterRng rng(seed, Stream::bias_sweep, g);
    double counts = eta > 0.0 ? static_cast<double>(rng.poisson(flux * eta)) : 0.0;
    out.bias_points.emplace_back(i, counts);
  }
  std::sort(out.bias_points.begin(), out.bias_points.end());
  return out;
}

double select_optimal_bias(const BiasSweepResult& sweep) {
  if (sweep.bias_points.empty())
    throw std::invalid_argument("select_optimal_bias: empty sweep");
  size_t best = 0;
  for (size_t i = 1; i < sweep.bias_points.size(); ++i)
    if (sweep.bias_points[i].second > sweep.bias_points[best].second) best = i;
  return sweep.bias_points[best].first;
}

}  // namespace snspd
