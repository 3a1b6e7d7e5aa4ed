#include "snspd/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <unordered_map>

namespace snspd {

int FilterSpec::resolve_threshold(const ReadoutChain& chain) const {
  if (!auto_threshold) return fixed_threshold;
  return chain.baseline +
         static_cast<int>(std::lround(k_sigma * chain.noise_sigma));
}

void DecayExperiment::validate() const {
  if (!(lifetime > 0.0) || !(pulse_period > 0.0) || !(bin_width > 0.0) ||
      !(window > 0.0) || n_cycles <= 0)
    throw std::invalid_argument("DecayExperiment: non-positive field");
  if (!(window < pulse_period))
    throw std::invalid_argument("DecayExperiment: window must be < pulse_period");
  if (!(bin_width < window))
    throw std::invalid_argument("DecayExperiment: bin_width must be < window");
  if (dark_rate < 0.0 || p_emit < 0.0 || p_emit > 1.0)
    throw std::invalid_argument("DecayExperiment: bad dark_rate or p_emit");
}

namespace {

// Cache of unamplified pulses keyed by the bit pattern of the effective
// photon energy. Built before the parallel loops and read-only inside them;
// events missing from the cache (dark rows, distinct wavelengths) simulate
// directly.
using PulseCache = std::unordered_map<uint64_t, std::vector<double>>;

uint64_t energy_key(double energy) {
  uint64_t k;
  std::memcpy(&k, &energy, sizeof k);
  return k;
}

struct RowRender {
  std::vector<double> window;  // resampled, scaled by the ADC range
  PulseFeatures feats;
  double raw_max = 0.0;
  bool ok = false;
};

RowRender render_row(const PhotonEvent& ev, const SnspdParams& params,
                     const ReadoutChain& chain, const SynthSpec& synth,
                     int threshold, const FilterSpec& filter, uint64_t seed,
                     Stream jitter_purpose, uint64_t jitter_index,
                     Stream noise_purpose, uint64_t noise_index,
                     const PulseCache& cache) {
  double pol = polarization_factor(ev.polarization, synth);
  double energy = ev.wavelength == 0.0 ? 0.0 : photon_energy(ev) * pol;
  const std::vector<double>* pulse = nullptr;
  std::vector<double> local;
  auto it = cache.find(energy_key(energy));
  if (it != cache.end()) {
    pulse = &it->second;
  } else {
    local = event_pulse_volts(ev, params, chain.sample_rate, synth.pulse_window, pol);
    pulse = &local;
  }

  CounterRng jit(seed, jitter_purpose, jitter_index);
  double amp = (1.0 + synth.jitter_sd * jit.normal_at(0)) * chain.gain;
  CounterRng noise(seed, noise_purpose, noise_index);
  double sigma_v = chain.noise_sigma * chain.full_scale /
                   static_cast<double>(1 << chain.adc_bits);

  AdcTrace trace;
  trace.sample_rate = chain.sample_rate;
  trace.start_index = 0;
  trace.codes.reserve(pulse->size());
  for (size_t k = 0; k < pulse->size(); ++k) {
    double n = sigma_v == 0.0 ? 0.0 : sigma_v * noise.normal_at(k);
    trace.codes.push_back(quantize_code(amp * (*pulse)[k] + n, chain));
  }

  RowRender out;
  auto segments =
      threshold_filter(trace, threshold, filter.pre_pad, filter.post_pad);
  if (segments.empty()) return out;
  // The pulse segment is the one holding the trace-wide maximum.
  size_t best = 0;
  uint16_t best_max = 0;
  for (size_t s = 0; s < segments.size(); ++s) {
    uint16_t m = *std::max_element(segments[s].codes.begin(),
                                   segments[s].codes.end());
    if (m > best_max) {
      best_max = m;
      best = s;
    }
  }
  const PulseSegment& seg = segments[best];
  out.feats = extract_features(seg, chain.baseline);
  out.raw_max = static_cast<double>(best_max);
  PulseFeatures dummy = out.feats;  // calib_factor appended by the caller
  dummy.calib_factor = 0.0;
  auto vec = build_feature_vector(seg, dummy, params.i_bias, 128, chain.adc_bits);
  vec.resize(128);  // keep the resampled window only
  out.window = std::move(vec);
  out.ok = true;
  return out;
}

PhotonEvent class_event(const ClassSpec& cls, const SynthSpec& synth,
                        uint64_t seed, uint64_t row) {
  if (cls.is_dark) {
    CounterRng rng(seed, Stream::dark_wavelength, row);
    return dark_event_sampler(synth, rng);
  }
  PhotonEvent ev;
  ev.wavelength = cls.wavelength;
  ev.polarization = cls.polarization;
  ev.kind = EventKind::signal;
  return ev;
}

PulseCache warm_cache(const ScenarioSpec& scenario, const SnspdParams& params,
                      const ReadoutChain& chain, const SynthSpec& synth) {
  PulseCache cache;
  for (const ClassSpec* cls : {&scenario.class_a, &scenario.class_b}) {
    if (cls->is_dark) continue;  // dark wavelengths differ per row
    PhotonEvent ev;
    ev.wavelength = cls->wavelength;
    ev.polarization = cls->polarization;
    double pol = polarization_factor(ev.polarization, synth);
    double energy = photon_energy(ev) * pol;
    cache.emplace(energy_key(energy),
                  event_pulse_volts(ev, params, chain.sample_rate,
                                    synth.pulse_window, pol));
  }
  return cache;
}

std::string wavelength_name(double wl) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, wl * 1e9);
  (void)ec;
  return std::string(buf, p) + "nm";
}

std::array<std::string, 2> scenario_names(const ScenarioSpec& s) {
  switch (s.kind) {
    case ScenarioKind::dark_vs_photon:
      return {"dark", "photon"};
    case ScenarioKind::wavelength_pair:
      return {wavelength_name(s.class_a.wavelength),
              wavelength_name(s.class_b.wavelength)};
    case ScenarioKind::polarization_pair:
      return {"vertical", "horizontal"};
  }
  return {"class0", "class1"};
}

}  // namespace

BuiltDataset build_dataset(const ScenarioSpec& scenario, const SnspdParams& params,
                           const ReadoutChain& chain, const SynthSpec& synth,
                           const FilterSpec& filter, const CalibSpec& calib,
                           uint64_t seed, ExecPolicy policy) {
  if (scenario.n_per_class < 100)
    throw std::invalid_argument("build_dataset: n_per_class must be >= 100");
  params.validate();
  chain.validate();
  int threshold = filter.resolve_threshold(chain);
  auto n = static_cast<size_t>(scenario.n_per_class);
  size_t total = 2 * n;

  PulseCache cache = warm_cache(scenario, params, chain, synth);

  std::vector<RowRender> rows(total);
  auto run_row = [&](size_t r) {
    const ClassSpec& cls = r < n ? scenario.class_a : scenario.class_b;
    PhotonEvent ev = class_event(cls, synth, seed, r);
    rows[r] = render_row(ev, params, chain, synth, threshold, filter, seed,
                         Stream::row_jitter, r, Stream::row_noise, r, cache);
  };
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (size_t r = 0; r < total; ++r) run_row(r);
  } else {
    for (size_t r = 0; r < total; ++r) run_row(r);
  }

  size_t failed = 0;
  for (const auto& row : rows)
    if (!row.ok) ++failed;
  if (failed > 0)
    throw dataset_integrity_error(
        "build_dataset: threshold filter found no pulse segment for " +
        std::to_string(failed) + " of " + std::to_string(total) + " rows");

  BuiltDataset out;
  auto n_train = static_cast<size_t>(0.8 * static_cast<double>(n));
  for (size_t c = 0; c < 2; ++c) {
    size_t base = c * n;
    for (size_t i = 0; i < n; ++i)
      (i < n_train ? out.train_idx : out.test_idx).push_back(base + i);
  }

  std::vector<double> max_a, max_b;
  max_a.reserve(n_train);
  max_b.reserve(n_train);
  for (size_t i = 0; i < n_train; ++i) {
    max_a.push_back(rows[i].raw_max);
    max_b.push_back(rows[n + i].raw_max);
  }
  out.ref_a = histogram_mode(max_a, calib.bin_width);
  out.ref_b = histogram_mode(max_b, calib.bin_width);

  out.data.dim = 130;
  out.data.class_names = scenario_names(scenario);
  out.data.inputs.reserve(total);
  out.data.labels.reserve(total);
  out.features.reserve(total);
  out.raw_max.reserve(total);
  for (size_t r = 0; r < total; ++r) {
    const auto& ref = r < n ? out.ref_a : out.ref_b;
    PulseFeatures f = rows[r].feats;
    f.calib_factor =
        calibration_factor(rows[r].raw_max, ref, calib.alpha, calib.beta);
    out.features.push_back(f);
    out.raw_max.push_back(rows[r].raw_max);
    std::vector<double> vec = rows[r].window;
    vec.push_back(f.calib_factor);
    vec.push_back(params.i_bias / 1e-4);
    out.data.inputs.push_back(std::move(vec));
    out.data.labels.push_back(r < n ? 0 : 1);
  }
  return out;
}

LabeledDataset subset(const LabeledDataset& data, const std::vector<size_t>& idx) {
  LabeledDataset out;
  out.dim = data.dim;
  out.class_names = data.class_names;
  out.inputs.reserve(idx.size());
  out.labels.reserve(idx.size());
  for (size_t i : idx) {
    out.inputs.push_back(data.inputs[i]);
    out.labels.push_back(data.labels[i]);
  }
  return out;
}

std::vector<StudyPoint> wavelength_study(
    const std::vector<double>& deltas_nm, int n_per_class,
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, const NetworkArch& arch,
    const Hyper& hyper, uint64_t seed, ExecPolicy policy) {
  for (double d : deltas_nm)
    if (!(d > 0.0))
      throw std::invalid_argument("wavelength_study: deltas must be > 0");
  std::vector<StudyPoint> out;
  out.reserve(deltas_nm.size());
  for (size_t k = 0; k < deltas_nm.size(); ++k) {
    uint64_t sub = mix_seed(seed, k);
    ScenarioSpec sc;
    sc.kind = ScenarioKind::wavelength_pair;
    sc.class_a = ClassSpec{synth.signal_wavelength, Polarization::vertical, false};
    sc.class_b = ClassSpec{synth.signal_wavelength + deltas_nm[k] * 1e-9,
                           Polarization::vertical, false};
    sc.n_per_class = n_per_class;
    BuiltDataset ds = build_dataset(sc, params, chain, synth, filter, calib,
                                    sub, policy);
    auto trained = train(subset(ds.data, ds.train_idx), arch, hyper, sub, policy);
    auto ev = evaluate(trained.model, subset(ds.data, ds.test_idx), policy);
    out.push_back(StudyPoint{deltas_nm[k], ev.accuracy});
  }
  return out;
}

PolarizationStudyResult polarization_study(
    int n_per_class, const SnspdParams& params, const ReadoutChain& chain,
    const SynthSpec& synth, const FilterSpec& filter, const CalibSpec& calib,
    const NetworkArch& arch, const Hyper& hyper, uint64_t seed,
    ExecPolicy policy) {
  ScenarioSpec sc;
  sc.kind = ScenarioKind::polarization_pair;
  sc.class_a = ClassSpec{synth.signal_wavelength, Polarization::vertical, false};
  sc.class_b = ClassSpec{synth.signal_wavelength, Polarization::horizontal, false};
  sc.n_per_class = n_per_class;
  BuiltDataset ds =
      build_dataset(sc, params, chain, synth, filter, calib, seed, policy);
  auto trained = train(subset(ds.data, ds.train_idx), arch, hyper, seed, policy);
  PolarizationStudyResult out;
  out.test = subset(ds.data, ds.test_idx);
  out.eval = evaluate(trained.model, out.test, policy);
  out.accuracy = out.eval.accuracy;
  out.model = std::move(trained.model);
  return out;
}

CalibrationReference build_photon_reference(
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, int n_events,
    uint64_t seed, ExecPolicy policy) {
  int threshold = filter.resolve_threshold(chain);
  PhotonEvent proto;
  proto.wavelength = synth.signal_wavelength;
  PulseCache cache;
  cache.emplace(energy_key(photon_energy(proto)),
                event_pulse_volts(proto, params, chain.sample_rate,
                                  synth.pulse_window, 1.0));
  auto n = static_cast<size_t>(n_events);
  std::vector<double> maxima(n, 0.0);
  std::vector<char> ok(n, 0);
  auto run = [&](size_t i) {
    RowRender rr = render_row(proto, params, chain, synth, threshold, filter,
                              seed, Stream::calib_jitter, i,
                              Stream::calib_noise, i, cache);
    maxima[i] = rr.raw_max;
    ok[i] = rr.ok ? 1 : 0;
  };
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (size_t i = 0; i < n; ++i) run(i);
  } else {
    for (size_t i = 0; i < n; ++i) run(i);
  }
  for (char o : ok)
    if (!o)
      throw dataset_integrity_error(
          "build_photon_reference: filter missed a calibration pulse");
  return histogram_mode(maxima, calib.bin_width);
}

std::vector<EmitterDetection> simulate_emitter(
    const DecayExperiment& exp, const SnspdParams& params,
    const ReadoutChain& chain, const SynthSpec& synth, const FilterSpec& filter,
    const CalibSpec& calib, const CalibrationReference& photon_ref,
    uint64_t seed, ExecPolicy policy) {
  exp.validate();
  int threshold = filter.resolve_threshold(chain);

  struct Raw {
    int cycle;
    double t;
    PhotonEvent ev;
  };
  std::vector<Raw> raws;
  raws.reserve(static_cast<size_t>(
      exp.n_cycles * (exp.p_emit + exp.dark_rate * exp.window) * 1.2 + 64));
  for (int c = 0; c < exp.n_cycles; ++c) {
    CounterRng rng(seed, Stream::emitter_cycle, static_cast<uint64_t>(c));
    if (rng.uniform() < exp.p_emit) {
      double delay = exp.lifetime * rng.exponential();
      if (delay < exp.window) {
        PhotonEvent ev;
        ev.wavelength = synth.signal_wavelength;
        ev.kind = EventKind::signal;
        raws.push_back(Raw{c, delay, ev});
      }
    }
    uint64_t nd = rng.poisson(exp.dark_rate * exp.window);
    for (uint64_t k = 0; k < nd; ++k) {
      double t = exp.window * rng.uniform();
      PhotonEvent ev = dark_event_sampler(synth, rng);
      raws.push_back(Raw{c, t, ev});
    }
  }

  PulseCache cache;
  {
    PhotonEvent proto;
    proto.wavelength = synth.signal_wavelength;
    cache.emplace(energy_key(photon_energy(proto)),
                  event_pulse_volts(proto, params, chain.sample_rate,
                                    synth.pulse_window, 1.0));
  }

  std::vector<EmitterDetection> out(raws.size());
  auto run = [&](size_t d) {
    RowRender rr = render_row(raws[d].ev, params, chain, synth, threshold,
                              filter, seed, Stream::det_jitter, d,
                              Stream::det_noise, d, cache);
    EmitterDetection det;
    det.cycle = raws[d].cycle;
    det.t = raws[d].t;
    det.truth = raws[d].ev.kind;
    if (rr.ok) {
      double cf = calibration_factor(rr.raw_max, photon_ref, calib.alpha,
                                     calib.beta);
      det.features = std::move(rr.window);
      det.features.push_back(cf);
      det.features.push_back(params.i_bias / 1e-4);
    }
    out[d] = std::move(det);
  };
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (size_t d = 0; d < out.size(); ++d) run(d);
  } else {
    for (size_t d = 0; d < out.size(); ++d) run(d);
  }
  for (const auto& det : out)
    if (det.features.empty())
      throw dataset_integrity_error(
          "simulate_emitter: filter missed a detection");
  return out;
}

DecayFit fit_exponential(const std::vector<std::pair<double, double>>& histogram) {
  size_t nonzero = 0;
  for (const auto& [t, y] : histogram)
    if (y != 0.0) ++nonzero;
  if (nonzero < 5)
    throw std::invalid_argument("fit_exponential: need >= 5 nonzero bins");

  // log-linear least squares on the positive bins for the initializer
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t np = 0;
  for (const auto& [t, y] : histogram) {
    if (y > 0.0) {
      double ly = std::log(y);
      sx += t;
      sy += ly;
      sxx += t * t;
      sxy += t * ly;
      ++np;
    }
  }
  double denom = np * sxx - sx * sx;
  double slope = denom != 0.0 ? (np * sxy - sx * sy) / denom : 0.0;
  double icept = (sy - slope * sx) / static_cast<double>(np);
  double span = histogram.back().first - histogram.front().first;
  double tau0 = slope < 0.0 ? -1.0 / slope : span;
  double a0 = std::exp(icept);

  auto sse = [&](double a, double tau) {
    double s = 0.0;
    for (const auto& [t, y] : histogram) {
      double r = y - a * std::exp(-t / tau);
      s += r * r;
    }
    return s;
  };

  double a = a0, tau = tau0;
  bool converged = false;
  for (int iter = 0; iter < 100 && !converged; ++iter) {
    double h00 = 0, h01 = 0, h11 = 0, g0 = 0, g1 = 0;
    for (const auto& [t, y] : histogram) {
      double e = std::exp(-t / tau);
      double r = y - a * e;
      double j0 = e;
      double j1 = a * e * t / (tau * tau);
      h00 += j0 * j0;
      h01 += j0 * j1;
      h11 += j1 * j1;
      g0 += j0 * r;
      g1 += j1 * r;
    }
    double det = h00 * h11 - h01 * h01;
    if (det == 0.0) break;
    double da = (h11 * g0 - h01 * g1) / det;
    double dtau = (h00 * g1 - h01 * g0) / det;

    double base = sse(a, tau);
    double s = 1.0;
    bool improved = false;
    for (int halve = 0; halve < 30; ++halve, s *= 0.5) {
      double a2 = a + s * da;
      double tau2 = tau + s * dtau;
      if (tau2 <= 0.0) continue;
      if (sse(a2, tau2) < base) {
        if (std::abs(s * da) <= 1e-12 * std::max(1.0, std::abs(a)) &&
            std::abs(s * dtau) <= 1e-12 * tau)
          converged = true;
        a = a2;
        tau = tau2;
        improved = true;
        break;
      }
    }
    if (!improved) converged = true;  // no descent direction left
  }
  if (!converged)
    throw fit_failure_error(
        "fit_exponential: no convergence after 100 iterations", a0, tau0);

  DecayFit fit;
  fit.amplitude = a;
  fit.lifetime_est = tau;
  fit.histogram = histogram;
  fit.rms_error = std::sqrt(sse(a, tau) / static_cast<double>(histogram.size()));
  return fit;
}

EliminationResult dark_elimination_study_with(
    const DecayExperiment& exp,
    const std::function<int(const EmitterDetection&)>& classify,
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, uint64_t seed,
    ExecPolicy policy) {
  auto photon_ref = build_photon_reference(params, chain, synth, filter, calib,
                                           500, seed, policy);
  auto detections = simulate_emitter(exp, params, chain, synth, filter, calib,
                                     photon_ref, seed, policy);

  std::vector<int> pred(detections.size());
  if (policy == ExecPolicy::parallel) {
#pragma omp parallel for schedule(static)
    for (size_t d = 0; d < detections.size(); ++d)
      pred[d] = classify(detections[d]);
  } else {
    for (size_t d = 0; d < detections.size(); ++d)
      pred[d] = classify(detections[d]);
  }

  auto nb = static_cast<size_t>(std::llround(exp.window / exp.bin_width));
  EliminationResult out;
  out.bin_centers.resize(nb);
  for (size_t b = 0; b < nb; ++b)
    out.bin_centers[b] = (static_cast<double>(b) + 0.5) * exp.bin_width;
  out.counts_all.assign(nb, 0.0);
  out.counts_filtered.assign(nb, 0.0);
  for (size_t d = 0; d < detections.size(); ++d) {
    auto b = static_cast<size_t>(detections[d].t / exp.bin_width);
    if (b >= nb) b = nb - 1;
    out.counts_all[b] += 1.0;
    if (pred[d] == 1) out.counts_filtered[b] += 1.0;
    int truth = detections[d].truth == EventKind::dark ? 0 : 1;
    out.confusion[static_cast<size_t>(truth)][static_cast<size_t>(pred[d])] += 1;
  }

  std::vector<std::pair<double, double>> hist_all(nb), hist_filt(nb);
  for (size_t b = 0; b < nb; ++b) {
    hist_all[b] = {out.bin_centers[b], out.counts_all[b]};
    hist_filt[b] = {out.bin_centers[b], out.counts_filtered[b]};
  }
  out.fit_all = fit_exponential(hist_all);
  out.fit_filtered = fit_exponential(hist_filt);
  out.improvement_ratio = out.fit_all.rms_error / out.fit_filtered.rms_error;
  return out;
}

EliminationResult dark_elimination_study(
    const DecayExperiment& exp, const FcnnModel& model, const SnspdParams& params,
    const ReadoutChain& chain, const SynthSpec& synth, const FilterSpec& filter,
    const CalibSpec& calib, uint64_t seed, ExecPolicy policy) {
  return dark_elimination_study_with(
      exp,
      [&model](const EmitterDetection& det) {
        return predict(model, det.features).cls;
      },
      params, chain, synth, filter, calib, seed, policy);
}

}  // namespace snspd
