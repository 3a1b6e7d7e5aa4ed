#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "snspd/fcnn.hpp"
#include "snspd/features.hpp"
#include "snspd/signal_synth.hpp"

namespace snspd {

struct FilterSpec {
  bool auto_threshold = true;
  double k_sigma = 6.0;
  int fixed_threshold = 512;  // used when auto_threshold is false
  int pre_pad = 400;          // samples
  int post_pad = 400;

  int resolve_threshold(const ReadoutChain& chain) const;
};

struct CalibSpec {
  double bin_width = 10.0;  // ADC codes
  double alpha = 1.0;
  double beta = 1.0;
};

struct DecayExperiment {
  double lifetime = 1e-5;      // s
  double pulse_period = 1e-4;  // s
  int n_cycles = 10000;
  double dark_rate = 8000.0;   // Hz across the window
  double bin_width = 1e-6;     // s
  double window = 5e-5;        // s
  double p_emit = 0.8;

  void validate() const;
};

struct DecayFit {
  double amplitude = 0.0;
  double lifetime_est = 0.0;  // s
  double rms_error = 0.0;     // counts
  std::vector<std::pair<double, double>> histogram;  // (bin center s, counts)
};

struct fit_failure_error : std::runtime_error {
  fit_failure_error(const std::string& msg, double init_amplitude,
                    double init_lifetime)
      : std::runtime_error(msg),
        init_amplitude(init_amplitude),
        init_lifetime(init_lifetime) {}
  double init_amplitude;
  double init_lifetime;
};

struct dataset_integrity_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BuiltDataset {
  LabeledDataset data;                 // all rows, class 0 block then class 1
  std::vector<PulseFeatures> features;
  std::vector<double> raw_max;         // raw ADC maxima (baseline included)
  CalibrationReference ref_a, ref_b;   // per-class, from the training rows
  std::vector<size_t> train_idx, test_idx;  // per-class head split, 80/20
};

// events per class -> render -> threshold filter -> features -> per-class
// calibration references from the training portion -> feature vectors.
// Row r uses substreams (row_jitter, r) and (row_noise, r).
BuiltDataset build_dataset(const ScenarioSpec& scenario, const SnspdParams& params,
                           const ReadoutChain& chain, const SynthSpec& synth,
                           const FilterSpec& filter, const CalibSpec& calib,
                           uint64_t seed, ExecPolicy policy = ExecPolicy::parallel);

LabeledDataset subset(const LabeledDataset& data, const std::vector<size_t>& idx);

struct StudyPoint {
  double delta_nm;
  double accuracy;
};

// For each delta: WavelengthPair(base, base + delta), train, evaluate on the
// held-out split. Sub-seed per delta derived from the master seed.
std::vector<StudyPoint> wavelength_study(
    const std::vector<double>& deltas_nm, int n_per_class,
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, const NetworkArch& arch,
    const Hyper& hyper, uint64_t seed, ExecPolicy policy = ExecPolicy::parallel);

struct PolarizationStudyResult {
  double accuracy;
  EvalResult eval;
  FcnnModel model;
  LabeledDataset test;  // held-out rows, for penultimate-feature export
};

PolarizationStudyResult polarization_study(
    int n_per_class, const SnspdParams& params, const ReadoutChain& chain,
    const SynthSpec& synth, const FilterSpec& filter, const CalibSpec& calib,
    const NetworkArch& arch, const Hyper& hyper, uint64_t seed,
    ExecPolicy policy = ExecPolicy::parallel);

struct EmitterDetection {
  int cycle;
  double t;  // s after the excitation trigger
  EventKind truth;
  std::vector<double> features;  // ready for the classifier
};

// Per cycle: one emission with probability p_emit at Exponential(lifetime)
// delay, plus Poisson dark counts uniform over the window; every detection is
// rendered and carried with its feature vector. The photon-class calibration
// reference must come from build_photon_reference (true class is unknown at
// deployment).
std::vector<EmitterDetection> simulate_emitter(
    const DecayExperiment& exp, const SnspdParams& params,
    const ReadoutChain& chain, const SynthSpec& synth, const FilterSpec& filter,
    const CalibSpec& calib, const CalibrationReference& photon_ref,
    uint64_t seed, ExecPolicy policy = ExecPolicy::parallel);

// Reference histogram from an internal batch of signal-photon renders
// (substreams calib_jitter/calib_noise).
CalibrationReference build_photon_reference(
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, int n_events,
    uint64_t seed, ExecPolicy policy = ExecPolicy::parallel);

// Least-squares A*exp(-t/tau) via Gauss-Newton with log-linear init;
// rms_error over all bins. Needs >= 5 nonzero bins.
DecayFit fit_exponential(const std::vector<std::pair<double, double>>& histogram);

struct EliminationResult {
  DecayFit fit_all, fit_filtered;
  double improvement_ratio = 0.0;  // rms_all / rms_filtered
  std::array<std::array<size_t, 2>, 2> confusion{{{0, 0}, {0, 0}}};  // [truth][pred], dark=0
  std::vector<double> bin_centers;
  std::vector<double> counts_all, counts_filtered;
};

// Core study against an arbitrary classifier (index 1 = keep as photon).
EliminationResult dark_elimination_study_with(
    const DecayExperiment& exp,
    const std::function<int(const EmitterDetection&)>& classify,
    const SnspdParams& params, const ReadoutChain& chain, const SynthSpec& synth,
    const FilterSpec& filter, const CalibSpec& calib, uint64_t seed,
    ExecPolicy policy = ExecPolicy::parallel);

EliminationResult dark_elimination_study(
    const DecayExperiment& exp, const FcnnModel& model, const SnspdParams& params,
    const ReadoutChain& chain, const SynthSpec& synth, const FilterSpec& filter,
    const CalibSpec& calib, uint64_t seed,
    ExecPolicy policy = ExecPolicy::parallel);

}  // namespace snspd
