#include <omp.h>

#include <vector>

#include "doctest.h"
#include "snspd/experiments.hpp"

using namespace snspd;

namespace {

ScenarioSpec small_pair() {
  ScenarioSpec s;
  s.kind = ScenarioKind::wavelength_pair;
  s.class_a.wavelength = 1535e-9;
  s.class_b.wavelength = 1540e-9;
  s.n_per_class = 130;
  return s;
}

}  // namespace

TEST_SUITE("parallel") {

TEST_CASE("stream render is policy-invariant") {
  SnspdParams params;
  ReadoutChain chain;
  SynthSpec synth;
  ScenarioSpec scen = small_pair();
  EventStream ev = generate_event_stream(scen, synth, 5e-5, 2121);
  StreamRender serial = render_stream(ev, params, chain, synth, ExecPolicy::serial);
  StreamRender parallel =
      render_stream(ev, params, chain, synth, ExecPolicy::parallel);
  CHECK(serial.trace.codes == parallel.trace.codes);
  CHECK(serial.trace.start_index == parallel.trace.start_index);
  CHECK(serial.overlaps == parallel.overlaps);
}

TEST_CASE("dataset construction is policy-invariant") {
  SnspdParams params;
  ReadoutChain chain;
  SynthSpec synth;
  FilterSpec filter;
  CalibSpec calib;
  ScenarioSpec scen = small_pair();
  BuiltDataset serial = build_dataset(scen, params, chain, synth, filter, calib,
                                      808, ExecPolicy::serial);
  BuiltDataset parallel = build_dataset(scen, params, chain, synth, filter,
                                        calib, 808, ExecPolicy::parallel);
  CHECK(serial.data.inputs == parallel.data.inputs);
  CHECK(serial.data.labels == parallel.data.labels);
  CHECK(serial.raw_max == parallel.raw_max);
  CHECK(serial.ref_a.histogram == parallel.ref_a.histogram);
  CHECK(serial.ref_b.histogram == parallel.ref_b.histogram);
  for (size_t i = 0; i < serial.features.size(); ++i) {
    CHECK(serial.features[i].v_max == parallel.features[i].v_max);
    CHECK(serial.features[i].calib_factor == parallel.features[i].calib_factor);
  }

  // Same invariance when OpenMP is told to use several threads.
  int saved = omp_get_max_threads();
  omp_set_num_threads(3);
  BuiltDataset threaded = build_dataset(scen, params, chain, synth, filter,
                                        calib, 808, ExecPolicy::parallel);
  omp_set_num_threads(saved);
  CHECK(threaded.data.inputs == serial.data.inputs);
}

TEST_CASE("training and evaluation are policy-invariant") {
  SnspdParams params;
  ReadoutChain chain;
  SynthSpec synth;
  FilterSpec filter;
  CalibSpec calib;
  BuiltDataset d = build_dataset(small_pair(), params, chain, synth, filter,
                                 calib, 606, ExecPolicy::parallel);
  NetworkArch arch;
  arch.layer_sizes = {130, 16, 2};
  Hyper hyper;
  hyper.epochs = 10;
  auto train_set = subset(d.data, d.train_idx);
  auto test_set = subset(d.data, d.test_idx);

  TrainResult serial = train(train_set, arch, hyper, 42, ExecPolicy::serial);
  TrainResult parallel = train(train_set, arch, hyper, 42, ExecPolicy::parallel);
  for (size_t l = 0; l < serial.model.weights.size(); ++l) {
    CHECK(serial.model.weights[l] == parallel.model.weights[l]);
    CHECK(serial.model.biases[l] == parallel.model.biases[l]);
  }
  CHECK(serial.epoch_loss == parallel.epoch_loss);

  EvalResult es = evaluate(serial.model, test_set, ExecPolicy::serial);
  EvalResult ep = evaluate(serial.model, test_set, ExecPolicy::parallel);
  CHECK(es.accuracy == ep.accuracy);
  CHECK(es.confusion == ep.confusion);
}

TEST_CASE("emitter pipeline is policy-invariant") {
  SnspdParams params;
  ReadoutChain chain;
  SynthSpec synth;
  FilterSpec filter;
  CalibSpec calib;
  DecayExperiment exp;
  exp.n_cycles = 150;
  auto ref_s = build_photon_reference(params, chain, synth, filter, calib, 120,
                                      11, ExecPolicy::serial);
  auto ref_p = build_photon_reference(params, chain, synth, filter, calib, 120,
                                      11, ExecPolicy::parallel);
  CHECK(ref_s.histogram == ref_p.histogram);
  CHECK(ref_s.mode_value == ref_p.mode_value);

  auto det_s = simulate_emitter(exp, params, chain, synth, filter, calib, ref_s,
                                11, ExecPolicy::serial);
  auto det_p = simulate_emitter(exp, params, chain, synth, filter, calib, ref_s,
                                11, ExecPolicy::parallel);
  REQUIRE(det_s.size() == det_p.size());
  for (size_t i = 0; i < det_s.size(); ++i) {
    CHECK(det_s[i].cycle == det_p[i].cycle);
    CHECK(det_s[i].t == det_p[i].t);
    CHECK(det_s[i].features == det_p[i].features);
  }
}

}  // TEST_SUITE
