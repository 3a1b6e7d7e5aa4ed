// Timing harness comparing the serial reference kernels against the
// OpenMP-parallel implementations. Both paths are bitwise-identical by
// construction (see tests/test_parallel.cpp); this binary reports speed.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include "snspd/experiments.hpp"

using namespace snspd;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn) {
  auto t0 = clock_type::now();
  fn();
  auto t1 = clock_type::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void report(const std::string& name, double serial_ms, double parallel_ms) {
  std::printf("%-28s %10.1f ms %10.1f ms %8.2fx\n", name.c_str(), serial_ms,
              parallel_ms, serial_ms / parallel_ms);
}

}  // namespace

int main() {
  SnspdParams params;
  ReadoutChain chain;
  SynthSpec synth;
  FilterSpec filter;
  CalibSpec calib;

  std::printf("OpenMP max threads: %d\n\n", omp_get_max_threads());
  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial", "parallel",
              "speedup");

  {
    ScenarioSpec scen;
    scen.kind = ScenarioKind::dark_vs_photon;
    scen.class_a.is_dark = true;
    scen.signal_rate = 50000.0;
    EventStream ev = generate_event_stream(scen, synth, 2e-4, 1);
    StreamRender sink;
    double s = time_ms([&] {
      sink = render_stream(ev, params, chain, synth, ExecPolicy::serial);
    });
    double p = time_ms([&] {
      sink = render_stream(ev, params, chain, synth, ExecPolicy::parallel);
    });
    report("stream render (800k samp)", s, p);
  }

  ScenarioSpec scen;
  scen.kind = ScenarioKind::wavelength_pair;
  scen.class_a.wavelength = 1535e-9;
  scen.class_b.wavelength = 1540e-9;
  scen.n_per_class = 400;
  BuiltDataset data;
  {
    double s = time_ms([&] {
      data = build_dataset(scen, params, chain, synth, filter, calib, 2,
                           ExecPolicy::serial);
    });
    double p = time_ms([&] {
      data = build_dataset(scen, params, chain, synth, filter, calib, 2,
                           ExecPolicy::parallel);
    });
    report("dataset build (800 rows)", s, p);
  }

  {
    NetworkArch arch;  // default [130,128,64,32,2]
    Hyper hyper;
    hyper.epochs = 10;
    auto train_set = subset(data.data, data.train_idx);
    TrainResult r;
    double s = time_ms(
        [&] { r = train(train_set, arch, hyper, 3, ExecPolicy::serial); });
    double p = time_ms(
        [&] { r = train(train_set, arch, hyper, 3, ExecPolicy::parallel); });
    report("fcnn train (10 epochs)", s, p);

    auto test_set = subset(data.data, data.test_idx);
    EvalResult e;
    double es = time_ms([&] {
      for (int i = 0; i < 50; ++i)
        e = evaluate(r.model, test_set, ExecPolicy::serial);
    });
    double ep = time_ms([&] {
      for (int i = 0; i < 50; ++i)
        e = evaluate(r.model, test_set, ExecPolicy::parallel);
    });
    report("fcnn evaluate (x50)", es, ep);
  }

  return 0;
}
