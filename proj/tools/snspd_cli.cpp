#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "snspd/config.hpp"
#include "snspd/csv.hpp"

namespace {

using namespace snspd;

// Output paths are validated before any computation so a failing run leaves
// no partial file behind.
void check_writable(const std::string& path) {
  if (path.empty()) throw config_error("output path must not be empty");
  std::error_code ec;
  bool existed = std::filesystem::exists(path, ec);
  std::ofstream probe(path, std::ios::binary | std::ios::app);
  if (!probe) throw config_error("cannot write to " + path);
  probe.close();
  if (!existed) std::filesystem::remove(path, ec);
}

void check_readable(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw config_error("cannot open " + path);
}

std::string summary_path(const std::string& out) {
  std::string base = out;
  if (base.size() > 4 && base.compare(base.size() - 4, 4, ".csv") == 0)
    base.resize(base.size() - 4);
  return base + ".summary.json";
}

ScenarioSpec make_scenario(const PipelineConfig& cfg, const std::string& name,
                           double delta_nm, int n_override) {
  ScenarioSpec s;
  s.signal_rate = cfg.scenario.signal_rate_hz;
  s.dark_rate = cfg.scenario.dark_rate_hz;
  s.n_per_class = n_override > 0 ? n_override : cfg.scenario.n_per_class;
  if (name == "darkphoton") {
    s.kind = ScenarioKind::dark_vs_photon;
    s.class_a.is_dark = true;
    s.class_b.wavelength = cfg.synth.signal_wavelength;
  } else if (name == "wavelength") {
    if (!(delta_nm > 0.0))
      throw config_error("dataset: --delta-nm must be > 0 for the wavelength scenario");
    s.kind = ScenarioKind::wavelength_pair;
    s.class_a.wavelength = cfg.synth.signal_wavelength;
    s.class_b.wavelength = cfg.synth.signal_wavelength + delta_nm * 1e-9;
  } else if (name == "polarization") {
    s.kind = ScenarioKind::polarization_pair;
    s.class_a.wavelength = cfg.synth.signal_wavelength;
    s.class_b.wavelength = cfg.synth.signal_wavelength;
    s.class_b.polarization = Polarization::horizontal;
  } else {
    throw config_error("dataset: unknown scenario '" + name +
                       "' (expected darkphoton, wavelength or polarization)");
  }
  return s;
}

nlohmann::json eval_metrics(const EvalResult& r) {
  return {{"accuracy", r.accuracy},
          {"confusion", r.confusion},
          {"precision", r.precision},
          {"recall", r.recall}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SNSPD smart-detection pipeline: pulse simulation, readout "
               "synthesis, feature extraction, classification and studies"};
  app.require_subcommand(0, 1);

  std::string config_path;
  uint64_t seed = 0;
  bool serial = false;
  bool print_config = false;
  app.add_option("--config", config_path, "JSON config file (defaults built in)");
  CLI::Option* seed_opt =
      app.add_option("--seed", seed, "master RNG seed (overrides the config)");
  app.add_flag("--serial", serial, "use the serial reference kernels");
  app.add_flag("--print-config", print_config,
               "print the fully resolved config as JSON and exit");

  auto* sim = app.add_subcommand("simulate", "render a seeded event stream to an ADC trace");
  std::string sim_out, sim_events;
  double sim_duration = 0.0, sim_signal_rate = -1.0, sim_dark_rate = -1.0;
  sim->add_option("--out", sim_out, "trace CSV path")->required();
  sim->add_option("--events", sim_events, "event CSV path");
  sim->add_option("--duration", sim_duration, "trace duration in seconds");
  sim->add_option("--signal-rate", sim_signal_rate, "signal photon rate, Hz");
  sim->add_option("--dark-rate", sim_dark_rate, "dark count rate, Hz");

  auto* swp = app.add_subcommand("sweep-bias", "count-rate sweep over the bias grid");
  std::string swp_out;
  swp->add_option("--out", swp_out, "sweep CSV path");

  auto* dat = app.add_subcommand("dataset", "build a labeled feature dataset");
  std::string dat_scenario = "darkphoton", dat_out, dat_train_out, dat_test_out;
  double dat_delta_nm = 1.0;
  int dat_n = 0;
  dat->add_option("--scenario", dat_scenario,
                  "darkphoton | wavelength | polarization");
  dat->add_option("--delta-nm", dat_delta_nm, "wavelength offset for the second class");
  dat->add_option("--n", dat_n, "events per class (default from config)");
  dat->add_option("--out", dat_out, "feature CSV path")->required();
  dat->add_option("--train-out", dat_train_out, "feature CSV for the training split");
  dat->add_option("--test-out", dat_test_out, "feature CSV for the held-out split");

  auto* trn = app.add_subcommand("train", "train the classifier on a feature CSV");
  std::string trn_dataset, trn_out;
  trn->add_option("--dataset", trn_dataset, "feature CSV path")->required();
  trn->add_option("--out", trn_out, "model JSON path")->required();

  auto* evl = app.add_subcommand("eval", "evaluate a model on a feature CSV");
  std::string evl_model, evl_dataset, evl_out;
  evl->add_option("--model", evl_model, "model JSON path")->required();
  evl->add_option("--dataset", evl_dataset, "feature CSV path")->required();
  evl->add_option("--out", evl_out, "metrics summary JSON path");

  auto* wav = app.add_subcommand("wavelength-study",
                                 "accuracy vs wavelength separation");
  std::string wav_out;
  std::vector<double> wav_deltas;
  int wav_n = 0;
  wav->add_option("--out", wav_out, "study CSV path")->required();
  wav->add_option("--deltas", wav_deltas, "wavelength offsets in nm");
  wav->add_option("--n", wav_n, "events per class (default from config)");

  auto* pol = app.add_subcommand("polarization-study",
                                 "vertical-vs-horizontal classification");
  std::string pol_out;
  int pol_n = 0;
  pol->add_option("--out", pol_out, "penultimate-feature CSV path")->required();
  pol->add_option("--n", pol_n, "events per class (default from config)");

  auto* emt = app.add_subcommand("emitter",
                                 "pulsed-emitter decay with dark-count elimination");
  std::string emt_out, emt_model;
  emt->add_option("--out", emt_out, "histogram CSV path")->required();
  emt->add_option("--model", emt_model,
                  "dark-vs-photon model JSON (trained internally when omitted)");

  auto* exf = app.add_subcommand("export-features",
                                 "export last-hidden-layer activations");
  std::string exf_model, exf_dataset, exf_out;
  exf->add_option("--model", exf_model, "model JSON path")->required();
  exf->add_option("--dataset", exf_dataset, "feature CSV path")->required();
  exf->add_option("--out", exf_out, "feature CSV path")->required();

  for (CLI::App* sub : {sim, swp, dat, trn, evl, wav, pol, emt, exf})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PipelineConfig cfg;
    if (!config_path.empty()) cfg = load_config(config_path);
    if (seed_opt->count() > 0) cfg.seed = seed;
    cfg.validate();
    ExecPolicy policy = serial ? ExecPolicy::serial : ExecPolicy::parallel;
    std::string hash = config_hash(cfg);

    if (print_config) {
      std::cout << to_json(cfg).dump(2) << "\n";
      return 0;
    }

    if (sim->parsed()) {
      check_writable(sim_out);
      if (!sim_events.empty()) check_writable(sim_events);
      ScenarioSpec scen = make_scenario(cfg, "darkphoton", 0.0, 0);
      if (sim_signal_rate >= 0.0) scen.signal_rate = sim_signal_rate;
      if (sim_dark_rate >= 0.0) scen.dark_rate = sim_dark_rate;
      double duration = sim_duration > 0.0 ? sim_duration : cfg.simulate.duration_s;
      EventStream stream =
          generate_event_stream(scen, cfg.synth, duration, cfg.seed);
      StreamRender render =
          render_stream(stream, cfg.physics, cfg.chain, cfg.synth, policy);
      write_trace_csv(render.trace, sim_out);
      if (!sim_events.empty()) write_events_csv(stream, sim_events);
      size_t darks = 0;
      for (const PhotonEvent& e : stream.events)
        if (e.kind == EventKind::dark) ++darks;
      std::cout << "simulate: events " << stream.events.size() << " signal "
                << stream.events.size() - darks << " dark " << darks
                << " samples " << render.trace.codes.size() << " overlaps "
                << render.overlaps.size() << "\n";
      return 0;
    }

    if (swp->parsed()) {
      if (!swp_out.empty()) check_writable(swp_out);
      BiasSweepResult sweep = bias_sweep(cfg.sweep.grid_amps(), cfg.sweep.flux_hz,
                                         cfg.sweep.response(), cfg.seed);
      double best = select_optimal_bias(sweep);
      if (!swp_out.empty()) write_sweep_csv(sweep, swp_out);
      double best_counts = 0.0;
      for (const auto& [b, c] : sweep.bias_points)
        if (b == best) best_counts = c;
      std::cout << "sweep-bias: optimal_ma "
                << format_double(std::round(best * 1e12) / 1e9)
                << " counts_per_s " << format_double(best_counts) << "\n";
      return 0;
    }

    if (dat->parsed()) {
      check_writable(dat_out);
      if (!dat_train_out.empty()) check_writable(dat_train_out);
      if (!dat_test_out.empty()) check_writable(dat_test_out);
      ScenarioSpec scen = make_scenario(cfg, dat_scenario, dat_delta_nm, dat_n);
      BuiltDataset ds = build_dataset(scen, cfg.physics, cfg.chain, cfg.synth,
                                      cfg.filter, cfg.calib, cfg.seed, policy);
      write_features_csv(ds, dat_out);
      if (!dat_train_out.empty()) write_features_csv(ds, ds.train_idx, dat_train_out);
      if (!dat_test_out.empty()) write_features_csv(ds, ds.test_idx, dat_test_out);
      std::cout << "dataset: scenario " << dat_scenario << " rows "
                << ds.data.inputs.size() << " train " << ds.train_idx.size()
                << " test " << ds.test_idx.size() << " dim " << ds.data.dim
                << "\n";
      return 0;
    }

    if (trn->parsed()) {
      check_readable(trn_dataset);
      check_writable(trn_out);
      LabeledDataset ds = read_features_csv(trn_dataset, cfg.physics.i_bias);
      TrainResult result = train(ds, cfg.nn.arch, cfg.nn.hyper, cfg.seed, policy);
      save_model(result.model, trn_out);
      std::cout << "train: rows " << ds.inputs.size() << " epochs "
                << result.epoch_loss.size() << " final_loss "
                << format_double(result.epoch_loss.back()) << " seed "
                << cfg.seed << "\n";
      return 0;
    }

    if (evl->parsed()) {
      check_readable(evl_model);
      check_readable(evl_dataset);
      if (!evl_out.empty()) check_writable(evl_out);
      FcnnModel model = load_model(evl_model);
      LabeledDataset ds = read_features_csv(evl_dataset, cfg.physics.i_bias);
      EvalResult r = evaluate(model, ds, policy);
      if (!evl_out.empty())
        write_summary_json(evl_out, hash, cfg.seed, eval_metrics(r));
      std::cout << "eval: accuracy " << format_double(r.accuracy) << " rows "
                << ds.inputs.size() << " confusion " << r.confusion[0][0] << " "
                << r.confusion[0][1] << " " << r.confusion[1][0] << " "
                << r.confusion[1][1] << "\n";
      return 0;
    }

    if (wav->parsed()) {
      check_writable(wav_out);
      std::vector<double> deltas =
          wav_deltas.empty() ? cfg.scenario.wavelength_deltas_nm : wav_deltas;
      int n = wav_n > 0 ? wav_n : cfg.scenario.study_n_per_class;
      std::vector<StudyPoint> points = wavelength_study(
          deltas, n, cfg.physics, cfg.chain, cfg.synth, cfg.filter, cfg.calib,
          cfg.nn.arch, cfg.nn.hyper, cfg.seed, policy);
      write_study_csv(points, wav_out);
      nlohmann::json acc;
      std::cout << "wavelength-study:";
      for (const StudyPoint& p : points) {
        acc[format_double(p.delta_nm)] = p.accuracy;
        std::cout << " " << format_double(p.delta_nm) << "nm "
                  << format_double(p.accuracy);
      }
      std::cout << "\n";
      write_summary_json(summary_path(wav_out), hash, cfg.seed,
                         {{"n_per_class", n}, {"accuracy_by_delta_nm", acc}});
      return 0;
    }

    if (pol->parsed()) {
      check_writable(pol_out);
      if (cfg.synth.pol_ratio == 1.0)
        std::cerr << "warning: pol_ratio = 1, the two classes are identical\n";
      int n = pol_n > 0 ? pol_n : cfg.scenario.study_n_per_class;
      PolarizationStudyResult r = polarization_study(
          n, cfg.physics, cfg.chain, cfg.synth, cfg.filter, cfg.calib,
          cfg.nn.arch, cfg.nn.hyper, cfg.seed, policy);
      export_penultimate_features(r.model, r.test, pol_out);
      write_summary_json(summary_path(pol_out), hash, cfg.seed,
                         eval_metrics(r.eval));
      std::cout << "polarization-study: accuracy " << format_double(r.accuracy)
                << " n_test " << r.test.inputs.size() << "\n";
      return 0;
    }

    if (emt->parsed()) {
      check_writable(emt_out);
      FcnnModel model;
      if (!emt_model.empty()) {
        check_readable(emt_model);
        model = load_model(emt_model);
      } else {
        ScenarioSpec scen = make_scenario(cfg, "darkphoton", 0.0,
                                          cfg.scenario.study_n_per_class);
        uint64_t sub = mix_seed(cfg.seed, 99);
        BuiltDataset ds = build_dataset(scen, cfg.physics, cfg.chain, cfg.synth,
                                        cfg.filter, cfg.calib, sub, policy);
        LabeledDataset tr = subset(ds.data, ds.train_idx);
        model = train(tr, cfg.nn.arch, cfg.nn.hyper, sub, policy).model;
      }
      EliminationResult r =
          dark_elimination_study(cfg.emitter, model, cfg.physics, cfg.chain,
                                 cfg.synth, cfg.filter, cfg.calib, cfg.seed,
                                 policy);
      write_emitter_csv(r, emt_out);
      write_summary_json(
          summary_path(emt_out), hash, cfg.seed,
          {{"improvement_ratio", r.improvement_ratio},
           {"rms_all", r.fit_all.rms_error},
           {"rms_filtered", r.fit_filtered.rms_error},
           {"lifetime_all_s", r.fit_all.lifetime_est},
           {"lifetime_filtered_s", r.fit_filtered.lifetime_est},
           {"confusion", r.confusion}});
      std::cout << "emitter: improvement_ratio "
                << format_double(r.improvement_ratio) << " lifetime_s "
                << format_double(r.fit_filtered.lifetime_est) << " confusion "
                << r.confusion[0][0] << " " << r.confusion[0][1] << " "
                << r.confusion[1][0] << " " << r.confusion[1][1] << "\n";
      return 0;
    }

    if (exf->parsed()) {
      check_readable(exf_model);
      check_readable(exf_dataset);
      check_writable(exf_out);
      FcnnModel model = load_model(exf_model);
      LabeledDataset ds = read_features_csv(exf_dataset, cfg.physics.i_bias);
      export_penultimate_features(model, ds, exf_out);
      std::cout << "export-features: rows " << ds.inputs.size() << " dim "
                << model.arch.layer_sizes[model.arch.n_layers() - 1] << "\n";
      return 0;
    }

    std::cerr << app.help();
    return 2;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
