#include "snspd/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

namespace snspd {

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw csv_error("cannot open " + path + " for writing");
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
  f.flush();
  if (!f) {
    std::remove(path.c_str());
    throw csv_error("write failed: " + path);
  }
}

void write_trace_csv(const AdcTrace& trace, const std::string& path) {
  std::string out;
  out.reserve(trace.codes.size() * 16 + 16);
  out += "t_ns,adc_code\n";
  char buf[48];
  for (size_t k = 0; k < trace.codes.size(); ++k) {
    double t_ns = 1e9 * static_cast<double>(trace.start_index + static_cast<int64_t>(k)) /
                  trace.sample_rate;
    int n = std::snprintf(buf, sizeof buf, "%.3f,%u\n", t_ns,
                          static_cast<unsigned>(trace.codes[k]));
    out.append(buf, static_cast<size_t>(n));
  }
  write_file(path, out);
}

void write_events_csv(const EventStream& stream, const std::string& path) {
  std::string out = "event_id,arrival_s,kind,wavelength_nm,polarization\n";
  for (size_t i = 0; i < stream.events.size(); ++i) {
    const PhotonEvent& e = stream.events[i];
    out += std::to_string(i);
    out += ',';
    out += format_double(e.arrival);
    out += ',';
    out += e.kind == EventKind::dark ? "dark" : "signal";
    out += ',';
    out += format_double(e.wavelength * 1e9);
    out += ',';
    out += e.polarization == Polarization::horizontal ? "horizontal" : "vertical";
    out += '\n';
  }
  write_file(path, out);
}

namespace {

std::string features_header() {
  std::string h = "event_id,label,v_max,fwhm_ns,rise_ns,fall_ns,calib_factor";
  for (int w = 0; w < 128; ++w) {
    h += ",w";
    h += std::to_string(w);
  }
  return h;
}

}  // namespace

void write_features_csv(const BuiltDataset& ds, const std::vector<size_t>& rows,
                        const std::string& path) {
  std::string out = features_header();
  out += '\n';
  for (size_t r : rows) {
    const PulseFeatures& f = ds.features.at(r);
    out += std::to_string(r);
    out += ',';
    out += std::to_string(ds.data.labels.at(r));
    out += ',';
    out += format_double(f.v_max);
    out += ',';
    out += format_double(f.fwhm * 1e9);
    out += ',';
    out += format_double(f.rise_time * 1e9);
    out += ',';
    out += format_double(f.fall_time * 1e9);
    out += ',';
    out += format_double(f.calib_factor);
    const std::vector<double>& x = ds.data.inputs.at(r);
    for (int w = 0; w < 128; ++w) {
      out += ',';
      out += format_double(x[static_cast<size_t>(w)]);
    }
    out += '\n';
  }
  write_file(path, out);
}

void write_features_csv(const BuiltDataset& ds, const std::string& path) {
  std::vector<size_t> rows(ds.data.inputs.size());
  std::iota(rows.begin(), rows.end(), size_t{0});
  write_features_csv(ds, rows, path);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  size_t pos = 0;
  while (true) {
    size_t comma = line.find(',', pos);
    if (comma == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

double parse_double(const std::string& field, const std::string& path, size_t lineno) {
  double v = 0.0;
  auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw csv_error(path + ":" + std::to_string(lineno) + ": bad number '" + field + "'");
  return v;
}

}  // namespace

LabeledDataset read_features_csv(const std::string& path, double bias_a) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw csv_error("cannot open " + path);
  std::string line;
  if (!std::getline(f, line)) throw csv_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != features_header())
    throw csv_error(path + ": unexpected header '" + line + "'");

  LabeledDataset ds;
  ds.dim = 130;
  size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (fields.size() != 135)
      throw csv_error(path + ":" + std::to_string(lineno) + ": expected 135 fields, got " +
                      std::to_string(fields.size()));
    int label = static_cast<int>(parse_double(fields[1], path, lineno));
    if (label != 0 && label != 1)
      throw csv_error(path + ":" + std::to_string(lineno) + ": label must be 0 or 1");
    std::vector<double> x;
    x.reserve(130);
    for (size_t w = 0; w < 128; ++w) x.push_back(parse_double(fields[7 + w], path, lineno));
    x.push_back(parse_double(fields[6], path, lineno));  // calib_factor
    x.push_back(bias_a / 1e-4);
    ds.inputs.push_back(std::move(x));
    ds.labels.push_back(label);
  }
  if (ds.inputs.empty()) throw csv_error(path + ": no data rows");
  return ds;
}

void write_sweep_csv(const BiasSweepResult& sweep, const std::string& path) {
  std::string out = "i_bias_ma,counts_per_s\n";
  for (const auto& [bias_a, counts] : sweep.bias_points) {
    out += format_double(std::round(bias_a * 1e12) / 1e9);
    out += ',';
    out += format_double(counts);
    out += '\n';
  }
  write_file(path, out);
}

void write_study_csv(const std::vector<StudyPoint>& points, const std::string& path) {
  std::string out = "delta_nm,accuracy\n";
  for (const StudyPoint& p : points) {
    out += format_double(p.delta_nm);
    out += ',';
    out += format_double(p.accuracy);
    out += '\n';
  }
  write_file(path, out);
}

void write_emitter_csv(const EliminationResult& result, const std::string& path) {
  std::string out = "bin_center_s,counts_all,counts_filtered,fit_all,fit_filtered\n";
  for (size_t i = 0; i < result.bin_centers.size(); ++i) {
    double t = result.bin_centers[i];
    double fa = result.fit_all.amplitude * std::exp(-t / result.fit_all.lifetime_est);
    double ff =
        result.fit_filtered.amplitude * std::exp(-t / result.fit_filtered.lifetime_est);
    out += format_double(t);
    out += ',';
    out += format_double(result.counts_all[i]);
    out += ',';
    out += format_double(result.counts_filtered[i]);
    out += ',';
    out += format_double(fa);
    out += ',';
    out += format_double(ff);
    out += '\n';
  }
  write_file(path, out);
}

void write_summary_json(const std::string& path, const std::string& config_hash,
                        uint64_t seed, const nlohmann::json& metrics) {
  nlohmann::json j;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["metrics"] = metrics;
  write_file(path, j.dump(2) + "\n");
}

}  // namespace snspd
