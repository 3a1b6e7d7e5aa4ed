#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "snspd/experiments.hpp"

namespace snspd {

struct csv_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form (std::to_chars).
std::string format_double(double v);

// Writes the whole document atomically: nothing is left behind on failure.
void write_file(const std::string& path, const std::string& content);

// header t_ns,adc_code; t_ns with 3 decimals; LF line endings
void write_trace_csv(const AdcTrace& trace, const std::string& path);

// header event_id,arrival_s,kind,wavelength_nm,polarization
void write_events_csv(const EventStream& stream, const std::string& path);

// header event_id,label,v_max,fwhm_ns,rise_ns,fall_ns,calib_factor,w0..w127
void write_features_csv(const BuiltDataset& ds, const std::vector<size_t>& rows,
                        const std::string& path);
void write_features_csv(const BuiltDataset& ds, const std::string& path);

// Inverse of write_features_csv. The per-event bias feature is not a file
// column; it is reconstructed from bias_a (amperes).
LabeledDataset read_features_csv(const std::string& path, double bias_a);

// header i_bias_ma,counts_per_s
void write_sweep_csv(const BiasSweepResult& sweep, const std::string& path);

// header delta_nm,accuracy
void write_study_csv(const std::vector<StudyPoint>& points, const std::string& path);

// header bin_center_s,counts_all,counts_filtered,fit_all,fit_filtered
void write_emitter_csv(const EliminationResult& result, const std::string& path);

void write_summary_json(const std::string& path, const std::string& config_hash,
                        uint64_t seed, const nlohmann::json& metrics);

}  // namespace snspd
