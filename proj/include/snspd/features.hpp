#pragma once

#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "snspd/signal_synth.hpp"

namespace snspd {

struct PulseSegment {
  int64_t start_index = 0;  // absolute sample index of codes[0]
  std::vector<uint16_t> codes;
  double sample_rate = 4e9;
};

struct PulseFeatures {
  double v_max = 0.0;      // ADC codes above baseline
  double fwhm = 0.0;       // s
  double rise_time = 0.0;  // s, 10% -> 90% of max above baseline
  double fall_time = 0.0;  // s, 90% -> 10%
  double calib_factor = 0.0;
};

struct CalibrationReference {
  double bin_width = 10.0;       // ADC codes
  double mode_value = 0.0;       // center of the most probable bin
  double mode_probability = 0.0;
  std::vector<std::pair<double, double>> histogram;  // (bin center, probability)
};

struct truncated_pulse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct insufficient_data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maximal runs of samples >= threshold, extended by the pads and merged when
// the padded windows touch. Ordered by start index.
std::vector<PulseSegment> threshold_filter(const AdcTrace& trace, int threshold,
                                           int pre_pad, int post_pad);

// True when the threshold sits below the 99.9th percentile of pulse-free
// noise, i.e. the filter would fire on baseline fluctuations.
bool threshold_fires_on_noise(int threshold, const ReadoutChain& chain);

// v_max = max - baseline; FWHM / rise / fall by linear interpolation between
// samples, scanning outward from the peak. Throws truncated_pulse_error when
// a flank never crosses the needed level inside the segment.
PulseFeatures extract_features(const PulseSegment& segment, int baseline);

// Normalized histogram of pulse maxima with bins centered on multiples of
// bin_width; mode ties break toward the lower bin. Needs >= 100 samples.
// Calibration histograms are built on raw ADC maxima (baseline included):
// the reference anchors are raw codes.
CalibrationReference histogram_mode(const std::vector<double>& maxima,
                                    double bin_width);

// factor = alpha * p(v_max) + beta * (v_max - mode)/mode. v_max outside the
// histogram support uses p = 0; *outside_support reports that branch.
double calibration_factor(double v_max, const CalibrationReference& reference,
                          double alpha, double beta,
                          bool* outside_support = nullptr);

// Peak-aligned linear resample of the segment to window_len points scaled by
// the full ADC range, followed by [calib_factor, i_bias / 0.1 mA].
std::vector<double> build_feature_vector(const PulseSegment& segment,
                                         const PulseFeatures& features,
                                         double bias_a, int window_len,
                                         int adc_bits);

// -ln(sum sqrt(p q)) over a common binning; separation statistic between two
// sets of pulse maxima. Shrinks toward 0 as the histograms overlap more.
double bhattacharyya_distance(const std::vector<double>& a,
                              const std::vector<double>& b, double bin_width);

}  // namespace snspd
