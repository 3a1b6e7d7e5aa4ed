#include "snspd/features.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace snspd {

std::vector<PulseSegment> threshold_filter(const AdcTrace& trace, int threshold,
                                           int pre_pad, int post_pad) {
  if (pre_pad < 0 || post_pad < 0)
    throw std::invalid_argument("threshold_filter: pads must be >= 0");
  auto n = static_cast<int64_t>(trace.codes.size());
  std::vector<std::pair<int64_t, int64_t>> windows;  // [start, end)
  int64_t i = 0;
  while (i < n) {
    if (trace.codes[static_cast<size_t>(i)] >= threshold) {
      int64_t j = i;
      while (j < n && trace.codes[static_cast<size_t>(j)] >= threshold) ++j;
      int64_t lo = std::max<int64_t>(0, i - pre_pad);
      int64_t hi = std::min<int64_t>(n, j + post_pad);
      if (!windows.empty() && lo <= windows.back().second)
        windows.back().second = std::max(windows.back().second, hi);
      else
        windows.emplace_back(lo, hi);
      i = j;
    } else {
      ++i;
    }
  }
  std::vector<PulseSegment> out;
  out.reserve(windows.size());
  for (auto [lo, hi] : windows) {
    PulseSegment seg;
    seg.start_index = trace.start_index + lo;
    seg.sample_rate = trace.sample_rate;
    seg.codes.assign(trace.codes.begin() + lo, trace.codes.begin() + hi);
    out.push_back(std::move(seg));
  }
  return out;
}

bool threshold_fires_on_noise(int threshold, const ReadoutChain& chain) {
  // 99.9th percentile of Normal(baseline, noise_sigma).
  return threshold < chain.baseline + 3.0902 * chain.noise_sigma;
}

namespace {

// Interpolated crossing time (in samples, relative to segment start) of
// `level` on one flank, scanning outward from the peak. dir = -1 left, +1
// right.
double flank_crossing(const std::vector<uint16_t>& c, size_t peak, double level,
                      int dir) {
  auto n = static_cast<int64_t>(c.size());
  int64_t i = static_cast<int64_t>(peak);
  while (true) {
    int64_t j = i + dir;
    if (j < 0 || j >= n)
      throw truncated_pulse_error(
          "extract_features: flank never crosses level inside segment");
    double ci = c[static_cast<size_t>(i)];
    double cj = c[static_cast<size_t>(j)];
    if (cj < level) {
      // level sits between samples i and j
      double frac = ci == cj ? 0.0 : (ci - level) / (ci - cj);
      return static_cast<double>(i) + dir * frac;
    }
    i = j;
  }
}

}  // namespace

PulseFeatures extract_features(const PulseSegment& segment, int baseline) {
  if (segment.codes.empty())
    throw std::invalid_argument("extract_features: empty segment");
  size_t peak = 0;
  for (size_t i = 1; i < segment.codes.size(); ++i)
    if (segment.codes[i] > segment.codes[peak]) peak = i;
  double v_max = static_cast<double>(segment.codes[peak]) - baseline;
  if (!(v_max > 0.0))
    throw std::invalid_argument("extract_features: segment max not above baseline");

  double dt = 1.0 / segment.sample_rate;
  auto level = [&](double frac) { return baseline + frac * v_max; };

  double half_l = flank_crossing(segment.codes, peak, level(0.5), -1);
  double half_r = flank_crossing(segment.codes, peak, level(0.5), +1);
  double p90_l = flank_crossing(segment.codes, peak, level(0.9), -1);
  double p10_l = flank_crossing(segment.codes, peak, level(0.1), -1);
  double p90_r = flank_crossing(segment.codes, peak, level(0.9), +1);
  double p10_r = flank_crossing(segment.codes, peak, level(0.1), +1);

  PulseFeatures f;
  f.v_max = v_max;
  f.fwhm = (half_r - half_l) * dt;
  f.rise_time = (p90_l - p10_l) * dt;
  f.fall_time = (p10_r - p90_r) * dt;
  return f;
}

namespace {

inline int64_t bin_of(double x, double w) {
  return static_cast<int64_t>(std::floor((x + 0.5 * w) / w));
}

}  // namespace

CalibrationReference histogram_mode(const std::vector<double>& maxima,
                                    double bin_width) {
  if (maxima.size() < 100)
    throw insufficient_data_error("histogram_mode: need >= 100 samples");
  if (!(bin_width >= 1.0))
    throw std::invalid_argument("histogram_mode: bin_width must be >= 1");
  std::map<int64_t, size_t> counts;
  for (double x : maxima) ++counts[bin_of(x, bin_width)];

  CalibrationReference ref;
  ref.bin_width = bin_width;
  double n = static_cast<double>(maxima.size());
  size_t best = 0;
  for (const auto& [bin, c] : counts) {
    double center = static_cast<double>(bin) * bin_width;
    ref.histogram.emplace_back(center, static_cast<double>(c) / n);
    if (c > best) {  // strict: ties keep the lower bin (map is ordered)
      best = c;
      ref.mode_value = center;
      ref.mode_probability = static_cast<double>(c) / n;
    }
  }
  return ref;
}

double calibration_factor(double v_max, const CalibrationReference& reference,
                          double alpha, double beta, bool* outside_support) {
  int64_t bin = bin_of(v_max, reference.bin_width);
  double center = static_cast<double>(bin) * reference.bin_width;
  double p = 0.0;
  bool found = false;
  for (const auto& [c, prob] : reference.histogram) {
    if (c == center) {
      p = prob;
      found = true;
      break;
    }
  }
  if (outside_support) *outside_support = !found;
  return alpha * p + beta * (v_max - reference.mode_value) / reference.mode_value;
}

std::vector<double> build_feature_vector(const PulseSegment& segment,
                                         const PulseFeatures& features,
                                         double bias_a, int window_len,
                                         int adc_bits) {
  if (window_len < 2)
    throw std::invalid_argument("build_feature_vector: window_len must be >= 2");
  double top = static_cast<double>((1 << adc_bits) - 1);
  std::vector<double> out;
  out.reserve(static_cast<size_t>(window_len) + 2);
  auto n = segment.codes.size();
  // Peak-aligned resample. The pulse peak has to land at a stable window
  // index across events; otherwise segment-length noise (the tail's
  // threshold crossing wanders by whole samples) smears every slot and
  // buries code-level amplitude differences. The anchor is the
  // half-maximum crossing of the rising edge — the steepest and therefore
  // most position-stable landmark — and the sampling pitch is capped so
  // slots sample the waveform at fixed offsets from that anchor instead
  // of stretching with the segment tail. For segments short enough that
  // the proportional pitch stays under the cap, this reduces to the plain
  // proportional resample; in particular a segment of exactly window_len
  // samples passes through unchanged (up to the [0,1] scaling).
  constexpr double kStepCap = 3.125;  // samples per slot once capped
  constexpr int kAnchorSlot = 16;     // window slot of the rise anchor once capped
  size_t peak = 0;
  for (size_t i = 1; i < n; ++i)
    if (segment.codes[i] > segment.codes[peak]) peak = i;
  double anchor = 0.0, step = 0.0, k0 = 0.0;
  if (n > 1) {
    size_t nb = std::min<size_t>(n, 64);
    double base = 0.0;
    for (size_t i = 0; i < nb; ++i) base += segment.codes[i];
    base /= static_cast<double>(nb);
    double level = base + 0.5 * (segment.codes[peak] - base);
    size_t a = 0;
    while (a < peak && segment.codes[a] < level) ++a;
    anchor = static_cast<double>(a);
    double prop = static_cast<double>(n - 1) / (window_len - 1);
    if (prop <= kStepCap) {
      step = prop;
      k0 = std::nearbyint(static_cast<double>(window_len - 1) * anchor /
                          static_cast<double>(n - 1));
    } else {
      step = kStepCap;
      k0 = kAnchorSlot;
    }
  }
  for (int k = 0; k < window_len; ++k) {
    double val;
    if (n == 1) {
      val = segment.codes[0];
    } else {
      double pos = anchor + (k - k0) * step;
      if (pos < 0.0) pos = 0.0;
      if (pos > static_cast<double>(n - 1)) pos = static_cast<double>(n - 1);
      auto i = static_cast<size_t>(pos);
      if (i >= n - 1) i = n - 2;
      double frac = pos - static_cast<double>(i);
      val = (1.0 - frac) * segment.codes[i] + frac * segment.codes[i + 1];
    }
    out.push_back(val / top);
  }
  out.push_back(features.calib_factor);
  out.push_back(bias_a / 1e-4);
  return out;
}

double bhattacharyya_distance(const std::vector<double>& a,
                              const std::vector<double>& b, double bin_width) {
  std::map<int64_t, std::pair<double, double>> bins;
  for (double x : a) bins[bin_of(x, bin_width)].first += 1.0;
  for (double x : b) bins[bin_of(x, bin_width)].second += 1.0;
  double bc = 0.0;
  for (auto& [bin, pq] : bins)
    bc += std::sqrt((pq.first / a.size()) * (pq.second / b.size()));
  return -std::log(std::max(bc, 1e-300));
}

}  // namespace snspd
