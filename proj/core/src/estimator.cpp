#include "vebs/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace vebs::est {

int channel_count(FeatureMode mode) { return mode == FeatureMode::state ? 4 : 10; }

namespace {

void append_stats(std::vector<double>& out, const std::array<double, kWindowSamples>& x,
                  double dt_s) {
  const int n = kWindowSamples;
  double mean = 0;
  for (double v : x) mean += v;
  mean /= n;

  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;  // population variance

  const auto [mn, mx] = std::minmax_element(x.begin(), x.end());

  // Least-squares slope against sample index, reported per second.
  // Sxx for indices 0..n-1 is n(n^2-1)/12.
  double sxy = 0;
  const double ibar = (n - 1) / 2.0;
  for (int i = 0; i < n; ++i) sxy += (i - ibar) * (x[static_cast<std::size_t>(i)] - mean);
  const double sxx = n * (static_cast<double>(n) * n - 1) / 12.0;
  const double slope = sxy / sxx / dt_s;

  double first_half = 0, second_half = 0;
  for (int i = 0; i < n / 2; ++i) first_half += x[static_cast<std::size_t>(i)];
  for (int i = n / 2; i < n; ++i) second_half += x[static_cast<std::size_t>(i)];
  const double delta_mean = (second_half - first_half) / (n / 2);

  out.push_back(mean);
  out.push_back(std::sqrt(var));
  out.push_back(*mn);
  out.push_back(*mx);
  out.push_back(x.front());
  out.push_back(x.back());
  out.push_back(slope);
  out.push_back(delta_mean);
}

}  // namespace

std::vector<double> extract_features(std::span<const SensorFrame> window, FeatureMode mode) {
  if (window.size() != kWindowSamples) {
    throw std::invalid_argument("feature window must hold exactly " +
                                std::to_string(kWindowSamples) + " frames, got " +
                                std::to_string(window.size()));
  }
  // Sample spacing from the window itself; degenerate spacing means a
  // corrupted stream.
  const double dt_s = (window.back().t_s - window.front().t_s) / (kWindowSamples - 1);
  if (!(dt_s > 0)) throw std::invalid_argument("window timestamps must increase");

  const int channels = channel_count(mode);
  std::vector<double> features;
  features.reserve(static_cast<std::size_t>(channels) * kStatsPerChannel);

  std::array<double, kWindowSamples> buf{};
  auto fill = [&](auto getter) {
    for (int i = 0; i < kWindowSamples; ++i) {
      buf[static_cast<std::size_t>(i)] = getter(window[static_cast<std::size_t>(i)]);
    }
    append_stats(features, buf, dt_s);
  };

  fill([](const SensorFrame& f) { return f.alpha_deg; });
  fill([](const SensorFrame& f) { return f.omega_deg_s; });
  fill([](const SensorFrame& f) { return f.a1_m_s2; });
  fill([](const SensorFrame& f) { return f.a2_m_s2; });
  if (mode == FeatureMode::weight) {
    for (int c = 0; c < 6; ++c) {
      fill([c](const SensorFrame& f) { return f.fsr[static_cast<std::size_t>(c)]; });
    }
  }
  return features;
}

DwellFilter::DwellFilter(int dwell) : dwell_(dwell) {
  if (dwell < 1) throw std::invalid_argument("dwell must be >= 1");
}

int DwellFilter::step(int raw_label) {
  if (current_ < 0) {
    current_ = raw_label;  // stream start: adopt the first label immediately
    candidate_ = raw_label;
    run_ = 0;
    return current_;
  }
  if (raw_label == current_) {
    candidate_ = current_;
    run_ = 0;
    return current_;
  }
  if (raw_label == candidate_) {
    ++run_;
  } else {
    candidate_ = raw_label;
    run_ = 1;
  }
  if (run_ >= dwell_) {
    current_ = candidate_;
    run_ = 0;
  }
  return current_;
}

void DwellFilter::reset() {
  current_ = -1;
  candidate_ = -1;
  run_ = 0;
}

std::vector<int> dwell_filter(std::span<const int> raw, int dwell) {
  DwellFilter f(dwell);
  std::vector<int> out;
  out.reserve(raw.size());
  for (int v : raw) out.push_back(f.step(v));
  return out;
}

}  // namespace vebs::est
