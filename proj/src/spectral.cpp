#include "vibxai/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace vibxai {
namespace {

// FFTW planning is not thread-safe; plans are cached per length and executed
// with the new-array interface.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan plan_for(std::size_t n) {
    std::lock_guard lock(mutex_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    auto* in = fftw_alloc_real(n);
    auto* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(in);
    fftw_free(out);
    if (p == nullptr) throw std::runtime_error("FFTW plan creation failed");
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) fftw_destroy_plan(p);
  }

 private:
  std::mutex mutex_;
  std::map<std::size_t, fftw_plan> plans_;
};

void require_power_of_two(std::size_t n) {
  if (n < 2 || !std::has_single_bit(n))
    throw std::invalid_argument("spectrum: length " + std::to_string(n) + " is not a power of two");
}

}  // namespace

std::vector<std::complex<double>> real_fft(std::span<const double> samples) {
  const std::size_t n = samples.size();
  require_power_of_two(n);
  std::vector<double> in(samples.begin(), samples.end());
  std::vector<std::complex<double>> out(n / 2 + 1);
  fftw_execute_dft_r2c(PlanCache::instance().plan_for(n), in.data(),
                       reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

Spectrum amplitude_spectrum(std::span<const double> samples, double sample_rate_hz, WindowFunction window) {
  const std::size_t n = samples.size();
  require_power_of_two(n);
  std::vector<double> x(samples.begin(), samples.end());
  double gain = 1.0;
  if (window == WindowFunction::hann) {
    for (std::size_t i = 0; i < n; ++i)
      x[i] *= 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n)));
    gain = 2.0;
  }
  const auto raw = real_fft(x);
  Spectrum s;
  s.df_hz = sample_rate_hz / static_cast<double>(n);
  s.bins.resize(n / 2);
  const double inv_n = 1.0 / static_cast<double>(n);
  s.bins[0] = gain * std::abs(raw[0]) * inv_n;
  for (std::size_t k = 1; k < n / 2; ++k) s.bins[k] = gain * 2.0 * std::abs(raw[k]) * inv_n;
  return s;
}

namespace {

void require_uniform(std::span<const TimeWindow> windows) {
  if (windows.empty()) throw std::invalid_argument("rpm map: no windows");
  const std::size_t len = windows.front().samples.size();
  for (const auto& w : windows)
    if (w.samples.size() != len) throw std::invalid_argument("rpm map: windows differ in length");
}

std::vector<std::size_t> rpm_order(std::span<const TimeWindow> windows) {
  std::vector<std::size_t> idx(windows.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return windows[a].rpm < windows[b].rpm; });
  return idx;
}

}  // namespace

RpmMap freq_rpm_map(std::span<const TimeWindow> windows, double sample_rate_hz, WindowFunction window) {
  require_uniform(windows);
  const std::size_t cols = windows.front().samples.size() / 2;
  RpmMap map;
  map.axis = Axis::frequency;
  map.values = Matrix(windows.size(), cols);
  map.bin_width = sample_rate_hz / static_cast<double>(windows.front().samples.size());
  const auto order = rpm_order(windows);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& w = windows[order[r]];
    const auto s = amplitude_spectrum(w.samples, sample_rate_hz, window);
    std::copy(s.bins.begin(), s.bins.end(), map.values.row(r).begin());
    map.rpm.push_back(w.rpm);
    map.labels.push_back(w.label);
  }
  return map;
}

RpmMap order_rpm_map(std::span<const TimeWindow> windows, double sample_rate_hz, double o_max,
                     std::size_t n_order_bins, WindowFunction window) {
  require_uniform(windows);
  if (!(o_max > 0.0) || n_order_bins == 0) throw std::invalid_argument("order map: empty order grid");
  double rpm_max = 0.0;
  for (const auto& w : windows) {
    if (!(w.rpm > 0.0)) throw std::invalid_argument("order map: rpm must be positive");
    rpm_max = std::max(rpm_max, w.rpm);
  }
  const double nyquist = sample_rate_hz / 2.0;
  if (o_max * rpm_max / 60.0 > nyquist * (1.0 + 1e-12))
    throw std::invalid_argument("order map: o_max * rpm_max / 60 exceeds Nyquist");

  const double d_order = o_max / static_cast<double>(n_order_bins);
  RpmMap map;
  map.axis = Axis::order;
  map.bin_width = d_order;
  map.values = Matrix(windows.size(), n_order_bins);
  const auto order = rpm_order(windows);
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& w = windows[order[r]];
    const auto s = amplitude_spectrum(w.samples, sample_rate_hz, window);
    const double last = static_cast<double>(s.bins.size() - 1);
    const double f_rot = w.rpm / 60.0;
    auto out = map.values.row(r);
    for (std::size_t j = 0; j < n_order_bins; ++j) {
      const double pos = std::min(static_cast<double>(j) * d_order * f_rot / s.df_hz, last);
      const auto lo = static_cast<std::size_t>(pos);
      const std::size_t hi = std::min(lo + 1, s.bins.size() - 1);
      const double t = pos - static_cast<double>(lo);
      out[j] = (1.0 - t) * s.bins[lo] + t * s.bins[hi];
    }
    map.rpm.push_back(w.rpm);
    map.labels.push_back(w.label);
  }
  return map;
}

double default_order_max(double sample_rate_hz, double rpm_max) {
  if (!(rpm_max > 0.0)) throw std::invalid_argument("default_order_max: rpm_max must be positive");
  return (sample_rate_hz / 2.0) / (rpm_max / 60.0);
}

std::size_t default_order_bins(std::size_t window_len) { return window_len / 2; }

RpmMap select_class(const RpmMap& map, Label label) {
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < map.labels.size(); ++r)
    if (map.labels[r] == label) idx.push_back(r);
  RpmMap out;
  out.axis = map.axis;
  out.bin_width = map.bin_width;
  out.values = map.values.select_rows(idx);
  for (auto i : idx) {
    out.rpm.push_back(map.rpm[i]);
    out.labels.push_back(label);
  }
  return out;
}

}  // namespace vibxai
