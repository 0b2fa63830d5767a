#include "vibxai/synth.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace vibxai {

std::string_view label_name(Label l) noexcept {
  return l == Label::normal ? "normal" : "cutoff";
}

Label parse_label(std::string_view text) {
  if (text == "normal" || text == "0") return Label::normal;
  if (text == "cutoff" || text == "fault" || text == "imbalance" || text == "1") return Label::cutoff;
  throw std::invalid_argument("unknown class label '" + std::string(text) + "'");
}

void SignalConfig::validate() const {
  auto fail = [](const char* what) { throw std::invalid_argument(std::string("SignalConfig: ") + what); };
  if (!(sample_rate_hz > 0.0)) fail("sample_rate_hz must be positive");
  if (window_len < 2 || !std::has_single_bit(window_len)) fail("window_len must be a power of two");
  if (!(rpm_start > 0.0 && rpm_start < rpm_end)) fail("need 0 < rpm_start < rpm_end");
  if (windows_per_class == 0) fail("windows_per_class must be positive");
  if (!(clip_level > 0.0 && clip_level < chirp_amp)) fail("need 0 < clip_level < chirp_amp");
  if (!(rpm_end / 60.0 < add1_freq_hz && add1_freq_hz < add2_freq_hz && add2_freq_hz < sample_rate_hz / 2.0))
    fail("need rpm_end/60 < add1_freq_hz < add2_freq_hz < sample_rate_hz/2");
  if (!(noise_std >= 0.0)) fail("noise_std must be non-negative");
}

double clip(double x, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("clip: level must be positive");
  return std::min(std::max(x, -level), level);
}

TimeWindow make_window(const SignalConfig& cfg, double rpm, Label label, std::mt19937_64& rng) {
  if (!(rpm >= cfg.rpm_start && rpm <= cfg.rpm_end))
    throw std::invalid_argument("make_window: rpm " + std::to_string(rpm) + " outside configured range");

  constexpr double two_pi = 2.0 * std::numbers::pi;
  std::uniform_real_distribution<double> phase(0.0, two_pi);
  const double phi0 = phase(rng);
  const double phi1 = phase(rng);
  const double phi2 = phase(rng);
  std::normal_distribution<double> noise(0.0, 1.0);

  const double f0 = rpm / 60.0;
  const double fs = cfg.sample_rate_hz;
  TimeWindow w;
  w.rpm = rpm;
  w.label = label;
  w.samples.resize(cfg.window_len);
  for (std::size_t n = 0; n < cfg.window_len; ++n) {
    const double t = static_cast<double>(n) / fs;
    double chirp = cfg.chirp_amp * std::sin(two_pi * f0 * t + phi0);
    if (label == Label::cutoff) chirp = clip(chirp, cfg.clip_level);
    const double adds = cfg.add1_amp * std::sin(two_pi * cfg.add1_freq_hz * t + phi1) +
                        cfg.add2_amp * std::sin(two_pi * cfg.add2_freq_hz * t + phi2);
    // Always draw so both labels consume the stream identically.
    const double z = noise(rng);
    w.samples[n] = chirp + adds + cfg.noise_std * z;
  }
  return w;
}

namespace {

LabeledDataset build_split(const SignalConfig& cfg, Split split) {
  LabeledDataset ds;
  ds.split = split;
  ds.windows.reserve(2 * cfg.windows_per_class);
  const std::size_t n = cfg.windows_per_class;
  for (std::size_t i = 0; i < n; ++i) {
    const double rpm = n == 1 ? cfg.rpm_start
                              : i + 1 == n ? cfg.rpm_end
                                           : cfg.rpm_start + (cfg.rpm_end - cfg.rpm_start) * static_cast<double>(i) /
                                                                 static_cast<double>(n - 1);
    for (Label label : {Label::normal, Label::cutoff}) {
      std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                        static_cast<std::uint32_t>(split), static_cast<std::uint32_t>(i),
                        static_cast<std::uint32_t>(label)};
      std::mt19937_64 rng(seq);
      ds.windows.push_back(make_window(cfg, rpm, label, rng));
    }
  }
  return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> build_dataset(const SignalConfig& cfg) {
  cfg.validate();
  return {build_split(cfg, Split::train), build_split(cfg, Split::test)};
}

}  // namespace vibxai
