#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace vibxai {

/// Class of a window. For the synthetic data `cutoff` is the clipped class;
/// for recorded machine data it stands for the fault class.
enum class Label : std::uint8_t { normal = 0, cutoff = 1 };

inline int class_index(Label l) noexcept { return static_cast<int>(l); }
inline Label opposite(Label l) noexcept { return l == Label::normal ? Label::cutoff : Label::normal; }
std::string_view label_name(Label l) noexcept;
/// Accepts "normal"/"0" and "cutoff"/"fault"/"imbalance"/"1".
Label parse_label(std::string_view text);

/// Parameters of the sine cut-off generator. All frequencies in Hz, speeds in
/// rev/min.
struct SignalConfig {
  double sample_rate_hz = 4096.0;
  std::size_t window_len = 4096;
  double rpm_start = 600.0;
  double rpm_end = 2400.0;
  std::size_t windows_per_class = 100;
  double chirp_amp = 1.0;
  double clip_level = 0.7;
  double add1_freq_hz = 500.0;
  double add2_freq_hz = 700.0;
  double add1_amp = 0.3;
  double add2_amp = 0.3;
  double noise_std = 0.01;
  std::uint64_t seed = 20230601;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

struct TimeWindow {
  std::vector<double> samples;
  double rpm = 0.0;
  Label label = Label::normal;

  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

enum class Split : std::uint8_t { train, test };

struct LabeledDataset {
  std::vector<TimeWindow> windows;  // nondecreasing rpm
  Split split = Split::train;
};

/// Symmetric hard clip to [-level, level].
double clip(double x, double level);

/// One window at constant speed `rpm`. Phases and noise come from `rng`, so
/// two calls with identically seeded generators differ only in the clipped
/// chirp component.
TimeWindow make_window(const SignalConfig& cfg, double rpm, Label label, std::mt19937_64& rng);

/// Train and test splits. Speeds are linearly spaced over
/// [rpm_start, rpm_end]; each speed appears once per class (normal first).
/// Every window draws from its own stream seeded by (seed, split, index, label).
std::pair<LabeledDataset, LabeledDataset> build_dataset(const SignalConfig& cfg);

}  // namespace vibxai
