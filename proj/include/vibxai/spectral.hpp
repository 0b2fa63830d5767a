#pragma once

#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "vibxai/matrix.hpp"
#include "vibxai/synth.hpp"

namespace vibxai {

enum class WindowFunction : std::uint8_t { rect, hann };

/// One-sided amplitude spectrum, bins 0 .. N/2-1.
struct Spectrum {
  std::vector<double> bins;
  double df_hz = 0.0;
};

enum class Axis : std::uint8_t { frequency, order };

/// Rows are windows ordered by speed, columns are frequency or order bins of
/// width `bin_width` (Hz or orders) starting at zero.
struct RpmMap {
  Matrix values;
  std::vector<double> rpm;
  std::vector<Label> labels;
  Axis axis = Axis::frequency;
  double bin_width = 1.0;

  std::size_t rows() const noexcept { return values.rows(); }
  std::size_t cols() const noexcept { return values.cols(); }
  friend bool operator==(const RpmMap&, const RpmMap&) = default;
};

/// Raw forward transform of a real signal, N/2+1 complex bins, unnormalised.
std::vector<std::complex<double>> real_fft(std::span<const double> samples);

/// Scaling: 1/N at DC, 2/N elsewhere, so a bin-centred unit sine reads 1.0.
/// The periodic Hann window is corrected by its coherent gain (x2).
Spectrum amplitude_spectrum(std::span<const double> samples, double sample_rate_hz,
                            WindowFunction window = WindowFunction::hann);

RpmMap freq_rpm_map(std::span<const TimeWindow> windows, double sample_rate_hz,
                    WindowFunction window = WindowFunction::hann);

/// Order grid o_j = j * o_max / n_order_bins for j < n_order_bins. Each row is
/// the window's spectrum linearly interpolated at f = o_j * rpm / 60.
/// Requires o_max * rpm_max / 60 <= fs / 2.
RpmMap order_rpm_map(std::span<const TimeWindow> windows, double sample_rate_hz, double o_max,
                     std::size_t n_order_bins, WindowFunction window = WindowFunction::hann);

/// Largest order that stays below Nyquist at `rpm_max`.
double default_order_max(double sample_rate_hz, double rpm_max);
/// Same element count as the frequency representation.
std::size_t default_order_bins(std::size_t window_len);

/// Rows of one class, order preserved.
RpmMap select_class(const RpmMap& map, Label label);

}  // namespace vibxai
