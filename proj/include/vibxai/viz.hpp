#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "vibxai/matrix.hpp"
#include "vibxai/xai.hpp"

namespace vibxai::viz {

enum class ColorScale : std::uint8_t { linear, log };
enum class ImageFormat : std::uint8_t { ppm };

struct RenderSpec {
  bool positive_only = false;
  ColorScale scale = ColorScale::linear;
  double clip_quantile = 0.95;
  std::size_t cell_width = 1;   // pixels per bin
  std::size_t cell_height = 1;  // pixels per row
  ImageFormat format = ImageFormat::ppm;

  void validate() const;
};

/// CAM family: positive part, linear, 0.95 quantile. LRP: positive part, log
/// scale. LIME: signed, linear, 0.95 quantile.
RenderSpec render_spec_for(xai::Method method);
/// Raw input maps: linear, 0.95 quantile.
RenderSpec render_spec_for_input();

inline constexpr double kLogOffset = 1e-6;

/// Optional positive part, optional log10(v + 1e-6), min-max to [0, 1], then
/// v / q clamped to 1 where q is the clip quantile of the normalised values.
/// A constant map becomes 0.5 everywhere.
Matrix normalize_saliency(const Matrix& values, const RenderSpec& spec);

/// Linear-interpolation quantile (numpy's default definition).
double quantile(std::vector<double> values, double q);

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// The bundled 256-entry table.
const std::array<Rgb, 256>& viridis_table();

/// Table position v * 256 clamped to [0, 255], linearly interpolated and
/// rounded; v outside [0, 1] is clamped.
Rgb viridis_lookup(double v);

struct Image {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, top row first
};

/// One cell block per map entry; row 0 (lowest speed) at the bottom.
Image rasterize(const Matrix& values, const RenderSpec& spec);

/// Binary portable pixmap (P6).
void write_ppm(const Image& image, const std::filesystem::path& path);

void render_map(const Matrix& values, const RenderSpec& spec, const std::filesystem::path& path);

}  // namespace vibxai::viz
