#include "vibxai/viz.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace vibxai::viz {

void RenderSpec::validate() const {
  if (!(clip_quantile > 0.0 && clip_quantile <= 1.0))
    throw std::invalid_argument("RenderSpec: clip_quantile must lie in (0, 1]");
  if (cell_width == 0 || cell_height == 0) throw std::invalid_argument("RenderSpec: cell size must be positive");
}

RenderSpec render_spec_for(xai::Method method) {
  RenderSpec spec;
  switch (method) {
    case xai::Method::gradcam:
    case xai::Method::gradcam_pp:
    case xai::Method::scorecam:
      spec.positive_only = true;
      break;
    case xai::Method::lrp_z:
    case xai::Method::lrp_eps:
      spec.positive_only = true;
      spec.scale = ColorScale::log;
      spec.clip_quantile = 1.0;
      break;
    case xai::Method::lime_global:
      break;
  }
  return spec;
}

RenderSpec render_spec_for_input() { return RenderSpec{}; }

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile: no values");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double t = pos - static_cast<double>(lo);
  return values[lo] + t * (values[hi] - values[lo]);
}

Matrix normalize_saliency(const Matrix& values, const RenderSpec& spec) {
  spec.validate();
  Matrix out = values;
  auto& v = out.data();
  for (double x : v)
    if (!std::isfinite(x)) throw std::invalid_argument("normalize_saliency: non-finite value");
  if (v.empty()) return out;
  if (spec.positive_only)
    for (auto& x : v) x = std::max(x, 0.0);
  if (spec.scale == ColorScale::log)
    for (auto& x : v) x = std::log10(std::max(x, 0.0) + kLogOffset);

  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double range = *hi_it - lo;
  if (!(range > 0.0)) {
    std::fill(v.begin(), v.end(), 0.5);
    return out;
  }
  for (auto& x : v) x = (x - lo) / range;
  if (spec.clip_quantile < 1.0) {
    const double q = quantile(v, spec.clip_quantile);
    for (auto& x : v) x = q > 0.0 ? std::min(x / q, 1.0) : (x > 0.0 ? 1.0 : 0.0);
  }
  return out;
}

const std::array<Rgb, 256>& viridis_table() {
  static const std::array<Rgb, 256> table{{
#include "viridis_table.inc"
  }};
  return table;
}

Rgb viridis_lookup(double v) {
  const auto& table = viridis_table();
  if (!(v >= 0.0)) v = 0.0;  // also maps NaN to the low end
  const double pos = std::min(v * 256.0, 255.0);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min<std::size_t>(lo + 1, 255);
  const double t = pos - static_cast<double>(lo);
  auto mix = [t](std::uint8_t a, std::uint8_t b) {
    return static_cast<std::uint8_t>(std::lround((1.0 - t) * a + t * b));
  };
  return {mix(table[lo].r, table[hi].r), mix(table[lo].g, table[hi].g), mix(table[lo].b, table[hi].b)};
}

Image rasterize(const Matrix& values, const RenderSpec& spec) {
  if (values.empty()) throw std::invalid_argument("render: empty map");
  const Matrix norm = normalize_saliency(values, spec);
  Image img;
  img.width = values.cols() * spec.cell_width;
  img.height = values.rows() * spec.cell_height;
  img.rgb.resize(img.width * img.height * 3);
  for (std::size_t r = 0; r < values.rows(); ++r) {
    const std::size_t top = (values.rows() - 1 - r) * spec.cell_height;
    for (std::size_t c = 0; c < values.cols(); ++c) {
      const Rgb color = viridis_lookup(norm(r, c));
      for (std::size_t dy = 0; dy < spec.cell_height; ++dy)
        for (std::size_t dx = 0; dx < spec.cell_width; ++dx) {
          const std::size_t px = ((top + dy) * img.width + c * spec.cell_width + dx) * 3;
          img.rgb[px] = color.r;
          img.rgb[px + 1] = color.g;
          img.rgb[px + 2] = color.b;
        }
    }
  }
  return img;
}

void write_ppm(const Image& image, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open image for writing: " + path.string());
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
  if (!out) throw std::runtime_error("failed writing image: " + path.string());
}

void render_map(const Matrix& values, const RenderSpec& spec, const std::filesystem::path& path) {
  write_ppm(rasterize(values, spec), path);
}

}  // namespace vibxai::viz
