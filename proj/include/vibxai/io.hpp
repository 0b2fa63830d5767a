#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "vibxai/spectral.hpp"
#include "vibxai/synth.hpp"
#include "vibxai/xai.hpp"

namespace vibxai::io {

// Dataset CSV: header "rpm,label,s0,...,s{N-1}", then one window per line.
// Labels are written as names ("normal"/"cutoff"); numbers use the shortest
// round-trip representation so a write/read cycle is exact.
void write_dataset_csv(std::span<const TimeWindow> windows, const std::filesystem::path& path);
std::vector<TimeWindow> read_dataset_csv(const std::filesystem::path& path);

/// Long-format recording: header "<rpm_column>,<vibration_column>", one
/// sample per line. This is the layout `ingest_csv` consumes.
void write_recording_csv(std::span<const TimeWindow> windows, const std::filesystem::path& path,
                         const std::string& rpm_column = "rpm", const std::string& vibration_column = "vibration");

struct IngestSpec {
  std::filesystem::path path;
  std::string rpm_column;
  std::string vibration_column;
  std::size_t window_len = 4096;
  double rpm_min = 0.0;
  double rpm_max = 1e12;
  Label label = Label::normal;
};

/// Cuts consecutive non-overlapping windows out of a recording. Each window's
/// rpm is the mean of its rpm samples; windows outside [rpm_min, rpm_max] and
/// a short tail are dropped. Malformed lines raise std::runtime_error naming
/// the line number.
std::vector<TimeWindow> ingest_csv(const IngestSpec& spec);

// Map files. Binary layout (little endian):
//   magic "VIBXMAP1" | u8 kind (0 = rpm map, 1 = saliency) | u8 axis |
//   f64 bin_width | u64 rows | u64 cols |
//   saliency only: u8 method, u8 class |
//   rows x (f64 rpm, u8 label) for rpm maps or rows x f64 rpm for saliency |
//   rows*cols f64 values, row-major.
// CSV form: "# key=value" header lines, then "rpm,label,b0,..." (rpm maps) or
// "rpm,b0,..." (saliency maps).
void save_rpm_map(const RpmMap& map, const std::filesystem::path& path);
RpmMap load_rpm_map(const std::filesystem::path& path);
void write_rpm_map_csv(const RpmMap& map, const std::filesystem::path& path);
RpmMap read_rpm_map_csv(const std::filesystem::path& path);

void save_saliency(const xai::SaliencyMap& map, const std::filesystem::path& path);
xai::SaliencyMap load_saliency(const std::filesystem::path& path);
void write_saliency_csv(const xai::SaliencyMap& map, const std::filesystem::path& path);
xai::SaliencyMap read_saliency_csv(const std::filesystem::path& path);

enum class MapKind { rpm_map, saliency };
/// Kind of a binary map file, or nullopt when the magic does not match.
std::optional<MapKind> peek_map_kind(const std::filesystem::path& path);

std::string_view axis_name(Axis axis) noexcept;
Axis parse_axis(std::string_view text);

}  // namespace vibxai::io
