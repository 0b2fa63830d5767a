#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "vibxai/nn.hpp"
#include "vibxai/spectral.hpp"
#include "vibxai/synth.hpp"
#include "vibxai/viz.hpp"
#include "vibxai/xai.hpp"

namespace vibxai::pipeline {

struct SpectralOptions {
  WindowFunction window = WindowFunction::hann;
  double order_max = 0.0;         // 0: largest order below Nyquist at rpm_end
  std::size_t order_bins = 0;     // 0: window_len / 2
  bool write_csv = false;
};

struct IngestFile {
  std::filesystem::path path;
  Label label = Label::normal;
  Split split = Split::train;
};

struct IngestOptions {
  std::vector<IngestFile> files;
  std::string rpm_column;
  std::string vibration_column;
  std::size_t window_len = 4096;
  double rpm_min = 0.0;
  double rpm_max = 1e12;
};

struct Paths {
  std::filesystem::path dataset_dir = "data_out/dataset";
  std::filesystem::path model_dir = "data_out/models";
  std::filesystem::path output_dir = "data_out/maps";
};

struct PipelineConfig {
  SignalConfig signal;
  SpectralOptions spectral;
  nn::ModelConfig model;  // input_len is taken from the map width
  nn::TrainConfig train;
  xai::LimeConfig lime;
  viz::RenderSpec render;  // cell sizes only; scales follow the method
  double lrp_eps = 1e-2;
  IngestOptions ingest;
  Paths paths;

  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected. Relative paths
/// resolve against the directory holding the file.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_json(const std::string& text, const std::filesystem::path& base_dir = {});
std::string config_to_json(const PipelineConfig& cfg);

std::filesystem::path dataset_file(const PipelineConfig& cfg, Split split);
std::filesystem::path map_file(const PipelineConfig& cfg, Axis axis, Split split);
std::filesystem::path checkpoint_file(const PipelineConfig& cfg, Axis axis);
std::filesystem::path saliency_file(const PipelineConfig& cfg, Axis axis, xai::Method method, Label cls);

/// Each command logs a short summary to `log` and returns the files written.
std::vector<std::filesystem::path> cmd_generate(const PipelineConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_ingest(const PipelineConfig& cfg, std::ostream& log);
std::vector<std::filesystem::path> cmd_transform(const PipelineConfig& cfg, Axis axis, std::ostream& log);
std::vector<std::filesystem::path> cmd_train(const PipelineConfig& cfg, Axis axis, std::ostream& log);
std::vector<std::filesystem::path> cmd_explain(const PipelineConfig& cfg, xai::Method method, Label cls, Axis axis,
                                               std::ostream& log);
/// Renders a binary rpm or saliency map file; `out` defaults to the input path
/// with a .ppm extension.
std::vector<std::filesystem::path> cmd_render(const PipelineConfig& cfg, const std::filesystem::path& map_path,
                                              const std::optional<std::filesystem::path>& out, std::ostream& log);

/// Transforms a split already held in memory.
RpmMap transform(const PipelineConfig& cfg, std::span<const TimeWindow> windows, Axis axis);
nn::Dataset to_dataset(const RpmMap& map);

}  // namespace vibxai::pipeline
