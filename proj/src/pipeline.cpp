#include "vibxai/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "vibxai/io.hpp"

namespace vibxai::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string_view split_name(Split s) { return s == Split::train ? "train" : "test"; }

Split parse_split(std::string_view text) {
  if (text == "train") return Split::train;
  if (text == "test") return Split::test;
  throw std::invalid_argument("unknown split '" + std::string(text) + "'");
}

std::string_view window_name(WindowFunction w) { return w == WindowFunction::hann ? "hann" : "rect"; }

WindowFunction parse_window(std::string_view text) {
  if (text == "hann") return WindowFunction::hann;
  if (text == "rect" || text == "none") return WindowFunction::rect;
  throw std::invalid_argument("unknown window '" + std::string(text) + "'");
}

// Reads the keys present in one JSON object; anything left over is a typo.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw std::invalid_argument("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw std::invalid_argument("config: " + name_ + "." + key + ": " + e.what());
    }
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw std::invalid_argument("config: unknown key '" + name_ + "." + item.key() + "'");
  }

  const std::string& name() const { return name_; }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute() || base.empty()) return p;
  return base / p;
}

void read_signal(const json& j, SignalConfig& s) {
  Section sec(j, "signal");
  sec.get("sample_rate_hz", s.sample_rate_hz);
  sec.get("window_len", s.window_len);
  sec.get("rpm_start", s.rpm_start);
  sec.get("rpm_end", s.rpm_end);
  sec.get("windows_per_class", s.windows_per_class);
  sec.get("chirp_amp", s.chirp_amp);
  sec.get("clip_level", s.clip_level);
  sec.get("add1_freq_hz", s.add1_freq_hz);
  sec.get("add2_freq_hz", s.add2_freq_hz);
  sec.get("add1_amp", s.add1_amp);
  sec.get("add2_amp", s.add2_amp);
  sec.get("noise_std", s.noise_std);
  sec.get("seed", s.seed);
  sec.finish();
}

void read_spectral(const json& j, SpectralOptions& s) {
  Section sec(j, "spectral");
  std::string window(window_name(s.window));
  sec.get("window", window);
  s.window = parse_window(window);
  sec.get("order_max", s.order_max);
  sec.get("order_bins", s.order_bins);
  sec.get("write_csv", s.write_csv);
  sec.finish();
}

void read_model(const json& j, nn::ModelConfig& m) {
  Section sec(j, "model");
  if (const json* blocks = sec.child("conv_blocks")) {
    if (!blocks->is_array()) throw std::invalid_argument("config: model.conv_blocks must be an array");
    m.conv_blocks.clear();
    for (const auto& b : *blocks) {
      Section bs(b, "model.conv_blocks[]");
      nn::ConvBlockConfig cb;
      bs.get("filters", cb.filters);
      bs.get("kernel_size", cb.kernel_size);
      bs.get("pool_size", cb.pool_size);
      bs.finish();
      m.conv_blocks.push_back(cb);
    }
  }
  sec.get("dense_hidden", m.dense_hidden);
  sec.get("n_classes", m.n_classes);
  sec.finish();
}

void read_train(const json& j, nn::TrainConfig& t) {
  Section sec(j, "train");
  sec.get("epochs", t.epochs);
  sec.get("lr", t.lr);
  sec.get("batch_size", t.batch_size);
  sec.get("label_smoothing", t.label_smoothing);
  sec.get("seed", t.seed);
  sec.get("beta1", t.beta1);
  sec.get("beta2", t.beta2);
  sec.get("adam_eps", t.adam_eps);
  sec.get("bn_momentum", t.bn_momentum);
  sec.get("input_scale_floor", t.input_scale_floor);
  sec.finish();
}

void read_lime(const json& j, xai::LimeConfig& l) {
  Section sec(j, "lime");
  sec.get("segment_counts", l.segment_counts);
  sec.get("feature_counts", l.feature_counts);
  sec.get("perturbations_per_config", l.perturbations_per_config);
  sec.get("ridge_alpha", l.ridge_alpha);
  std::string strategy(xai::strategy_name(l.strategy));
  sec.get("strategy", strategy);
  l.strategy = xai::parse_strategy(strategy);
  sec.get("seed", l.seed);
  sec.finish();
}

void read_render(const json& j, viz::RenderSpec& r) {
  Section sec(j, "render");
  sec.get("cell_width", r.cell_width);
  sec.get("cell_height", r.cell_height);
  sec.finish();
}

void read_ingest(const json& j, IngestOptions& in, const fs::path& base) {
  Section sec(j, "ingest");
  if (const json* files = sec.child("files")) {
    if (!files->is_array()) throw std::invalid_argument("config: ingest.files must be an array");
    in.files.clear();
    for (const auto& f : *files) {
      Section fsec(f, "ingest.files[]");
      std::string path;
      std::string label = "normal";
      std::string split = "train";
      fsec.get("path", path);
      fsec.get("label", label);
      fsec.get("split", split);
      fsec.finish();
      if (path.empty()) throw std::invalid_argument("config: ingest.files[].path is required");
      in.files.push_back({resolve(base, path), parse_label(label), parse_split(split)});
    }
  }
  sec.get("rpm_column", in.rpm_column);
  sec.get("vibration_column", in.vibration_column);
  sec.get("window_len", in.window_len);
  sec.get("rpm_min", in.rpm_min);
  sec.get("rpm_max", in.rpm_max);
  sec.finish();
}

void read_paths(const json& j, Paths& p) {
  Section sec(j, "paths");
  std::string dataset = p.dataset_dir.string();
  std::string model = p.model_dir.string();
  std::string output = p.output_dir.string();
  sec.get("dataset_dir", dataset);
  sec.get("model_dir", model);
  sec.get("output_dir", output);
  sec.finish();
  p.dataset_dir = dataset;
  p.model_dir = model;
  p.output_dir = output;
}

void ensure_dir(const fs::path& dir) {
  if (dir.empty()) return;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

void require_file(const fs::path& p, std::string_view hint) {
  if (!fs::exists(p)) throw std::runtime_error("missing " + p.string() + " (run '" + std::string(hint) + "' first)");
}

double max_rpm(std::span<const TimeWindow> a, std::span<const TimeWindow> b) {
  double m = 0.0;
  for (const auto& w : a) m = std::max(m, w.rpm);
  for (const auto& w : b) m = std::max(m, w.rpm);
  return m;
}

RpmMap transform_with(const PipelineConfig& cfg, std::span<const TimeWindow> windows, Axis axis, double order_max) {
  if (windows.empty()) throw std::invalid_argument("transform: no windows");
  const double fs_hz = cfg.signal.sample_rate_hz;
  if (axis == Axis::frequency) return freq_rpm_map(windows, fs_hz, cfg.spectral.window);
  const std::size_t bins =
      cfg.spectral.order_bins > 0 ? cfg.spectral.order_bins : default_order_bins(windows.front().samples.size());
  return order_rpm_map(windows, fs_hz, order_max, bins, cfg.spectral.window);
}

double resolve_order_max(const PipelineConfig& cfg, double rpm_max) {
  if (cfg.spectral.order_max > 0.0) return cfg.spectral.order_max;
  return default_order_max(cfg.signal.sample_rate_hz, rpm_max);
}

// For every class row, the opposite-class row recorded at the closest speed.
Matrix pair_by_speed(const RpmMap& cls, const RpmMap& opp) {
  if (opp.rows() == 0) throw std::runtime_error("explain: no rows of the opposite class");
  if (opp.rows() == cls.rows() && opp.rpm == cls.rpm) return opp.values;
  Matrix out(cls.rows(), opp.cols());
  for (std::size_t r = 0; r < cls.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < opp.rows(); ++k)
      if (std::abs(opp.rpm[k] - cls.rpm[r]) < std::abs(opp.rpm[best] - cls.rpm[r])) best = k;
    std::copy(opp.values.row(best).begin(), opp.values.row(best).end(), out.row(r).begin());
  }
  return out;
}

}  // namespace

void PipelineConfig::validate() const {
  signal.validate();
  train.validate();
  lime.validate();
  render.validate();
  if (model.conv_blocks.empty()) throw std::invalid_argument("config: model needs at least one conv block");
  if (model.dense_hidden == 0 || model.n_classes != 2)
    throw std::invalid_argument("config: model needs a hidden layer and exactly two classes");
  if (spectral.order_max < 0.0) throw std::invalid_argument("config: spectral.order_max must be >= 0");
  if (!(lrp_eps > 0.0)) throw std::invalid_argument("config: lrp_eps must be positive");
}

PipelineConfig config_from_json(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  PipelineConfig cfg;
  Section root(j, "config");
  if (const json* s = root.child("signal")) read_signal(*s, cfg.signal);
  if (const json* s = root.child("spectral")) read_spectral(*s, cfg.spectral);
  if (const json* s = root.child("model")) read_model(*s, cfg.model);
  if (const json* s = root.child("train")) read_train(*s, cfg.train);
  if (const json* s = root.child("lime")) read_lime(*s, cfg.lime);
  if (const json* s = root.child("render")) read_render(*s, cfg.render);
  if (const json* s = root.child("ingest")) read_ingest(*s, cfg.ingest, base_dir);
  if (const json* s = root.child("paths")) read_paths(*s, cfg.paths);
  root.get("lrp_eps", cfg.lrp_eps);
  root.finish();
  cfg.paths.dataset_dir = resolve(base_dir, cfg.paths.dataset_dir);
  cfg.paths.model_dir = resolve(base_dir, cfg.paths.model_dir);
  cfg.paths.output_dir = resolve(base_dir, cfg.paths.output_dir);
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str(), path.parent_path());
}

std::string config_to_json(const PipelineConfig& cfg) {
  json blocks = json::array();
  for (const auto& b : cfg.model.conv_blocks)
    blocks.push_back({{"filters", b.filters}, {"kernel_size", b.kernel_size}, {"pool_size", b.pool_size}});
  json files = json::array();
  for (const auto& f : cfg.ingest.files)
    files.push_back({{"path", f.path.string()}, {"label", label_name(f.label)}, {"split", split_name(f.split)}});
  const auto& s = cfg.signal;
  const json j = {
      {"signal",
       {{"sample_rate_hz", s.sample_rate_hz}, {"window_len", s.window_len}, {"rpm_start", s.rpm_start},
        {"rpm_end", s.rpm_end}, {"windows_per_class", s.windows_per_class}, {"chirp_amp", s.chirp_amp},
        {"clip_level", s.clip_level}, {"add1_freq_hz", s.add1_freq_hz}, {"add2_freq_hz", s.add2_freq_hz},
        {"add1_amp", s.add1_amp}, {"add2_amp", s.add2_amp}, {"noise_std", s.noise_std}, {"seed", s.seed}}},
      {"spectral",
       {{"window", window_name(cfg.spectral.window)}, {"order_max", cfg.spectral.order_max},
        {"order_bins", cfg.spectral.order_bins}, {"write_csv", cfg.spectral.write_csv}}},
      {"model", {{"conv_blocks", blocks}, {"dense_hidden", cfg.model.dense_hidden}, {"n_classes", cfg.model.n_classes}}},
      {"train",
       {{"epochs", cfg.train.epochs}, {"lr", cfg.train.lr}, {"batch_size", cfg.train.batch_size},
        {"label_smoothing", cfg.train.label_smoothing}, {"seed", cfg.train.seed}, {"beta1", cfg.train.beta1},
        {"beta2", cfg.train.beta2}, {"adam_eps", cfg.train.adam_eps}, {"bn_momentum", cfg.train.bn_momentum},
        {"input_scale_floor", cfg.train.input_scale_floor}}},
      {"lime",
       {{"segment_counts", cfg.lime.segment_counts}, {"feature_counts", cfg.lime.feature_counts},
        {"perturbations_per_config", cfg.lime.perturbations_per_config}, {"ridge_alpha", cfg.lime.ridge_alpha},
        {"strategy", xai::strategy_name(cfg.lime.strategy)}, {"seed", cfg.lime.seed}}},
      {"render", {{"cell_width", cfg.render.cell_width}, {"cell_height", cfg.render.cell_height}}},
      {"lrp_eps", cfg.lrp_eps},
      {"ingest",
       {{"files", files}, {"rpm_column", cfg.ingest.rpm_column}, {"vibration_column", cfg.ingest.vibration_column},
        {"window_len", cfg.ingest.window_len}, {"rpm_min", cfg.ingest.rpm_min}, {"rpm_max", cfg.ingest.rpm_max}}},
      {"paths",
       {{"dataset_dir", cfg.paths.dataset_dir.string()}, {"model_dir", cfg.paths.model_dir.string()},
        {"output_dir", cfg.paths.output_dir.string()}}},
  };
  return j.dump(2);
}

fs::path dataset_file(const PipelineConfig& cfg, Split split) {
  return cfg.paths.dataset_dir / (std::string(split_name(split)) + ".csv");
}

fs::path map_file(const PipelineConfig& cfg, Axis axis, Split split) {
  return cfg.paths.output_dir / (std::string(io::axis_name(axis)) + "_" + std::string(split_name(split)) + ".rpm");
}

fs::path checkpoint_file(const PipelineConfig& cfg, Axis axis) {
  return cfg.paths.model_dir / (std::string(io::axis_name(axis)) + ".ckpt");
}

fs::path saliency_file(const PipelineConfig& cfg, Axis axis, xai::Method method, Label cls) {
  return cfg.paths.output_dir / (std::string(io::axis_name(axis)) + "_" + std::string(xai::method_name(method)) + "_" +
                                 std::string(label_name(cls)) + ".sal");
}

RpmMap transform(const PipelineConfig& cfg, std::span<const TimeWindow> windows, Axis axis) {
  return transform_with(cfg, windows, axis, resolve_order_max(cfg, max_rpm(windows, {})));
}

nn::Dataset to_dataset(const RpmMap& map) {
  nn::Dataset d;
  d.rows = map.values;
  d.labels.reserve(map.labels.size());
  for (auto l : map.labels) d.labels.push_back(class_index(l));
  return d;
}

std::vector<fs::path> cmd_generate(const PipelineConfig& cfg, std::ostream& log) {
  const auto [train, test] = build_dataset(cfg.signal);
  ensure_dir(cfg.paths.dataset_dir);
  const auto train_path = dataset_file(cfg, Split::train);
  const auto test_path = dataset_file(cfg, Split::test);
  io::write_dataset_csv(train.windows, train_path);
  io::write_dataset_csv(test.windows, test_path);
  log << "generate: " << train.windows.size() << " train and " << test.windows.size() << " test windows of "
      << cfg.signal.window_len << " samples\n";
  return {train_path, test_path};
}

std::vector<fs::path> cmd_ingest(const PipelineConfig& cfg, std::ostream& log) {
  if (cfg.ingest.files.empty()) throw std::invalid_argument("ingest: config lists no files");
  std::vector<TimeWindow> splits[2];
  for (const auto& f : cfg.ingest.files) {
    io::IngestSpec spec;
    spec.path = f.path;
    spec.rpm_column = cfg.ingest.rpm_column;
    spec.vibration_column = cfg.ingest.vibration_column;
    spec.window_len = cfg.ingest.window_len;
    spec.rpm_min = cfg.ingest.rpm_min;
    spec.rpm_max = cfg.ingest.rpm_max;
    spec.label = f.label;
    auto windows = io::ingest_csv(spec);
    log << "ingest: " << f.path.string() << " -> " << windows.size() << " " << label_name(f.label) << " windows ("
        << split_name(f.split) << ")\n";
    auto& dst = splits[static_cast<int>(f.split)];
    dst.insert(dst.end(), std::make_move_iterator(windows.begin()), std::make_move_iterator(windows.end()));
  }
  std::vector<fs::path> written;
  ensure_dir(cfg.paths.dataset_dir);
  for (Split s : {Split::train, Split::test}) {
    auto& w = splits[static_cast<int>(s)];
    if (w.empty()) throw std::runtime_error("ingest: no windows for the " + std::string(split_name(s)) + " split");
    std::stable_sort(w.begin(), w.end(), [](const TimeWindow& a, const TimeWindow& b) { return a.rpm < b.rpm; });
    written.push_back(dataset_file(cfg, s));
    io::write_dataset_csv(w, written.back());
  }
  return written;
}

std::vector<fs::path> cmd_transform(const PipelineConfig& cfg, Axis axis, std::ostream& log) {
  const auto train_path = dataset_file(cfg, Split::train);
  const auto test_path = dataset_file(cfg, Split::test);
  require_file(train_path, "generate");
  require_file(test_path, "generate");
  const auto train = io::read_dataset_csv(train_path);
  const auto test = io::read_dataset_csv(test_path);
  const double order_max = resolve_order_max(cfg, max_rpm(train, test));

  ensure_dir(cfg.paths.output_dir);
  std::vector<fs::path> written;
  for (Split s : {Split::train, Split::test}) {
    const auto map = transform_with(cfg, s == Split::train ? train : test, axis, order_max);
    const auto path = map_file(cfg, axis, s);
    io::save_rpm_map(map, path);
    written.push_back(path);
    if (cfg.spectral.write_csv) {
      auto csv = path;
      csv.replace_extension(".csv");
      io::write_rpm_map_csv(map, csv);
      written.push_back(csv);
    }
    log << "transform: " << split_name(s) << " " << io::axis_name(axis) << " map " << map.rows() << " x "
        << map.cols() << ", bin width " << map.bin_width << "\n";
  }
  return written;
}

std::vector<fs::path> cmd_train(const PipelineConfig& cfg, Axis axis, std::ostream& log) {
  const auto train_path = map_file(cfg, axis, Split::train);
  const auto test_path = map_file(cfg, axis, Split::test);
  require_file(train_path, "transform");
  require_file(test_path, "transform");
  const auto train_map = io::load_rpm_map(train_path);
  const auto test_map = io::load_rpm_map(test_path);
  if (train_map.cols() != test_map.cols()) throw std::runtime_error("train: train and test maps differ in width");

  auto model = cfg.model;
  model.input_len = train_map.cols();
  double best_loss = 0.0;
  double best_acc = -1.0;
  const std::size_t every = std::max<std::size_t>(1, cfg.train.epochs / 10);
  const auto ckpt = nn::train(model, to_dataset(train_map), to_dataset(test_map), cfg.train,
                              [&](const nn::EpochStats& e) {
                                if (e.test_accuracy > best_acc) {
                                  best_acc = e.test_accuracy;
                                  best_loss = e.test_loss;
                                }
                                if (e.epoch % every == 0 || e.epoch == cfg.train.epochs)
                                  log << "epoch " << e.epoch << ": train loss " << e.train_loss << ", test loss "
                                      << e.test_loss << ", test accuracy " << e.test_accuracy << "\n";
                              });
  ensure_dir(cfg.paths.model_dir);
  const auto path = checkpoint_file(cfg, axis);
  nn::save_weights(ckpt, path);
  log << std::fixed << std::setprecision(4) << "train: " << io::axis_name(axis)
      << " test accuracy " << ckpt.best_test_accuracy << ", test loss " << best_loss << " (epoch "
      << ckpt.epoch_of_best << ")\n"
      << std::defaultfloat;
  return {path};
}

std::vector<fs::path> cmd_explain(const PipelineConfig& cfg, xai::Method method, Label cls, Axis axis,
                                  std::ostream& log) {
  const auto ckpt_path = checkpoint_file(cfg, axis);
  const auto test_path = map_file(cfg, axis, Split::test);
  require_file(ckpt_path, "train");
  require_file(test_path, "transform");
  const auto ckpt = nn::load_weights(ckpt_path);
  const auto test_map = io::load_rpm_map(test_path);
  if (test_map.cols() != ckpt.network.config.input_len)
    throw std::runtime_error("explain: map width does not match the checkpoint");
  const auto class_map = select_class(test_map, cls);
  if (class_map.rows() == 0) throw std::runtime_error("explain: no test rows of class " + std::string(label_name(cls)));

  xai::SaliencyMap sal;
  if (method == xai::Method::lime_global) {
    auto opposite_map = class_map;
    opposite_map.values = pair_by_speed(class_map, select_class(test_map, opposite(cls)));
    sal = xai::explain_lime(ckpt, class_map, opposite_map, cls, cfg.lime);
  } else {
    sal = xai::explain_rows(ckpt, class_map, method, cls, cfg.lrp_eps);
  }
  ensure_dir(cfg.paths.output_dir);
  const auto path = saliency_file(cfg, axis, method, cls);
  io::save_saliency(sal, path);
  std::vector<fs::path> written{path};
  if (cfg.spectral.write_csv) {
    auto csv = path;
    csv.replace_extension(".csv");
    io::write_saliency_csv(sal, csv);
    written.push_back(csv);
  }
  log << "explain: " << xai::method_name(method) << " for " << label_name(cls) << " on " << sal.values.rows()
      << " rows\n";
  return written;
}

std::vector<fs::path> cmd_render(const PipelineConfig& cfg, const fs::path& map_path,
                                 const std::optional<fs::path>& out, std::ostream& log) {
  const auto kind = io::peek_map_kind(map_path);
  if (!kind) throw std::runtime_error(map_path.string() + " is not a map file");
  viz::RenderSpec spec;
  Matrix values;
  if (*kind == io::MapKind::saliency) {
    const auto sal = io::load_saliency(map_path);
    spec = viz::render_spec_for(sal.method);
    values = sal.values;
  } else {
    spec = viz::render_spec_for_input();
    values = io::load_rpm_map(map_path).values;
  }
  spec.cell_width = cfg.render.cell_width;
  spec.cell_height = cfg.render.cell_height;
  fs::path target = out.value_or(fs::path(map_path).replace_extension(".ppm"));
  if (target.has_parent_path()) ensure_dir(target.parent_path());
  viz::render_map(values, spec, target);
  log << "render: " << target.string() << "\n";
  return {target};
}

}  // namespace vibxai::pipeline
