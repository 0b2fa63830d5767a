#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "vibxai/io.hpp"
#include "vibxai/pipeline.hpp"

namespace py = pybind11;
using namespace vibxai;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

py::array_t<double> to_numpy(const std::vector<double>& v) {
  py::array_t<double> out(v.size());
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw std::invalid_argument("expected a 2-d array");
  Matrix m(a.shape(0), a.shape(1));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

std::span<const double> to_span(const Array& a) {
  if (a.ndim() != 1) throw std::invalid_argument("expected a 1-d array");
  return {a.data(), static_cast<std::size_t>(a.size())};
}

WindowFunction window_of(const std::string& name) {
  if (name == "hann") return WindowFunction::hann;
  if (name == "rect") return WindowFunction::rect;
  throw std::invalid_argument("unknown window '" + name + "'");
}

Axis axis_of(const std::string& name) { return io::parse_axis(name); }

std::vector<TimeWindow> windows_of(const Array& samples, const Array& rpm) {
  const Matrix s = to_matrix(samples);
  const auto r = to_span(rpm);
  if (r.size() != s.rows()) throw std::invalid_argument("rpm length must match the number of windows");
  std::vector<TimeWindow> out(s.rows());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    out[i].samples.assign(s.row(i).begin(), s.row(i).end());
    out[i].rpm = r[i];
  }
  return out;
}

py::dict map_dict(const RpmMap& m) {
  py::dict d;
  d["values"] = to_numpy(m.values);
  d["rpm"] = to_numpy(m.rpm);
  d["axis"] = std::string(io::axis_name(m.axis));
  d["bin_width"] = m.bin_width;
  return d;
}

py::dict split_dict(const LabeledDataset& ds) {
  const std::size_t n = ds.windows.size();
  const std::size_t len = n ? ds.windows.front().samples.size() : 0;
  py::array_t<double> samples({n, len});
  py::array_t<double> rpm(n);
  py::array_t<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(ds.windows[i].samples.begin(), ds.windows[i].samples.end(), samples.mutable_data() + i * len);
    rpm.mutable_data()[i] = ds.windows[i].rpm;
    labels.mutable_data()[i] = class_index(ds.windows[i].label);
  }
  py::dict d;
  d["samples"] = samples;
  d["rpm"] = rpm;
  d["labels"] = labels;
  return d;
}

std::vector<std::string> strings(const std::vector<std::filesystem::path>& paths) {
  std::vector<std::string> out;
  for (const auto& p : paths) out.push_back(p.string());
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Vibration map classification and saliency";

  py::class_<SignalConfig>(m, "SignalConfig")
      .def(py::init<>())
      .def_readwrite("sample_rate_hz", &SignalConfig::sample_rate_hz)
      .def_readwrite("window_len", &SignalConfig::window_len)
      .def_readwrite("rpm_start", &SignalConfig::rpm_start)
      .def_readwrite("rpm_end", &SignalConfig::rpm_end)
      .def_readwrite("windows_per_class", &SignalConfig::windows_per_class)
      .def_readwrite("chirp_amp", &SignalConfig::chirp_amp)
      .def_readwrite("clip_level", &SignalConfig::clip_level)
      .def_readwrite("add1_freq_hz", &SignalConfig::add1_freq_hz)
      .def_readwrite("add2_freq_hz", &SignalConfig::add2_freq_hz)
      .def_readwrite("add1_amp", &SignalConfig::add1_amp)
      .def_readwrite("add2_amp", &SignalConfig::add2_amp)
      .def_readwrite("noise_std", &SignalConfig::noise_std)
      .def_readwrite("seed", &SignalConfig::seed)
      .def("validate", &SignalConfig::validate);

  m.def("build_dataset", [](const SignalConfig& cfg) {
    const auto [train, test] = build_dataset(cfg);
    return py::make_tuple(split_dict(train), split_dict(test));
  }, py::arg("config"));

  m.def("amplitude_spectrum", [](const Array& samples, double fs, const std::string& window) {
    const auto s = amplitude_spectrum(to_span(samples), fs, window_of(window));
    return py::make_tuple(to_numpy(s.bins), s.df_hz);
  }, py::arg("samples"), py::arg("sample_rate_hz"), py::arg("window") = "hann");

  m.def("freq_rpm_map", [](const Array& samples, const Array& rpm, double fs, const std::string& window) {
    return map_dict(freq_rpm_map(windows_of(samples, rpm), fs, window_of(window)));
  }, py::arg("samples"), py::arg("rpm"), py::arg("sample_rate_hz"), py::arg("window") = "hann");

  m.def("order_rpm_map", [](const Array& samples, const Array& rpm, double fs, double o_max, std::size_t bins,
                            const std::string& window) {
    return map_dict(order_rpm_map(windows_of(samples, rpm), fs, o_max, bins, window_of(window)));
  }, py::arg("samples"), py::arg("rpm"), py::arg("sample_rate_hz"), py::arg("order_max"), py::arg("order_bins"),
     py::arg("window") = "hann");

  m.def("default_order_max", &default_order_max, py::arg("sample_rate_hz"), py::arg("rpm_max"));

  py::class_<nn::Checkpoint>(m, "Checkpoint")
      .def_property_readonly("input_len", [](const nn::Checkpoint& c) { return c.network.config.input_len; })
      .def_readonly("best_test_accuracy", &nn::Checkpoint::best_test_accuracy)
      .def_readonly("epoch_of_best", &nn::Checkpoint::epoch_of_best)
      .def("predict", [](const nn::Checkpoint& c, const Array& rows) { return to_numpy(nn::predict(c, to_matrix(rows)).probs); },
           py::arg("rows"))
      .def("save", [](const nn::Checkpoint& c, const std::filesystem::path& p) { nn::save_weights(c, p); }, py::arg("path"));

  m.def("load_checkpoint", &nn::load_weights, py::arg("path"));

  m.def("explain", [](const nn::Checkpoint& c, const Array& sample, const std::string& method, const std::string& cls,
                      double lrp_eps) {
    const auto rows = to_span(sample);
    RpmMap one;
    one.values.append_row(rows);
    one.rpm = {0.0};
    one.labels = {parse_label(cls)};
    const auto sal = xai::explain_rows(c, one, xai::parse_method(method), parse_label(cls), lrp_eps);
    return to_numpy(std::vector<double>(sal.values.row(0).begin(), sal.values.row(0).end()));
  }, py::arg("checkpoint"), py::arg("sample"), py::arg("method"), py::arg("cls") = "cutoff", py::arg("lrp_eps") = 1e-2);

  m.def("render", [](const Array& values, const std::string& method, std::size_t cell_width, std::size_t cell_height) {
    viz::RenderSpec spec = method.empty() ? viz::render_spec_for_input() : viz::render_spec_for(xai::parse_method(method));
    spec.cell_width = cell_width;
    spec.cell_height = cell_height;
    const auto img = viz::rasterize(to_matrix(values), spec);
    py::array_t<std::uint8_t> out({img.height, img.width, std::size_t(3)});
    std::copy(img.rgb.begin(), img.rgb.end(), out.mutable_data());
    return out;
  }, py::arg("values"), py::arg("method") = "", py::arg("cell_width") = 1, py::arg("cell_height") = 1);

  py::class_<pipeline::PipelineConfig>(m, "Config")
      .def(py::init<>())
      .def_static("from_json", [](const std::string& text, const std::filesystem::path& base) {
        return pipeline::config_from_json(text, base);
      }, py::arg("text"), py::arg("base_dir") = std::filesystem::path{})
      .def_static("load", &pipeline::load_config, py::arg("path"))
      .def("to_json", &pipeline::config_to_json)
      .def("validate", &pipeline::PipelineConfig::validate);

  auto run = [](auto&& fn) {
    std::ostringstream log;
    auto paths = strings(fn(log));
    return py::make_tuple(paths, log.str());
  };
  m.def("cmd_generate", [run](const pipeline::PipelineConfig& c) {
    return run([&](std::ostream& log) { return pipeline::cmd_generate(c, log); });
  }, py::arg("config"));
  m.def("cmd_transform", [run](const pipeline::PipelineConfig& c, const std::string& axis) {
    return run([&](std::ostream& log) { return pipeline::cmd_transform(c, axis_of(axis), log); });
  }, py::arg("config"), py::arg("axis"));
  m.def("cmd_train", [run](const pipeline::PipelineConfig& c, const std::string& axis) {
    return run([&](std::ostream& log) { return pipeline::cmd_train(c, axis_of(axis), log); });
  }, py::arg("config"), py::arg("axis"));
  m.def("cmd_explain", [run](const pipeline::PipelineConfig& c, const std::string& method, const std::string& cls,
                             const std::string& axis) {
    return run([&](std::ostream& log) {
      return pipeline::cmd_explain(c, xai::parse_method(method), parse_label(cls), axis_of(axis), log);
    });
  }, py::arg("config"), py::arg("method"), py::arg("cls"), py::arg("axis"));
  m.def("cmd_render", [run](const pipeline::PipelineConfig& c, const std::filesystem::path& map,
                            std::optional<std::filesystem::path> out) {
    return run([&](std::ostream& log) { return pipeline::cmd_render(c, map, out, log); });
  }, py::arg("config"), py::arg("map_path"), py::arg("out") = std::nullopt);
}
