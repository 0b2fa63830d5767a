#include "vibxai/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "binio.hpp"

namespace vibxai::io {
namespace {

constexpr std::array<char, 8> kMapMagic{'V', 'I', 'B', 'X', 'M', 'A', 'P', '1'};

void append_number(std::string& out, double v) {
  std::array<char, 32> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  out.append(buf.data(), res.ptr);
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  for (auto& f : fields) {
    while (!f.empty() && (f.front() == ' ' || f.front() == '\t')) f.remove_prefix(1);
    while (!f.empty() && (f.back() == ' ' || f.back() == '\t' || f.back() == '\r')) f.remove_suffix(1);
  }
  return fields;
}

std::optional<double> parse_number(std::string_view text) {
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty()) return std::nullopt;
  return v;
}

[[noreturn]] void parse_error(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw std::runtime_error(path.string() + ":" + std::to_string(line) + ": " + what);
}

double field_number(const std::filesystem::path& path, std::size_t line, std::string_view text) {
  const auto v = parse_number(text);
  if (!v) parse_error(path, line, "not a number: '" + std::string(text) + "'");
  return *v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return in;
}

// Mean that is exact when every value is identical.
double stable_mean(std::span<const double> v) {
  double acc = 0.0;
  for (double x : v) acc += x - v[0];
  return v[0] + acc / static_cast<double>(v.size());
}

}  // namespace

std::string_view axis_name(Axis axis) noexcept { return axis == Axis::frequency ? "frequency" : "order"; }

Axis parse_axis(std::string_view text) {
  if (text == "frequency") return Axis::frequency;
  if (text == "order") return Axis::order;
  throw std::invalid_argument("unknown axis/domain '" + std::string(text) + "'");
}

void write_dataset_csv(std::span<const TimeWindow> windows, const std::filesystem::path& path) {
  auto out = open_out(path);
  const std::size_t n = windows.empty() ? 0 : windows.front().samples.size();
  std::string line = "rpm,label";
  for (std::size_t i = 0; i < n; ++i) line += ",s" + std::to_string(i);
  out << line << '\n';
  for (const auto& w : windows) {
    if (w.samples.size() != n) throw std::invalid_argument("write_dataset_csv: windows differ in length");
    line.clear();
    append_number(line, w.rpm);
    line += ',';
    line += label_name(w.label);
    for (double s : w.samples) {
      line += ',';
      append_number(line, s);
    }
    out << line << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TimeWindow> read_dataset_csv(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line)) parse_error(path, 1, "missing header");
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "rpm" || header[1] != "label")
    parse_error(path, 1, "expected header 'rpm,label,s0,...'");
  const std::size_t n = header.size() - 2;
  std::vector<TimeWindow> windows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() != n + 2)
      parse_error(path, line_no, "expected " + std::to_string(n + 2) + " fields, found " + std::to_string(fields.size()));
    TimeWindow w;
    w.rpm = field_number(path, line_no, fields[0]);
    try {
      w.label = parse_label(fields[1]);
    } catch (const std::invalid_argument& e) {
      parse_error(path, line_no, e.what());
    }
    w.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) w.samples[i] = field_number(path, line_no, fields[i + 2]);
    windows.push_back(std::move(w));
  }
  return windows;
}

void write_recording_csv(std::span<const TimeWindow> windows, const std::filesystem::path& path,
                         const std::string& rpm_column, const std::string& vibration_column) {
  auto out = open_out(path);
  out << rpm_column << ',' << vibration_column << '\n';
  std::string line;
  for (const auto& w : windows) {
    for (double s : w.samples) {
      line.clear();
      append_number(line, w.rpm);
      line += ',';
      append_number(line, s);
      out << line << '\n';
    }
  }
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::vector<TimeWindow> ingest_csv(const IngestSpec& spec) {
  if (spec.window_len < 2 || (spec.window_len & (spec.window_len - 1)) != 0)
    throw std::invalid_argument("ingest: window_len must be a power of two");
  if (spec.rpm_column.empty() || spec.vibration_column.empty())
    throw std::invalid_argument("ingest: rpm_column and vibration_column are required");
  auto in = open_in(spec.path);
  std::string line;
  if (!std::getline(in, line)) parse_error(spec.path, 1, "missing header");
  const auto header = split_fields(line);
  std::optional<std::size_t> rpm_idx;
  std::optional<std::size_t> vib_idx;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == spec.rpm_column) rpm_idx = i;
    if (header[i] == spec.vibration_column) vib_idx = i;
  }
  if (!rpm_idx) parse_error(spec.path, 1, "no column named '" + spec.rpm_column + "'");
  if (!vib_idx) parse_error(spec.path, 1, "no column named '" + spec.vibration_column + "'");
  const std::size_t needed = std::max(*rpm_idx, *vib_idx) + 1;

  std::vector<TimeWindow> windows;
  std::vector<double> rpm_buf;
  std::vector<double> vib_buf;
  rpm_buf.reserve(spec.window_len);
  vib_buf.reserve(spec.window_len);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_fields(line);
    if (fields.size() < needed)
      parse_error(spec.path, line_no, "expected at least " + std::to_string(needed) + " fields");
    rpm_buf.push_back(field_number(spec.path, line_no, fields[*rpm_idx]));
    vib_buf.push_back(field_number(spec.path, line_no, fields[*vib_idx]));
    if (vib_buf.size() == spec.window_len) {
      const double rpm = stable_mean(rpm_buf);
      if (rpm >= spec.rpm_min && rpm <= spec.rpm_max && rpm > 0.0)
        windows.push_back(TimeWindow{vib_buf, rpm, spec.label});
      rpm_buf.clear();
      vib_buf.clear();
    }
  }
  return windows;
}

// ---- map files ----

namespace {

void write_map_header(vibxai::detail::ByteWriter& w, MapKind kind, Axis axis, double bin_width, std::size_t rows,
                      std::size_t cols) {
  w.raw(kMapMagic.data(), kMapMagic.size());
  w.u8(static_cast<std::uint8_t>(kind));
  w.u8(static_cast<std::uint8_t>(axis));
  w.f64(bin_width);
  w.u64(rows);
  w.u64(cols);
}

struct MapHeader {
  MapKind kind;
  Axis axis;
  double bin_width;
  std::uint64_t rows;
  std::uint64_t cols;
};

MapHeader read_map_header(vibxai::detail::ByteReader& r) {
  std::array<char, 8> magic{};
  r.raw(magic.data(), magic.size());
  if (magic != kMapMagic) r.fail("bad magic");
  MapHeader h{};
  const auto kind = r.u8();
  if (kind > 1) r.fail("unknown map kind");
  h.kind = static_cast<MapKind>(kind);
  const auto axis = r.u8();
  if (axis > 1) r.fail("unknown axis");
  h.axis = static_cast<Axis>(axis);
  h.bin_width = r.f64();
  h.rows = r.u64();
  h.cols = r.u64();
  if (h.cols != 0 && h.rows > (std::uint64_t{1} << 40) / h.cols) r.fail("implausible map size");
  return h;
}

Label read_label_byte(vibxai::detail::ByteReader& r) {
  const auto v = r.u8();
  if (v > 1) r.fail("bad label byte");
  return static_cast<Label>(v);
}

void read_values(vibxai::detail::ByteReader& r, Matrix& m) {
  r.need(8 * m.data().size());
  for (auto& v : m.data()) v = r.f64();
}

}  // namespace

std::optional<MapKind> peek_map_kind(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::array<char, 9> head{};
  in.read(head.data(), head.size());
  if (in.gcount() != 9 || !std::equal(kMapMagic.begin(), kMapMagic.end(), head.begin())) return std::nullopt;
  if (head[8] > 1) return std::nullopt;
  return static_cast<MapKind>(head[8]);
}

void save_rpm_map(const RpmMap& map, const std::filesystem::path& path) {
  if (map.rpm.size() != map.rows() || map.labels.size() != map.rows())
    throw std::invalid_argument("save_rpm_map: rpm/label count mismatch");
  vibxai::detail::ByteWriter w;
  write_map_header(w, MapKind::rpm_map, map.axis, map.bin_width, map.rows(), map.cols());
  for (std::size_t r = 0; r < map.rows(); ++r) {
    w.f64(map.rpm[r]);
    w.u8(static_cast<std::uint8_t>(map.labels[r]));
  }
  for (double v : map.values.data()) w.f64(v);
  w.write_file(path);
}

RpmMap load_rpm_map(const std::filesystem::path& path) {
  auto r = vibxai::detail::ByteReader::from_file(path, "rpm map " + path.string());
  const auto h = read_map_header(r);
  if (h.kind != MapKind::rpm_map) r.fail("file holds a saliency map");
  RpmMap map;
  map.axis = h.axis;
  map.bin_width = h.bin_width;
  r.need(9 * h.rows);
  for (std::uint64_t i = 0; i < h.rows; ++i) {
    map.rpm.push_back(r.f64());
    map.labels.push_back(read_label_byte(r));
  }
  map.values = Matrix(h.rows, h.cols);
  read_values(r, map.values);
  r.expect_end();
  return map;
}

void save_saliency(const xai::SaliencyMap& map, const std::filesystem::path& path) {
  if (map.rpm.size() != map.values.rows()) throw std::invalid_argument("save_saliency: rpm count mismatch");
  vibxai::detail::ByteWriter w;
  write_map_header(w, MapKind::saliency, map.axis, map.bin_width, map.values.rows(), map.values.cols());
  w.u8(static_cast<std::uint8_t>(map.method));
  w.u8(static_cast<std::uint8_t>(map.class_explained));
  for (double v : map.rpm) w.f64(v);
  for (double v : map.values.data()) w.f64(v);
  w.write_file(path);
}

xai::SaliencyMap load_saliency(const std::filesystem::path& path) {
  auto r = vibxai::detail::ByteReader::from_file(path, "saliency map " + path.string());
  const auto h = read_map_header(r);
  if (h.kind != MapKind::saliency) r.fail("file holds an rpm map");
  xai::SaliencyMap map;
  map.axis = h.axis;
  map.bin_width = h.bin_width;
  const auto method = r.u8();
  if (method > static_cast<std::uint8_t>(xai::Method::lime_global)) r.fail("unknown method");
  map.method = static_cast<xai::Method>(method);
  map.class_explained = read_label_byte(r);
  r.need(8 * h.rows);
  for (std::uint64_t i = 0; i < h.rows; ++i) map.rpm.push_back(r.f64());
  map.values = Matrix(h.rows, h.cols);
  read_values(r, map.values);
  r.expect_end();
  return map;
}

// ---- CSV map forms ----

namespace {

struct CsvMap {
  std::vector<std::pair<std::string, std::string>> meta;
  std::vector<std::vector<std::string>> rows;  // raw leading columns (rpm[, label])
  Matrix values;
};

CsvMap read_csv_map(const std::filesystem::path& path, std::size_t lead_cols) {
  auto in = open_in(path);
  CsvMap out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.rfind("# ", 0) == 0) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) parse_error(path, line_no, "metadata line without '='");
      out.meta.emplace_back(line.substr(2, eq - 2), line.substr(eq + 1));
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(line);
    if (fields.size() <= lead_cols) parse_error(path, line_no, "row has no values");
    std::vector<std::string> lead;
    for (std::size_t i = 0; i < lead_cols; ++i) lead.emplace_back(fields[i]);
    std::vector<double> vals;
    for (std::size_t i = lead_cols; i < fields.size(); ++i) vals.push_back(field_number(path, line_no, fields[i]));
    if (!out.values.empty() && vals.size() != out.values.cols()) parse_error(path, line_no, "ragged row");
    out.values.append_row(vals);
    out.rows.push_back(std::move(lead));
  }
  return out;
}

std::string meta_value(const CsvMap& m, const std::string& key, const std::filesystem::path& path) {
  for (const auto& [k, v] : m.meta)
    if (k == key) return v;
  throw std::runtime_error(path.string() + ": missing metadata '" + key + "'");
}

void write_csv_rows(std::ofstream& out, const Matrix& values, const std::vector<double>& rpm,
                    const std::vector<Label>* labels) {
  std::string line = labels != nullptr ? "rpm,label" : "rpm";
  for (std::size_t c = 0; c < values.cols(); ++c) line += ",b" + std::to_string(c);
  out << line << '\n';
  for (std::size_t r = 0; r < values.rows(); ++r) {
    line.clear();
    append_number(line, rpm[r]);
    if (labels != nullptr) {
      line += ',';
      line += label_name((*labels)[r]);
    }
    for (double v : values.row(r)) {
      line += ',';
      append_number(line, v);
    }
    out << line << '\n';
  }
}

}  // namespace

void write_rpm_map_csv(const RpmMap& map, const std::filesystem::path& path) {
  auto out = open_out(path);
  std::string bw;
  append_number(bw, map.bin_width);
  out << "# kind=rpm_map\n# axis=" << axis_name(map.axis) << "\n# bin_width=" << bw << "\n# rows=" << map.rows()
      << "\n";
  write_csv_rows(out, map.values, map.rpm, &map.labels);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

RpmMap read_rpm_map_csv(const std::filesystem::path& path) {
  const auto csv = read_csv_map(path, 2);
  if (meta_value(csv, "kind", path) != "rpm_map") throw std::runtime_error(path.string() + ": not an rpm map");
  RpmMap map;
  map.axis = parse_axis(meta_value(csv, "axis", path));
  map.bin_width = field_number(path, 0, meta_value(csv, "bin_width", path));
  map.values = csv.values;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) {
    map.rpm.push_back(field_number(path, i, csv.rows[i][0]));
    map.labels.push_back(parse_label(csv.rows[i][1]));
  }
  return map;
}

void write_saliency_csv(const xai::SaliencyMap& map, const std::filesystem::path& path) {
  auto out = open_out(path);
  std::string bw;
  append_number(bw, map.bin_width);
  out << "# kind=saliency\n# axis=" << axis_name(map.axis) << "\n# bin_width=" << bw
      << "\n# method=" << xai::method_name(map.method) << "\n# class=" << label_name(map.class_explained)
      << "\n# rows=" << map.values.rows() << "\n";
  write_csv_rows(out, map.values, map.rpm, nullptr);
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

xai::SaliencyMap read_saliency_csv(const std::filesystem::path& path) {
  const auto csv = read_csv_map(path, 1);
  if (meta_value(csv, "kind", path) != "saliency") throw std::runtime_error(path.string() + ": not a saliency map");
  xai::SaliencyMap map;
  map.axis = parse_axis(meta_value(csv, "axis", path));
  map.bin_width = field_number(path, 0, meta_value(csv, "bin_width", path));
  map.method = xai::parse_method(meta_value(csv, "method", path));
  map.class_explained = parse_label(meta_value(csv, "class", path));
  map.values = csv.values;
  for (std::size_t i = 0; i < csv.rows.size(); ++i) map.rpm.push_back(field_number(path, i, csv.rows[i][0]));
  return map;
}

}  // namespace vibxai::io
