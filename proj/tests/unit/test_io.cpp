#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "vibxai/io.hpp"

using namespace vibxai;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& name) : path(std::filesystem::temp_directory_path() / ("vibxai_io_" + name)) {
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

SignalConfig small_signal() {
  SignalConfig c;
  c.window_len = 256;
  c.windows_per_class = 4;
  return c;
}

}  // namespace

TEST_CASE("dataset csv round trip is exact") {
  TempDir dir("dataset");
  const auto train = build_dataset(small_signal()).first.windows;
  const auto path = dir.path / "train.csv";
  io::write_dataset_csv(train, path);
  CHECK(io::read_dataset_csv(path) == train);
}

TEST_CASE("recording csv ingests back into identical windows") {
  TempDir dir("ingest");
  const auto windows = build_dataset(small_signal()).first.windows;
  for (Label label : {Label::normal, Label::cutoff}) {
    std::vector<TimeWindow> subset;
    for (const auto& w : windows)
      if (w.label == label) subset.push_back(w);
    const auto path = dir.path / (std::string(label_name(label)) + ".csv");
    io::write_recording_csv(subset, path, "speed", "accel");
    io::IngestSpec spec;
    spec.path = path;
    spec.rpm_column = "speed";
    spec.vibration_column = "accel";
    spec.window_len = 256;
    spec.label = label;
    CHECK(io::ingest_csv(spec) == subset);
  }
}

TEST_CASE("ingest counts windows, averages rpm and filters") {
  TempDir dir("count");
  const auto path = dir.path / "rec.csv";
  {
    std::ofstream out(path);
    out << "time,vib,rpm\n";
    for (std::size_t i = 0; i < 10 * 64 + 17; ++i) out << i << "," << (i % 5) * 0.1 << "," << 1500 + (i / 64) * 100 << "\n";
  }
  io::IngestSpec spec;
  spec.path = path;
  spec.rpm_column = "rpm";
  spec.vibration_column = "vib";
  spec.window_len = 64;
  auto windows = io::ingest_csv(spec);
  REQUIRE(windows.size() == 10);  // the 17-sample tail is dropped
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(windows[i].rpm == 1500.0 + 100.0 * i);
    CHECK(windows[i].samples.size() == 64);
  }
  spec.rpm_min = 1600;
  spec.rpm_max = 2000;
  windows = io::ingest_csv(spec);
  CHECK(windows.size() == 5);
}

TEST_CASE("ingest reports problems with line numbers") {
  TempDir dir("bad");
  const auto path = dir.path / "bad.csv";
  write_text(path, "rpm,vib\n1500,0.1\n1500,abc\n");
  io::IngestSpec spec;
  spec.path = path;
  spec.rpm_column = "rpm";
  spec.vibration_column = "vib";
  spec.window_len = 2;
  try {
    io::ingest_csv(spec);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  spec.vibration_column = "missing";
  CHECK_THROWS_AS(io::ingest_csv(spec), std::runtime_error);
  spec.vibration_column = "vib";
  spec.window_len = 3;
  CHECK_THROWS_AS(io::ingest_csv(spec), std::invalid_argument);
  spec.window_len = 2;
  spec.path = dir.path / "nope.csv";
  CHECK_THROWS_AS(io::ingest_csv(spec), std::runtime_error);
}

TEST_CASE("map files round trip in binary and csv form") {
  TempDir dir("maps");
  const auto windows = build_dataset(small_signal()).second.windows;
  const auto map = order_rpm_map(windows, 4096.0, 20.0, 100);
  io::save_rpm_map(map, dir.path / "m.rpm");
  CHECK(io::load_rpm_map(dir.path / "m.rpm") == map);
  io::write_rpm_map_csv(map, dir.path / "m.csv");
  CHECK(io::read_rpm_map_csv(dir.path / "m.csv") == map);
  CHECK(io::peek_map_kind(dir.path / "m.rpm") == io::MapKind::rpm_map);
  CHECK_FALSE(io::peek_map_kind(dir.path / "m.csv").has_value());

  xai::SaliencyMap sal;
  sal.values = map.values;
  sal.rpm = map.rpm;
  sal.axis = Axis::order;
  sal.bin_width = map.bin_width;
  sal.method = xai::Method::scorecam;
  sal.class_explained = Label::normal;
  io::save_saliency(sal, dir.path / "s.sal");
  CHECK(io::load_saliency(dir.path / "s.sal") == sal);
  io::write_saliency_csv(sal, dir.path / "s.csv");
  CHECK(io::read_saliency_csv(dir.path / "s.csv") == sal);
  CHECK(io::peek_map_kind(dir.path / "s.sal") == io::MapKind::saliency);
  CHECK_THROWS(io::load_rpm_map(dir.path / "s.sal"));
  CHECK_THROWS(io::load_saliency(dir.path / "m.rpm"));
}

TEST_CASE("truncated map files are rejected") {
  TempDir dir("trunc");
  RpmMap map;
  map.values = Matrix(2, 3, 1.5);
  map.rpm = {600, 700};
  map.labels = {Label::normal, Label::cutoff};
  const auto p = dir.path / "t.rpm";
  io::save_rpm_map(map, p);
  std::filesystem::resize_file(p, std::filesystem::file_size(p) - 4);
  CHECK_THROWS_AS(io::load_rpm_map(p), std::runtime_error);
  write_text(p, "");
  CHECK_THROWS_AS(io::load_rpm_map(p), std::runtime_error);
}

TEST_CASE("dataset csv errors name the line") {
  TempDir dir("dserr");
  const auto p = dir.path / "d.csv";
  write_text(p, "rpm,label,s0,s1\n600,normal,1,2\n700,cutoff,1\n");
  try {
    io::read_dataset_csv(p);
    FAIL("expected an error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find(":3:") != std::string::npos);
  }
  write_text(p, "time,label,s0\n");
  CHECK_THROWS(io::read_dataset_csv(p));
}
