#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "vibxai/synth.hpp"

using namespace vibxai;

namespace {

SignalConfig quiet() {
  SignalConfig c;
  c.noise_std = 0.0;
  c.add1_amp = 0.0;
  c.add2_amp = 0.0;
  return c;
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_CASE("clip") {
  CHECK(clip(0.9, 0.7) == 0.7);
  CHECK(clip(-0.9, 0.7) == -0.7);
  CHECK(clip(0.5, 0.7) == 0.5);
  CHECK_THROWS_AS(clip(0.1, 0.0), std::invalid_argument);
}

TEST_CASE("labels parse by name and number") {
  CHECK(parse_label("normal") == Label::normal);
  CHECK(parse_label("0") == Label::normal);
  CHECK(parse_label("cutoff") == Label::cutoff);
  CHECK(parse_label("fault") == Label::cutoff);
  CHECK(parse_label("1") == Label::cutoff);
  CHECK(opposite(Label::normal) == Label::cutoff);
  CHECK_THROWS(parse_label("broken"));
}

TEST_CASE("pure windows reach their amplitude") {
  const auto cfg = quiet();
  for (double rpm : {600.0, 1234.5, 2400.0}) {
    std::mt19937_64 a(7), b(7);
    const auto normal = make_window(cfg, rpm, Label::normal, a);
    const auto cutoff = make_window(cfg, rpm, Label::cutoff, b);
    CHECK(max_abs(normal.samples) <= cfg.chirp_amp);
    CHECK(max_abs(normal.samples) > 0.999 * cfg.chirp_amp);
    CHECK(max_abs(cutoff.samples) == cfg.clip_level);
  }
}

TEST_CASE("matched seeds differ only where the chirp is clipped") {
  SignalConfig cfg;  // adds and noise on: they must cancel exactly
  for (std::uint64_t seed : {1ULL, 99ULL, 123456789ULL}) {
    std::mt19937_64 a(seed), b(seed), c(seed);
    const auto normal = make_window(cfg, 1500.0, Label::normal, a);
    const auto cutoff = make_window(cfg, 1500.0, Label::cutoff, b);
    // Recover the phase the generator drew to rebuild the chirp.
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const double phi0 = phase(c);
    std::size_t differing = 0;
    for (std::size_t n = 0; n < cfg.window_len; ++n) {
      const double t = static_cast<double>(n) / cfg.sample_rate_hz;
      const double chirp = cfg.chirp_amp * std::sin(2.0 * std::numbers::pi * 25.0 * t + phi0);
      const double diff = cutoff.samples[n] - normal.samples[n];
      if (std::abs(chirp) <= cfg.clip_level) {
        CHECK(diff == 0.0);
      } else {
        CHECK(diff != 0.0);
        CHECK(diff == doctest::Approx(clip(chirp, cfg.clip_level) - chirp).epsilon(1e-9));
        ++differing;
      }
    }
    CHECK(differing > 0);
  }
}

TEST_CASE("rpm outside the configured range is rejected") {
  SignalConfig cfg;
  std::mt19937_64 rng(1);
  CHECK_THROWS_AS(make_window(cfg, 500.0, Label::normal, rng), std::invalid_argument);
  CHECK_THROWS_AS(make_window(cfg, 2401.0, Label::normal, rng), std::invalid_argument);
}

TEST_CASE("dataset shape, balance and ordering") {
  SignalConfig cfg;
  cfg.windows_per_class = 100;
  cfg.window_len = 256;
  const auto [train, test] = build_dataset(cfg);
  CHECK(train.windows.size() == 200);
  CHECK(test.windows.size() == 200);
  CHECK(train.split == Split::train);
  CHECK(test.split == Split::test);
  for (const auto* ds : {&train, &test}) {
    const auto cutoffs = std::count_if(ds->windows.begin(), ds->windows.end(),
                                       [](const TimeWindow& w) { return w.label == Label::cutoff; });
    CHECK(cutoffs == 100);
    CHECK(std::is_sorted(ds->windows.begin(), ds->windows.end(),
                         [](const TimeWindow& a, const TimeWindow& b) { return a.rpm < b.rpm; }));
    CHECK(ds->windows.front().rpm == cfg.rpm_start);
    CHECK(ds->windows.back().rpm == cfg.rpm_end);
  }
  CHECK(train.windows[0].samples != test.windows[0].samples);
}

TEST_CASE("dataset generation is a pure function of the config") {
  SignalConfig cfg;
  cfg.windows_per_class = 5;
  cfg.window_len = 512;
  const auto a = build_dataset(cfg);
  const auto b = build_dataset(cfg);
  CHECK(a.first.windows == b.first.windows);
  CHECK(a.second.windows == b.second.windows);
  cfg.seed += 1;
  const auto c = build_dataset(cfg);
  CHECK(c.first.windows != a.first.windows);
}

TEST_CASE("config validation") {
  SignalConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  auto bad = cfg;
  bad.window_len = 1000;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.rpm_end = bad.rpm_start - 1.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.clip_level = 0.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.windows_per_class = 0;
  CHECK_THROWS(bad.validate());
}
