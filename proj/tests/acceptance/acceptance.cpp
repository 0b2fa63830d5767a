// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. `--only N[,M...]` restricts the run.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../support/oracles.hpp"
#include "vibxai/io.hpp"
#include "vibxai/nn.hpp"
#include "vibxai/pipeline.hpp"
#include "vibxai/spectral.hpp"
#include "vibxai/synth.hpp"
#include "vibxai/viz.hpp"
#include "vibxai/xai.hpp"

using namespace vibxai;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int prec = 4) {
  std::ostringstream s;
  s.precision(prec);
  s << v;
  return s.str();
}

struct TrainedDomain {
  nn::Checkpoint ckpt;
  RpmMap test;
};

// Default configuration end to end, computed at most once per domain.
const TrainedDomain& trained(Axis axis) {
  static std::map<Axis, TrainedDomain> cache;
  auto it = cache.find(axis);
  if (it != cache.end()) return it->second;
  const pipeline::PipelineConfig cfg;
  const auto [train, test] = build_dataset(cfg.signal);
  const auto train_map = pipeline::transform(cfg, train.windows, axis);
  auto test_map = pipeline::transform(cfg, test.windows, axis);
  auto model = cfg.model;
  model.input_len = train_map.cols();
  TrainedDomain d;
  d.ckpt = nn::train(model, pipeline::to_dataset(train_map), pipeline::to_dataset(test_map), cfg.train);
  d.test = std::move(test_map);
  return cache.emplace(axis, std::move(d)).first->second;
}

Outcome accuracy_criterion(Axis axis) {
  const auto& d = trained(axis);
  const auto pred = nn::predict(d.ckpt, d.test.values);
  const double acc = nn::accuracy(pred.labels, pipeline::to_dataset(d.test).labels);
  return {acc >= 0.99, "test accuracy " + fmt(acc) + " (best epoch " + std::to_string(d.ckpt.epoch_of_best) +
                           ", " + std::to_string(d.test.rows()) + " test windows)"};
}

Outcome gradient_oracle() {
  double worst = 0.0;
  std::size_t params = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto r = oracle::check_gradients(oracle::random_small_problem(1000 + s));
    worst = std::max(worst, r.max_rel_err);
    params += r.n_params;
  }
  return {worst < 1e-4, "max relative error " + fmt(worst, 3) + " over " + std::to_string(params) +
                            " parameters in 20 configs"};
}

Outcome lrp_conservation() {
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto ck = oracle::bias_free_checkpoint(500 + s, 128);
    std::mt19937_64 rng(s);
    const auto x = oracle::random_signal(128, rng);
    const auto r = xai::lrp(ck, x, static_cast<int>(s % 2), xai::LrpVariant::z);
    worst = std::max(worst, std::abs(r.relevance_sum - r.output_score) / std::abs(r.output_score));
  }
  return {worst < 1e-6, "max relative deviation " + fmt(worst, 3) + " on 10 nets"};
}

Outcome fft_correctness() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = std::size_t{1} << (4 + i % 9);
    const auto x = oracle::random_signal(n, rng);
    const auto spec = real_fft(x);
    double time_energy = 0.0;
    for (double v : x) time_energy += v * v;
    double freq_energy = std::norm(spec.front()) + std::norm(spec.back());
    for (std::size_t k = 1; k + 1 < spec.size(); ++k) freq_energy += 2.0 * std::norm(spec[k]);
    freq_energy /= static_cast<double>(n);
    worst = std::max(worst, std::abs(freq_energy - time_energy) / time_energy);
  }
  double amp_err = 0.0;
  for (auto window : {WindowFunction::rect, WindowFunction::hann})
    for (std::size_t k : {1u, 7u, 100u, 1000u, 2047u}) {
      const auto w = oracle::tone_window(static_cast<double>(k), 1000.0, 4096.0, 4096);
      const auto s = amplitude_spectrum(w.samples, 4096.0, window);
      amp_err = std::max(amp_err, std::abs(s.bins[k] - 1.0));
    }
  return {worst < 1e-9 && amp_err <= 1e-12,
          "Parseval relative error " + fmt(worst, 3) + ", unit-sine amplitude error " + fmt(amp_err, 3)};
}

Outcome order_ground_truth() {
  const double fs = 4096.0;
  const std::size_t n = 4096;
  const double o_max = default_order_max(fs, 2400.0);
  const std::size_t bins = default_order_bins(n);
  std::vector<TimeWindow> locked;
  for (int i = 0; i <= 60; ++i) {
    const double rpm = 600.0 + 30.0 * i;
    locked.push_back(oracle::tone_window(2.0 * rpm / 60.0, rpm, fs, n));
  }
  const auto map = order_rpm_map(locked, fs, o_max, bins);
  const double target = 2.0 / map.bin_width;
  std::size_t ok = 0;
  double worst = 0.0;
  for (std::size_t r = 0; r < map.rows(); ++r) {
    const double off = std::abs(static_cast<double>(oracle::argmax(map.values.row(r))) - target);
    worst = std::max(worst, off);
    if (off <= 1.0) ++ok;
  }
  const std::vector<TimeWindow> fixed{oracle::tone_window(500.0, 1500.0, fs, n)};
  const auto fixed_map = order_rpm_map(fixed, fs, o_max, bins);
  const double peak = static_cast<double>(oracle::argmax(fixed_map.values.row(0)));
  const double peak_off = std::abs(peak - 20.0 / fixed_map.bin_width);
  return {ok == map.rows() && peak_off <= 1.0,
          "order-2 rows within 1 bin: " + std::to_string(ok) + "/" + std::to_string(map.rows()) +
              " (worst " + fmt(worst) + "), 500 Hz @ 1500 rpm peak at order " + fmt(peak * fixed_map.bin_width)};
}

double band_mean(std::span<const double> v, const std::vector<double>& centres, double bin_width) {
  std::set<std::size_t> bins;
  for (double f : centres) {
    const auto c = static_cast<long>(std::lround(f / bin_width));
    for (long b = c - 2; b <= c + 2; ++b)
      if (b >= 0 && static_cast<std::size_t>(b) < v.size()) bins.insert(static_cast<std::size_t>(b));
  }
  double s = 0.0;
  for (auto b : bins) s += v[b];
  return s / static_cast<double>(bins.size());
}

Outcome saliency_selectivity() {
  const auto& d = trained(Axis::frequency);
  const pipeline::PipelineConfig cfg;
  const auto cut = select_class(d.test, Label::cutoff);
  std::vector<std::size_t> picks;
  for (std::size_t i = 0; i < 20; ++i) picks.push_back(i * (cut.rows() - 1) / 19);

  std::string detail;
  bool all = true;
  for (auto method : {xai::Method::gradcam, xai::Method::gradcam_pp, xai::Method::scorecam}) {
    std::size_t selective = 0;
    for (auto r : picks) {
      const auto row = cut.values.row(r);
      std::vector<double> sal;
      const int cls = class_index(Label::cutoff);
      if (method == xai::Method::gradcam) sal = xai::grad_cam(d.ckpt, row, cls).values;
      if (method == xai::Method::gradcam_pp) sal = xai::grad_cam_pp(d.ckpt, row, cls).values;
      if (method == xai::Method::scorecam) sal = xai::score_cam(d.ckpt, row, cls).values;
      const double f0 = cut.rpm[r] / 60.0;
      const double harmonic = band_mean(sal, {2 * f0, 3 * f0, 4 * f0, 5 * f0}, cut.bin_width);
      const double modes = band_mean(sal, {cfg.signal.add1_freq_hz, cfg.signal.add2_freq_hz}, cut.bin_width);
      if (harmonic > 0.0 && harmonic >= 2.0 * modes) ++selective;
    }
    all = all && selective >= 18;
    detail += std::string(xai::method_name(method)) + " " + std::to_string(selective) + "/20  ";
  }
  detail.pop_back();
  detail.pop_back();
  return {all, detail};
}

Outcome lime_planted() {
  std::size_t hits = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto toy = oracle::planted_toy(300 + s);
    const auto ck = oracle::train_toy(toy, 300 + s);
    xai::LimeConfig cfg;
    cfg.perturbations_per_config = 400;
    cfg.seed = s;
    const auto map = xai::lime_global(ck, toy.planted_rows, toy.normal_rows, 1, cfg);
    const auto k = oracle::argmax(map);
    if (k >= toy.lo && k < toy.hi) ++hits;
  }
  return {hits >= 19, "planted segment recovered in " + std::to_string(hits) + "/20 runs"};
}

std::vector<char> bytes_of(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  pipeline::PipelineConfig cfg;
  cfg.signal.window_len = 1024;
  cfg.signal.windows_per_class = 12;
  cfg.train.epochs = 6;
  const auto [train, test] = build_dataset(cfg.signal);
  const auto [train2, test2] = build_dataset(cfg.signal);
  const bool data_same = train.windows == train2.windows && test.windows == test2.windows;
  const auto tm = pipeline::transform(cfg, train.windows, Axis::frequency);
  const auto sm = pipeline::transform(cfg, test.windows, Axis::frequency);
  auto model = cfg.model;
  model.input_len = tm.cols();
  const auto a = nn::train(model, pipeline::to_dataset(tm), pipeline::to_dataset(sm), cfg.train);
  const auto b = nn::train(model, pipeline::to_dataset(tm), pipeline::to_dataset(sm), cfg.train);

  const auto dir = std::filesystem::temp_directory_path() / "vibxai_acceptance_det";
  std::filesystem::create_directories(dir);
  nn::save_weights(a, dir / "a.ckpt");
  nn::save_weights(b, dir / "b.ckpt");
  const bool ckpt_same = a == b && bytes_of(dir / "a.ckpt") == bytes_of(dir / "b.ckpt");

  const auto loaded = nn::load_weights(dir / "a.ckpt");
  const auto p0 = nn::predict(a, sm.values);
  const auto p1 = nn::predict(loaded, sm.values);
  const bool pred_same = p0.probs == p1.probs && p0.labels == p1.labels;

  const auto sal = xai::explain_rows(loaded, select_class(sm, Label::cutoff), xai::Method::gradcam, Label::cutoff);
  const auto spec = viz::render_spec_for(xai::Method::gradcam);
  viz::render_map(sal.values, spec, dir / "a.ppm");
  viz::render_map(sal.values, spec, dir / "b.ppm");
  const bool img_same = bytes_of(dir / "a.ppm") == bytes_of(dir / "b.ppm");
  std::filesystem::remove_all(dir);

  return {data_same && ckpt_same && pred_same && img_same,
          std::string("dataset ") + (data_same ? "identical" : "DIFFERS") + ", checkpoint " +
              (ckpt_same ? "identical" : "DIFFERS") + ", reloaded predictions " + (pred_same ? "identical" : "DIFFER") +
              ", images " + (img_same ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string item;
      while (std::getline(ss, item, ',')) only.insert(std::stoi(item));
    } else {
      std::cerr << "usage: acceptance [--only N[,M...]]\n";
      return 2;
    }
  }

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"sine cut-off frequency-domain accuracy >= 0.99", [] { return accuracy_criterion(Axis::frequency); }},
      {"sine cut-off order-domain accuracy >= 0.99", [] { return accuracy_criterion(Axis::order); }},
      {"gradient oracle on 20 random configs", gradient_oracle},
      {"LRP-Z conservation on bias-free nets", lrp_conservation},
      {"FFT Parseval and unit-sine amplitude", fft_correctness},
      {"order-map ground truth", order_ground_truth},
      {"CAM selectivity for harmonics over superimposed modes", saliency_selectivity},
      {"global LIME planted-feature recovery", lime_planted},
      {"determinism and persistence", determinism},
  };

  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << id << "] " << criteria[i].first << ": " << o.detail << " ("
              << fmt(secs, 3) << " s)" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
