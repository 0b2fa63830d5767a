#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "../support/oracles.hpp"
#include "vibxai/xai.hpp"

using namespace vibxai;
using namespace vibxai::xai;

namespace {

// conv(1 filter, kernel 1, weight 1) -> ReLU -> identity batch norm -> no
// pooling -> dense with positive weights -> class 1 pulls up, class 0 down.
nn::Checkpoint identity_net(std::size_t n) {
  nn::ModelConfig cfg;
  cfg.input_len = n;
  cfg.conv_blocks = {{1, 1, 1}};
  cfg.dense_hidden = n;
  nn::Checkpoint ck;
  ck.network = nn::Network::initialize(cfg, 1);
  auto& net = ck.network;
  net.blocks[0].weight.data = {1.0};
  net.blocks[0].bias.data = {0.0};
  net.blocks[0].running_var.data = {1.0 - nn::kBatchNormEps};
  std::fill(net.hidden.weight.data.begin(), net.hidden.weight.data.end(), 0.0);
  for (std::size_t i = 0; i < n; ++i) net.hidden.weight.data[i * n + i] = 1.0;
  std::fill(net.hidden.bias.data.begin(), net.hidden.bias.data.end(), 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    net.output.weight.data[j] = -0.1;
    net.output.weight.data[n + j] = 0.1;
  }
  std::fill(net.output.bias.data.begin(), net.output.bias.data.end(), 0.0);
  ck.input_norm = nn::Standardizer::identity(n);
  return ck;
}

void check_proportional(const std::vector<double>& got, const std::vector<double>& ref) {
  REQUIRE(got.size() == ref.size());
  const auto k = oracle::argmax(ref);
  REQUIRE(ref[k] > 0.0);
  const double ratio = got[k] / ref[k];
  CHECK(ratio > 0.0);
  for (std::size_t i = 0; i < ref.size(); ++i) CHECK(got[i] == doctest::Approx(ratio * ref[i]).epsilon(1e-9));
}

}  // namespace

TEST_CASE("method names round trip") {
  for (Method m : {Method::gradcam, Method::gradcam_pp, Method::scorecam, Method::lrp_z, Method::lrp_eps,
                   Method::lime_global})
    CHECK(parse_method(method_name(m)) == m);
  CHECK(parse_method("gradcam++") == Method::gradcam_pp);
  CHECK(parse_method("lime") == Method::lime_global);
  CHECK_THROWS(parse_method("saliency"));
}

TEST_CASE("linear upsampling aligns end points") {
  const std::vector<double> src{0.0, 1.0, 0.0};
  const auto up = upsample_linear(src, 5);
  CHECK(up == std::vector<double>{0.0, 0.5, 1.0, 0.5, 0.0});
  CHECK(upsample_linear(std::vector<double>{2.0}, 3) == std::vector<double>{2.0, 2.0, 2.0});
}

TEST_CASE("CAM of a zero input on a bias-free net is zero") {
  const auto ck = oracle::bias_free_checkpoint(3, 64);
  const std::vector<double> zero(64, 0.0);
  for (auto* fn : {&grad_cam, &grad_cam_pp, &score_cam}) {
    const auto r = (*fn)(ck, zero, 1);
    CHECK(r.values.size() == 64);
    for (double v : r.values) CHECK(v == 0.0);
  }
}

TEST_CASE("single-filter toy: CAMs follow ReLU of the feature map") {
  const std::size_t n = 12;
  const auto ck = identity_net(n);
  const std::vector<double> x{0.3, -1.0, 2.0, 0.1, -0.2, 1.5, 0.0, 0.7, -0.4, 0.9, 1.1, -2.0};
  std::vector<double> relu(n);
  for (std::size_t i = 0; i < n; ++i) relu[i] = std::max(x[i], 0.0);
  check_proportional(grad_cam(ck, x, 1).values, relu);
  // Masking shrinks the activations, which only raises the class 0 score.
  check_proportional(score_cam(ck, x, 0).values, relu);
  // With class 0 the gradient is negative everywhere: nothing survives.
  const auto neg = grad_cam(ck, x, 0);
  for (double v : neg.values) CHECK(v == 0.0);
}

TEST_CASE("grad_cam_pp agrees with grad_cam on a single active position") {
  const std::size_t n = 10;
  const auto ck = identity_net(n);
  std::vector<double> x(n, -1.0);
  x[6] = 2.5;
  const auto a = grad_cam(ck, x, 1).values;
  const auto b = grad_cam_pp(ck, x, 1).values;
  CHECK(oracle::argmax(a) == 6);
  CHECK(oracle::argmax(b) == 6);
}

TEST_CASE("score_cam ignores a silent channel") {
  const std::size_t n = 12;
  nn::ModelConfig cfg;
  cfg.input_len = n;
  cfg.conv_blocks = {{2, 1, 1}};
  cfg.dense_hidden = 4;
  nn::Checkpoint ck;
  ck.network = nn::Network::initialize(cfg, 4);
  ck.network.blocks[0].weight.data = {1.0, 0.0};
  ck.network.blocks[0].bias.data = {0.0, 0.0};
  ck.input_norm = nn::Standardizer::identity(n);
  std::mt19937_64 rng(1);
  const auto x = oracle::random_signal(n, rng);
  const auto r = score_cam(ck, x, 1);
  const auto p = score_cam(ck, x, 0);
  // Only channel 0 can carry weight, so each map is a non-negative multiple of ReLU(x) or zero.
  std::vector<double> relu(n);
  for (std::size_t i = 0; i < n; ++i) relu[i] = std::max(x[i], 0.0);
  for (const auto* m : {&r, &p}) {
    if (std::all_of(m->values.begin(), m->values.end(), [](double v) { return v == 0.0; })) continue;
    check_proportional(m->values, relu);
  }
}

TEST_CASE("CAM outputs are non-negative and full length on random nets") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto ck = oracle::bias_free_checkpoint(s, 50);
    std::mt19937_64 rng(s);
    const auto x = oracle::random_signal(50, rng);
    for (int cls : {0, 1})
      for (auto* fn : {&grad_cam, &grad_cam_pp, &score_cam}) {
        const auto r = (*fn)(ck, x, cls);
        CHECK(r.values.size() == 50);
        for (double v : r.values) CHECK(v >= 0.0);
      }
  }
}

TEST_CASE("explained class must exist") {
  const auto ck = oracle::bias_free_checkpoint(1, 40);
  const std::vector<double> x(40, 1.0);
  CHECK_THROWS_AS(grad_cam(ck, x, 2), std::invalid_argument);
  CHECK_THROWS_AS(lrp(ck, x, -1, LrpVariant::z), std::invalid_argument);
}

TEST_CASE("lrp dense closed form") {
  auto ck = identity_net(2);
  auto& out = ck.network.output;
  out.weight.data = {0.0, 0.0, 1.0, 1.0};
  const std::vector<double> x{1.0, 3.0};
  const auto r = lrp(ck, x, 1, LrpVariant::z);
  CHECK(r.output_score == doctest::Approx(4.0));
  REQUIRE(r.relevance.size() == 2);
  CHECK(r.relevance[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.relevance[1] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("lrp conserves the class score on bias-free nets") {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto ck = oracle::bias_free_checkpoint(s + 40, 64);
    std::mt19937_64 rng(s);
    const auto x = oracle::random_signal(64, rng);
    for (int cls : {0, 1}) {
      const auto r = lrp(ck, x, cls, LrpVariant::z);
      CHECK(std::abs(r.relevance_sum - r.output_score) <= 1e-9 * std::abs(r.output_score));
    }
  }
}

TEST_CASE("lrp epsilon on a zero input is zero") {
  const auto ck = oracle::bias_free_checkpoint(2, 64);
  const std::vector<double> zero(64, 0.0);
  const auto r = lrp(ck, zero, 1, LrpVariant::epsilon, 0.01);
  for (double v : r.relevance) CHECK(v == 0.0);
  CHECK_THROWS(lrp(ck, zero, 1, LrpVariant::epsilon, 0.0));
}

TEST_CASE("segment bounds") {
  const auto b = segment_bounds(10, 3);
  REQUIRE(b.size() == 3);
  CHECK(b[0] == std::pair<std::size_t, std::size_t>{0, 3});
  CHECK(b[1] == std::pair<std::size_t, std::size_t>{3, 6});
  CHECK(b[2] == std::pair<std::size_t, std::size_t>{6, 10});
  CHECK_THROWS(segment_bounds(4, 5));
  CHECK_THROWS(segment_bounds(4, 0));
}

TEST_CASE("segment replacement strategies") {
  Matrix rows(3, 6);
  for (std::size_t r = 0; r < 3; ++r)
    for (std::size_t c = 0; c < 6; ++c) rows(r, c) = static_cast<double>(r * 10 + c);
  const auto stats = ClassStats::of(rows);
  const std::vector<double> sample(rows.row(1).begin(), rows.row(1).end());
  const std::vector<double> opp{-1, -2, -3, -4, -5, -6};
  std::mt19937_64 rng(0);

  const std::vector<std::uint8_t> keep{1, 1, 1};
  const std::vector<std::uint8_t> none{0, 0, 0};
  const std::vector<std::uint8_t> middle{1, 0, 1};
  CHECK(replace_segments(sample, keep, ReplacementStrategy::opposite_class, opp, stats, rng) == sample);
  CHECK(replace_segments(sample, none, ReplacementStrategy::opposite_class, opp, stats, rng) == opp);
  CHECK(replace_segments(sample, middle, ReplacementStrategy::opposite_class, opp, stats, rng) ==
        std::vector<double>{10, 11, -3, -4, 14, 15});
  CHECK(replace_segments(sample, middle, ReplacementStrategy::mean, {}, stats, rng) ==
        std::vector<double>{10, 11, 12, 13, 14, 15});
  const auto tm = replace_segments(sample, middle, ReplacementStrategy::total_mean, {}, stats, rng);
  CHECK(tm[2] == doctest::Approx(12.5));
  CHECK(tm[3] == doctest::Approx(12.5));
  const auto noise = replace_segments(sample, none, ReplacementStrategy::noise, {}, stats, rng);
  for (std::size_t c = 0; c < 6; ++c) {
    const std::size_t lo = (c / 2) * 2;
    CHECK(noise[c] >= static_cast<double>(lo));
    CHECK(noise[c] <= static_cast<double>(lo + 21));
  }
  const auto total = replace_segments(sample, none, ReplacementStrategy::total_noise, {}, stats, rng);
  for (double v : total) {
    CHECK(v >= 0.0);
    CHECK(v <= 25.0);
  }
  CHECK_THROWS(replace_segments(sample, none, ReplacementStrategy::opposite_class, {}, stats, rng));
}

TEST_CASE("ridge closed forms") {
  SUBCASE("one feature through the origin") {
    Matrix z(2, 1);
    z(0, 0) = 1.0;
    z(1, 0) = 2.0;
    const auto f = ridge_fit(z, std::vector<double>{1.0, 2.0}, 0.0);
    CHECK(f.weights[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(f.intercept) < 1e-12);
  }
  SUBCASE("square system interpolates") {
    Matrix z(3, 3);
    z.data() = {2, 1, 0, 1, 3, 1, 0, 1, 4};
    const std::vector<double> y{1.0, -2.0, 0.5};
    const auto f = ridge_fit(z, y, 0.0);
    for (std::size_t r = 0; r < 3; ++r) {
      double pred = f.intercept;
      for (std::size_t c = 0; c < 3; ++c) pred += z(r, c) * f.weights[c];
      CHECK(std::abs(pred - y[r]) < 1e-9);
    }
  }
  SUBCASE("huge penalty shrinks the weights") {
    std::mt19937_64 rng(4);
    Matrix z(30, 4);
    for (auto& v : z.data()) v = oracle::random_signal(1, rng)[0];
    const auto y = oracle::random_signal(30, rng);
    const auto f = ridge_fit(z, y, 1e9);
    double norm = 0.0;
    for (double w : f.weights) norm += w * w;
    CHECK(std::sqrt(norm) < 1e-6);
    CHECK(f.intercept == doctest::Approx(std::accumulate(y.begin(), y.end(), 0.0) / 30.0));
  }
  SUBCASE("ridge matches the normal equations") {
    Matrix z(5, 2);
    z.data() = {1, 0, 0, 1, 1, 1, 2, 1, 0, 2};
    const std::vector<double> y{1, 2, 2.5, 4, 3};
    const double alpha = 0.5;
    const auto f = ridge_fit(z, y, alpha);
    // Gradient of the objective vanishes at the optimum.
    std::vector<double> resid(5);
    for (std::size_t r = 0; r < 5; ++r) resid[r] = y[r] - f.intercept - z(r, 0) * f.weights[0] - z(r, 1) * f.weights[1];
    CHECK(std::abs(std::accumulate(resid.begin(), resid.end(), 0.0)) < 1e-12);
    for (std::size_t c = 0; c < 2; ++c) {
      double g = alpha * f.weights[c];
      for (std::size_t r = 0; r < 5; ++r) g -= z(r, c) * resid[r];
      CHECK(std::abs(g) < 1e-12);
    }
  }
  SUBCASE("rank deficient without penalty") {
    Matrix z(4, 2);
    z.data() = {1, 2, 2, 4, 3, 6, 4, 8};
    CHECK_THROWS_AS(ridge_fit(z, std::vector<double>{1, 2, 3, 5}, 0.0), std::domain_error);
    CHECK_NOTHROW(ridge_fit(z, std::vector<double>{1, 2, 3, 5}, 1.0));
  }
}

TEST_CASE("lime config validation") {
  LimeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.feature_counts = {3, 11};
  CHECK_THROWS(cfg.validate());
  cfg = LimeConfig{};
  cfg.perturbations_per_config = 399;
  CHECK_THROWS(cfg.validate());
  cfg = LimeConfig{};
  cfg.segment_counts = {};
  CHECK_THROWS(cfg.validate());
}

namespace {

// Probability of class 1 rises with the mean of bins [32, 40).
ClassScorer planted_scorer() {
  return [](const Matrix& rows) {
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) {
      double m = 0.0;
      for (std::size_t c = 32; c < 40; ++c) m += rows(r, c);
      out[r] = 1.0 / (1.0 + std::exp(-(m / 8.0 - 2.0) * 3.0));
    }
    return out;
  };
}

LimeConfig quick_lime(std::uint64_t seed) {
  LimeConfig cfg;
  cfg.perturbations_per_config = 400;
  cfg.seed = seed;
  return cfg;
}

}  // namespace

TEST_CASE("lime finds the planted segment with an analytic scorer") {
  const auto toy = oracle::planted_toy(3);
  const auto map = lime_global(planted_scorer(), toy.planted_rows, toy.normal_rows, quick_lime(1));
  REQUIRE(map.size() == 80);
  const auto k = oracle::argmax(map);
  CHECK(k >= 32);
  CHECK(k < 40);
  for (std::size_t c = 0; c < 80; ++c)
    if (c < 32 || c >= 40) CHECK(std::abs(map[c]) < map[k]);
}

TEST_CASE("lime is deterministic and repeated configs do not change the mean") {
  const auto toy = oracle::planted_toy(5);
  auto cfg = quick_lime(7);
  cfg.segment_counts = {10};
  cfg.feature_counts = {3};
  const auto a = lime_global(planted_scorer(), toy.planted_rows, toy.normal_rows, cfg);
  CHECK(a == lime_global(planted_scorer(), toy.planted_rows, toy.normal_rows, cfg));
  auto twice = cfg;
  twice.segment_counts = {10, 10};
  twice.feature_counts = {3, 3};
  const auto b = lime_global(planted_scorer(), toy.planted_rows, toy.normal_rows, twice);
  REQUIRE(b.size() == a.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-12));
}

TEST_CASE("lime is invariant to the order of paired samples") {
  const auto toy = oracle::planted_toy(9, 12);
  std::vector<std::size_t> perm(12);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::mt19937_64 rng(2);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto cfg = quick_lime(3);
  const auto a = lime_global(planted_scorer(), toy.planted_rows, toy.normal_rows, cfg);
  const auto b =
      lime_global(planted_scorer(), toy.planted_rows.select_rows(perm), toy.normal_rows.select_rows(perm), cfg);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
}

TEST_CASE("lime with a trained network and the per-row helpers") {
  const auto toy = oracle::planted_toy(12);
  const auto ck = oracle::train_toy(toy, 12);
  const auto map = lime_global(ck, toy.planted_rows, toy.normal_rows, 1, quick_lime(12));
  const auto k = oracle::argmax(map);
  CHECK(k >= 32);
  CHECK(k < 40);

  RpmMap rows;
  rows.values = toy.planted_rows;
  rows.rpm.assign(toy.planted_rows.rows(), 1000.0);
  rows.labels.assign(toy.planted_rows.rows(), Label::cutoff);
  RpmMap opp = rows;
  opp.values = toy.normal_rows;
  const auto sal = explain_lime(ck, rows, opp, Label::cutoff, quick_lime(12));
  CHECK(sal.values.rows() == rows.rows());
  for (std::size_t r = 0; r < sal.values.rows(); ++r)
    CHECK(std::equal(map.begin(), map.end(), sal.values.row(r).begin()));

  for (Method m : {Method::gradcam, Method::gradcam_pp, Method::scorecam, Method::lrp_z, Method::lrp_eps}) {
    const auto s = explain_rows(ck, rows, m, Label::cutoff);
    CHECK(s.values.rows() == rows.rows());
    CHECK(s.values.cols() == rows.cols());
    CHECK(s.method == m);
  }
  CHECK_THROWS(explain_rows(ck, rows, Method::lime_global, Label::cutoff));
}
