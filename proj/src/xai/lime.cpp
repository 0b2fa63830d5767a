#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>

#include "vibxai/xai.hpp"

namespace vibxai::xai {

std::string_view strategy_name(ReplacementStrategy s) noexcept {
  switch (s) {
    case ReplacementStrategy::opposite_class: return "opposite_class";
    case ReplacementStrategy::mean: return "mean";
    case ReplacementStrategy::total_mean: return "total_mean";
    case ReplacementStrategy::noise: return "noise";
    case ReplacementStrategy::total_noise: return "total_noise";
  }
  return "unknown";
}

ReplacementStrategy parse_strategy(std::string_view text) {
  for (auto s : {ReplacementStrategy::opposite_class, ReplacementStrategy::mean, ReplacementStrategy::total_mean,
                 ReplacementStrategy::noise, ReplacementStrategy::total_noise})
    if (strategy_name(s) == text) return s;
  throw std::invalid_argument("unknown replacement strategy '" + std::string(text) + "'");
}

void LimeConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("LimeConfig: " + what); };
  if (segment_counts.empty() || feature_counts.empty()) fail("segment and feature counts must be non-empty");
  const auto min_n = *std::min_element(segment_counts.begin(), segment_counts.end());
  const auto max_n = *std::max_element(segment_counts.begin(), segment_counts.end());
  if (min_n == 0) fail("segment counts must be positive");
  for (auto m : feature_counts)
    if (m == 0 || m > min_n) fail("every feature count must lie in [1, min(segment_counts)]");
  if (perturbations_per_config < 10 * max_n) fail("perturbations_per_config must be >= 10 * max(segment_counts)");
  if (!(ridge_alpha >= 0.0)) fail("ridge_alpha must be non-negative");
}

ClassStats ClassStats::of(const Matrix& rows) {
  if (rows.empty()) throw std::invalid_argument("ClassStats: no rows");
  const std::size_t d = rows.cols();
  ClassStats s;
  s.bin_mean.assign(d, 0.0);
  s.bin_min.resize(d);
  s.bin_max.resize(d);
  for (std::size_t c = 0; c < d; ++c) s.bin_min[c] = s.bin_max[c] = rows(0, c);
  double total = 0.0;
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    for (std::size_t c = 0; c < d; ++c) {
      const double v = rows(r, c);
      s.bin_mean[c] += v;
      s.bin_min[c] = std::min(s.bin_min[c], v);
      s.bin_max[c] = std::max(s.bin_max[c], v);
    }
  }
  for (auto& m : s.bin_mean) {
    total += m;
    m /= static_cast<double>(rows.rows());
  }
  s.total_mean = total / static_cast<double>(rows.rows() * d);
  s.total_min = *std::min_element(s.bin_min.begin(), s.bin_min.end());
  s.total_max = *std::max_element(s.bin_max.begin(), s.bin_max.end());
  return s;
}

std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t n_cols, std::size_t n_segments) {
  if (n_segments == 0 || n_segments > n_cols)
    throw std::invalid_argument("segment_bounds: need 1 <= segments <= columns");
  const std::size_t width = n_cols / n_segments;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t s = 0; s < n_segments; ++s)
    out.emplace_back(s * width, s + 1 == n_segments ? n_cols : (s + 1) * width);
  return out;
}

std::vector<double> replace_segments(std::span<const double> sample, std::span<const std::uint8_t> mask,
                                     ReplacementStrategy strategy, std::span<const double> paired_opposite,
                                     const ClassStats& stats, std::mt19937_64& rng) {
  if (strategy == ReplacementStrategy::opposite_class && paired_opposite.size() != sample.size())
    throw std::invalid_argument("replace_segments: opposite_class needs a paired sample of equal length");
  if (strategy != ReplacementStrategy::opposite_class && stats.bin_mean.size() != sample.size())
    throw std::invalid_argument("replace_segments: class statistics do not match the sample");
  std::vector<double> out(sample.begin(), sample.end());
  const auto bounds = segment_bounds(sample.size(), mask.size());
  for (std::size_t s = 0; s < mask.size(); ++s) {
    if (mask[s] != 0) continue;
    const auto [begin, end] = bounds[s];
    switch (strategy) {
      case ReplacementStrategy::opposite_class:
        std::copy(paired_opposite.begin() + begin, paired_opposite.begin() + end, out.begin() + begin);
        break;
      case ReplacementStrategy::mean:
        std::copy(stats.bin_mean.begin() + begin, stats.bin_mean.begin() + end, out.begin() + begin);
        break;
      case ReplacementStrategy::total_mean:
        std::fill(out.begin() + begin, out.begin() + end, stats.total_mean);
        break;
      case ReplacementStrategy::noise: {
        const double lo = *std::min_element(stats.bin_min.begin() + begin, stats.bin_min.begin() + end);
        const double hi = *std::max_element(stats.bin_max.begin() + begin, stats.bin_max.begin() + end);
        std::uniform_real_distribution<double> u(lo, std::max(lo, hi));
        for (std::size_t i = begin; i < end; ++i) out[i] = u(rng);
        break;
      }
      case ReplacementStrategy::total_noise: {
        std::uniform_real_distribution<double> u(stats.total_min, std::max(stats.total_min, stats.total_max));
        for (std::size_t i = begin; i < end; ++i) out[i] = u(rng);
        break;
      }
    }
  }
  return out;
}

double lime_mask_score(const ClassScorer& scorer, const Matrix& class_rows, const Matrix& opposite_rows,
                       std::span<const std::uint8_t> mask, std::size_t n_segments, ReplacementStrategy strategy,
                       const ClassStats& stats, std::mt19937_64& rng) {
  if (mask.size() != n_segments) throw std::invalid_argument("lime_mask_score: mask length != segment count");
  Matrix perturbed(class_rows.rows(), class_rows.cols());
  for (std::size_t r = 0; r < class_rows.rows(); ++r) {
    const std::span<const double> pair =
        strategy == ReplacementStrategy::opposite_class ? opposite_rows.row(r) : std::span<const double>{};
    const auto row = replace_segments(class_rows.row(r), mask, strategy, pair, stats, rng);
    std::copy(row.begin(), row.end(), perturbed.row(r).begin());
  }
  const auto scores = scorer(perturbed);
  if (scores.size() != class_rows.rows()) throw std::runtime_error("lime_mask_score: scorer returned wrong count");
  return std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(scores.size());
}

namespace {

// Surrogate weights for one segment count.
std::vector<double> segment_weights(const ClassScorer& scorer, const Matrix& class_rows, const Matrix& opposite_rows,
                                    const ClassStats& stats, std::size_t n_segments, const LimeConfig& cfg) {
  std::seed_seq mask_seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                         static_cast<std::uint32_t>(n_segments), 0u};
  std::seed_seq noise_seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(n_segments), 1u};
  std::mt19937_64 mask_rng(mask_seq);
  std::mt19937_64 noise_rng(noise_seq);
  std::bernoulli_distribution keep(0.5);

  const std::size_t p = cfg.perturbations_per_config;
  Matrix design(p, n_segments, 1.0);
  std::vector<double> scores(p);
  std::vector<std::uint8_t> mask(n_segments, 1);
  for (std::size_t i = 0; i < p; ++i) {
    // The first perturbation is the unmodified data set.
    if (i > 0)
      for (std::size_t s = 0; s < n_segments; ++s) {
        mask[s] = keep(mask_rng) ? 1 : 0;
        design(i, s) = mask[s];
      }
    scores[i] = lime_mask_score(scorer, class_rows, opposite_rows, mask, n_segments, cfg.strategy, stats, noise_rng);
  }
  return ridge_fit(design, scores, cfg.ridge_alpha).weights;
}

}  // namespace

std::vector<double> lime_global(const ClassScorer& scorer, const Matrix& class_rows, const Matrix& opposite_rows,
                                const LimeConfig& cfg) {
  cfg.validate();
  if (class_rows.empty()) throw std::invalid_argument("lime_global: no rows for the explained class");
  const std::size_t n_cols = class_rows.cols();
  if (cfg.strategy == ReplacementStrategy::opposite_class &&
      (opposite_rows.rows() != class_rows.rows() || opposite_rows.cols() != n_cols))
    throw std::invalid_argument("lime_global: opposite_class needs one paired opposite row per class row");
  for (auto n : cfg.segment_counts)
    if (n > n_cols) throw std::invalid_argument("lime_global: more segments than bins");

  const ClassStats stats = ClassStats::of(class_rows);
  std::map<std::size_t, std::vector<double>> weights_by_count;
  std::vector<double> total(n_cols, 0.0);
  std::size_t n_maps = 0;
  for (auto n : cfg.segment_counts) {
    auto it = weights_by_count.find(n);
    if (it == weights_by_count.end())
      it = weights_by_count.emplace(n, segment_weights(scorer, class_rows, opposite_rows, stats, n, cfg)).first;
    const auto& w = it->second;
    const auto bounds = segment_bounds(n_cols, n);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), std::size_t{0});
    std::stable_sort(rank.begin(), rank.end(),
                     [&](std::size_t a, std::size_t b) { return std::abs(w[a]) > std::abs(w[b]); });
    for (auto m : cfg.feature_counts) {
      for (std::size_t k = 0; k < m; ++k) {
        const auto s = rank[k];
        for (std::size_t i = bounds[s].first; i < bounds[s].second; ++i) total[i] += w[s];
      }
      ++n_maps;
    }
  }
  for (auto& v : total) v /= static_cast<double>(n_maps);
  return total;
}

std::vector<double> lime_global(const nn::Checkpoint& ckpt, const Matrix& class_rows, const Matrix& opposite_rows,
                                int cls, const LimeConfig& cfg) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= ckpt.network.config.n_classes)
    throw std::invalid_argument("explained class out of range");
  const ClassScorer scorer = [&ckpt, cls](const Matrix& rows) {
    const auto pred = nn::predict(ckpt, rows);
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = pred.probs(r, static_cast<std::size_t>(cls));
    return out;
  };
  return lime_global(scorer, class_rows, opposite_rows, cfg);
}

SaliencyMap explain_lime(const nn::Checkpoint& ckpt, const RpmMap& class_map, const RpmMap& opposite_map, Label cls,
                         const LimeConfig& cfg) {
  const auto values = lime_global(ckpt, class_map.values, opposite_map.values, class_index(cls), cfg);
  SaliencyMap out;
  out.values = Matrix(class_map.rows(), class_map.cols());
  for (std::size_t r = 0; r < class_map.rows(); ++r) std::copy(values.begin(), values.end(), out.values.row(r).begin());
  out.rpm = class_map.rpm;
  out.axis = class_map.axis;
  out.bin_width = class_map.bin_width;
  out.method = Method::lime_global;
  out.class_explained = cls;
  return out;
}

}  // namespace vibxai::xai
