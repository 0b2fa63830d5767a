#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "vibxai/matrix.hpp"
#include "vibxai/nn.hpp"
#include "vibxai/spectral.hpp"

namespace vibxai::xai {

enum class Method : std::uint8_t { gradcam, gradcam_pp, scorecam, lrp_z, lrp_eps, lime_global };

std::string_view method_name(Method m) noexcept;
Method parse_method(std::string_view text);

/// Per-bin relevance aligned to an RpmMap.
struct SaliencyMap {
  Matrix values;
  std::vector<double> rpm;
  Axis axis = Axis::frequency;
  double bin_width = 1.0;
  Method method = Method::gradcam;
  Label class_explained = Label::cutoff;

  friend bool operator==(const SaliencyMap&, const SaliencyMap&) = default;
};

/// Output of the class-activation-map family. `degenerate` is set when every
/// channel weight vanished (e.g. zero gradient) and the map is all zeros.
struct CamResult {
  std::vector<double> values;
  bool degenerate = false;
};

/// Linear interpolation of `src` onto `n` points, end points aligned.
std::vector<double> upsample_linear(std::span<const double> src, std::size_t n);

// The CAM family explains the post-softmax probability of `cls` and works on
// the feature maps (post-ReLU conv output) of the last convolutional block.
// `sample` is a raw map row; the checkpoint's standardizer is applied first.

CamResult grad_cam(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls);

/// Channel weights sum alpha * ReLU(gradient), alpha = g^2 / (2 g^2 + g^3 sum(A)),
/// with alpha = 0 where the denominator vanishes.
CamResult grad_cam_pp(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls);

/// Gradient free: each channel's upsampled, min-max normalised feature map
/// masks the input; weight = masked class probability - unmasked probability.
CamResult score_cam(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls);

enum class LrpVariant : std::uint8_t { z, epsilon };

struct LrpResult {
  std::vector<double> relevance;  // one value per input bin
  double output_score = 0.0;      // logit of the explained class
  double relevance_sum = 0.0;     // equals output_score for bias-free nets
};

/// Layer-wise relevance propagation from the class logit. Dense and conv
/// layers use the z-rule (or z + eps * sign(z) with eps scaled by the mean
/// |z| of the layer); ReLU passes relevance through, max pooling routes it to
/// the winning position and batch norm acts as a per-channel affine layer.
/// Under the z-rule a unit with an exactly zero denominator drops its
/// relevance.
LrpResult lrp(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls, LrpVariant variant,
              double eps = 1e-2);

enum class ReplacementStrategy : std::uint8_t { opposite_class, mean, total_mean, noise, total_noise };

std::string_view strategy_name(ReplacementStrategy s) noexcept;
ReplacementStrategy parse_strategy(std::string_view text);

struct LimeConfig {
  std::vector<std::size_t> segment_counts{10, 20, 40};
  std::vector<std::size_t> feature_counts{3, 5, 10};
  std::size_t perturbations_per_config = 1000;
  double ridge_alpha = 1.0;
  ReplacementStrategy strategy = ReplacementStrategy::opposite_class;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Per-bin and whole-data statistics of one class, used by the replacement
/// strategies other than opposite_class.
struct ClassStats {
  std::vector<double> bin_mean;
  std::vector<double> bin_min;
  std::vector<double> bin_max;
  double total_mean = 0.0;
  double total_min = 0.0;
  double total_max = 0.0;

  static ClassStats of(const Matrix& rows);
};

/// Half-open [begin, end) bin ranges of `n_segments` equal segments; the last
/// absorbs the remainder.
std::vector<std::pair<std::size_t, std::size_t>> segment_bounds(std::size_t n_cols, std::size_t n_segments);

/// mask[s] != 0 keeps segment s; masked-off segments are replaced.
/// `paired_opposite` may be empty unless the strategy is opposite_class.
std::vector<double> replace_segments(std::span<const double> sample, std::span<const std::uint8_t> mask,
                                     ReplacementStrategy strategy, std::span<const double> paired_opposite,
                                     const ClassStats& stats, std::mt19937_64& rng);

struct RidgeFit {
  std::vector<double> weights;
  double intercept = 0.0;
};

/// argmin ||y - Z w - b||^2 + alpha ||w||^2 with unpenalised intercept.
/// With alpha = 0 the minimum-norm solution is returned when it interpolates
/// or is unique; otherwise the system is singular and std::domain_error is
/// thrown.
RidgeFit ridge_fit(const Matrix& z, std::span<const double> y, double alpha);

/// Maps a batch of raw rows to per-row probabilities of the explained class.
using ClassScorer = std::function<std::vector<double>(const Matrix& rows)>;

/// Mean explained-class probability over every row of `class_rows` after
/// applying `mask`.
double lime_mask_score(const ClassScorer& scorer, const Matrix& class_rows, const Matrix& opposite_rows,
                       std::span<const std::uint8_t> mask, std::size_t n_segments, ReplacementStrategy strategy,
                       const ClassStats& stats, std::mt19937_64& rng);

/// Global LIME over a whole class. Row r of `class_rows` pairs with row r of
/// `opposite_rows` (same speed). For each segment count the same random
/// masks are scored once; each feature count then keeps the top-m ridge
/// weights by magnitude. Returns the mean of all per-config bin maps.
std::vector<double> lime_global(const ClassScorer& scorer, const Matrix& class_rows, const Matrix& opposite_rows,
                                const LimeConfig& cfg);

std::vector<double> lime_global(const nn::Checkpoint& ckpt, const Matrix& class_rows, const Matrix& opposite_rows,
                                int cls, const LimeConfig& cfg);

/// Explains every row of `map` with a per-sample method.
SaliencyMap explain_rows(const nn::Checkpoint& ckpt, const RpmMap& map, Method method, Label cls,
                         double lrp_eps = 1e-2);

/// Global LIME on `class_map` (rows of the explained class) against the
/// opposite class, broadcast to every row.
SaliencyMap explain_lime(const nn::Checkpoint& ckpt, const RpmMap& class_map, const RpmMap& opposite_map, Label cls,
                         const LimeConfig& cfg);

}  // namespace vibxai::xai
