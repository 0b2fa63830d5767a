#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "vibxai/matrix.hpp"

namespace vibxai::nn {

/// Shape plus row-major double data.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s, double fill = 0.0);

  std::size_t size() const noexcept { return data.size(); }
  friend bool operator==(const Tensor&, const Tensor&) = default;
};

struct ConvBlockConfig {
  std::size_t filters = 32;
  std::size_t kernel_size = 9;
  std::size_t pool_size = 4;
  friend bool operator==(const ConvBlockConfig&, const ConvBlockConfig&) = default;
};

/// conv -> ReLU -> batch norm -> max pool, per block; then flatten ->
/// dense + ReLU -> dense -> softmax.
struct ModelConfig {
  std::size_t input_len = 2048;
  std::vector<ConvBlockConfig> conv_blocks{{32, 9, 4}, {64, 9, 4}};
  std::size_t dense_hidden = 64;
  std::size_t n_classes = 2;

  void validate() const;
  /// Length of each block's conv output (valid padding, stride 1).
  std::vector<std::size_t> conv_lengths() const;
  std::size_t flat_size() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct TrainConfig {
  std::size_t epochs = 150;
  double lr = 1e-4;
  std::size_t batch_size = 32;
  double label_smoothing = 0.05;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double bn_momentum = 0.9;
  double input_scale_floor = 0.1;  // see Standardizer::fit

  void validate() const;
};

inline constexpr double kBatchNormEps = 1e-5;

struct ConvBlock {
  Tensor weight;  // [filters, in_channels, kernel]
  Tensor bias;    // [filters]
  Tensor gamma, beta, running_mean, running_var;  // [filters]
  friend bool operator==(const ConvBlock&, const ConvBlock&) = default;
};

struct Dense {
  Tensor weight;  // [out, in]
  Tensor bias;    // [out]
  friend bool operator==(const Dense&, const Dense&) = default;
};

struct Network {
  ModelConfig config;
  std::vector<ConvBlock> blocks;
  Dense hidden;
  Dense output;

  /// He-uniform weights, zero biases, unit gamma, zero beta, running
  /// statistics (0, 1).
  static Network initialize(const ModelConfig& config, std::uint64_t seed);

  /// Trainable tensors in checkpoint order: per block weight, bias, gamma,
  /// beta; then hidden weight, bias; output weight, bias.
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;

  friend bool operator==(const Network&, const Network&) = default;
};

/// Per-feature affine input scaling fitted on the training split.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  /// Scale of feature c is max(sd_c, scale_floor * rms(sd)); with a zero
  /// floor every feature gets unit variance.
  static Standardizer fit(const Matrix& rows, double scale_floor = 0.0);
  static Standardizer identity(std::size_t n);
  Matrix apply(const Matrix& rows) const;
  std::vector<double> apply(std::span<const double> row) const;
  friend bool operator==(const Standardizer&, const Standardizer&) = default;
};

struct Checkpoint {
  Network network;
  Standardizer input_norm;
  double best_test_accuracy = 0.0;
  std::size_t epoch_of_best = 0;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

enum class Mode { train, eval };

/// Batch statistics (biased variance) of each batch-norm layer, as used in a
/// train-mode pass.
struct BatchNormStats {
  std::vector<double> mean;
  std::vector<double> var;
};

struct ForwardResult {
  Matrix logits;  // rows x n_classes
  Matrix probs;   // rows x n_classes, rows sum to 1
  std::vector<BatchNormStats> batch_stats;  // train mode only
};

/// Rows of `batch` are already-standardized inputs of width input_len.
ForwardResult forward(const Network& net, const Matrix& batch, Mode mode);

/// Smoothed targets: 1 - s for the true class, s / (K - 1) elsewhere.
Matrix smoothed_targets(std::span<const int> labels, std::size_t n_classes, double smoothing);

/// Mean cross-entropy between probability rows and smoothed targets.
double cross_entropy(const Matrix& probs, std::span<const int> labels, double smoothing);

struct LossAndGrads {
  double loss = 0.0;
  std::vector<Tensor> grads;  // parallel to Network::parameters()
  std::vector<BatchNormStats> batch_stats;
  Matrix probs;
};

/// Train-mode forward and reverse pass.
LossAndGrads loss_and_grads(const Network& net, const Matrix& batch, std::span<const int> labels,
                            double smoothing);

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One bias-corrected Adam update at step t (t >= 1). State is sized lazily.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg, std::size_t t);

/// Folds fresh batch statistics into the running estimates.
void update_running_stats(Network& net, std::span<const BatchNormStats> stats, double momentum);

struct EpochStats {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_loss = 0.0;
  double test_accuracy = 0.0;
};

struct Dataset {
  Matrix rows;
  std::vector<int> labels;
};

/// Fits the standardizer on `train_set`, trains for cfg.epochs and returns the
/// parameters of the epoch with the best test accuracy (earliest on ties).
/// Throws std::runtime_error on a non-finite loss.
Checkpoint train(const ModelConfig& model_cfg, const Dataset& train_set, const Dataset& test_set,
                 const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch = {});

struct Prediction {
  std::vector<int> labels;
  Matrix probs;
};

/// Eval-mode forward on raw (unstandardized) rows.
Prediction predict(const Checkpoint& ckpt, const Matrix& rows);

double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Binary layout: magic "VIBXCKPT", u32 version, config, metadata,
/// standardizer, then each tensor as u64 count + little-endian f64 values.
void save_weights(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_weights(const std::filesystem::path& path);

inline constexpr std::uint32_t kCheckpointVersion = 1;

}  // namespace vibxai::nn
