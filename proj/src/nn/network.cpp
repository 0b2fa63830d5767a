#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

#include "vibxai/nn.hpp"

namespace vibxai::nn {

Tensor::Tensor(std::vector<std::size_t> s, double fill) : shape(std::move(s)) {
  const std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
  data.assign(n, fill);
}

std::vector<std::size_t> ModelConfig::conv_lengths() const {
  std::vector<std::size_t> out;
  std::size_t len = input_len;
  for (const auto& b : conv_blocks) {
    if (b.kernel_size == 0 || len < b.kernel_size) return out;
    len = len - b.kernel_size + 1;
    out.push_back(len);
    if (b.pool_size == 0) return out;
    len /= b.pool_size;
  }
  return out;
}

std::size_t ModelConfig::flat_size() const {
  const auto lens = conv_lengths();
  if (lens.size() != conv_blocks.size() || conv_blocks.empty()) return 0;
  return (lens.back() / conv_blocks.back().pool_size) * conv_blocks.back().filters;
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("ModelConfig: " + what); };
  if (input_len == 0) fail("input_len must be positive");
  if (conv_blocks.empty()) fail("at least one convolutional block is required");
  for (const auto& b : conv_blocks)
    if (b.filters == 0 || b.kernel_size == 0 || b.pool_size == 0) fail("block sizes must be positive");
  if (dense_hidden == 0) fail("dense_hidden must be positive");
  if (n_classes < 2) fail("n_classes must be at least 2");
  if (flat_size() == 0) fail("input too short: flattened size after pooling is zero");
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("TrainConfig: " + what); };
  if (epochs == 0) fail("epochs must be positive");
  if (!(lr > 0.0)) fail("lr must be positive");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(label_smoothing >= 0.0 && label_smoothing < 0.5)) fail("label_smoothing must lie in [0, 0.5)");
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) fail("Adam betas must lie in [0, 1)");
  if (!(adam_eps > 0.0)) fail("adam_eps must be positive");
  if (!(bn_momentum >= 0.0 && bn_momentum < 1.0)) fail("bn_momentum must lie in [0, 1)");
  if (!(input_scale_floor >= 0.0)) fail("input_scale_floor must be non-negative");
}

Network Network::initialize(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  auto he_uniform = [&rng](Tensor& t, std::size_t fan_in) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& v : t.data) v = dist(rng);
  };

  Network net;
  net.config = config;
  std::size_t in_ch = 1;
  for (const auto& bc : config.conv_blocks) {
    ConvBlock blk;
    blk.weight = Tensor({bc.filters, in_ch, bc.kernel_size});
    he_uniform(blk.weight, in_ch * bc.kernel_size);
    blk.bias = Tensor({bc.filters});
    blk.gamma = Tensor({bc.filters}, 1.0);
    blk.beta = Tensor({bc.filters});
    blk.running_mean = Tensor({bc.filters});
    blk.running_var = Tensor({bc.filters}, 1.0);
    net.blocks.push_back(std::move(blk));
    in_ch = bc.filters;
  }
  const std::size_t flat = config.flat_size();
  net.hidden.weight = Tensor({config.dense_hidden, flat});
  he_uniform(net.hidden.weight, flat);
  net.hidden.bias = Tensor({config.dense_hidden});
  net.output.weight = Tensor({config.n_classes, config.dense_hidden});
  he_uniform(net.output.weight, config.dense_hidden);
  net.output.bias = Tensor({config.n_classes});
  return net;
}

std::vector<Tensor*> Network::parameters() {
  std::vector<Tensor*> out;
  for (auto& b : blocks) out.insert(out.end(), {&b.weight, &b.bias, &b.gamma, &b.beta});
  out.insert(out.end(), {&hidden.weight, &hidden.bias, &output.weight, &output.bias});
  return out;
}

std::vector<const Tensor*> Network::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& b : blocks) out.insert(out.end(), {&b.weight, &b.bias, &b.gamma, &b.beta});
  out.insert(out.end(), {&hidden.weight, &hidden.bias, &output.weight, &output.bias});
  return out;
}

Standardizer Standardizer::fit(const Matrix& rows, double scale_floor) {
  if (rows.rows() == 0) throw std::invalid_argument("Standardizer::fit: no rows");
  const std::size_t n = rows.rows();
  const std::size_t d = rows.cols();
  Standardizer s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) s.mean[c] += rows(r, c);
  for (auto& m : s.mean) m /= static_cast<double>(n);
  std::vector<double> var(d, 0.0);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      const double z = rows(r, c) - s.mean[c];
      var[c] += z * z;
    }
  if (!(scale_floor >= 0.0)) throw std::invalid_argument("Standardizer::fit: scale_floor must be >= 0");
  const double rms_sd = std::sqrt(std::accumulate(var.begin(), var.end(), 0.0) / static_cast<double>(n * d));
  for (std::size_t c = 0; c < d; ++c) {
    const double sd = std::max(std::sqrt(var[c] / static_cast<double>(n)), scale_floor * rms_sd);
    // Constant features are centred but left unscaled.
    s.scale[c] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[c])) ? sd : 1.0;
  }
  return s;
}

Standardizer Standardizer::identity(std::size_t n) {
  return {std::vector<double>(n, 0.0), std::vector<double>(n, 1.0)};
}

std::vector<double> Standardizer::apply(std::span<const double> row) const {
  if (row.size() != mean.size()) throw std::invalid_argument("Standardizer: feature count mismatch");
  std::vector<double> out(row.size());
  for (std::size_t c = 0; c < row.size(); ++c) out[c] = (row[c] - mean[c]) / scale[c];
  return out;
}

Matrix Standardizer::apply(const Matrix& rows) const {
  if (rows.cols() != mean.size()) throw std::invalid_argument("Standardizer: feature count mismatch");
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t r = 0; r < rows.rows(); ++r)
    for (std::size_t c = 0; c < rows.cols(); ++c) out(r, c) = (rows(r, c) - mean[c]) / scale[c];
  return out;
}

}  // namespace vibxai::nn
