#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "nn/layers.hpp"
#include "vibxai/nn.hpp"

namespace vibxai::nn {

using detail::Mat;

ForwardResult forward(const Network& net, const Matrix& batch, Mode mode) {
  const std::size_t k = net.config.n_classes;
  ForwardResult out;
  out.logits = Matrix(batch.rows(), k);
  out.probs = Matrix(batch.rows(), k);
  auto store = [&](std::size_t r, const detail::SampleTrace& tr) {
    for (std::size_t c = 0; c < k; ++c) {
      out.logits(r, c) = tr.logits[static_cast<Eigen::Index>(c)];
      out.probs(r, c) = tr.probs[static_cast<Eigen::Index>(c)];
    }
  };
  if (mode == Mode::train) {
    const auto traces = detail::trace_train(net, batch, out.batch_stats);
    for (std::size_t r = 0; r < traces.size(); ++r) store(r, traces[r]);
  } else {
    for (std::size_t r = 0; r < batch.rows(); ++r) store(r, detail::trace_eval(net, batch.row(r)));
  }
  return out;
}

Matrix smoothed_targets(std::span<const int> labels, std::size_t n_classes, double smoothing) {
  Matrix t(labels.size(), n_classes, smoothing / static_cast<double>(n_classes - 1));
  for (std::size_t r = 0; r < labels.size(); ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= n_classes)
      throw std::invalid_argument("label out of range");
    t(r, static_cast<std::size_t>(labels[r])) = 1.0 - smoothing;
  }
  return t;
}

double cross_entropy(const Matrix& probs, std::span<const int> labels, double smoothing) {
  if (probs.rows() != labels.size()) throw std::invalid_argument("cross_entropy: row/label count mismatch");
  const Matrix t = smoothed_targets(labels, probs.cols(), smoothing);
  double total = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r)
    for (std::size_t c = 0; c < probs.cols(); ++c)
      if (t(r, c) > 0.0) total -= t(r, c) * std::log(probs(r, c));
  return total / static_cast<double>(probs.rows());
}

LossAndGrads loss_and_grads(const Network& net, const Matrix& batch, std::span<const int> labels,
                            double smoothing) {
  if (batch.rows() != labels.size()) throw std::invalid_argument("loss_and_grads: row/label count mismatch");
  LossAndGrads out;
  const auto traces = detail::trace_train(net, batch, out.batch_stats);
  const std::size_t n = traces.size();
  const std::size_t k = net.config.n_classes;
  const Matrix targets = smoothed_targets(labels, k, smoothing);
  out.probs = Matrix(n, k);
  Mat d_logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  double loss = 0.0;
  for (std::size_t s = 0; s < n; ++s) {
    const auto& logits = traces[s].logits;
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    for (std::size_t c = 0; c < k; ++c) {
      const auto ci = static_cast<Eigen::Index>(c);
      loss -= targets(s, c) * (logits[ci] - lse);
      out.probs(s, c) = traces[s].probs[ci];
      d_logits(static_cast<Eigen::Index>(s), ci) = (traces[s].probs[ci] - targets(s, c)) / static_cast<double>(n);
    }
  }
  out.loss = loss / static_cast<double>(n);
  out.grads = detail::backward_train(net, traces, out.batch_stats, d_logits);
  return out;
}

void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state,
               const AdamConfig& cfg, std::size_t t) {
  if (t == 0) throw std::invalid_argument("adam_step: step counter starts at 1");
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: parameter/gradient count mismatch");
  if (state.m.empty()) {
    for (const Tensor* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i]->data;
    const auto& g = grads[i].data;
    if (g.size() != p.size()) throw std::invalid_argument("adam_step: gradient shape mismatch");
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * g[j];
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * g[j] * g[j];
      const double m_hat = m[j] / bc1;
      const double v_hat = v[j] / bc2;
      p[j] -= cfg.lr * m_hat / (std::sqrt(v_hat) + cfg.eps);
    }
  }
}

void update_running_stats(Network& net, std::span<const BatchNormStats> stats, double momentum) {
  if (stats.size() != net.blocks.size()) throw std::invalid_argument("update_running_stats: block count mismatch");
  for (std::size_t b = 0; b < stats.size(); ++b) {
    auto& blk = net.blocks[b];
    for (std::size_t c = 0; c < blk.running_mean.size(); ++c) {
      blk.running_mean.data[c] = momentum * blk.running_mean.data[c] + (1.0 - momentum) * stats[b].mean[c];
      blk.running_var.data[c] = momentum * blk.running_var.data[c] + (1.0 - momentum) * stats[b].var[c];
    }
  }
}

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw std::invalid_argument("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

namespace {

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < probs.cols(); ++c)
      if (probs(r, c) > probs(r, best)) best = c;
    out[r] = static_cast<int>(best);
  }
  return out;
}

void check_dataset(const Dataset& d, const char* name, std::size_t width) {
  if (d.rows.rows() == 0) throw std::invalid_argument(std::string("train: ") + name + " set is empty");
  if (d.rows.rows() != d.labels.size()) throw std::invalid_argument(std::string("train: ") + name + " row/label count mismatch");
  if (d.rows.cols() != width) throw std::invalid_argument(std::string("train: ") + name + " width != input_len");
}

}  // namespace

Checkpoint train(const ModelConfig& model_cfg, const Dataset& train_set, const Dataset& test_set,
                 const TrainConfig& cfg, const std::function<void(const EpochStats&)>& on_epoch) {
  model_cfg.validate();
  cfg.validate();
  check_dataset(train_set, "train", model_cfg.input_len);
  check_dataset(test_set, "test", model_cfg.input_len);

  Checkpoint current;
  current.input_norm = Standardizer::fit(train_set.rows, cfg.input_scale_floor);
  current.network = Network::initialize(model_cfg, cfg.seed);
  const Matrix x_train = current.input_norm.apply(train_set.rows);
  const Matrix x_test = current.input_norm.apply(test_set.rows);

  std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(x_train.rows());
  std::iota(order.begin(), order.end(), std::size_t{0});

  const AdamConfig adam{cfg.lr, cfg.beta1, cfg.beta2, cfg.adam_eps};
  AdamState state;
  std::size_t step = 0;
  Checkpoint best;
  bool have_best = false;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    // Portable Fisher-Yates.
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(shuffle_rng() % i);
      std::swap(order[i - 1], order[j]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix batch = x_train.select_rows(idx);
      std::vector<int> labels;
      for (auto i : idx) labels.push_back(train_set.labels[i]);
      auto lg = loss_and_grads(current.network, batch, labels, cfg.label_smoothing);
      if (!std::isfinite(lg.loss)) {
        std::ostringstream msg;
        msg << "training diverged: non-finite loss at epoch " << epoch << ", step " << step + 1;
        throw std::runtime_error(msg.str());
      }
      loss_sum += lg.loss * static_cast<double>(idx.size());
      update_running_stats(current.network, lg.batch_stats, cfg.bn_momentum);
      auto params = current.network.parameters();
      adam_step(params, lg.grads, state, adam, ++step);
    }

    const auto fwd = forward(current.network, x_test, Mode::eval);
    EpochStats es;
    es.epoch = epoch;
    es.train_loss = loss_sum / static_cast<double>(order.size());
    es.test_loss = cross_entropy(fwd.probs, test_set.labels, cfg.label_smoothing);
    es.test_accuracy = accuracy(argmax_rows(fwd.probs), test_set.labels);
    if (on_epoch) on_epoch(es);
    if (!have_best || es.test_accuracy > best.best_test_accuracy) {
      best = current;
      best.best_test_accuracy = es.test_accuracy;
      best.epoch_of_best = epoch;
      have_best = true;
    }
  }
  return best;
}

Prediction predict(const Checkpoint& ckpt, const Matrix& rows) {
  Prediction p;
  p.probs = forward(ckpt.network, ckpt.input_norm.apply(rows), Mode::eval).probs;
  p.labels = argmax_rows(p.probs);
  return p;
}

}  // namespace vibxai::nn
