#include "nn/layers.hpp"

#include <cmath>
#include <stdexcept>

namespace vibxai::nn::detail {

ConstMatMap conv_weight(const ConvBlock& block) {
  const auto& s = block.weight.shape;
  return {block.weight.data.data(), static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1] * s[2])};
}

ConstMatMap dense_weight(const Dense& layer) {
  const auto& s = layer.weight.shape;
  return {layer.weight.data.data(), static_cast<Eigen::Index>(s[0]), static_cast<Eigen::Index>(s[1])};
}

Mat im2col(const Mat& x, std::size_t kernel) {
  const auto k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index out_len = x.cols() - k + 1;
  Mat col(x.rows() * k, out_len);
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    for (Eigen::Index j = 0; j < k; ++j) col.row(c * k + j) = x.row(c).segment(j, out_len);
  return col;
}

Mat col2im(const Mat& col, std::size_t channels, std::size_t kernel, std::size_t in_len) {
  const auto k = static_cast<Eigen::Index>(kernel);
  const Eigen::Index out_len = col.cols();
  Mat x = Mat::Zero(static_cast<Eigen::Index>(channels), static_cast<Eigen::Index>(in_len));
  for (Eigen::Index c = 0; c < x.rows(); ++c)
    for (Eigen::Index j = 0; j < k; ++j) x.row(c).segment(j, out_len) += col.row(c * k + j);
  return x;
}

Mat conv_forward(const ConvBlock& block, const Mat& x) {
  const auto w = conv_weight(block);
  Mat y = w * im2col(x, block.weight.shape[2]);
  for (Eigen::Index f = 0; f < y.rows(); ++f) y.row(f).array() += block.bias.data[f];
  return y;
}

void max_pool(const Mat& x, std::size_t pool, Mat& out, std::vector<Eigen::Index>& argmax) {
  const auto p = static_cast<Eigen::Index>(pool);
  const Eigen::Index out_len = x.cols() / p;
  out.resize(x.rows(), out_len);
  argmax.resize(static_cast<std::size_t>(x.rows() * out_len));
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (Eigen::Index t = 0; t < out_len; ++t) {
      Eigen::Index best = t * p;
      for (Eigen::Index i = t * p + 1; i < (t + 1) * p; ++i)
        if (x(c, i) > x(c, best)) best = i;
      out(c, t) = x(c, best);
      argmax[static_cast<std::size_t>(c * out_len + t)] = best;
    }
  }
}

Mat max_pool_backward(const Mat& d_out, const std::vector<Eigen::Index>& argmax, Eigen::Index rows,
                      Eigen::Index cols) {
  Mat d = Mat::Zero(rows, cols);
  for (Eigen::Index c = 0; c < d_out.rows(); ++c)
    for (Eigen::Index t = 0; t < d_out.cols(); ++t)
      d(c, argmax[static_cast<std::size_t>(c * d_out.cols() + t)]) += d_out(c, t);
  return d;
}

Vec softmax(const Vec& logits) {
  const double m = logits.maxCoeff();
  Vec e = (logits.array() - m).exp();
  return e / e.sum();
}

namespace {

void head_forward(const Network& net, SampleTrace& tr) {
  const auto& last = tr.blocks.back().pooled;
  tr.flat = Eigen::Map<const Vec>(last.data(), last.size());
  tr.hidden_pre = dense_weight(net.hidden) * tr.flat + Eigen::Map<const Vec>(net.hidden.bias.data.data(),
                                                                             net.hidden.bias.size());
  tr.hidden = tr.hidden_pre.cwiseMax(0.0);
  tr.logits = dense_weight(net.output) * tr.hidden +
              Eigen::Map<const Vec>(net.output.bias.data.data(), net.output.bias.size());
  tr.probs = softmax(tr.logits);
}

void check_width(const Network& net, std::size_t width) {
  if (width != net.config.input_len)
    throw std::invalid_argument("network input width " + std::to_string(width) + " != input_len " +
                                std::to_string(net.config.input_len));
}

}  // namespace

SampleTrace trace_eval(const Network& net, std::span<const double> x) {
  check_width(net, x.size());
  SampleTrace tr;
  tr.blocks.resize(net.blocks.size());
  Mat input = Eigen::Map<const Mat>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const auto& blk = net.blocks[b];
    auto& bt = tr.blocks[b];
    bt.input = std::move(input);
    bt.pre = conv_forward(blk, bt.input);
    bt.act = bt.pre.cwiseMax(0.0);
    bt.normed.resize(bt.act.rows(), bt.act.cols());
    bt.bn_out.resize(bt.act.rows(), bt.act.cols());
    for (Eigen::Index c = 0; c < bt.act.rows(); ++c) {
      const double inv_std = 1.0 / std::sqrt(blk.running_var.data[c] + kBatchNormEps);
      bt.normed.row(c) = (bt.act.row(c).array() - blk.running_mean.data[c]) * inv_std;
      bt.bn_out.row(c) = bt.normed.row(c).array() * blk.gamma.data[c] + blk.beta.data[c];
    }
    max_pool(bt.bn_out, net.config.conv_blocks[b].pool_size, bt.pooled, bt.argmax);
    input = bt.pooled;
  }
  head_forward(net, tr);
  return tr;
}

std::vector<SampleTrace> trace_train(const Network& net, const Matrix& batch, std::vector<BatchNormStats>& stats) {
  check_width(net, batch.cols());
  const std::size_t n = batch.rows();
  if (n == 0) throw std::invalid_argument("trace_train: empty batch");
  std::vector<SampleTrace> traces(n);
  for (std::size_t s = 0; s < n; ++s) {
    traces[s].blocks.resize(net.blocks.size());
    traces[s].blocks[0].input = Eigen::Map<const Mat>(batch.row(s).data(), 1, static_cast<Eigen::Index>(batch.cols()));
  }
  stats.assign(net.blocks.size(), {});
  for (std::size_t b = 0; b < net.blocks.size(); ++b) {
    const auto& blk = net.blocks[b];
    const std::size_t channels = blk.bias.size();
    for (auto& tr : traces) {
      auto& bt = tr.blocks[b];
      bt.pre = conv_forward(blk, bt.input);
      bt.act = bt.pre.cwiseMax(0.0);
    }
    const double count = static_cast<double>(n * static_cast<std::size_t>(traces[0].blocks[b].act.cols()));
    auto& st = stats[b];
    st.mean.assign(channels, 0.0);
    st.var.assign(channels, 0.0);
    for (std::size_t c = 0; c < channels; ++c) {
      double sum = 0.0;
      for (const auto& tr : traces) sum += tr.blocks[b].act.row(static_cast<Eigen::Index>(c)).sum();
      const double mean = sum / count;
      double sq = 0.0;
      for (const auto& tr : traces)
        sq += (tr.blocks[b].act.row(static_cast<Eigen::Index>(c)).array() - mean).square().sum();
      st.mean[c] = mean;
      st.var[c] = sq / count;
    }
    for (auto& tr : traces) {
      auto& bt = tr.blocks[b];
      bt.normed.resize(bt.act.rows(), bt.act.cols());
      bt.bn_out.resize(bt.act.rows(), bt.act.cols());
      for (Eigen::Index c = 0; c < bt.act.rows(); ++c) {
        const double inv_std = 1.0 / std::sqrt(st.var[c] + kBatchNormEps);
        bt.normed.row(c) = (bt.act.row(c).array() - st.mean[c]) * inv_std;
        bt.bn_out.row(c) = bt.normed.row(c).array() * blk.gamma.data[c] + blk.beta.data[c];
      }
      max_pool(bt.bn_out, net.config.conv_blocks[b].pool_size, bt.pooled, bt.argmax);
      if (b + 1 < net.blocks.size()) tr.blocks[b + 1].input = bt.pooled;
    }
  }
  for (auto& tr : traces) head_forward(net, tr);
  return traces;
}

std::vector<Tensor> backward_train(const Network& net, const std::vector<SampleTrace>& traces,
                                   const std::vector<BatchNormStats>& stats, const Mat& d_logits) {
  std::vector<Tensor> grads;
  for (const Tensor* p : net.parameters()) grads.emplace_back(p->shape);
  // Gradient slots follow Network::parameters(): 4 per block, then the head.
  const std::size_t head = 4 * net.blocks.size();
  MatMap d_hidden_w(grads[head].data.data(), dense_weight(net.hidden).rows(), dense_weight(net.hidden).cols());
  Eigen::Map<Vec> d_hidden_b(grads[head + 1].data.data(), static_cast<Eigen::Index>(grads[head + 1].size()));
  MatMap d_out_w(grads[head + 2].data.data(), dense_weight(net.output).rows(), dense_weight(net.output).cols());
  Eigen::Map<Vec> d_out_b(grads[head + 3].data.data(), static_cast<Eigen::Index>(grads[head + 3].size()));

  const std::size_t n = traces.size();
  std::vector<Mat> d_pooled(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto& tr = traces[s];
    const Vec dl = d_logits.row(static_cast<Eigen::Index>(s)).transpose();
    d_out_w.noalias() += dl * tr.hidden.transpose();
    d_out_b += dl;
    Vec dh = dense_weight(net.output).transpose() * dl;
    dh.array() *= (tr.hidden_pre.array() > 0.0).cast<double>();
    d_hidden_w.noalias() += dh * tr.flat.transpose();
    d_hidden_b += dh;
    const Vec d_flat = dense_weight(net.hidden).transpose() * dh;
    const auto& last = tr.blocks.back().pooled;
    d_pooled[s] = Eigen::Map<const Mat>(d_flat.data(), last.rows(), last.cols());
  }

  for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
    const auto& blk = net.blocks[bi];
    const auto& st = stats[bi];
    auto& d_w = grads[4 * bi];
    auto& d_b = grads[4 * bi + 1];
    auto& d_gamma = grads[4 * bi + 2];
    auto& d_beta = grads[4 * bi + 3];
    const Eigen::Index channels = static_cast<Eigen::Index>(blk.bias.size());
    const Eigen::Index len = traces[0].blocks[bi].act.cols();
    const double count = static_cast<double>(n) * static_cast<double>(len);

    std::vector<Mat> d_xhat(n);
    Vec sum_dxhat = Vec::Zero(channels);
    Vec sum_dxhat_xhat = Vec::Zero(channels);
    for (std::size_t s = 0; s < n; ++s) {
      const auto& bt = traces[s].blocks[bi];
      const Mat d_bn = max_pool_backward(d_pooled[s], bt.argmax, bt.bn_out.rows(), bt.bn_out.cols());
      d_xhat[s].resize(channels, len);
      for (Eigen::Index c = 0; c < channels; ++c) {
        d_gamma.data[c] += (d_bn.row(c).array() * bt.normed.row(c).array()).sum();
        d_beta.data[c] += d_bn.row(c).sum();
        d_xhat[s].row(c) = d_bn.row(c) * blk.gamma.data[c];
        sum_dxhat[c] += d_xhat[s].row(c).sum();
        sum_dxhat_xhat[c] += (d_xhat[s].row(c).array() * bt.normed.row(c).array()).sum();
      }
    }

    MatMap dw(d_w.data.data(), conv_weight(blk).rows(), conv_weight(blk).cols());
    for (std::size_t s = 0; s < n; ++s) {
      const auto& bt = traces[s].blocks[bi];
      Mat d_pre(channels, len);
      for (Eigen::Index c = 0; c < channels; ++c) {
        const double inv_std = 1.0 / std::sqrt(st.var[c] + kBatchNormEps);
        d_pre.row(c).array() = (inv_std / count) * (count * d_xhat[s].row(c).array() - sum_dxhat[c] -
                                            bt.normed.row(c).array() * sum_dxhat_xhat[c]);
      }
      d_pre.array() *= (bt.pre.array() > 0.0).cast<double>();
      const Mat col = im2col(bt.input, blk.weight.shape[2]);
      dw.noalias() += d_pre * col.transpose();
      for (Eigen::Index c = 0; c < channels; ++c) d_b.data[c] += d_pre.row(c).sum();
      if (bi > 0) {
        const Mat d_col = conv_weight(blk).transpose() * d_pre;
        d_pooled[s] = col2im(d_col, blk.weight.shape[1], blk.weight.shape[2], static_cast<std::size_t>(bt.input.cols()));
      }
    }
  }
  return grads;
}

std::vector<Mat> backward_eval_to_activations(const Network& net, const SampleTrace& tr, const Vec& d_logits) {
  std::vector<Mat> d_act(net.blocks.size());
  Vec dh = dense_weight(net.output).transpose() * d_logits;
  dh.array() *= (tr.hidden_pre.array() > 0.0).cast<double>();
  const Vec d_flat = dense_weight(net.hidden).transpose() * dh;
  const auto& last = tr.blocks.back().pooled;
  Mat d_pooled = Eigen::Map<const Mat>(d_flat.data(), last.rows(), last.cols());
  for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
    const auto& blk = net.blocks[bi];
    const auto& bt = tr.blocks[bi];
    Mat d = max_pool_backward(d_pooled, bt.argmax, bt.bn_out.rows(), bt.bn_out.cols());
    for (Eigen::Index c = 0; c < d.rows(); ++c)
      d.row(c) *= blk.gamma.data[c] / std::sqrt(blk.running_var.data[c] + kBatchNormEps);
    d_act[bi] = d;
    if (bi > 0) {
      const Mat d_pre = (d.array() * (bt.pre.array() > 0.0).cast<double>()).matrix();
      d_pooled = col2im(conv_weight(blk).transpose() * d_pre, blk.weight.shape[1], blk.weight.shape[2],
                        static_cast<std::size_t>(bt.input.cols()));
    }
  }
  return d_act;
}

}  // namespace vibxai::nn::detail
