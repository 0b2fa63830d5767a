#include <cmath>
#include <stdexcept>

#include "nn/layers.hpp"
#include "vibxai/xai.hpp"

namespace vibxai::xai {

using nn::detail::Mat;
using nn::detail::Vec;

namespace {

// Relevance per unit of output divided by its (stabilised) pre-activation.
template <typename Derived>
Mat relevance_ratio(const Eigen::MatrixBase<Derived>& z, const Mat& relevance, LrpVariant variant, double eps) {
  Mat s(z.rows(), z.cols());
  double eps_layer = 0.0;
  if (variant == LrpVariant::epsilon) {
    const double scale = z.cwiseAbs().mean();
    eps_layer = eps * (scale > 0.0 ? scale : 1.0);
  }
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      const double zij = z(i, j);
      if (variant == LrpVariant::z) {
        s(i, j) = zij != 0.0 ? relevance(i, j) / zij : 0.0;
      } else {
        s(i, j) = relevance(i, j) / (zij + (zij >= 0.0 ? eps_layer : -eps_layer));
      }
    }
  }
  return s;
}

Vec dense_relevance(const nn::Dense& layer, const Vec& input, const Vec& z, const Vec& relevance, LrpVariant variant,
                    double eps) {
  const Mat s = relevance_ratio(z, Mat(relevance), variant, eps);
  const Vec back = nn::detail::dense_weight(layer).transpose() * Eigen::Map<const Vec>(s.data(), s.size());
  return input.cwiseProduct(back);
}

}  // namespace

LrpResult lrp(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls, LrpVariant variant, double eps) {
  const auto& net = ckpt.network;
  if (cls < 0 || static_cast<std::size_t>(cls) >= net.config.n_classes)
    throw std::invalid_argument("explained class out of range");
  if (variant == LrpVariant::epsilon && !(eps > 0.0)) throw std::invalid_argument("lrp: eps must be positive");

  const auto x = ckpt.input_norm.apply(sample);
  const auto tr = nn::detail::trace_eval(net, x);

  LrpResult result;
  result.output_score = tr.logits[cls];
  Vec r_logits = Vec::Zero(tr.logits.size());
  r_logits[cls] = result.output_score;

  const Vec r_hidden = dense_relevance(net.output, tr.hidden, tr.logits, r_logits, variant, eps);
  const Vec r_flat = dense_relevance(net.hidden, tr.flat, tr.hidden_pre, r_hidden, variant, eps);
  const auto& last = tr.blocks.back().pooled;
  Mat r_pooled = Eigen::Map<const Mat>(r_flat.data(), last.rows(), last.cols());

  for (std::size_t bi = net.blocks.size(); bi-- > 0;) {
    const auto& blk = net.blocks[bi];
    const auto& bt = tr.blocks[bi];
    const Mat r_bn = nn::detail::max_pool_backward(r_pooled, bt.argmax, bt.bn_out.rows(), bt.bn_out.cols());

    // Batch norm as the per-channel affine map act -> a * act + c.
    Mat scaled(bt.act.rows(), bt.act.cols());
    for (Eigen::Index c = 0; c < scaled.rows(); ++c)
      scaled.row(c) = bt.act.row(c) * (blk.gamma.data[c] / std::sqrt(blk.running_var.data[c] + nn::kBatchNormEps));
    const Mat r_act = scaled.cwiseProduct(relevance_ratio(bt.bn_out, r_bn, variant, eps));

    // ReLU passes relevance unchanged to the conv output.
    const Mat s = relevance_ratio(bt.pre, r_act, variant, eps);
    const Mat back = nn::detail::col2im(nn::detail::conv_weight(blk).transpose() * s, blk.weight.shape[1],
                                        blk.weight.shape[2], static_cast<std::size_t>(bt.input.cols()));
    r_pooled = bt.input.cwiseProduct(back);
  }

  result.relevance.assign(r_pooled.data(), r_pooled.data() + r_pooled.size());
  for (double v : result.relevance) result.relevance_sum += v;
  return result;
}

}  // namespace vibxai::xai
