#include <algorithm>
#include <stdexcept>
#include <string>

#include "nn/layers.hpp"
#include "vibxai/xai.hpp"

namespace vibxai::xai {

using nn::detail::Mat;
using nn::detail::Vec;

std::string_view method_name(Method m) noexcept {
  switch (m) {
    case Method::gradcam: return "gradcam";
    case Method::gradcam_pp: return "gradcam_pp";
    case Method::scorecam: return "scorecam";
    case Method::lrp_z: return "lrp_z";
    case Method::lrp_eps: return "lrp_eps";
    case Method::lime_global: return "lime_global";
  }
  return "unknown";
}

Method parse_method(std::string_view text) {
  for (Method m : {Method::gradcam, Method::gradcam_pp, Method::scorecam, Method::lrp_z, Method::lrp_eps,
                   Method::lime_global})
    if (method_name(m) == text) return m;
  if (text == "gradcampp" || text == "gradcam++") return Method::gradcam_pp;
  if (text == "lime") return Method::lime_global;
  throw std::invalid_argument("unknown explanation method '" + std::string(text) + "'");
}

std::vector<double> upsample_linear(std::span<const double> src, std::size_t n) {
  if (src.empty()) throw std::invalid_argument("upsample_linear: empty source");
  std::vector<double> out(n);
  if (src.size() == 1 || n == 1) {
    std::fill(out.begin(), out.end(), src[0]);
    return out;
  }
  const double step = static_cast<double>(src.size() - 1) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double pos = static_cast<double>(i) * step;
    const auto lo = std::min(static_cast<std::size_t>(pos), src.size() - 2);
    const double t = pos - static_cast<double>(lo);
    out[i] = (1.0 - t) * src[lo] + t * src[lo + 1];
  }
  return out;
}

namespace {

void check_class(const nn::Checkpoint& ckpt, int cls) {
  if (cls < 0 || static_cast<std::size_t>(cls) >= ckpt.network.config.n_classes)
    throw std::invalid_argument("explained class out of range");
}

// Gradient of the softmax probability of `cls` with respect to the logits.
Vec probability_gradient(const Vec& probs, int cls) {
  Vec d = -probs[cls] * probs;
  d[cls] += probs[cls];
  return d;
}

struct LastConv {
  Mat act;   // channels x positions
  Mat grad;  // d p_cls / d act
  nn::detail::SampleTrace trace;
};

LastConv last_conv_with_gradient(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls) {
  check_class(ckpt, cls);
  const auto x = ckpt.input_norm.apply(sample);
  LastConv lc;
  lc.trace = nn::detail::trace_eval(ckpt.network, x);
  lc.act = lc.trace.blocks.back().act;
  lc.grad = nn::detail::backward_eval_to_activations(ckpt.network, lc.trace,
                                                     probability_gradient(lc.trace.probs, cls))
                .back();
  return lc;
}

CamResult weighted_cam(const Mat& act, const Vec& weights, std::size_t n_out) {
  CamResult r;
  if ((weights.array() == 0.0).all()) {
    r.values.assign(n_out, 0.0);
    r.degenerate = true;
    return r;
  }
  const Vec cam = (weights.transpose() * act).transpose().cwiseMax(0.0);
  r.values = upsample_linear(std::span<const double>(cam.data(), static_cast<std::size_t>(cam.size())), n_out);
  return r;
}

}  // namespace

CamResult grad_cam(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls) {
  const auto lc = last_conv_with_gradient(ckpt, sample, cls);
  const Vec weights = lc.grad.rowwise().mean();
  return weighted_cam(lc.act, weights, sample.size());
}

CamResult grad_cam_pp(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls) {
  const auto lc = last_conv_with_gradient(ckpt, sample, cls);
  const Eigen::Index channels = lc.act.rows();
  Vec weights = Vec::Zero(channels);
  for (Eigen::Index k = 0; k < channels; ++k) {
    const double act_sum = lc.act.row(k).sum();
    for (Eigen::Index t = 0; t < lc.act.cols(); ++t) {
      const double g = lc.grad(k, t);
      const double g2 = g * g;
      const double denom = 2.0 * g2 + act_sum * g2 * g;
      const double alpha = denom != 0.0 ? g2 / denom : 0.0;
      weights[k] += alpha * std::max(g, 0.0);
    }
  }
  return weighted_cam(lc.act, weights, sample.size());
}

CamResult score_cam(const nn::Checkpoint& ckpt, std::span<const double> sample, int cls) {
  check_class(ckpt, cls);
  const auto& net = ckpt.network;
  const auto x = ckpt.input_norm.apply(sample);
  const auto tr = nn::detail::trace_eval(net, x);
  const double baseline = tr.probs[cls];
  const Mat& act = tr.blocks.back().act;
  Vec weights = Vec::Zero(act.rows());
  std::vector<double> masked(x.size());
  for (Eigen::Index k = 0; k < act.rows(); ++k) {
    const Vec row = act.row(k).transpose();
    const auto up = upsample_linear(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())), x.size());
    const auto [lo, hi] = std::minmax_element(up.begin(), up.end());
    const double range = *hi - *lo;
    if (!(range > 0.0)) continue;
    for (std::size_t i = 0; i < x.size(); ++i) masked[i] = x[i] * (up[i] - *lo) / range;
    weights[k] = nn::detail::trace_eval(net, masked).probs[cls] - baseline;
  }
  return weighted_cam(act, weights, sample.size());
}

SaliencyMap explain_rows(const nn::Checkpoint& ckpt, const RpmMap& map, Method method, Label cls, double lrp_eps) {
  if (method == Method::lime_global) throw std::invalid_argument("explain_rows: lime_global is not per-sample");
  SaliencyMap out;
  out.values = Matrix(map.rows(), map.cols());
  out.rpm = map.rpm;
  out.axis = map.axis;
  out.bin_width = map.bin_width;
  out.method = method;
  out.class_explained = cls;
  const int c = class_index(cls);
  for (std::size_t r = 0; r < map.rows(); ++r) {
    std::vector<double> values;
    switch (method) {
      case Method::gradcam: values = grad_cam(ckpt, map.values.row(r), c).values; break;
      case Method::gradcam_pp: values = grad_cam_pp(ckpt, map.values.row(r), c).values; break;
      case Method::scorecam: values = score_cam(ckpt, map.values.row(r), c).values; break;
      case Method::lrp_z: values = lrp(ckpt, map.values.row(r), c, LrpVariant::z).relevance; break;
      case Method::lrp_eps: values = lrp(ckpt, map.values.row(r), c, LrpVariant::epsilon, lrp_eps).relevance; break;
      case Method::lime_global: break;
    }
    std::copy(values.begin(), values.end(), out.values.row(r).begin());
  }
  return out;
}

}  // namespace vibxai::xai
