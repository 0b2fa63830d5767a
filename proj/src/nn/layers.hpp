#pragma once

// Internal forward/backward kernels shared by training and the explanation
// methods. Activations of one sample are channel x position matrices.

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "vibxai/nn.hpp"

namespace vibxai::nn::detail {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;

struct BlockTrace {
  Mat input;   // in_channels x in_len
  Mat pre;     // conv output including bias
  Mat act;     // ReLU(pre), the block's feature maps
  Mat normed;  // batch-norm normalised act (before gamma/beta)
  Mat bn_out;
  Mat pooled;
  std::vector<Eigen::Index> argmax;  // per pooled element, position within bn_out row
};

struct SampleTrace {
  std::vector<BlockTrace> blocks;
  Vec flat;
  Vec hidden_pre;
  Vec hidden;
  Vec logits;
  Vec probs;
};

ConstMatMap conv_weight(const ConvBlock& block);
ConstMatMap dense_weight(const Dense& layer);

/// Column matrix with rows (channel, tap) and one column per output position.
Mat im2col(const Mat& x, std::size_t kernel);
/// Adjoint of im2col: scatter-adds columns back onto an in_channels x in_len map.
Mat col2im(const Mat& col, std::size_t channels, std::size_t kernel, std::size_t in_len);

Mat conv_forward(const ConvBlock& block, const Mat& x);
/// Non-overlapping max pool; ties resolve to the first index.
void max_pool(const Mat& x, std::size_t pool, Mat& out, std::vector<Eigen::Index>& argmax);
Mat max_pool_backward(const Mat& d_out, const std::vector<Eigen::Index>& argmax, Eigen::Index rows,
                      Eigen::Index cols);

Vec softmax(const Vec& logits);

/// Eval-mode pass (running batch-norm statistics) on a standardized input row.
SampleTrace trace_eval(const Network& net, std::span<const double> x);

/// Train-mode pass; batch statistics are written to `stats`.
std::vector<SampleTrace> trace_train(const Network& net, const Matrix& batch, std::vector<BatchNormStats>& stats);

/// Reverse pass of a train-mode batch. `d_logits` is the loss gradient with
/// respect to the logits, one row per sample.
std::vector<Tensor> backward_train(const Network& net, const std::vector<SampleTrace>& traces,
                                   const std::vector<BatchNormStats>& stats, const Mat& d_logits);

/// Gradient with respect to each block's feature maps (post-ReLU conv
/// output) for an eval-mode trace, given the gradient at the logits.
std::vector<Mat> backward_eval_to_activations(const Network& net, const SampleTrace& trace, const Vec& d_logits);

}  // namespace vibxai::nn::detail
