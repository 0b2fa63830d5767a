#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

#include "vibxai/xai.hpp"

namespace vibxai::xai {

RidgeFit ridge_fit(const Matrix& z, std::span<const double> y, double alpha) {
  const auto p = static_cast<Eigen::Index>(z.rows());
  const auto n = static_cast<Eigen::Index>(z.cols());
  if (p == 0) throw std::invalid_argument("ridge_fit: no observations");
  if (y.size() != z.rows()) throw std::invalid_argument("ridge_fit: target length mismatch");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("ridge_fit: alpha must be finite and >= 0");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> zm(z.data().data(), p, n);
  const Eigen::Map<const Eigen::VectorXd> ym(y.data(), p);

  RidgeFit fit;
  if (alpha > 0.0) {
    // Centring removes the unpenalised intercept from the normal equations.
    const Eigen::RowVectorXd z_mean = zm.colwise().mean();
    const double y_mean = ym.mean();
    const Eigen::MatrixXd zc = zm.rowwise() - z_mean;
    const Eigen::VectorXd yc = ym.array() - y_mean;
    Eigen::MatrixXd gram = zc.transpose() * zc;
    gram.diagonal().array() += alpha;
    const Eigen::VectorXd w = gram.ldlt().solve(zc.transpose() * yc);
    fit.weights.assign(w.data(), w.data() + w.size());
    fit.intercept = y_mean - z_mean.dot(w);
    return fit;
  }

  Eigen::MatrixXd design(p, n + 1);
  design.col(0).setOnes();
  design.rightCols(n) = zm;
  const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(design);
  const Eigen::Index rank = cod.rank();
  if (rank != n + 1 && rank != p)
    throw std::domain_error("ridge_fit: singular system with alpha = 0 (rank " + std::to_string(rank) + ")");
  const Eigen::VectorXd sol = cod.solve(ym);
  fit.intercept = sol[0];
  fit.weights.assign(sol.data() + 1, sol.data() + sol.size());
  return fit;
}

}  // namespace vibxai::xai
