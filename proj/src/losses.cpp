#include "cyclematch/losses.hpp"

#include "cyclematch/error.hpp"

namespace cyclematch {

LossValue cycle_loss(const Matrix& adjacency, const Matrix& embedding) {
  const Eigen::Index n = embedding.rows();
  require(adjacency.rows() == n && adjacency.cols() == n, ErrorCode::DimensionMismatch,
          "cycle_loss: adjacency does not match embedding rows");
  const double scale = 1.0 / static_cast<double>(n * n);
  const Matrix residual = embedding * embedding.transpose() - adjacency;
  const Matrix sign = residual.unaryExpr([](double r) { return double((r > 0.0) - (r < 0.0)); });
  return LossValue{scale * residual.cwiseAbs().sum(), scale * (sign + sign.transpose()) * embedding};
}

LossValue geometric_loss(const Matrix& prior, const Matrix& embedding) {
  const Eigen::Index n = embedding.rows();
  require(prior.rows() == n && prior.cols() == n, ErrorCode::DimensionMismatch,
          "geometric_loss: prior does not match embedding rows");
  const double scale = 1.0 / static_cast<double>(n * n);
  const Matrix ge = prior * embedding;
  return LossValue{scale * ge.cwiseProduct(embedding).sum(), 2.0 * scale * ge};
}

CombinedLoss combined_loss(const Matrix& adjacency, const Matrix* prior, const Matrix& embedding,
                           const LossConfig& config) {
  require(config.lambda_geom >= 0.0, ErrorCode::InvalidArgument, "lambda_geom must be nonnegative");
  auto cycle = cycle_loss(adjacency, embedding);
  CombinedLoss out;
  out.cycle = cycle.value;
  out.total = cycle.value;
  out.grad = std::move(cycle.grad);
  if (prior && config.lambda_geom > 0.0) {
    const auto geom = geometric_loss(*prior, embedding);
    out.geom = geom.value;
    out.total += config.lambda_geom * geom.value;
    out.grad += config.lambda_geom * geom.grad;
  }
  return out;
}

}  // namespace cyclematch
