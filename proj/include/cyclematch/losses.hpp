#pragma once

#include "cyclematch/graph.hpp"

namespace cyclematch {

struct LossConfig {
  double lambda_geom = 1.0;
};

struct LossValue {
  double value = 0.0;
  Matrix grad;  // dLoss/dE
};

struct CombinedLoss {
  double total = 0.0;
  double cycle = 0.0;
  double geom = 0.0;
  Matrix grad;
};

/// (1/n^2) sum |E E^T - A|. The gradient uses sign(0) = 0.
LossValue cycle_loss(const Matrix& adjacency, const Matrix& embedding);

/// (1/n^2) sum G_ij (E_i . E_j) with gradient (2/n^2) G E; G must be symmetric.
LossValue geometric_loss(const Matrix& prior, const Matrix& embedding);

/// Cycle loss plus lambda_geom times the geometric loss when a prior is given.
CombinedLoss combined_loss(const Matrix& adjacency, const Matrix* prior, const Matrix& embedding,
                           const LossConfig& config);

}  // namespace cyclematch
