#pragma once

#include "cyclematch/graph.hpp"

#include <string>
#include <vector>

namespace cyclematch {

/// Soft correspondence estimate in [0,1] from a non-learned solver.
struct SoftMatchMatrix {
  Matrix S;
  std::string method;
  int iterations = 0;
  double seconds = 0.0;
};

struct EigenPairs {
  Vector values;   // descending
  Matrix vectors;  // unit columns
};

/// Leading k eigenpairs (largest algebraic eigenvalues) of a symmetric
/// matrix. Throws ConvergenceFailure when a pair misses the residual bound
/// |Av - lambda v| <= tol * |A|_2.
EigenPairs topk_eig(const Matrix& a, int k, double tol = 1e-8);

/// Row-normalized U sqrt(Lambda_+) from the d leading eigenpairs; rows with no
/// positive spectral mass are zero.
Matrix spectral_embedding(const Matrix& a, int d);

/// Clamped cosine similarities of the spectral embedding. The diagonal is
/// copied from the input: self-matches are given, not estimated.
SoftMatchMatrix spectral(const Matrix& a, int d);

/// Alternating ridge least squares on M ~ U V^T, where M is the input with a
/// unit diagonal (every feature matches itself). `objective`, when given,
/// receives the objective after every half-step.
SoftMatchMatrix matchals(const Matrix& a, int d, int iters, double mu = 1e-2,
                         std::vector<double>* objective = nullptr);

/// Nonnegativity clamp followed by alternating row/column normalization until
/// every row and column sum is within tol of 1. Throws SinkhornNoConverge.
Matrix sinkhorn_project(const Matrix& p, double tol = 1e-6, int max_sweeps = 1000);

struct PgddsTrace {
  // Largest |row or column sum - 1| over all blocks after each projection.
  std::vector<double> marginal_error;
};

/// Projected gradient ascent on (1 / (views - 1)) sum_{b != c} <A_bc, P_b P_c^T> with each
/// per-view block P_b projected to the doubly stochastic set. View 0 is the
/// reference frame (P_0 = I); the other blocks start from spectral
/// similarities to view 0 and move along the gradient with its row and column
/// means removed. Requires every view to hold exactly d nodes. step <= 0
/// selects 16.
SoftMatchMatrix pgdds(const Matrix& a, int d, const std::vector<int>& view_of, int iters,
                      double step = 0.0, PgddsTrace* trace = nullptr);

}  // namespace cyclematch
