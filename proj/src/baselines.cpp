#include "cyclematch/baselines.hpp"

#include "cyclematch/error.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>

namespace cyclematch {
namespace {

// Entries are kept at or above this value before each projection so every
// block retains full support and the scaling converges within the sweep cap.
constexpr double kPgddsFloor = 1e-2;
// Balancing a floored block needs more sweeps than the default cap when the
// gradient step makes its entries span several orders of magnitude.
constexpr int kPgddsSweeps = 10000;

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Matrix symmetric_clamp(const Matrix& s) { return (0.5 * (s + s.transpose())).cwiseMax(0.0).cwiseMin(1.0); }

void copy_diagonal(Matrix& s, const Matrix& a) { s.diagonal() = a.diagonal().cwiseMax(0.0).cwiseMin(1.0); }

void check_square(const Matrix& a, int d, const char* who) {
  require(a.rows() == a.cols(), ErrorCode::DimensionMismatch, std::string(who) + ": matrix must be square");
  require(d >= 1 && d <= a.rows(), ErrorCode::InvalidArgument, std::string(who) + ": need 1 <= d <= n");
}

}  // namespace

EigenPairs topk_eig(const Matrix& a, int k, double tol) {
  check_square(a, k, "topk_eig");
  require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-9 * std::max(1.0, a.cwiseAbs().maxCoeff()),
          ErrorCode::InvalidArgument, "topk_eig: matrix is not symmetric");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(a);
  require(solver.info() == Eigen::Success, ErrorCode::ConvergenceFailure, "eigensolver did not converge");

  const Eigen::Index n = a.rows();
  EigenPairs out;
  out.values = solver.eigenvalues().tail(k).reverse();
  out.vectors = solver.eigenvectors().rightCols(k).rowwise().reverse();

  const double norm = std::max(solver.eigenvalues().cwiseAbs().maxCoeff(), 1e-300);
  for (int j = 0; j < k; ++j) {
    const double residual = (a * out.vectors.col(j) - out.values[j] * out.vectors.col(j)).norm();
    require(residual <= tol * norm || residual <= 1e-300, ErrorCode::ConvergenceFailure,
            "eigenpair " + std::to_string(j) + " residual " + std::to_string(residual) + " exceeds tolerance");
  }
  (void)n;
  return out;
}

Matrix spectral_embedding(const Matrix& a, int d) {
  const auto pairs = topk_eig(a, d);
  Matrix u = pairs.vectors * pairs.values.cwiseMax(0.0).cwiseSqrt().asDiagonal();
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    const double norm = u.row(i).norm();
    if (norm > 1e-12) u.row(i) /= norm;
    else u.row(i).setZero();
  }
  return u;
}

SoftMatchMatrix spectral(const Matrix& a, int d) {
  check_square(a, d, "spectral");
  const auto start = std::chrono::steady_clock::now();
  const Matrix u = spectral_embedding(a, d);
  Matrix s = symmetric_clamp(u * u.transpose());
  copy_diagonal(s, a);
  return SoftMatchMatrix{std::move(s), "spectral", 1, seconds_since(start)};
}

SoftMatchMatrix matchals(const Matrix& a, int d, int iters, double mu, std::vector<double>* objective) {
  check_square(a, d, "matchals");
  require(iters >= 1, ErrorCode::InvalidArgument, "matchals: iters must be >= 1");
  require(mu > 0.0, ErrorCode::InvalidArgument, "matchals: mu must be positive");
  const auto start = std::chrono::steady_clock::now();

  Matrix m = a;
  m.diagonal().setOnes();
  const Eigen::Index n = a.rows();

  // Start V on the first d coordinate directions of M's column space.
  Matrix v = m.leftCols(d);
  Matrix u = Matrix::Zero(n, d);
  const Matrix ridge = mu * Matrix::Identity(d, d);

  const auto record = [&] {
    if (objective)
      objective->push_back((m - u * v.transpose()).squaredNorm() + mu * (u.squaredNorm() + v.squaredNorm()));
  };
  const auto solve = [&](const Matrix& fixed) -> Matrix {
    // argmin_X |M - X F^T|^2 + mu |X|^2  =>  X = M F (F^T F + mu I)^-1
    Eigen::LLT<Matrix> llt(fixed.transpose() * fixed + ridge);
    require(llt.info() == Eigen::Success, ErrorCode::SingularSystem,
            "matchals: normal equations are singular; increase mu");
    Matrix x = llt.solve((m * fixed).transpose()).transpose();
    require(x.allFinite(), ErrorCode::SingularSystem, "matchals: normal equations are singular; increase mu");
    return x;
  };

  for (int it = 0; it < iters; ++it) {
    u = solve(v);
    record();
    v = solve(u);
    record();
  }

  Matrix s = symmetric_clamp(u * v.transpose());
  copy_diagonal(s, a);
  return SoftMatchMatrix{std::move(s), "matchals", iters, seconds_since(start)};
}

Matrix sinkhorn_project(const Matrix& p, double tol, int max_sweeps) {
  Matrix x = p.cwiseMax(0.0);
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const Vector rows = x.rowwise().sum();
    require((rows.array() > 0.0).all(), ErrorCode::SinkhornNoConverge, "sinkhorn: zero row");
    x = rows.cwiseInverse().asDiagonal() * x;
    const Vector cols = x.colwise().sum().transpose();
    require((cols.array() > 0.0).all(), ErrorCode::SinkhornNoConverge, "sinkhorn: zero column");
    x = x * cols.cwiseInverse().asDiagonal();
    const double row_err = (x.rowwise().sum().array() - 1.0).abs().maxCoeff();
    const double col_err = (x.colwise().sum().array() - 1.0).abs().maxCoeff();
    if (row_err <= tol && col_err <= tol) return x;
  }
  fail(ErrorCode::SinkhornNoConverge, "sinkhorn: marginals not within tolerance after " +
                                          std::to_string(max_sweeps) + " sweeps");
}

SoftMatchMatrix pgdds(const Matrix& a, int d, const std::vector<int>& view_of, int iters, double step,
                      PgddsTrace* trace) {
  check_square(a, d, "pgdds");
  require(iters >= 1, ErrorCode::InvalidArgument, "pgdds: iters must be >= 1");
  require(static_cast<Eigen::Index>(view_of.size()) == a.rows(), ErrorCode::DimensionMismatch,
          "pgdds: view_of length mismatch");
  const auto start = std::chrono::steady_clock::now();
  const Eigen::Index n = a.rows();
  if (step <= 0.0) step = 16.0;

  int views = 0;
  for (int b : view_of) views = std::max(views, b + 1);
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(views));
  for (Eigen::Index i = 0; i < n; ++i) members[static_cast<std::size_t>(view_of[static_cast<std::size_t>(i)])].push_back(i);
  for (const auto& m : members)
    require(static_cast<int>(m.size()) == d, ErrorCode::InvalidArgument,
            "pgdds: every view must hold exactly d nodes");

  const auto block = [&](const Matrix& x, int b, int c) {
    Matrix out(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out(i, j) = x(members[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)],
                      members[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]);
    return out;
  };

  std::vector<std::vector<Matrix>> a_blocks(static_cast<std::size_t>(views));
  for (int b = 0; b < views; ++b)
    for (int c = 0; c < views; ++c) a_blocks[static_cast<std::size_t>(b)].push_back(block(a, b, c));

  // View 0 fixes the universe frame: P_0 = I, and every other block starts
  // from the spectral similarities between its nodes and view 0's nodes.
  const Matrix u = spectral_embedding(a, d);
  const auto rows_of = [&](int b) {
    Matrix out(d, u.cols());
    for (int i = 0; i < d; ++i) out.row(i) = u.row(members[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)]);
    return out;
  };
  const Matrix u0 = rows_of(0);
  std::vector<Matrix> p(static_cast<std::size_t>(views));
  p[0] = Matrix::Identity(d, d);
  for (int b = 1; b < views; ++b)
    p[static_cast<std::size_t>(b)] = sinkhorn_project((rows_of(b) * u0.transpose()).cwiseMax(0.0).array() + kPgddsFloor, 1e-6, kPgddsSweeps);

  const auto marginal_error = [&] {
    double err = 0.0;
    for (const auto& pb : p) {
      err = std::max(err, (pb.rowwise().sum().array() - 1.0).abs().maxCoeff());
      err = std::max(err, (pb.colwise().sum().array() - 1.0).abs().maxCoeff());
    }
    return err;
  };

  for (int it = 0; it < iters; ++it) {
    std::vector<Matrix> next(static_cast<std::size_t>(views));
    next[0] = p[0];
    for (int b = 1; b < views; ++b) {
      Matrix grad = Matrix::Zero(d, d);
      for (int c = 0; c < views; ++c)
        if (c != b) grad += a_blocks[static_cast<std::size_t>(b)][static_cast<std::size_t>(c)] * p[static_cast<std::size_t>(c)];
      grad *= 2.0 / static_cast<double>(views - 1);
      // Step along the doubly stochastic affine set: remove row and column means.
      const Vector row_mean = grad.rowwise().mean();
      const Vector col_mean = grad.colwise().mean().transpose();
      const double mean = grad.mean();
      grad = (grad - row_mean.replicate(1, d) - col_mean.transpose().replicate(d, 1)).array() + mean;
      const Matrix moved = p[static_cast<std::size_t>(b)] + step * grad;
      next[static_cast<std::size_t>(b)] = sinkhorn_project(moved.cwiseMax(0.0).array() + kPgddsFloor, 1e-6, kPgddsSweeps);
    }
    p = std::move(next);
    if (trace) trace->marginal_error.push_back(marginal_error());
  }

  Matrix s = Matrix::Zero(n, n);
  for (int b = 0; b < views; ++b) {
    for (int c = 0; c < views; ++c) {
      if (b == c) continue;
      const Matrix sbc = p[static_cast<std::size_t>(b)] * p[static_cast<std::size_t>(c)].transpose();
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
          s(members[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)],
            members[static_cast<std::size_t>(c)][static_cast<std::size_t>(j)]) = sbc(i, j);
    }
  }
  s = s.cwiseMax(0.0).cwiseMin(1.0);
  return SoftMatchMatrix{std::move(s), "pgdds", iters, seconds_since(start)};
}

}  // namespace cyclematch
