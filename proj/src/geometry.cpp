#include "cyclematch/geometry.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/synthgen.hpp"

#include <cmath>

namespace cyclematch {

Pose Pose::create(const Eigen::Matrix3d& R, const Eigen::Vector3d& T) {
  require((R.transpose() * R - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() <= 1e-10,
          ErrorCode::InvalidArgument, "pose rotation is not orthonormal");
  require(std::abs(R.determinant() - 1.0) <= 1e-10, ErrorCode::InvalidArgument,
          "pose rotation has det != 1");
  require(T.allFinite(), ErrorCode::InvalidArgument, "pose center must be finite");
  return Pose{R, T};
}

Eigen::Matrix3d skew(const Eigen::Vector3d& t) {
  Eigen::Matrix3d s;
  s << 0.0, -t.z(), t.y(),
       t.z(), 0.0, -t.x(),
       -t.y(), t.x(), 0.0;
  return s;
}

double epipolar_residual(const Pose& pose_i, const Pose& pose_j, const Eigen::Vector3d& xi,
                         const Eigen::Vector3d& xj) {
  const Eigen::Vector3d baseline = pose_j.T - pose_i.T;
  require(baseline.norm() >= 1e-12, ErrorCode::DegenerateBaseline,
          "camera centers coincide; epipolar constraint is vacuous");
  const double r = xi.dot(pose_i.R.transpose() * skew(baseline) * pose_j.R * xj);
  return std::abs(r);
}

Matrix epipolar_residual_matrix(const MultiViewScene& scene, const CorrespondenceGraph& graph) {
  const int n = graph.node_count();
  const auto& cam = graph.view_of();
  require(graph.view_count() == static_cast<int>(scene.poses.size()), ErrorCode::DimensionMismatch,
          "graph views do not match scene cameras");
  const Matrix obs = scene.node_observations(cam);

  // Per camera pair the residual is a bilinear form with the essential matrix
  // Ri^T [Tj - Ti]x Rj.
  const int v = graph.view_count();
  std::vector<Eigen::Matrix3d> essential(static_cast<std::size_t>(v * v), Eigen::Matrix3d::Zero());
  for (int a = 0; a < v; ++a) {
    for (int b = 0; b < v; ++b) {
      if (a == b) continue;
      const Eigen::Vector3d baseline = scene.poses[b].T - scene.poses[a].T;
      require(baseline.norm() >= 1e-12, ErrorCode::DegenerateBaseline,
              "cameras " + std::to_string(a) + " and " + std::to_string(b) + " coincide");
      essential[static_cast<std::size_t>(a * v + b)] =
          scene.poses[a].R.transpose() * skew(baseline) * scene.poses[b].R;
    }
  }

  Matrix g = Matrix::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector3d xi = obs.row(i).transpose();
    for (int j = i + 1; j < n; ++j) {
      if (cam[i] == cam[j]) continue;
      const Eigen::Vector3d xj = obs.row(j).transpose();
      const double r = std::abs(xi.dot(essential[static_cast<std::size_t>(cam[i] * v + cam[j])] * xj));
      g(i, j) = r;
      g(j, i) = r;
    }
  }
  return g;
}

GeometricPrior build_prior(const MultiViewScene& scene, const CorrespondenceGraph& graph) {
  GeometricPrior prior;
  prior.G = epipolar_residual_matrix(scene, graph);
  prior.node_cam = graph.view_of();
  prior.scale = prior.G.maxCoeff();
  if (prior.scale > 0.0) prior.G /= prior.scale;
  return prior;
}

}  // namespace cyclematch
