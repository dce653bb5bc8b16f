#pragma once

#include "cyclematch/graph.hpp"

#include <Eigen/Dense>

#include <vector>

namespace cyclematch {

struct MultiViewScene;

/// Camera pose. R rotates camera-frame directions into the world frame and T
/// is the camera center, so a world point P is seen at R^T (P - T).
struct Pose {
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d T = Eigen::Vector3d::Zero();

  /// Validates orthonormality and det(R) = 1 to 1e-10.
  static Pose create(const Eigen::Matrix3d& R, const Eigen::Vector3d& T);
};

/// Cross-product matrix: skew(t) * u == t x u.
Eigen::Matrix3d skew(const Eigen::Vector3d& t);

/// |Xi^T Ri^T [Tj - Ti]x Rj Xj| for calibrated homogeneous observations.
/// Throws DegenerateBaseline when the camera centers coincide.
double epipolar_residual(const Pose& pose_i, const Pose& pose_j, const Eigen::Vector3d& xi,
                         const Eigen::Vector3d& xj);

/// Pairwise epipolar residuals weighting the geometric loss.
struct GeometricPrior {
  Matrix G;                   // max-entry normalized, symmetric, zero within cameras
  std::vector<int> node_cam;  // camera of each node
  double scale = 0.0;         // max raw residual; G * scale restores raw values
};

/// Raw residual matrix: entry (i, j) is the epipolar residual between nodes of
/// different cameras, zero within a camera.
Matrix epipolar_residual_matrix(const MultiViewScene& scene, const CorrespondenceGraph& graph);

/// Residual matrix rescaled so its largest entry is 1 (left as is when all
/// residuals vanish).
GeometricPrior build_prior(const MultiViewScene& scene, const CorrespondenceGraph& graph);

}  // namespace cyclematch
