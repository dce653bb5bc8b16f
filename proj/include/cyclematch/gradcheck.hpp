#pragma once

#include "cyclematch/graph.hpp"

#include <cstdint>
#include <vector>

namespace cyclematch {

struct GradCheckConfig {
  int views = 3;
  int points = 6;
  int directions = 20;
  double step = 1e-6;
  bool use_groupnorm = true;
  double lambda_geom = 1.0;
  int hidden_dim = 64;
  int groups = 4;
  std::uint64_t seed = 0;

  void validate() const;  // SpecError
};

struct GradCheckDirection {
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckDirection> directions;
  int rejected = 0;  // directions whose +-step interval crossed a ReLU or L1 kink
  double max_rel_error = 0.0;
  Eigen::Index parameters = 0;
  Eigen::Index nodes = 0;
};

/// Compares the backpropagated directional derivative of the combined
/// cycle + geometric loss with a central difference along random unit
/// directions in parameter space. The instance is a scene graph with
/// outliers and edge noise, cut down to `points` nodes per view.
GradCheckReport gradcheck(const GradCheckConfig& config);

}  // namespace cyclematch
