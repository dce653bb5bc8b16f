#pragma once

#include "cyclematch/geometry.hpp"
#include "cyclematch/graph.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cyclematch {

/// Parameters of a synthetic correspondence graph.
///
/// Every view sees every one of the `points` universe points. Descriptor noise
/// perturbs the node features; edge noise and outliers corrupt the adjacency.
struct SynthGraphSpec {
  int views = 3;
  int points = 10;
  int descriptor_dim = 16;
  double descriptor_noise_sigma = 0.25;
  double edge_noise_sigma = 0.0;
  double outlier_rate = 0.0;
  std::uint64_t seed = 0;

  void validate() const;  // SpecError
};

/// Node-to-universe assignment. Row i of X is the one-hot universe code of
/// node i; `adjacency` is X X^T with the within-view blocks zeroed.
struct GroundTruth {
  Matrix X;
  Matrix adjacency;
  std::vector<int> view_of;
  int universe_dim = 0;

  std::vector<int> universe_of() const;
  static GroundTruth from_assignment(const std::vector<int>& view_of, const std::vector<int>& universe,
                                     int universe_dim);
};

/// Cameras, world points and calibrated observations. observations[b] holds
/// one homogeneous row (x, y, 1) per node of view b, in node order.
struct MultiViewScene {
  std::vector<Pose> poses;
  Matrix points3d;
  std::vector<Matrix> observations;
  GroundTruth gt;

  /// Stacks the per-view observations into node order for `view_of`.
  Matrix node_observations(const std::vector<int>& view_of) const;
};

struct SynthGraph {
  CorrespondenceGraph graph;
  GroundTruth gt;
};

struct SynthScene {
  CorrespondenceGraph graph;
  MultiViewScene scene;
};

/// Random permutation graph with corrupted adjacency and noisy descriptors.
SynthGraph gen_graph(const SynthGraphSpec& spec);

/// Cameras on a radius-10 sphere looking at points in [-1,1]^3. Node features
/// are the noisy descriptors followed by the node's calibrated (x, y).
SynthScene gen_scene(const SynthGraphSpec& spec);

// Random-stream identifiers; each generator component draws from its own
// Philox stream so turning one noise source on does not shift the others.
namespace streams {
inline constexpr std::uint64_t kDescriptors = 1;
inline constexpr std::uint64_t kPermutations = 2;
inline constexpr std::uint64_t kDescriptorNoise = 3;
inline constexpr std::uint64_t kOutliers = 4;
inline constexpr std::uint64_t kEdgeNoise = 5;
inline constexpr std::uint64_t kCameras = 6;
inline constexpr std::uint64_t kPoints = 7;
}  // namespace streams

// GTRF and SCNF text formats.
void write_ground_truth(std::ostream& os, const GroundTruth& gt);
GroundTruth read_ground_truth(std::istream& is, const std::string& source = "<stream>");
void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path);
GroundTruth load_ground_truth(const std::filesystem::path& path);

void write_scene(std::ostream& os, const MultiViewScene& scene);
MultiViewScene read_scene(std::istream& is, const std::string& source = "<stream>");
void save_scene(const MultiViewScene& scene, const std::filesystem::path& path);
MultiViewScene load_scene(const std::filesystem::path& path);

}  // namespace cyclematch
