#include "cyclematch/synthgen.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/text_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cyclematch {
namespace {

struct Assignment {
  std::vector<int> view_of;
  std::vector<int> universe;  // universe point of every node
};

// Node b * points + k of view b sees universe point perm_b[k].
Assignment random_assignment(const SynthGraphSpec& spec) {
  Philox rng(spec.seed, streams::kPermutations);
  Assignment out;
  for (int b = 0; b < spec.views; ++b) {
    const auto perm = rng.permutation(spec.points);
    for (int k = 0; k < spec.points; ++k) {
      out.view_of.push_back(b);
      out.universe.push_back(perm[static_cast<std::size_t>(k)]);
    }
  }
  return out;
}

void normalize_rows(Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double norm = m.row(i).norm();
    if (norm > 0.0) m.row(i) /= norm;
  }
}

// True descriptors are normalize(g + 1) with g standard normal, so two
// unrelated descriptors have expected cosine near 1/2.
Matrix noisy_descriptors(const SynthGraphSpec& spec, const std::vector<int>& universe) {
  Philox truth_rng(spec.seed, streams::kDescriptors);
  Matrix truth(spec.points, spec.descriptor_dim);
  for (Eigen::Index i = 0; i < truth.rows(); ++i)
    for (Eigen::Index j = 0; j < truth.cols(); ++j) truth(i, j) = truth_rng.normal() + 1.0;
  normalize_rows(truth);

  Philox noise_rng(spec.seed, streams::kDescriptorNoise);
  const auto n = static_cast<Eigen::Index>(universe.size());
  Matrix features(n, spec.descriptor_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    features.row(i) = truth.row(universe[static_cast<std::size_t>(i)]);
    if (spec.descriptor_noise_sigma > 0.0)
      for (Eigen::Index j = 0; j < features.cols(); ++j)
        features(i, j) += spec.descriptor_noise_sigma * noise_rng.normal();
  }
  normalize_rows(features);
  return features;
}

Matrix corrupt(const Matrix& clean, const std::vector<int>& view_of, const SynthGraphSpec& spec) {
  const auto n = static_cast<int>(view_of.size());
  Matrix a = clean;

  if (spec.outlier_rate > 0.0) {
    std::vector<std::vector<int>> members(static_cast<std::size_t>(spec.views));
    for (int i = 0; i < n; ++i) members[static_cast<std::size_t>(view_of[i])].push_back(i);

    Philox rng(spec.seed, streams::kOutliers);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (clean(i, j) != 1.0 || view_of[i] == view_of[j]) continue;
        if (rng.uniform() >= spec.outlier_rate) continue;
        const auto& target = members[static_cast<std::size_t>(view_of[j])];
        // Uniform over the target view without j.
        auto pick = static_cast<std::size_t>(rng.below(target.size() - 1));
        const auto pos = static_cast<std::size_t>(std::find(target.begin(), target.end(), j) - target.begin());
        if (pick >= pos) ++pick;
        const int k = target[pick];
        a(i, j) = a(j, i) = 0.0;
        a(i, k) = a(k, i) = 1.0;
      }
    }
  }

  if (spec.edge_noise_sigma > 0.0) {
    Philox rng(spec.seed, streams::kEdgeNoise);
    for (int i = 0; i < n; ++i) {
      for (int j = i + 1; j < n; ++j) {
        if (view_of[i] == view_of[j]) continue;
        const double v = std::clamp(a(i, j) + spec.edge_noise_sigma * rng.normal(), 0.0, 1.0);
        a(i, j) = a(j, i) = v;
      }
    }
  }
  return a;
}

Pose look_at_origin(const Eigen::Vector3d& center) {
  const Eigen::Vector3d forward = -center.normalized();
  const Eigen::Vector3d up = std::abs(forward.z()) > 0.9 ? Eigen::Vector3d::UnitX() : Eigen::Vector3d::UnitZ();
  const Eigen::Vector3d right = up.cross(forward).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  Eigen::Matrix3d r;
  r.col(0) = right;
  r.col(1) = down;
  r.col(2) = forward;
  return Pose::create(r, center);
}

}  // namespace

void SynthGraphSpec::validate() const {
  require(views >= 2, ErrorCode::Spec, "views must be >= 2");
  require(points >= 2, ErrorCode::Spec, "points must be >= 2");
  require(descriptor_dim >= 1, ErrorCode::Spec, "descriptor_dim must be >= 1");
  require(descriptor_noise_sigma >= 0.0 && edge_noise_sigma >= 0.0, ErrorCode::Spec,
          "noise sigmas must be nonnegative");
  require(outlier_rate >= 0.0 && outlier_rate <= 1.0, ErrorCode::Spec, "outlier_rate must lie in [0,1]");
}

std::vector<int> GroundTruth::universe_of() const {
  std::vector<int> out(static_cast<std::size_t>(X.rows()));
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    Eigen::Index col = 0;
    X.row(i).maxCoeff(&col);
    out[static_cast<std::size_t>(i)] = static_cast<int>(col);
  }
  return out;
}

GroundTruth GroundTruth::from_assignment(const std::vector<int>& view_of, const std::vector<int>& universe,
                                         int universe_dim) {
  require(view_of.size() == universe.size(), ErrorCode::DimensionMismatch, "assignment size mismatch");
  const auto n = static_cast<Eigen::Index>(view_of.size());
  GroundTruth gt;
  gt.universe_dim = universe_dim;
  gt.view_of = view_of;
  gt.X = Matrix::Zero(n, universe_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int u = universe[static_cast<std::size_t>(i)];
    require(u >= 0 && u < universe_dim, ErrorCode::Format, "universe index out of range");
    gt.X(i, u) = 1.0;
  }
  gt.adjacency = gt.X * gt.X.transpose();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      if (view_of[static_cast<std::size_t>(i)] == view_of[static_cast<std::size_t>(j)]) gt.adjacency(i, j) = 0.0;
  return gt;
}

Matrix MultiViewScene::node_observations(const std::vector<int>& view_of) const {
  Matrix out(static_cast<Eigen::Index>(view_of.size()), 3);
  std::vector<Eigen::Index> next(observations.size(), 0);
  for (std::size_t i = 0; i < view_of.size(); ++i) {
    const auto b = static_cast<std::size_t>(view_of[i]);
    require(b < observations.size() && next[b] < observations[b].rows(), ErrorCode::DimensionMismatch,
            "graph nodes do not align with scene observations");
    out.row(static_cast<Eigen::Index>(i)) = observations[b].row(next[b]++);
  }
  return out;
}

SynthGraph gen_graph(const SynthGraphSpec& spec) {
  spec.validate();
  const auto assignment = random_assignment(spec);
  GroundTruth gt = GroundTruth::from_assignment(assignment.view_of, assignment.universe, spec.points);
  Matrix features = noisy_descriptors(spec, assignment.universe);
  Matrix adjacency = corrupt(gt.adjacency, assignment.view_of, spec);
  auto graph = CorrespondenceGraph::create(spec.views, assignment.view_of, std::move(adjacency),
                                           std::move(features));
  return SynthGraph{std::move(graph), std::move(gt)};
}

SynthScene gen_scene(const SynthGraphSpec& spec) {
  spec.validate();
  require(spec.points >= 8, ErrorCode::Spec, "scenes need at least 8 points");
  const auto assignment = random_assignment(spec);

  MultiViewScene scene;
  scene.gt = GroundTruth::from_assignment(assignment.view_of, assignment.universe, spec.points);

  Philox cam_rng(spec.seed, streams::kCameras);
  for (int b = 0; b < spec.views; ++b) {
    Eigen::Vector3d dir;
    do {
      dir = Eigen::Vector3d(cam_rng.normal(), cam_rng.normal(), cam_rng.normal());
    } while (dir.norm() < 1e-6);
    scene.poses.push_back(look_at_origin(10.0 * dir.normalized()));
  }

  Philox point_rng(spec.seed, streams::kPoints);
  scene.points3d.resize(spec.points, 3);
  for (Eigen::Index i = 0; i < scene.points3d.rows(); ++i)
    for (Eigen::Index j = 0; j < 3; ++j) scene.points3d(i, j) = point_rng.uniform(-1.0, 1.0);

  const auto p = static_cast<std::size_t>(spec.points);
  for (int b = 0; b < spec.views; ++b) {
    const Pose& pose = scene.poses[static_cast<std::size_t>(b)];
    Matrix obs(spec.points, 3);
    for (std::size_t k = 0; k < p; ++k) {
      const int u = assignment.universe[static_cast<std::size_t>(b) * p + k];
      const Eigen::Vector3d local = pose.R.transpose() * (scene.points3d.row(u).transpose() - pose.T);
      obs.row(static_cast<Eigen::Index>(k)) = (local / local.z()).transpose();
    }
    scene.observations.push_back(std::move(obs));
  }

  const Matrix descriptors = noisy_descriptors(spec, assignment.universe);
  const Matrix xy = scene.node_observations(assignment.view_of).leftCols(2);
  Matrix features(descriptors.rows(), descriptors.cols() + 2);
  features << descriptors, xy;

  Matrix adjacency = corrupt(scene.gt.adjacency, assignment.view_of, spec);
  auto graph = CorrespondenceGraph::create(spec.views, assignment.view_of, std::move(adjacency),
                                           std::move(features));
  return SynthScene{std::move(graph), std::move(scene)};
}

void write_ground_truth(std::ostream& os, const GroundTruth& gt) {
  const auto n = gt.X.rows();
  os << "GTRF 1\n";
  os << "n " << n << " p " << gt.universe_dim << '\n';
  for (std::size_t i = 0; i < gt.view_of.size(); ++i) os << (i ? " " : "") << gt.view_of[i];
  os << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < gt.X.cols(); ++j) os << (j ? " " : "") << static_cast<int>(gt.X(i, j));
    os << '\n';
  }
}

GroundTruth read_ground_truth(std::istream& is, const std::string& source) {
  textio::LineReader in(is, source);
  in.expect_header("GTRF", "1");
  const auto dims = in.keyed({"n", "p"});
  const long long n = textio::parse_int(dims[0], in);
  const long long p = textio::parse_int(dims[1], in);
  if (n < 1 || p < 1) in.error("invalid dimensions");
  std::vector<int> view_of;
  for (long long v : in.integers(static_cast<std::size_t>(n))) {
    if (v < 0) in.error("negative view index");
    view_of.push_back(static_cast<int>(v));
  }
  std::vector<int> universe;
  for (long long i = 0; i < n; ++i) {
    const auto row = in.integers(static_cast<std::size_t>(p));
    int hits = 0;
    for (long long j = 0; j < p; ++j) {
      const long long x = row[static_cast<std::size_t>(j)];
      if (x != 0 && x != 1) in.error("assignment entries must be 0 or 1");
      if (x == 1) {
        ++hits;
        universe.push_back(static_cast<int>(j));
      }
    }
    if (hits != 1) in.error("assignment row must contain exactly one 1");
  }
  // Within a view every universe point appears at most once.
  std::vector<std::pair<int, int>> seen;
  for (std::size_t i = 0; i < universe.size(); ++i) seen.emplace_back(view_of[i], universe[i]);
  std::sort(seen.begin(), seen.end());
  if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
    in.error("a universe point is assigned twice within one view");
  return GroundTruth::from_assignment(view_of, universe, static_cast<int>(p));
}

void save_ground_truth(const GroundTruth& gt, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_ground_truth(os, gt);
}

GroundTruth load_ground_truth(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_ground_truth(is, path.string());
}

void write_scene(std::ostream& os, const MultiViewScene& scene) {
  os << "SCNF 1\n";
  os << "v " << scene.poses.size() << " p " << scene.points3d.rows() << '\n';
  for (const auto& pose : scene.poses) {
    Eigen::RowVectorXd row(12);
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) row[r * 3 + c] = pose.R(r, c);
    row.tail(3) = pose.T.transpose();
    textio::write_row(os, row);
  }
  textio::write_matrix(os, scene.points3d);
  for (const auto& obs : scene.observations) textio::write_matrix(os, obs);
  write_ground_truth(os, scene.gt);
}

MultiViewScene read_scene(std::istream& is, const std::string& source) {
  MultiViewScene scene;
  {
    textio::LineReader in(is, source);
    in.expect_header("SCNF", "1");
    const auto dims = in.keyed({"v", "p"});
    const long long v = textio::parse_int(dims[0], in);
    const long long p = textio::parse_int(dims[1], in);
    if (v < 1 || p < 1) in.error("invalid dimensions");
    for (long long b = 0; b < v; ++b) {
      const auto row = in.reals(12);
      Eigen::Matrix3d r;
      for (int i = 0; i < 3; ++i)
        for (int c = 0; c < 3; ++c) r(i, c) = row[static_cast<std::size_t>(i * 3 + c)];
      try {
        scene.poses.push_back(Pose::create(r, Eigen::Vector3d(row[9], row[10], row[11])));
      } catch (const Error& e) {
        in.error(e.what());
      }
    }
    scene.points3d = in.matrix(p, 3);
    // Observation count per view comes from the ground truth block; with full
    // overlap every view holds p rows.
    for (long long b = 0; b < v; ++b) scene.observations.push_back(in.matrix(p, 3));
  }
  scene.gt = read_ground_truth(is, source);
  return scene;
}

void save_scene(const MultiViewScene& scene, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_scene(os, scene);
}

MultiViewScene load_scene(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_scene(is, path.string());
}

}  // namespace cyclematch
