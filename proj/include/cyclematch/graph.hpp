#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <iosfwd>
#include <vector>

namespace cyclematch {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Weighted correspondence graph over features drawn from `views` images.
///
/// Node i belongs to image view_of[i]. The adjacency holds match strengths in
/// [0, 1]; features of the same image never match each other, so the
/// within-view blocks and the diagonal are zero. `features` is the initial
/// embedding, one descriptor row per node.
///
/// Immutable after construction; `create` validates every invariant and
/// throws Format errors for violating input rather than repairing it.
class CorrespondenceGraph {
 public:
  static constexpr double kSymmetryTol = 1e-12;

  static CorrespondenceGraph create(int views, std::vector<int> view_of, Matrix adjacency,
                                    Matrix features);

  int node_count() const { return static_cast<int>(view_of_.size()); }
  int view_count() const { return views_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  const std::vector<int>& view_of() const { return view_of_; }
  const Matrix& adjacency() const { return adjacency_; }
  const Matrix& features() const { return features_; }

 private:
  CorrespondenceGraph(int views, std::vector<int> view_of, Matrix adjacency, Matrix features)
      : views_(views),
        view_of_(std::move(view_of)),
        adjacency_(std::move(adjacency)),
        features_(std::move(features)) {}

  int views_;
  std::vector<int> view_of_;
  Matrix adjacency_;
  Matrix features_;
};

/// Row sums of the adjacency.
Vector degree(const Matrix& adjacency);
Vector degree(const CorrespondenceGraph& graph);

/// I - D^-1/2 A D^-1/2. Throws ZeroDegreeNode for isolated nodes.
Matrix normalized_laplacian(const Matrix& adjacency);
Matrix normalized_laplacian(const CorrespondenceGraph& graph);

/// (D+I)^-1/2 (A+I) (D+I)^-1/2, the propagation operator of every network
/// layer. Defined for isolated nodes.
Matrix augmented_operator(const Matrix& adjacency);
Matrix augmented_operator(const CorrespondenceGraph& graph);

// CGRF text format. Graphs with feature_dim 0 are the adjacency-only form
// used for soft match matrices.
void write_graph(std::ostream& os, const CorrespondenceGraph& graph);
CorrespondenceGraph read_graph(std::istream& is, const std::string& source = "<stream>");
void save_graph(const CorrespondenceGraph& graph, const std::filesystem::path& path);
CorrespondenceGraph load_graph(const std::filesystem::path& path);

}  // namespace cyclematch
