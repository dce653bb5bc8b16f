#include "cyclematch/graph.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/text_io.hpp"

#include <cmath>
#include <fstream>
#include <string>

namespace cyclematch {

CorrespondenceGraph CorrespondenceGraph::create(int views, std::vector<int> view_of,
                                                Matrix adjacency, Matrix features) {
  const auto n = static_cast<Eigen::Index>(view_of.size());
  const auto bad = [](const std::string& what) { fail(ErrorCode::Format, "graph: " + what); };
  if (views < 1) bad("view count must be positive");
  if (adjacency.rows() != n || adjacency.cols() != n) bad("adjacency must be n x n");
  if (features.rows() != n) bad("features must have n rows");

  std::vector<int> used(static_cast<std::size_t>(views), 0);
  for (int v : view_of) {
    if (v < 0 || v >= views) bad("view index " + std::to_string(v) + " out of range");
    ++used[static_cast<std::size_t>(v)];
  }
  for (int v = 0; v < views; ++v)
    if (used[static_cast<std::size_t>(v)] == 0) bad("view " + std::to_string(v) + " has no nodes");

  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double a = adjacency(i, j);
      if (!std::isfinite(a) || a < 0.0 || a > 1.0) bad("adjacency entry outside [0,1]");
      if (std::abs(a - adjacency(j, i)) > kSymmetryTol) bad("adjacency is not symmetric");
      if (view_of[static_cast<std::size_t>(i)] == view_of[static_cast<std::size_t>(j)] && a != 0.0)
        bad("nonzero entry between nodes " + std::to_string(i) + " and " + std::to_string(j) +
            " of the same view");
    }
  }
  if (!features.allFinite()) bad("features must be finite");
  return CorrespondenceGraph(views, std::move(view_of), std::move(adjacency), std::move(features));
}

Vector degree(const Matrix& adjacency) { return adjacency.rowwise().sum(); }
Vector degree(const CorrespondenceGraph& graph) { return degree(graph.adjacency()); }

Matrix normalized_laplacian(const Matrix& adjacency) {
  const Vector d = degree(adjacency);
  for (Eigen::Index i = 0; i < d.size(); ++i)
    require(d[i] > 0.0, ErrorCode::ZeroDegreeNode, "node " + std::to_string(i) + " has zero degree");
  const Vector s = d.array().rsqrt();
  Matrix lap = -(s.asDiagonal() * adjacency * s.asDiagonal());
  lap.diagonal().array() += 1.0;
  return lap;
}

Matrix normalized_laplacian(const CorrespondenceGraph& graph) {
  return normalized_laplacian(graph.adjacency());
}

Matrix augmented_operator(const Matrix& adjacency) {
  const Vector s = (degree(adjacency).array() + 1.0).rsqrt();
  Matrix op = adjacency;
  op.diagonal().array() += 1.0;
  return s.asDiagonal() * op * s.asDiagonal();
}

Matrix augmented_operator(const CorrespondenceGraph& graph) {
  return augmented_operator(graph.adjacency());
}

void write_graph(std::ostream& os, const CorrespondenceGraph& graph) {
  os << "CGRF 1\n";
  os << "n " << graph.node_count() << " v " << graph.view_count() << " m0 " << graph.feature_dim()
     << '\n';
  for (std::size_t i = 0; i < graph.view_of().size(); ++i) os << (i ? " " : "") << graph.view_of()[i];
  os << '\n';
  textio::write_matrix(os, graph.adjacency());
  // Adjacency-only graphs have no feature block at all.
  if (graph.feature_dim() > 0) textio::write_matrix(os, graph.features());
}

CorrespondenceGraph read_graph(std::istream& is, const std::string& source) {
  textio::LineReader in(is, source);
  in.expect_header("CGRF", "1");
  const auto dims = in.keyed({"n", "v", "m0"});
  const long long n = textio::parse_int(dims[0], in);
  const long long v = textio::parse_int(dims[1], in);
  const long long m0 = textio::parse_int(dims[2], in);
  if (n < 1 || v < 1 || m0 < 0) in.error("invalid dimensions");
  std::vector<int> view_of;
  for (long long x : in.integers(static_cast<std::size_t>(n))) view_of.push_back(static_cast<int>(x));
  Matrix adjacency = in.matrix(n, n);
  Matrix features = m0 > 0 ? in.matrix(n, m0) : Matrix(n, 0);
  if (!in.at_end()) in.error("trailing content after graph");
  return CorrespondenceGraph::create(static_cast<int>(v), std::move(view_of), std::move(adjacency),
                                     std::move(features));
}

void save_graph(const CorrespondenceGraph& graph, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_graph(os, graph);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed: " + path.string());
}

CorrespondenceGraph load_graph(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  return read_graph(is, path.string());
}

}  // namespace cyclematch
