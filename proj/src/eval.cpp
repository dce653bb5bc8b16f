#include "cyclematch/eval.hpp"

#include "cyclematch/baselines.hpp"
#include "cyclematch/error.hpp"
#include "cyclematch/text_io.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <fstream>
#include <ostream>

namespace cyclematch {
namespace {

struct Accumulator {
  double sum = 0.0;
  double sum_sq = 0.0;
  std::int64_t count = 0;

  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
  double stddev() const {
    if (!count) return 0.0;
    const double m = mean();
    return std::sqrt(std::max(0.0, sum_sq / static_cast<double>(count) - m * m));
  }
};

}  // namespace

SimilarityStats similarity_stats(const Matrix& similarity, const GroundTruth& gt) {
  const Eigen::Index n = gt.X.rows();
  require(similarity.rows() == n && similarity.cols() == n, ErrorCode::DimensionMismatch,
          "similarity_stats: matrix does not match ground truth");
  require(static_cast<Eigen::Index>(gt.view_of.size()) == n, ErrorCode::DimensionMismatch,
          "similarity_stats: ground truth lacks view assignment");
  const auto universe = gt.universe_of();
  Accumulator same, diff;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      if (gt.view_of[static_cast<std::size_t>(i)] == gt.view_of[static_cast<std::size_t>(j)]) continue;
      if (universe[static_cast<std::size_t>(i)] == universe[static_cast<std::size_t>(j)])
        same.add(similarity(i, j));
      else
        diff.add(similarity(i, j));
    }
  }
  return SimilarityStats{same.mean(), same.stddev(), diff.mean(), diff.stddev()};
}

SimilarityStats embedding_similarity_stats(const Matrix& embedding, const GroundTruth& gt) {
  require(embedding.rows() == gt.X.rows(), ErrorCode::DimensionMismatch,
          "similarity_stats: embedding does not match ground truth");
  return similarity_stats(embedding * embedding.transpose(), gt);
}

ErrorReport error_report(const Matrix& similarity, const Matrix& gt_adjacency, double runtime_s) {
  require(similarity.rows() == gt_adjacency.rows() && similarity.cols() == gt_adjacency.cols(),
          ErrorCode::DimensionMismatch, "error_report: shape mismatch");
  const Matrix diff = similarity - gt_adjacency;
  const auto count = static_cast<double>(diff.size());
  return ErrorReport{diff.cwiseAbs().sum() / count, diff.squaredNorm() / count, runtime_s};
}

Matrix restrict_cross_view(Matrix similarity, const std::vector<int>& view_of) {
  require(similarity.rows() == static_cast<Eigen::Index>(view_of.size()) && similarity.cols() == similarity.rows(),
          ErrorCode::DimensionMismatch, "restrict_cross_view: shape mismatch");
  for (Eigen::Index i = 0; i < similarity.rows(); ++i)
    for (Eigen::Index j = 0; j < similarity.cols(); ++j)
      if (view_of[static_cast<std::size_t>(i)] == view_of[static_cast<std::size_t>(j)]) similarity(i, j) = 0.0;
  return similarity;
}

Matrix embedding_similarity(const Matrix& embedding, const std::vector<int>& view_of) {
  return restrict_cross_view((embedding * embedding.transpose()).cwiseMax(0.0).cwiseMin(1.0), view_of);
}

Alignment procrustes_align(const Matrix& embedding, const Matrix& target) {
  require(embedding.rows() == target.rows() && embedding.cols() == target.cols() && embedding.cols() >= 1,
          ErrorCode::DimensionMismatch, "procrustes_align: shape mismatch");
  Eigen::JacobiSVD<Matrix> svd(embedding.transpose() * target, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Alignment out;
  out.Q = svd.matrixU() * svd.matrixV().transpose();
  out.rank_deficient = (svd.singularValues().array() < 1e-12).any();
  return out;
}

double time_method(const std::function<void()>& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TimingStats time_repeated(const std::function<void()>& fn, int repeats) {
  require(repeats >= 1, ErrorCode::InvalidArgument, "time_repeated: repeats must be >= 1");
  TimingStats out;
  Accumulator acc;
  for (int r = 0; r < repeats; ++r) {
    out.samples.push_back(time_method(fn));
    acc.add(out.samples.back());
  }
  out.mean = acc.mean();
  out.stddev = acc.stddev();
  return out;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  using textio::format_real;
  os << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    os << r.method << ',' << r.views << ',' << r.points << ',' << format_real(r.noise) << ','
       << format_real(r.outliers) << ',' << r.iters << ',' << r.seed << ',' << format_real(r.error.l1) << ','
       << format_real(r.error.l2) << ',' << format_real(r.error.runtime_s) << ','
       << format_real(r.stats.same_mean) << ',' << format_real(r.stats.same_std) << ','
       << format_real(r.stats.diff_mean) << ',' << format_real(r.stats.diff_std) << '\n';
  }
}

void save_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_metrics_csv(os, rows);
}

std::vector<MetricsRow> sweep_iterations(SweepMethod method, const SweepInstance& instance,
                                         const std::vector<int>& iteration_counts) {
  require(instance.graph && instance.gt, ErrorCode::InvalidArgument, "sweep_iterations: missing instance");
  const auto& graph = *instance.graph;
  const auto& gt = *instance.gt;
  std::vector<MetricsRow> rows;
  for (int iters : iteration_counts) {
    require(iters >= 1, ErrorCode::InvalidArgument, "sweep_iterations: iteration counts must be positive");
    require(rows.empty() || iters >= rows.back().iters, ErrorCode::InvalidArgument,
            "sweep_iterations: iteration counts must be non-decreasing");
    const auto result = method == SweepMethod::MatchAls
                            ? matchals(graph.adjacency(), gt.universe_dim, iters)
                            : pgdds(graph.adjacency(), gt.universe_dim, graph.view_of(), iters);
    const Matrix s = restrict_cross_view(result.S, graph.view_of());
    MetricsRow row;
    row.method = result.method;
    row.views = graph.view_count();
    row.points = gt.universe_dim;
    row.noise = instance.spec.edge_noise_sigma;
    row.outliers = instance.spec.outlier_rate;
    row.iters = iters;
    row.seed = instance.spec.seed;
    row.error = error_report(s, gt.adjacency, result.seconds);
    row.stats = similarity_stats(s, gt);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cyclematch
