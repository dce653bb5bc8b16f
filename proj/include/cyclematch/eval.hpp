#pragma once

#include "cyclematch/graph.hpp"
#include "cyclematch/synthgen.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace cyclematch {

struct SimilarityStats {
  double same_mean = 0.0;
  double same_std = 0.0;
  double diff_mean = 0.0;
  double diff_std = 0.0;
};

struct ErrorReport {
  double l1 = 0.0;  // mean |S - A_gt| per entry
  double l2 = 0.0;  // mean (S - A_gt)^2 per entry
  double runtime_s = 0.0;
};

/// Pools every cross-view pair (i < j) into "same" (same universe point) or
/// "different" and returns population mean and standard deviation of the
/// similarity values.
SimilarityStats similarity_stats(const Matrix& similarity, const GroundTruth& gt);

/// Cosine statistics of an embedding with unit (or zero) rows.
SimilarityStats embedding_similarity_stats(const Matrix& embedding, const GroundTruth& gt);

ErrorReport error_report(const Matrix& similarity, const Matrix& gt_adjacency, double runtime_s = 0.0);

/// Soft match matrix of an embedding: E E^T clamped to [0,1], with the
/// diagonal and the within-view blocks set to zero like a graph adjacency.
Matrix embedding_similarity(const Matrix& embedding, const std::vector<int>& view_of);

/// Zeroes the diagonal and within-view blocks; every method is scored on
/// cross-view entries the same way.
Matrix restrict_cross_view(Matrix similarity, const std::vector<int>& view_of);

struct Alignment {
  Matrix Q;                   // d x d orthogonal
  bool rank_deficient = false;  // some singular value of E^T X below 1e-12
};

/// Orthogonal Q minimizing |E Q - X|_F.
Alignment procrustes_align(const Matrix& embedding, const Matrix& target);

/// Wall-clock seconds of one call, monotonic clock.
double time_method(const std::function<void()>& fn);

struct TimingStats {
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> samples;
};
TimingStats time_repeated(const std::function<void()>& fn, int repeats);

/// One CSV record in the shared metrics schema.
struct MetricsRow {
  std::string method;
  int views = 0;
  int points = 0;
  double noise = 0.0;
  double outliers = 0.0;
  int iters = 0;
  std::uint64_t seed = 0;
  ErrorReport error;
  SimilarityStats stats;
};

inline constexpr const char* kMetricsHeader =
    "method,views,points,noise,outliers,iters,seed,l1,l2,runtime_s,same_mean,same_std,diff_mean,diff_std";

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows);
void save_metrics_csv(const std::filesystem::path& path, const std::vector<MetricsRow>& rows);

enum class SweepMethod { MatchAls, Pgdds };

struct SweepInstance {
  const CorrespondenceGraph* graph = nullptr;
  const GroundTruth* gt = nullptr;
  SynthGraphSpec spec;  // provenance for the CSV columns
};

/// One metrics row per iteration count, in the order given. Scoring uses the
/// cross-view restriction of the solver output.
std::vector<MetricsRow> sweep_iterations(SweepMethod method, const SweepInstance& instance,
                                         const std::vector<int>& iteration_counts);

}  // namespace cyclematch
