#pragma once

#include "cyclematch/eval.hpp"
#include "cyclematch/losses.hpp"
#include "cyclematch/nn.hpp"
#include "cyclematch/synthgen.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cyclematch {

enum class GraphSource { Synthetic, Scene };

struct TrainConfig {
  int steps = 1000;
  double lr0 = 1e-4;
  double decay = 0.9999;
  double lambda_geom = 1.0;
  bool use_geometric = false;
  bool use_groupnorm = true;
  int eval_every = 100;
  int eval_graphs = 4;
  std::uint64_t seed = 0;
  GraphSource source = GraphSource::Synthetic;
  SynthGraphSpec graph;  // graph.seed is ignored; every step derives its own
  int hidden_dim = 64;
  int groups = 4;
  bool zero_init = false;

  void validate() const;  // SpecError
  ModelDims model_dims() const;
};

struct HeldOutEval {
  ErrorReport error;
  SimilarityStats stats;
};

struct TrainLogRow {
  std::int64_t step = 0;  // 1-based index of the update just taken
  double loss = 0.0;
  double cycle = 0.0;
  double geom = 0.0;
  double lr = 0.0;
  std::optional<HeldOutEval> eval;
};

/// A training sample: the graph, its ground truth, and the geometric prior
/// when the source is a scene.
struct TrainSample {
  CorrespondenceGraph graph;
  GroundTruth gt;
  std::optional<Matrix> prior;
};

TrainSample make_sample(const TrainConfig& config, std::uint64_t seed);

/// Seed streams: step s trains on derive_seed(seed, kTrainStream, s), held-out
/// graph k is derive_seed(seed, kHeldOutStream, k).
inline constexpr std::uint64_t kTrainStream = 11;
inline constexpr std::uint64_t kHeldOutStream = 12;
inline constexpr std::uint64_t kInitStream = 13;

/// Sequential, deterministic training loop. The step counter lives in the
/// optimizer state, so a checkpoint taken at step k resumes into the same
/// graph sequence.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  Trainer(TrainConfig config, GcnModel model, AdamState adam);

  TrainLogRow step();
  std::vector<TrainLogRow> run(int steps);

  /// Mean error and pooled similarity statistics over the held-out graphs.
  HeldOutEval evaluate() const;

  std::int64_t steps_done() const { return adam_.t; }
  const GcnModel& model() const { return model_; }
  const AdamState& optimizer() const { return adam_; }
  const TrainConfig& config() const { return config_; }

  void save_checkpoint(const std::filesystem::path& path) const;
  static Trainer resume(TrainConfig config, const std::filesystem::path& checkpoint);

 private:
  TrainConfig config_;
  GcnModel model_;
  AdamState adam_;
  std::vector<TrainSample> held_out_;
};

struct TrainResult {
  GcnModel model;
  std::vector<TrainLogRow> log;
};

TrainResult train(const TrainConfig& config);

HeldOutEval evaluate_model(const GcnModel& model, const std::vector<TrainSample>& samples);

void write_train_log(std::ostream& os, const std::vector<TrainLogRow>& log, bool header = true);

struct AblationArm {
  std::string label;
  TrainConfig config;
};

struct AblationRow {
  std::string label;
  std::vector<double> l1_per_seed;
  double mean_l1 = 0.0;
  double std_l1 = 0.0;
  double mean_l2 = 0.0;
  double mean_same = 0.0;
  double mean_diff = 0.0;
};

/// Trains every arm once per seed and reports the final held-out error.
/// With more than one arm, each must differ from the first in exactly one of
/// use_geometric / use_groupnorm.
std::vector<AblationRow> ablate(const std::vector<AblationArm>& arms, const std::vector<std::uint64_t>& seeds);

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows);

}  // namespace cyclematch
