#include "cyclematch/train.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/geometry.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/text_io.hpp"

#include <cmath>
#include <fstream>
#include <ostream>

namespace cyclematch {

void TrainConfig::validate() const {
  require(steps >= 1, ErrorCode::Spec, "steps must be >= 1");
  require(eval_every >= 1, ErrorCode::Spec, "eval_every must be >= 1");
  require(eval_graphs >= 1, ErrorCode::Spec, "eval_graphs must be >= 1");
  require(lr0 > 0.0, ErrorCode::Spec, "lr0 must be positive");
  require(decay > 0.0 && decay <= 1.0, ErrorCode::Spec, "decay must lie in (0,1]");
  require(lambda_geom >= 0.0, ErrorCode::Spec, "lambda_geom must be nonnegative");
  graph.validate();
  if (source == GraphSource::Scene) require(graph.points >= 8, ErrorCode::Spec, "scenes need at least 8 points");
  model_dims().validate();
}

ModelDims TrainConfig::model_dims() const {
  ModelDims dims;
  dims.input_dim = graph.descriptor_dim + (source == GraphSource::Scene ? 2 : 0);
  dims.hidden_dim = hidden_dim;
  dims.output_dim = graph.points;
  dims.groups = groups;
  dims.use_groupnorm = use_groupnorm;
  return dims;
}

TrainSample make_sample(const TrainConfig& config, std::uint64_t seed) {
  SynthGraphSpec spec = config.graph;
  spec.seed = seed;
  if (config.source == GraphSource::Scene) {
    auto s = gen_scene(spec);
    std::optional<Matrix> prior;
    if (config.use_geometric) prior = build_prior(s.scene, s.graph).G;
    return TrainSample{std::move(s.graph), std::move(s.scene.gt), std::move(prior)};
  }
  auto g = gen_graph(spec);
  return TrainSample{std::move(g.graph), std::move(g.gt), std::nullopt};
}

namespace {

std::vector<TrainSample> held_out_samples(const TrainConfig& config) {
  TrainConfig eval_config = config;
  eval_config.use_geometric = false;  // no poses at test time
  std::vector<TrainSample> out;
  for (int k = 0; k < config.eval_graphs; ++k)
    out.push_back(make_sample(eval_config, derive_seed(config.seed, kHeldOutStream, static_cast<std::uint64_t>(k))));
  return out;
}

}  // namespace

HeldOutEval evaluate_model(const GcnModel& model, const std::vector<TrainSample>& samples) {
  require(!samples.empty(), ErrorCode::InvalidArgument, "evaluate_model: no samples");
  HeldOutEval out;
  double same_sq = 0.0;
  double diff_sq = 0.0;
  for (const auto& s : samples) {
    const Matrix op = augmented_operator(s.graph);
    const Matrix e = model_forward(model, op, s.graph.features());
    const auto err = error_report(embedding_similarity(e, s.graph.view_of()), s.gt.adjacency);
    const auto st = embedding_similarity_stats(e, s.gt);
    out.error.l1 += err.l1;
    out.error.l2 += err.l2;
    out.stats.same_mean += st.same_mean;
    out.stats.diff_mean += st.diff_mean;
    same_sq += st.same_std * st.same_std + st.same_mean * st.same_mean;
    diff_sq += st.diff_std * st.diff_std + st.diff_mean * st.diff_mean;
  }
  // Every sample has the same pair counts, so pooled moments are plain means.
  const auto k = static_cast<double>(samples.size());
  out.error.l1 /= k;
  out.error.l2 /= k;
  out.stats.same_mean /= k;
  out.stats.diff_mean /= k;
  out.stats.same_std = std::sqrt(std::max(0.0, same_sq / k - out.stats.same_mean * out.stats.same_mean));
  out.stats.diff_std = std::sqrt(std::max(0.0, diff_sq / k - out.stats.diff_mean * out.stats.diff_mean));
  return out;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto dims = config_.model_dims();
  model_ = config_.zero_init ? zero_model(dims) : init_model(dims, derive_seed(config_.seed, kInitStream, 0));
  adam_ = make_adam(model_.parameter_count(), config_.lr0, config_.decay);
  held_out_ = held_out_samples(config_);
}

Trainer::Trainer(TrainConfig config, GcnModel model, AdamState adam)
    : config_(std::move(config)), model_(std::move(model)), adam_(std::move(adam)) {
  config_.validate();
  const auto dims = config_.model_dims();
  require(model_.dims.input_dim == dims.input_dim && model_.dims.output_dim == dims.output_dim &&
              model_.dims.hidden_dim == dims.hidden_dim && model_.dims.groups == dims.groups &&
              model_.dims.use_groupnorm == dims.use_groupnorm,
          ErrorCode::DimensionMismatch, "checkpoint model does not match the training configuration");
  require(adam_.m.size() == model_.parameter_count(), ErrorCode::DimensionMismatch,
          "optimizer state does not match the model");
  held_out_ = held_out_samples(config_);
}

TrainLogRow Trainer::step() {
  const std::int64_t index = adam_.t;
  const auto sample = make_sample(config_, derive_seed(config_.seed, kTrainStream, static_cast<std::uint64_t>(index)));
  const Matrix op = augmented_operator(sample.graph);

  ForwardCache cache;
  const Matrix e = model_forward(model_, op, sample.graph.features(), &cache);
  const Matrix* prior = config_.use_geometric && sample.prior ? &*sample.prior : nullptr;
  const auto loss = combined_loss(sample.graph.adjacency(), prior, e, LossConfig{config_.lambda_geom});
  require(std::isfinite(loss.total), ErrorCode::NonFiniteLoss,
          "non-finite loss at step " + std::to_string(index + 1));

  const Vector grads = flatten_grads(model_backward(model_, op, cache, loss.grad));
  require(grads.allFinite(), ErrorCode::NonFiniteLoss,
          "non-finite gradient at step " + std::to_string(index + 1));

  TrainLogRow row;
  row.lr = adam_.rate();
  Vector params = flatten_params(model_);
  adam_step(adam_, params, grads);
  assign_params(model_, params);

  row.step = adam_.t;
  row.loss = loss.total;
  row.cycle = loss.cycle;
  row.geom = loss.geom;
  if (row.step % config_.eval_every == 0) row.eval = evaluate();
  return row;
}

std::vector<TrainLogRow> Trainer::run(int steps) {
  std::vector<TrainLogRow> log;
  log.reserve(static_cast<std::size_t>(std::max(steps, 0)));
  for (int s = 0; s < steps; ++s) log.push_back(step());
  return log;
}

HeldOutEval Trainer::evaluate() const { return evaluate_model(model_, held_out_); }

void Trainer::save_checkpoint(const std::filesystem::path& path) const {
  cyclematch::save_checkpoint(path, model_, &adam_);
}

Trainer Trainer::resume(TrainConfig config, const std::filesystem::path& checkpoint) {
  auto ck = load_checkpoint(checkpoint);
  require(ck.adam.has_value(), ErrorCode::Format, checkpoint.string() + ": checkpoint has no optimizer state");
  return Trainer(std::move(config), std::move(ck.model), std::move(*ck.adam));
}

TrainResult train(const TrainConfig& config) {
  Trainer trainer(config);
  auto log = trainer.run(config.steps);
  return TrainResult{trainer.model(), std::move(log)};
}

void write_train_log(std::ostream& os, const std::vector<TrainLogRow>& log, bool header) {
  using textio::format_real;
  if (header) os << "step,loss,cycle,geom,lr,l1,l2,same_mean,same_std,diff_mean,diff_std\n";
  for (const auto& r : log) {
    os << r.step << ',' << format_real(r.loss) << ',' << format_real(r.cycle) << ',' << format_real(r.geom) << ','
       << format_real(r.lr);
    if (r.eval) {
      const auto& e = *r.eval;
      os << ',' << format_real(e.error.l1) << ',' << format_real(e.error.l2) << ','
         << format_real(e.stats.same_mean) << ',' << format_real(e.stats.same_std) << ','
         << format_real(e.stats.diff_mean) << ',' << format_real(e.stats.diff_std);
    } else {
      os << ",,,,,,";
    }
    os << '\n';
  }
}

std::vector<AblationRow> ablate(const std::vector<AblationArm>& arms, const std::vector<std::uint64_t>& seeds) {
  require(!seeds.empty(), ErrorCode::InvalidArgument, "ablate: need at least one seed");
  for (std::size_t a = 1; a < arms.size(); ++a) {
    const auto& base = arms.front().config;
    const auto& c = arms[a].config;
    const int flips = (c.use_geometric != base.use_geometric) + (c.use_groupnorm != base.use_groupnorm);
    require(flips == 1, ErrorCode::InvalidArgument,
            "ablate: arm '" + arms[a].label + "' must differ from the first in exactly one flag");
  }

  std::vector<AblationRow> rows;
  for (const auto& arm : arms) {
    AblationRow row;
    row.label = arm.label;
    for (auto seed : seeds) {
      TrainConfig cfg = arm.config;
      cfg.seed = seed;
      Trainer trainer(cfg);
      trainer.run(cfg.steps);
      const auto eval = trainer.evaluate();
      row.l1_per_seed.push_back(eval.error.l1);
      row.mean_l2 += eval.error.l2;
      row.mean_same += eval.stats.same_mean;
      row.mean_diff += eval.stats.diff_mean;
    }
    const auto k = static_cast<double>(seeds.size());
    double sum = 0.0;
    double sum_sq = 0.0;
    for (double x : row.l1_per_seed) {
      sum += x;
      sum_sq += x * x;
    }
    row.mean_l1 = sum / k;
    row.std_l1 = std::sqrt(std::max(0.0, sum_sq / k - row.mean_l1 * row.mean_l1));
    row.mean_l2 /= k;
    row.mean_same /= k;
    row.mean_diff /= k;
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_ablation_csv(std::ostream& os, const std::vector<AblationRow>& rows) {
  using textio::format_real;
  os << "label,seeds,mean_l1,std_l1,mean_l2,mean_same,mean_diff,l1_per_seed\n";
  for (const auto& r : rows) {
    os << r.label << ',' << r.l1_per_seed.size() << ',' << format_real(r.mean_l1) << ',' << format_real(r.std_l1)
       << ',' << format_real(r.mean_l2) << ',' << format_real(r.mean_same) << ',' << format_real(r.mean_diff)
       << ',';
    for (std::size_t i = 0; i < r.l1_per_seed.size(); ++i) os << (i ? ";" : "") << format_real(r.l1_per_seed[i]);
    os << '\n';
  }
}

}  // namespace cyclematch
