#include "cyclematch/gradcheck.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/geometry.hpp"
#include "cyclematch/losses.hpp"
#include "cyclematch/nn.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/synthgen.hpp"

#include <algorithm>
#include <cmath>

namespace cyclematch {

void GradCheckConfig::validate() const {
  require(views >= 2, ErrorCode::Spec, "gradcheck needs views >= 2");
  require(points >= 2, ErrorCode::Spec, "gradcheck needs points >= 2");
  require(directions >= 1, ErrorCode::Spec, "gradcheck needs directions >= 1");
  require(step > 0.0, ErrorCode::Spec, "gradcheck step must be positive");
  require(lambda_geom >= 0.0, ErrorCode::Spec, "lambda_geom must be >= 0");
}

namespace {

struct Instance {
  Matrix ltilde;
  Matrix features;
  Matrix adjacency;
  Matrix prior;
};

// Scene generation needs at least eight points per view; generate a larger
// scene and keep the first `points` nodes of every view.
Instance make_instance(const GradCheckConfig& config) {
  SynthGraphSpec spec;
  spec.views = config.views;
  spec.points = std::max(config.points, 8);
  spec.outlier_rate = 0.2;
  spec.edge_noise_sigma = 0.05;
  spec.seed = derive_seed(config.seed, 21, 0);
  const SynthScene full = gen_scene(spec);
  const GeometricPrior prior = build_prior(full.scene, full.graph);

  std::vector<Eigen::Index> keep;
  std::vector<int> view_of;
  for (int b = 0; b < config.views; ++b)
    for (int k = 0; k < config.points; ++k) {
      keep.push_back(static_cast<Eigen::Index>(b) * spec.points + k);
      view_of.push_back(b);
    }
  const auto n = static_cast<Eigen::Index>(keep.size());
  Instance inst;
  inst.adjacency.resize(n, n);
  inst.prior.resize(n, n);
  inst.features.resize(n, full.graph.feature_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    inst.features.row(i) = full.graph.features().row(keep[i]);
    for (Eigen::Index j = 0; j < n; ++j) {
      inst.adjacency(i, j) = full.graph.adjacency()(keep[i], keep[j]);
      inst.prior(i, j) = prior.G(keep[i], keep[j]);
    }
  }
  const auto graph = CorrespondenceGraph::create(config.views, view_of, inst.adjacency, inst.features);
  inst.ltilde = augmented_operator(graph);
  return inst;
}

struct Evaluation {
  double loss = 0.0;
  ForwardCache cache;
  Matrix grad_embedding;
};

Evaluation evaluate(const GcnModel& model, const Instance& inst, double lambda_geom) {
  Evaluation ev;
  model_forward(model, inst.ltilde, inst.features, &ev.cache);
  const CombinedLoss loss =
      combined_loss(inst.adjacency, &inst.prior, ev.cache.embedding, LossConfig{.lambda_geom = lambda_geom});
  ev.loss = loss.total;
  ev.grad_embedding = loss.grad;
  return ev;
}

// True when both evaluations sit on the same side of every ReLU and every
// |E E^T - A| kink.
bool same_pieces(const Evaluation& a, const Evaluation& b, const Matrix& adjacency) {
  for (std::size_t k = 0; k + 1 < a.cache.layers.size(); ++k) {
    const Matrix& x = a.cache.layers[k].output;
    const Matrix& y = b.cache.layers[k].output;
    if (((x.array() > 0.0) != (y.array() > 0.0)).any()) return false;
  }
  const Matrix ra = a.cache.embedding * a.cache.embedding.transpose() - adjacency;
  const Matrix rb = b.cache.embedding * b.cache.embedding.transpose() - adjacency;
  return ((ra.array() > 0.0) == (rb.array() > 0.0)).all() && ((ra.array() < 0.0) == (rb.array() < 0.0)).all();
}

}  // namespace

GradCheckReport gradcheck(const GradCheckConfig& config) {
  config.validate();
  const Instance inst = make_instance(config);

  ModelDims dims;
  dims.input_dim = static_cast<int>(inst.features.cols());
  dims.hidden_dim = config.hidden_dim;
  dims.output_dim = config.points;
  dims.groups = config.groups;
  dims.use_groupnorm = config.use_groupnorm;
  GcnModel model = init_model(dims, derive_seed(config.seed, 22, 0));
  Philox affine(config.seed, 23);
  for (auto& layer : model.layers) {
    for (Eigen::Index c = 0; c < layer.gn_scale.size(); ++c) layer.gn_scale[c] += 0.1 * affine.normal();
    for (Eigen::Index c = 0; c < layer.gn_shift.size(); ++c) layer.gn_shift[c] = 0.1 * affine.normal();
  }

  const Vector theta = flatten_params(model);
  const Evaluation base = evaluate(model, inst, config.lambda_geom);
  const Vector grad = flatten_grads(model_backward(model, inst.ltilde, base.cache, base.grad_embedding));

  GradCheckReport report;
  report.parameters = theta.size();
  report.nodes = inst.ltilde.rows();
  Philox dirs(config.seed, 24);
  GcnModel probe = model;
  const int max_attempts = 10 * config.directions;
  for (int attempt = 0; attempt < max_attempts && static_cast<int>(report.directions.size()) < config.directions;
       ++attempt) {
    Vector u(theta.size());
    for (Eigen::Index i = 0; i < u.size(); ++i) u[i] = dirs.normal();
    u.normalize();

    assign_params(probe, theta + config.step * u);
    const Evaluation plus = evaluate(probe, inst, config.lambda_geom);
    assign_params(probe, theta - config.step * u);
    const Evaluation minus = evaluate(probe, inst, config.lambda_geom);
    if (!same_pieces(plus, base, inst.adjacency) || !same_pieces(minus, base, inst.adjacency)) {
      ++report.rejected;
      continue;
    }
    GradCheckDirection d;
    d.analytic = grad.dot(u);
    d.numeric = (plus.loss - minus.loss) / (2.0 * config.step);
    d.rel_error = std::abs(d.analytic - d.numeric) / std::max({std::abs(d.analytic), std::abs(d.numeric), 1e-12});
    report.max_rel_error = std::max(report.max_rel_error, d.rel_error);
    report.directions.push_back(d);
  }
  require(static_cast<int>(report.directions.size()) == config.directions, ErrorCode::ConvergenceFailure,
          "too many random directions crossed a kink");
  return report;
}

}  // namespace cyclematch
