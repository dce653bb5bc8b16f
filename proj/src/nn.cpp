#include "cyclematch/nn.hpp"

#include "cyclematch/error.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/text_io.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace cyclematch {

void ModelDims::validate() const {
  require(input_dim >= 1, ErrorCode::Spec, "input_dim must be >= 1");
  require(hidden_dim >= 1, ErrorCode::Spec, "hidden_dim must be >= 1");
  require(output_dim >= 1, ErrorCode::Spec, "output_dim must be >= 1");
  require(groups >= 1 && hidden_dim % groups == 0, ErrorCode::Spec, "groups must divide hidden_dim");
}

bool GcnModel::takes_skip(int layer_index) {
  for (int k : kSkipAt)
    if (k == layer_index + 1) return true;
  return false;
}

Eigen::Index GcnModel::parameter_count() const {
  Eigen::Index total = 0;
  for (const auto& l : layers) total += l.W.size() + l.gn_scale.size() + l.gn_shift.size();
  return total;
}

int layer_input_dim(const ModelDims& dims, int layer_index) {
  if (layer_index == 0) return dims.input_dim;
  return dims.hidden_dim + (GcnModel::takes_skip(layer_index) ? dims.input_dim : 0);
}

int layer_output_dim(const ModelDims& dims, int layer_index) {
  return layer_index == GcnModel::kLayers - 1 ? dims.output_dim : dims.hidden_dim;
}

namespace {

GcnModel shaped_model(const ModelDims& dims) {
  dims.validate();
  GcnModel model;
  model.dims = dims;
  for (int k = 0; k < GcnModel::kLayers; ++k) {
    GcnLayer layer;
    const int out = layer_output_dim(dims, k);
    layer.W = Matrix::Zero(layer_input_dim(dims, k), out);
    layer.gn_scale = Vector::Ones(out);
    layer.gn_shift = Vector::Zero(out);
    layer.groups = k == GcnModel::kLayers - 1 ? 1 : dims.groups;
    model.layers.push_back(std::move(layer));
  }
  return model;
}

void check_model_shape(const GcnModel& model) {
  require(static_cast<int>(model.layers.size()) == GcnModel::kLayers, ErrorCode::DimensionMismatch,
          "model must have 12 layers");
  for (int k = 0; k < GcnModel::kLayers; ++k) {
    const auto& l = model.layers[static_cast<std::size_t>(k)];
    require(l.W.rows() == layer_input_dim(model.dims, k) && l.W.cols() == layer_output_dim(model.dims, k) &&
                l.gn_scale.size() == l.W.cols() && l.gn_shift.size() == l.W.cols(),
            ErrorCode::DimensionMismatch, "layer " + std::to_string(k + 1) + " has inconsistent shape");
  }
}

}  // namespace

GcnModel init_model(const ModelDims& dims, std::uint64_t seed) {
  GcnModel model = shaped_model(dims);
  for (std::size_t k = 0; k < model.layers.size(); ++k) {
    auto& w = model.layers[k].W;
    const double bound = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
    Philox rng(seed, 100 + k);
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
  }
  return model;
}

GcnModel zero_model(const ModelDims& dims) { return shaped_model(dims); }

Vector group_norm(const Vector& x, int groups, const Vector& scale, const Vector& shift, double eps) {
  require(groups >= 1 && x.size() % groups == 0, ErrorCode::DimensionMismatch,
          "group count must divide the channel count");
  require(scale.size() == x.size() && shift.size() == x.size(), ErrorCode::DimensionMismatch,
          "scale/shift length must match the input");
  const Eigen::Index size = x.size() / groups;
  Vector y(x.size());
  for (int g = 0; g < groups; ++g) {
    const auto seg = x.segment(g * size, size);
    const double mean = seg.mean();
    const double var = (seg.array() - mean).square().mean();
    y.segment(g * size, size) = (seg.array() - mean) / std::sqrt(var + eps);
  }
  return y.cwiseProduct(scale) + shift;
}

Matrix layer_forward(const GcnLayer& layer, const Matrix& ltilde, const Matrix& input,
                     const LayerOptions& options, LayerCache* cache) {
  const Eigen::Index n = input.rows();
  require(ltilde.rows() == n && ltilde.cols() == n, ErrorCode::DimensionMismatch,
          "operator does not match node count");
  require(input.cols() == layer.in_dim(), ErrorCode::DimensionMismatch, "layer input width mismatch");
  const Eigen::Index m = layer.out_dim();

  Matrix propagated = ltilde * input;
  Matrix out = propagated * layer.W;
  Matrix normalized;
  Matrix inv_std;
  if (options.group_norm) {
    require(layer.groups >= 1 && m % layer.groups == 0, ErrorCode::DimensionMismatch,
            "group count must divide the layer width");
    const Eigen::Index size = m / layer.groups;
    inv_std.resize(n, layer.groups);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int g = 0; g < layer.groups; ++g) {
        auto seg = out.row(i).segment(g * size, size);
        const double mean = seg.mean();
        const double var = (seg.array() - mean).square().mean();
        const double s = 1.0 / std::sqrt(var + kGroupNormEps);
        seg = (seg.array() - mean) * s;
        inv_std(i, g) = s;
      }
    }
    normalized = out;
    out = (out.array().rowwise() * layer.gn_scale.transpose().array()).rowwise() +
          layer.gn_shift.transpose().array();
  }
  if (options.activation) out = out.cwiseMax(0.0);

  if (cache) {
    cache->input = input;
    cache->propagated = std::move(propagated);
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->output = out;
    cache->options = options;
  }
  return out;
}

Matrix model_forward(const GcnModel& model, const Matrix& ltilde, const Matrix& e0, ForwardCache* cache) {
  check_model_shape(model);
  require(e0.cols() == model.dims.input_dim, ErrorCode::DimensionMismatch,
          "input width does not match model input_dim");
  if (cache) {
    cache->layers.assign(GcnModel::kLayers, LayerCache{});
    cache->nodes = e0.rows();
    cache->input_dim = e0.cols();
  }

  Matrix h = e0;
  for (int k = 0; k < GcnModel::kLayers; ++k) {
    if (k > 0 && GcnModel::takes_skip(k)) {
      Matrix joined(h.rows(), h.cols() + e0.cols());
      joined << h, e0;
      h = std::move(joined);
    }
    const bool last = k == GcnModel::kLayers - 1;
    const LayerOptions options{.group_norm = !last && model.dims.use_groupnorm, .activation = !last};
    h = layer_forward(model.layers[static_cast<std::size_t>(k)], ltilde, h, options,
                      cache ? &cache->layers[static_cast<std::size_t>(k)] : nullptr);
  }

  Vector norms = h.rowwise().norm();
  Matrix embedding = h;
  for (Eigen::Index i = 0; i < embedding.rows(); ++i)
    if (norms[i] > 0.0) embedding.row(i) /= norms[i];

  if (cache) {
    cache->raw = std::move(h);
    cache->row_norms = std::move(norms);
    cache->embedding = embedding;
  }
  return embedding;
}

ModelGrads model_backward(const GcnModel& model, const Matrix& ltilde, const ForwardCache& cache,
                          const Matrix& grad_embedding) {
  check_model_shape(model);
  require(static_cast<int>(cache.layers.size()) == GcnModel::kLayers && cache.nodes == grad_embedding.rows() &&
              cache.embedding.rows() == grad_embedding.rows() &&
              cache.embedding.cols() == grad_embedding.cols() && ltilde.rows() == cache.nodes &&
              cache.input_dim == model.dims.input_dim,
          ErrorCode::StaleCache, "forward cache does not match this model and gradient");
  for (int k = 0; k < GcnModel::kLayers; ++k)
    require(cache.layers[static_cast<std::size_t>(k)].input.cols() == model.layers[static_cast<std::size_t>(k)].in_dim(),
            ErrorCode::StaleCache, "forward cache does not match this model");

  ModelGrads grads;
  grads.layers.resize(GcnModel::kLayers);

  // Row normalization e = z / |z|: dz = (de - e (e . de)) / |z|.
  Matrix upstream = Matrix::Zero(grad_embedding.rows(), grad_embedding.cols());
  for (Eigen::Index i = 0; i < upstream.rows(); ++i) {
    const double norm = cache.row_norms[i];
    if (norm <= 0.0) continue;
    const auto e = cache.embedding.row(i);
    const auto de = grad_embedding.row(i);
    upstream.row(i) = (de - e * e.dot(de)) / norm;
  }

  for (int k = GcnModel::kLayers - 1; k >= 0; --k) {
    const auto& layer = model.layers[static_cast<std::size_t>(k)];
    const auto& lc = cache.layers[static_cast<std::size_t>(k)];
    auto& g = grads.layers[static_cast<std::size_t>(k)];
    g.groups = layer.groups;
    g.gn_scale = Vector::Zero(layer.out_dim());
    g.gn_shift = Vector::Zero(layer.out_dim());

    Matrix dz = upstream;
    if (lc.options.activation) dz = (lc.output.array() > 0.0).select(dz, 0.0);
    if (lc.options.group_norm) {
      g.gn_scale = (dz.cwiseProduct(lc.normalized)).colwise().sum().transpose();
      g.gn_shift = dz.colwise().sum().transpose();
      const Matrix dxhat = dz.array().rowwise() * layer.gn_scale.transpose().array();
      const Eigen::Index size = layer.out_dim() / layer.groups;
      for (Eigen::Index i = 0; i < dz.rows(); ++i) {
        for (int grp = 0; grp < layer.groups; ++grp) {
          const auto xhat = lc.normalized.row(i).segment(grp * size, size);
          const auto dx = dxhat.row(i).segment(grp * size, size);
          const double mean_dx = dx.mean();
          const double mean_dx_xhat = dx.dot(xhat) / static_cast<double>(size);
          dz.row(i).segment(grp * size, size) =
              lc.inv_std(i, grp) * (dx.array() - mean_dx - xhat.array() * mean_dx_xhat).matrix();
        }
      }
    }

    g.W = lc.propagated.transpose() * dz;
    if (k == 0) break;
    Matrix d_input = ltilde.transpose() * (dz * layer.W.transpose());
    // The skip input E0 carries no parameters; only the hidden part continues.
    upstream = d_input.leftCols(model.dims.hidden_dim);
  }
  return grads;
}

namespace {

template <typename Layers, typename Fn>
void visit_params(Layers& layers, Fn&& fn) {
  for (auto& l : layers) {
    for (Eigen::Index i = 0; i < l.W.rows(); ++i)
      for (Eigen::Index j = 0; j < l.W.cols(); ++j) fn(l.W(i, j));
    for (Eigen::Index i = 0; i < l.gn_scale.size(); ++i) fn(l.gn_scale[i]);
    for (Eigen::Index i = 0; i < l.gn_shift.size(); ++i) fn(l.gn_shift[i]);
  }
}

template <typename Layers>
Vector flatten(const Layers& layers) {
  Eigen::Index total = 0;
  visit_params(layers, [&](const double&) { ++total; });
  Vector out(total);
  Eigen::Index k = 0;
  visit_params(layers, [&](const double& x) { out[k++] = x; });
  return out;
}

}  // namespace

Vector flatten_params(const GcnModel& model) { return flatten(model.layers); }
Vector flatten_grads(const ModelGrads& grads) { return flatten(grads.layers); }

void assign_params(GcnModel& model, const Vector& flat) {
  require(flat.size() == model.parameter_count(), ErrorCode::DimensionMismatch,
          "parameter vector length mismatch");
  Eigen::Index k = 0;
  visit_params(model.layers, [&](double& x) { x = flat[k++]; });
}

double AdamState::rate() const { return lr0 * std::pow(decay, static_cast<double>(t)); }

AdamState make_adam(Eigen::Index parameter_count, double lr0, double decay) {
  AdamState s;
  s.m = Vector::Zero(parameter_count);
  s.v = Vector::Zero(parameter_count);
  s.lr0 = lr0;
  s.decay = decay;
  return s;
}

void adam_step(AdamState& state, Vector& params, const Vector& grads) {
  require(params.size() == grads.size() && state.m.size() == params.size() && state.v.size() == params.size(),
          ErrorCode::DimensionMismatch, "adam: parameter/gradient/state size mismatch");
  const double lr = state.rate();
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grads;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * grads.cwiseAbs2();
  params.array() -= lr * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.eps);
}

void write_model(std::ostream& os, const GcnModel& model) {
  check_model_shape(model);
  const auto& d = model.dims;
  os << "GCNM 1\n";
  os << "input_dim " << d.input_dim << " hidden_dim " << d.hidden_dim << " output_dim " << d.output_dim
     << " groups " << d.groups << " groupnorm " << (d.use_groupnorm ? 1 : 0) << '\n';
  os << "layers " << GcnModel::kLayers << " skip_at " << GcnModel::kSkipAt[0] << ' ' << GcnModel::kSkipAt[1]
     << '\n';
  for (int k = 0; k < GcnModel::kLayers; ++k) {
    const auto& l = model.layers[static_cast<std::size_t>(k)];
    os << "layer " << k + 1 << ' ' << l.W.rows() << ' ' << l.W.cols() << '\n';
    textio::write_matrix(os, l.W);
    textio::write_row(os, l.gn_scale.transpose());
    textio::write_row(os, l.gn_shift.transpose());
  }
}

GcnModel read_model(std::istream& is, const std::string& source) {
  textio::LineReader in(is, source);
  in.expect_header("GCNM", "1");
  const auto v = in.keyed({"input_dim", "hidden_dim", "output_dim", "groups", "groupnorm"});
  ModelDims dims;
  dims.input_dim = static_cast<int>(textio::parse_int(v[0], in));
  dims.hidden_dim = static_cast<int>(textio::parse_int(v[1], in));
  dims.output_dim = static_cast<int>(textio::parse_int(v[2], in));
  dims.groups = static_cast<int>(textio::parse_int(v[3], in));
  const long long gn = textio::parse_int(v[4], in);
  if (gn != 0 && gn != 1) in.error("groupnorm must be 0 or 1");
  dims.use_groupnorm = gn == 1;
  try {
    dims.validate();
  } catch (const Error& e) {
    in.error(e.what());
  }
  const auto arch = in.tokens();
  if (arch != std::vector<std::string>{"layers", "12", "skip_at", "6", "12"})
    in.error("unsupported architecture line");

  GcnModel model = zero_model(dims);
  for (int k = 0; k < GcnModel::kLayers; ++k) {
    auto& l = model.layers[static_cast<std::size_t>(k)];
    const auto head = in.tokens();
    if (head.size() != 4 || head[0] != "layer" || textio::parse_int(head[1], in) != k + 1 ||
        textio::parse_int(head[2], in) != l.W.rows() || textio::parse_int(head[3], in) != l.W.cols())
      in.error("layer " + std::to_string(k + 1) + " header does not match dimensions");
    l.W = in.matrix(l.W.rows(), l.W.cols());
    const auto scale = in.reals(static_cast<std::size_t>(l.W.cols()));
    const auto shift = in.reals(static_cast<std::size_t>(l.W.cols()));
    l.gn_scale = Eigen::Map<const Vector>(scale.data(), l.W.cols());
    l.gn_shift = Eigen::Map<const Vector>(shift.data(), l.W.cols());
  }
  return model;
}

void write_adam(std::ostream& os, const AdamState& s) {
  os << "ADAM 1\n";
  os << "t " << s.t << " size " << s.m.size() << '\n';
  os << "lr0 " << textio::format_real(s.lr0) << " beta1 " << textio::format_real(s.beta1) << " beta2 "
     << textio::format_real(s.beta2) << " eps " << textio::format_real(s.eps) << " decay "
     << textio::format_real(s.decay) << '\n';
  textio::write_row(os, s.m.transpose());
  textio::write_row(os, s.v.transpose());
}

AdamState read_adam(std::istream& is, const std::string& source) {
  textio::LineReader in(is, source);
  in.expect_header("ADAM", "1");
  const auto head = in.keyed({"t", "size"});
  AdamState s;
  s.t = textio::parse_int(head[0], in);
  const long long size = textio::parse_int(head[1], in);
  if (s.t < 0 || size < 1) in.error("invalid optimizer header");
  const auto hyper = in.keyed({"lr0", "beta1", "beta2", "eps", "decay"});
  s.lr0 = textio::parse_real(hyper[0], in);
  s.beta1 = textio::parse_real(hyper[1], in);
  s.beta2 = textio::parse_real(hyper[2], in);
  s.eps = textio::parse_real(hyper[3], in);
  s.decay = textio::parse_real(hyper[4], in);
  const auto m = in.reals(static_cast<std::size_t>(size));
  const auto v = in.reals(static_cast<std::size_t>(size));
  s.m = Eigen::Map<const Vector>(m.data(), size);
  s.v = Eigen::Map<const Vector>(v.data(), size);
  if ((s.v.array() < 0.0).any()) in.error("second moments must be nonnegative");
  return s;
}

void save_checkpoint(const std::filesystem::path& path, const GcnModel& model, const AdamState* adam) {
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + path.string() + " for writing");
  write_model(os, model);
  if (adam) write_adam(os, *adam);
  require(static_cast<bool>(os), ErrorCode::Io, "write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + path.string());
  Checkpoint ck{read_model(is, path.string()), std::nullopt};
  is >> std::ws;
  if (!is.eof()) {
    ck.adam = read_adam(is, path.string());
    if (ck.adam->m.size() != ck.model.parameter_count())
      fail(ErrorCode::Format, path.string() + ": optimizer state size does not match the model");
  }
  return ck;
}

}  // namespace cyclematch
