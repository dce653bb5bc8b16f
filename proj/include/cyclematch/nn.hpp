#pragma once

#include "cyclematch/graph.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace cyclematch {

inline constexpr double kGroupNormEps = 1e-5;

/// One graph convolution: Z = Ltilde * E_in * W, then per-node group
/// normalization with learned scale/shift, then ReLU. The last layer of a
/// model skips both normalization and activation.
struct GcnLayer {
  Matrix W;
  Vector gn_scale;
  Vector gn_shift;
  int groups = 1;

  Eigen::Index in_dim() const { return W.rows(); }
  Eigen::Index out_dim() const { return W.cols(); }
};

struct ModelDims {
  int input_dim = 0;
  int hidden_dim = 64;
  int output_dim = 0;
  int groups = 4;
  bool use_groupnorm = true;

  void validate() const;  // SpecError
};

/// Twelve stacked graph convolutions. The network input E0 is concatenated to
/// the running activation in front of layers 6 and 12; the output rows are
/// scaled to unit length so E E^T holds cosine similarities.
struct GcnModel {
  static constexpr int kLayers = 12;
  static constexpr std::array<int, 2> kSkipAt = {6, 12};  // 1-based layer indices

  ModelDims dims;
  std::vector<GcnLayer> layers;

  static bool takes_skip(int layer_index);  // 0-based
  Eigen::Index parameter_count() const;
};

/// Layers 1..11 use hidden_dim outputs, layer 12 outputs output_dim; the widths
/// account for the skip concatenations.
int layer_input_dim(const ModelDims& dims, int layer_index);
int layer_output_dim(const ModelDims& dims, int layer_index);

/// Weights uniform in +-sqrt(6 / (fan_in + fan_out)), scale 1, shift 0.
GcnModel init_model(const ModelDims& dims, std::uint64_t seed);
GcnModel zero_model(const ModelDims& dims);

/// Group normalization of one feature vector.
Vector group_norm(const Vector& x, int groups, const Vector& scale, const Vector& shift,
                  double eps = kGroupNormEps);

struct LayerOptions {
  bool group_norm = true;
  bool activation = true;
};

struct LayerCache {
  Matrix input;       // E_in
  Matrix propagated;  // Ltilde * E_in
  Matrix normalized;  // group-normalized Z before scale/shift
  Matrix inv_std;     // n x groups
  Matrix output;
  LayerOptions options;
};

Matrix layer_forward(const GcnLayer& layer, const Matrix& ltilde, const Matrix& input,
                     const LayerOptions& options, LayerCache* cache = nullptr);

struct ForwardCache {
  std::vector<LayerCache> layers;
  Matrix raw;        // final layer output before row normalization
  Vector row_norms;
  Matrix embedding;
  Eigen::Index nodes = 0;
  Eigen::Index input_dim = 0;
};

/// Returns the n x output_dim embedding with unit rows (zero rows stay zero).
Matrix model_forward(const GcnModel& model, const Matrix& ltilde, const Matrix& e0,
                     ForwardCache* cache = nullptr);

/// Parameter gradients; same layout as the model's layers.
struct ModelGrads {
  std::vector<GcnLayer> layers;
};

/// Backpropagates dLoss/dEmbedding through the cached forward pass. Throws
/// StaleCache when the cache does not belong to this model and input.
ModelGrads model_backward(const GcnModel& model, const Matrix& ltilde, const ForwardCache& cache,
                          const Matrix& grad_embedding);

// Flat parameter order: per layer, W row-major, then gn_scale, then gn_shift.
Vector flatten_params(const GcnModel& model);
Vector flatten_grads(const ModelGrads& grads);
void assign_params(GcnModel& model, const Vector& flat);

/// Adam with bias correction and a per-step exponential rate decay.
struct AdamState {
  Vector m;
  Vector v;
  std::int64_t t = 0;
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double decay = 0.9999;

  /// lr0 * decay^t: the rate the next step uses.
  double rate() const;
};

AdamState make_adam(Eigen::Index parameter_count, double lr0, double decay);
void adam_step(AdamState& state, Vector& params, const Vector& grads);

// GCNM checkpoint, optionally followed by an ADAM block.
void write_model(std::ostream& os, const GcnModel& model);
GcnModel read_model(std::istream& is, const std::string& source = "<stream>");
void write_adam(std::ostream& os, const AdamState& state);
AdamState read_adam(std::istream& is, const std::string& source = "<stream>");

struct Checkpoint {
  GcnModel model;
  std::optional<AdamState> adam;
};
void save_checkpoint(const std::filesystem::path& path, const GcnModel& model,
                     const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cyclematch
