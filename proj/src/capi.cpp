#include "cyclematch/cyclematch.h"

#include "cyclematch/baselines.hpp"
#include "cyclematch/error.hpp"
#include "cyclematch/eval.hpp"
#include "cyclematch/gradcheck.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/text_io.hpp"
#include "cyclematch/train.hpp"

#include <cstdlib>
#include <cstring>
#include <algorithm>
#include <fstream>
#include <functional>
#include <new>
#include <sstream>
#include <string>
#include <vector>

using namespace cyclematch;

struct cm_graph {
  CorrespondenceGraph graph;
};
struct cm_ground_truth {
  GroundTruth gt;
};
struct cm_scene {
  MultiViewScene scene;
};
struct cm_matrix {
  Matrix m;
};
struct cm_model {
  GcnModel model;
};
struct cm_trainer {
  Trainer trainer;
  std::vector<TrainLogRow> log;
};

namespace {

constexpr std::uint64_t kSweepStream = 31;

thread_local std::string g_last_error;

cm_status record(cm_status status, const std::string& what) {
  g_last_error = what;
  return status;
}

// Runs `fn` and maps library exceptions onto status codes.
template <class F>
cm_status guard(F&& fn) {
  try {
    fn();
    g_last_error.clear();
    return CM_OK;
  } catch (const Error& e) {
    return record(static_cast<cm_status>(static_cast<int>(e.code())), e.what());
  } catch (const std::bad_alloc&) {
    return record(CM_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return record(CM_E_INTERNAL, e.what());
  } catch (...) {
    return record(CM_E_INTERNAL, "unknown failure");
  }
}

void need(const void* p, const char* what) {
  require(p != nullptr, ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* copy_text(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

SynthGraphSpec to_spec(const cm_synth_spec& s) {
  SynthGraphSpec out;
  out.views = s.views;
  out.points = s.points;
  out.descriptor_dim = s.descriptor_dim;
  out.descriptor_noise_sigma = s.descriptor_noise_sigma;
  out.edge_noise_sigma = s.edge_noise_sigma;
  out.outlier_rate = s.outlier_rate;
  out.seed = s.seed;
  return out;
}

cm_synth_spec from_spec(const SynthGraphSpec& s) {
  return cm_synth_spec{s.views, s.points, s.descriptor_dim, s.descriptor_noise_sigma, s.edge_noise_sigma,
                       s.outlier_rate, s.seed};
}

TrainConfig to_train(const cm_train_config& c) {
  TrainConfig out;
  out.steps = c.steps;
  out.lr0 = c.lr0;
  out.decay = c.decay;
  out.lambda_geom = c.lambda_geom;
  out.use_geometric = c.use_geometric != 0;
  out.use_groupnorm = c.use_groupnorm != 0;
  out.eval_every = c.eval_every;
  out.eval_graphs = c.eval_graphs;
  out.seed = c.seed;
  out.source = c.scene_source ? GraphSource::Scene : GraphSource::Synthetic;
  out.graph = to_spec(c.graph);
  out.hidden_dim = c.hidden_dim;
  out.groups = c.groups;
  out.zero_init = c.zero_init != 0;
  return out;
}

cm_metrics to_metrics(const ErrorReport& e, const SimilarityStats& s) {
  return cm_metrics{e.l1, e.l2, e.runtime_s, s.same_mean, s.same_std, s.diff_mean, s.diff_std};
}

MetricsRow to_row(const cm_metrics_row& r) {
  MetricsRow out;
  out.method = r.method ? r.method : "";
  out.views = r.views;
  out.points = r.points;
  out.noise = r.noise;
  out.outliers = r.outliers;
  out.iters = r.iters;
  out.seed = r.seed;
  out.error = ErrorReport{r.metrics.l1, r.metrics.l2, r.metrics.runtime_s};
  out.stats = SimilarityStats{r.metrics.same_mean, r.metrics.same_std, r.metrics.diff_mean, r.metrics.diff_std};
  return out;
}

void write_file(const char* path, const std::string& what, const std::function<void(std::ostream&)>& body) {
  need(path, "path");
  std::ofstream os(path);
  require(static_cast<bool>(os), ErrorCode::Io, "cannot open " + std::string(path) + " for writing " + what);
  body(os);
  os.flush();
  require(static_cast<bool>(os), ErrorCode::Io, "write failed: " + std::string(path));
}

Matrix read_csv_matrix(const char* path) {
  need(path, "path");
  std::ifstream is(path);
  require(static_cast<bool>(is), ErrorCode::Io, "cannot open " + std::string(path));
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      require(end != cell.c_str() && *end == '\0', ErrorCode::Format,
              std::string(path) + ":" + std::to_string(lineno) + ": not a number: '" + cell + "'");
      row.push_back(v);
    }
    require(rows.empty() || row.size() == rows.front().size(), ErrorCode::Format,
            std::string(path) + ":" + std::to_string(lineno) + ": ragged row");
    rows.push_back(std::move(row));
  }
  require(!rows.empty(), ErrorCode::Format, std::string(path) + ": empty matrix");
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  return m;
}

SoftMatchMatrix run_method(const CorrespondenceGraph& g, cm_baseline method, int rank, int iters, double param) {
  switch (method) {
    case CM_BASELINE_SPECTRAL: return spectral(g.adjacency(), rank);
    case CM_BASELINE_MATCHALS: return matchals(g.adjacency(), rank, iters, param > 0.0 ? param : 1e-2);
    case CM_BASELINE_PGDDS: return pgdds(g.adjacency(), rank, g.view_of(), iters, param);
  }
  fail(ErrorCode::InvalidArgument, "unknown baseline method");
}

}  // namespace

extern "C" {

const char* cm_status_name(cm_status status) {
  if (status == CM_OK) return "Ok";
  if (status == CM_E_INTERNAL) return "InternalError";
  if (status >= CM_E_INVALID_ARGUMENT && status <= CM_E_IO) return error_code_name(static_cast<ErrorCode>(status));
  return "Unknown";
}

const char* cm_last_error(void) { return g_last_error.c_str(); }
const char* cm_version(void) { return "0.1.0"; }

void cm_graph_free(cm_graph* graph) { delete graph; }
void cm_ground_truth_free(cm_ground_truth* gt) { delete gt; }
void cm_scene_free(cm_scene* scene) { delete scene; }
void cm_matrix_free(cm_matrix* matrix) { delete matrix; }
void cm_model_free(cm_model* model) { delete model; }
void cm_trainer_free(cm_trainer* trainer) { delete trainer; }
void cm_string_free(char* text) { std::free(text); }

cm_status cm_matrix_create(int64_t rows, int64_t cols, const double* row_major, cm_matrix** out) {
  return guard([&] {
    need(out, "out");
    require(rows >= 0 && cols >= 0, ErrorCode::InvalidArgument, "cm_matrix_create: negative shape");
    require(row_major || rows * cols == 0, ErrorCode::InvalidArgument, "cm_matrix_create: data is null");
    Matrix m(rows, cols);
    for (int64_t i = 0; i < rows; ++i)
      for (int64_t j = 0; j < cols; ++j) m(i, j) = row_major[i * cols + j];
    *out = new cm_matrix{std::move(m)};
  });
}

cm_status cm_matrix_shape(const cm_matrix* m, int64_t* rows, int64_t* cols) {
  return guard([&] {
    need(m, "matrix");
    if (rows) *rows = m->m.rows();
    if (cols) *cols = m->m.cols();
  });
}

cm_status cm_matrix_get(const cm_matrix* m, int64_t row, int64_t col, double* value) {
  return guard([&] {
    need(m, "matrix");
    need(value, "value");
    require(row >= 0 && row < m->m.rows() && col >= 0 && col < m->m.cols(), ErrorCode::InvalidArgument,
            "cm_matrix_get: index out of range");
    *value = m->m(row, col);
  });
}

cm_status cm_matrix_copy_data(const cm_matrix* m, double* row_major, size_t capacity) {
  return guard([&] {
    need(m, "matrix");
    need(row_major, "buffer");
    require(capacity >= static_cast<size_t>(m->m.size()), ErrorCode::InvalidArgument,
            "cm_matrix_copy_data: buffer too small");
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(row_major, m->m.rows(),
                                                                                        m->m.cols()) = m->m;
  });
}

cm_status cm_matrix_save_csv(const cm_matrix* m, const char* path) {
  return guard([&] {
    need(m, "matrix");
    write_file(path, "matrix", [&](std::ostream& os) {
      for (Eigen::Index i = 0; i < m->m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m->m.cols(); ++j) os << (j ? "," : "") << textio::format_real(m->m(i, j));
        os << '\n';
      }
    });
  });
}

cm_status cm_matrix_load_csv(const char* path, cm_matrix** out) {
  return guard([&] {
    need(out, "out");
    *out = new cm_matrix{read_csv_matrix(path)};
  });
}

void cm_synth_spec_default(cm_synth_spec* spec) {
  if (spec) *spec = from_spec(SynthGraphSpec{});
}

cm_status cm_gen_graph(const cm_synth_spec* spec, cm_graph** graph, cm_ground_truth** gt) {
  return guard([&] {
    need(spec, "spec");
    need(graph, "graph");
    need(gt, "gt");
    SynthGraph g = gen_graph(to_spec(*spec));
    auto* gh = new cm_graph{std::move(g.graph)};
    *gt = new cm_ground_truth{std::move(g.gt)};
    *graph = gh;
  });
}

cm_status cm_gen_scene(const cm_synth_spec* spec, cm_graph** graph, cm_scene** scene) {
  return guard([&] {
    need(spec, "spec");
    need(graph, "graph");
    need(scene, "scene");
    SynthScene s = gen_scene(to_spec(*spec));
    auto* gh = new cm_graph{std::move(s.graph)};
    *scene = new cm_scene{std::move(s.scene)};
    *graph = gh;
  });
}

cm_status cm_scene_ground_truth(const cm_scene* scene, cm_ground_truth** gt) {
  return guard([&] {
    need(scene, "scene");
    need(gt, "gt");
    *gt = new cm_ground_truth{scene->scene.gt};
  });
}

cm_status cm_graph_load(const char* path, cm_graph** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_graph{load_graph(path)};
  });
}

cm_status cm_graph_save(const cm_graph* graph, const char* path) {
  return guard([&] {
    need(graph, "graph");
    need(path, "path");
    save_graph(graph->graph, path);
  });
}

cm_status cm_graph_info(const cm_graph* graph, int64_t* nodes, int* views, int* feature_dim) {
  return guard([&] {
    need(graph, "graph");
    if (nodes) *nodes = graph->graph.node_count();
    if (views) *views = graph->graph.view_count();
    if (feature_dim) *feature_dim = graph->graph.feature_dim();
  });
}

cm_status cm_graph_adjacency(const cm_graph* graph, cm_matrix** out) {
  return guard([&] {
    need(graph, "graph");
    need(out, "out");
    *out = new cm_matrix{graph->graph.adjacency()};
  });
}

cm_status cm_graph_features(const cm_graph* graph, cm_matrix** out) {
  return guard([&] {
    need(graph, "graph");
    need(out, "out");
    *out = new cm_matrix{graph->graph.features()};
  });
}

cm_status cm_similarity_save(const cm_graph* graph, const cm_matrix* similarity, const char* path) {
  return guard([&] {
    need(graph, "graph");
    need(similarity, "similarity");
    need(path, "path");
    const auto& g = graph->graph;
    Matrix sym = (0.5 * (similarity->m + similarity->m.transpose())).cwiseMax(0.0).cwiseMin(1.0);
    require(sym.rows() == g.node_count() && sym.cols() == g.node_count(), ErrorCode::DimensionMismatch,
            "similarity does not match the graph's node count");
    const auto s = CorrespondenceGraph::create(g.view_count(), g.view_of(),
                                               restrict_cross_view(std::move(sym), g.view_of()),
                                               Matrix(g.node_count(), 0));
    save_graph(s, path);
  });
}

cm_status cm_similarity_load(const char* path, cm_matrix** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_matrix{load_graph(path).adjacency()};
  });
}

cm_status cm_ground_truth_load(const char* path, cm_ground_truth** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_ground_truth{load_ground_truth(path)};
  });
}

cm_status cm_ground_truth_save(const cm_ground_truth* gt, const char* path) {
  return guard([&] {
    need(gt, "gt");
    need(path, "path");
    save_ground_truth(gt->gt, path);
  });
}

cm_status cm_ground_truth_info(const cm_ground_truth* gt, int64_t* nodes, int* views, int* universe_dim) {
  return guard([&] {
    need(gt, "gt");
    int v = 0;
    for (int b : gt->gt.view_of) v = std::max(v, b + 1);
    if (nodes) *nodes = static_cast<int64_t>(gt->gt.view_of.size());
    if (views) *views = v;
    if (universe_dim) *universe_dim = gt->gt.universe_dim;
  });
}

cm_status cm_ground_truth_embedding(const cm_ground_truth* gt, cm_matrix** out) {
  return guard([&] {
    need(gt, "gt");
    need(out, "out");
    *out = new cm_matrix{gt->gt.X};
  });
}

cm_status cm_scene_load(const char* path, cm_scene** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_scene{load_scene(path)};
  });
}

cm_status cm_scene_save(const cm_scene* scene, const char* path) {
  return guard([&] {
    need(scene, "scene");
    need(path, "path");
    save_scene(scene->scene, path);
  });
}

cm_status cm_baseline_parse(const char* name, cm_baseline* out) {
  return guard([&] {
    need(name, "name");
    need(out, "out");
    const std::string n = name;
    if (n == "spectral") *out = CM_BASELINE_SPECTRAL;
    else if (n == "matchals") *out = CM_BASELINE_MATCHALS;
    else if (n == "pgdds") *out = CM_BASELINE_PGDDS;
    else fail(ErrorCode::InvalidArgument, "unknown baseline method '" + n + "'");
  });
}

const char* cm_baseline_name(cm_baseline method) {
  switch (method) {
    case CM_BASELINE_SPECTRAL: return "spectral";
    case CM_BASELINE_MATCHALS: return "matchals";
    case CM_BASELINE_PGDDS: return "pgdds";
  }
  return "unknown";
}

cm_status cm_run_baseline(const cm_graph* graph, cm_baseline method, int rank, int iters, double param,
                          cm_matrix** similarity, double* seconds) {
  return guard([&] {
    need(graph, "graph");
    need(similarity, "similarity");
    SoftMatchMatrix r = run_method(graph->graph, method, rank, iters, param);
    if (seconds) *seconds = r.seconds;
    *similarity = new cm_matrix{std::move(r.S)};
  });
}

cm_status cm_evaluate_similarity(const cm_matrix* similarity, const cm_ground_truth* gt, cm_metrics* out) {
  return guard([&] {
    need(similarity, "similarity");
    need(gt, "gt");
    need(out, "out");
    const Matrix s = restrict_cross_view(similarity->m, gt->gt.view_of);
    *out = to_metrics(error_report(s, gt->gt.adjacency), similarity_stats(s, gt->gt));
  });
}

cm_status cm_evaluate_embedding(const cm_matrix* embedding, const cm_ground_truth* gt, cm_metrics* out) {
  return guard([&] {
    need(embedding, "embedding");
    need(gt, "gt");
    need(out, "out");
    Matrix e = embedding->m;
    require(e.rows() == static_cast<Eigen::Index>(gt->gt.view_of.size()), ErrorCode::DimensionMismatch,
            "embedding has " + std::to_string(e.rows()) + " rows, ground truth has " +
                std::to_string(gt->gt.view_of.size()) + " nodes");
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      const double n = e.row(i).norm();
      if (n > 0.0) e.row(i) /= n;
    }
    const Matrix s = embedding_similarity(e, gt->gt.view_of);
    *out = to_metrics(error_report(s, gt->gt.adjacency), embedding_similarity_stats(e, gt->gt));
  });
}

cm_status cm_format_metrics_csv(const cm_metrics_row* rows, size_t count, int header, char** text) {
  return guard([&] {
    need(text, "text");
    require(rows || count == 0, ErrorCode::InvalidArgument, "rows is null");
    std::vector<MetricsRow> out;
    for (size_t k = 0; k < count; ++k) out.push_back(to_row(rows[k]));
    std::ostringstream os;
    write_metrics_csv(os, out);
    std::string s = os.str();
    if (!header) s.erase(0, s.find('\n') + 1);
    *text = copy_text(s);
  });
}

cm_status cm_procrustes_align(const cm_matrix* embedding, const cm_ground_truth* gt, cm_matrix** aligned,
                              int* rank_deficient) {
  return guard([&] {
    need(embedding, "embedding");
    need(gt, "gt");
    need(aligned, "aligned");
    const Alignment a = procrustes_align(embedding->m, gt->gt.X);
    if (rank_deficient) *rank_deficient = a.rank_deficient ? 1 : 0;
    *aligned = new cm_matrix{embedding->m * a.Q};
  });
}

cm_status cm_sweep(const cm_synth_spec* spec, int instances, cm_baseline method, const int* iters,
                   size_t iters_count, int timing, char** csv) {
  return guard([&] {
    need(spec, "spec");
    need(csv, "csv");
    require(instances >= 1, ErrorCode::InvalidArgument, "cm_sweep: instances must be positive");
    require(iters && iters_count > 0, ErrorCode::InvalidArgument, "cm_sweep: no iteration counts");
    const std::vector<int> counts(iters, iters + iters_count);
    std::vector<MetricsRow> rows;
    for (int k = 0; k < instances; ++k) {
      SynthGraphSpec s = to_spec(*spec);
      s.seed = derive_seed(spec->seed, kSweepStream, static_cast<std::uint64_t>(k));
      const SynthGraph g = gen_graph(s);
      if (method == CM_BASELINE_SPECTRAL) {
        const SoftMatchMatrix r = spectral(g.graph.adjacency(), g.gt.universe_dim);
        const Matrix sim = restrict_cross_view(r.S, g.graph.view_of());
        MetricsRow row;
        row.method = r.method;
        row.views = s.views;
        row.points = s.points;
        row.noise = s.edge_noise_sigma;
        row.outliers = s.outlier_rate;
        row.iters = r.iterations;
        row.seed = s.seed;
        row.error = error_report(sim, g.gt.adjacency, r.seconds);
        row.stats = similarity_stats(sim, g.gt);
        rows.push_back(row);
      } else {
        const SweepMethod m = method == CM_BASELINE_MATCHALS ? SweepMethod::MatchAls : SweepMethod::Pgdds;
        for (auto& row : sweep_iterations(m, SweepInstance{&g.graph, &g.gt, s}, counts)) rows.push_back(row);
      }
    }
    if (!timing)
      for (auto& r : rows) r.error.runtime_s = 0.0;
    std::ostringstream os;
    write_metrics_csv(os, rows);
    *csv = copy_text(os.str());
  });
}

void cm_train_config_default(cm_train_config* config) {
  if (!config) return;
  const TrainConfig c;
  *config = cm_train_config{c.steps,
                            c.lr0,
                            c.decay,
                            c.lambda_geom,
                            c.use_geometric ? 1 : 0,
                            c.use_groupnorm ? 1 : 0,
                            c.eval_every,
                            c.eval_graphs,
                            c.seed,
                            c.source == GraphSource::Scene ? 1 : 0,
                            from_spec(c.graph),
                            c.hidden_dim,
                            c.groups,
                            c.zero_init ? 1 : 0};
}

cm_status cm_trainer_create(const cm_train_config* config, cm_trainer** out) {
  return guard([&] {
    need(config, "config");
    need(out, "out");
    *out = new cm_trainer{Trainer(to_train(*config)), {}};
  });
}

cm_status cm_trainer_resume(const cm_train_config* config, const char* checkpoint, cm_trainer** out) {
  return guard([&] {
    need(config, "config");
    need(checkpoint, "checkpoint");
    need(out, "out");
    *out = new cm_trainer{Trainer::resume(to_train(*config), checkpoint), {}};
  });
}

cm_status cm_trainer_run(cm_trainer* trainer, int steps) {
  return guard([&] {
    need(trainer, "trainer");
    require(steps >= 0, ErrorCode::InvalidArgument, "cm_trainer_run: negative step count");
    // Rows are kept one at a time so a failing step still leaves the log of
    // the steps before it.
    for (int k = 0; k < steps; ++k) trainer->log.push_back(trainer->trainer.step());
  });
}

cm_status cm_trainer_steps_done(const cm_trainer* trainer, int64_t* steps) {
  return guard([&] {
    need(trainer, "trainer");
    need(steps, "steps");
    *steps = trainer->trainer.steps_done();
  });
}

cm_status cm_trainer_log_csv(const cm_trainer* trainer, int header, char** csv) {
  return guard([&] {
    need(trainer, "trainer");
    need(csv, "csv");
    std::ostringstream os;
    write_train_log(os, trainer->log, header != 0);
    *csv = copy_text(os.str());
  });
}

cm_status cm_trainer_evaluate(const cm_trainer* trainer, cm_metrics* out) {
  return guard([&] {
    need(trainer, "trainer");
    need(out, "out");
    const HeldOutEval e = trainer->trainer.evaluate();
    *out = to_metrics(e.error, e.stats);
  });
}

cm_status cm_trainer_save(const cm_trainer* trainer, const char* path) {
  return guard([&] {
    need(trainer, "trainer");
    need(path, "path");
    trainer->trainer.save_checkpoint(path);
  });
}

cm_status cm_trainer_model(const cm_trainer* trainer, cm_model** out) {
  return guard([&] {
    need(trainer, "trainer");
    need(out, "out");
    *out = new cm_model{trainer->trainer.model()};
  });
}

cm_status cm_model_load(const char* path, cm_model** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new cm_model{load_checkpoint(path).model};
  });
}

cm_status cm_model_save(const cm_model* model, const char* path) {
  return guard([&] {
    need(model, "model");
    need(path, "path");
    save_checkpoint(path, model->model);
  });
}

cm_status cm_model_infer(const cm_model* model, const cm_graph* graph, cm_matrix** embedding) {
  return guard([&] {
    need(model, "model");
    need(graph, "graph");
    need(embedding, "embedding");
    const auto& g = graph->graph;
    require(g.feature_dim() == model->model.dims.input_dim, ErrorCode::DimensionMismatch,
            "graph features have width " + std::to_string(g.feature_dim()) + ", model expects " +
                std::to_string(model->model.dims.input_dim));
    *embedding = new cm_matrix{model_forward(model->model, augmented_operator(g), g.features())};
  });
}

cm_status cm_ablate(const cm_train_config* base, cm_ablation flag, const uint64_t* seeds, size_t seed_count,
                    char** csv) {
  return guard([&] {
    need(base, "base");
    need(csv, "csv");
    require(seeds && seed_count > 0, ErrorCode::InvalidArgument, "cm_ablate: no seeds");
    const TrainConfig on = to_train(*base);
    TrainConfig off = on;
    std::string name;
    bool value = false;
    if (flag == CM_ABLATE_GROUPNORM) {
      name = "groupnorm";
      value = on.use_groupnorm;
      off.use_groupnorm = !value;
    } else if (flag == CM_ABLATE_GEOMETRIC) {
      name = "geometric";
      value = on.use_geometric;
      off.use_geometric = !value;
    } else {
      fail(ErrorCode::InvalidArgument, "cm_ablate: unknown flag");
    }
    auto label = [&](bool v) { return name + (v ? "=on" : "=off"); };
    const auto rows = ablate({{label(value), on}, {label(!value), off}}, std::vector<std::uint64_t>(seeds, seeds + seed_count));
    std::ostringstream os;
    write_ablation_csv(os, rows);
    *csv = copy_text(os.str());
  });
}

void cm_gradcheck_config_default(cm_gradcheck_config* config) {
  if (!config) return;
  const GradCheckConfig c;
  *config = cm_gradcheck_config{c.views,       c.points,     c.directions, c.step, c.use_groupnorm ? 1 : 0,
                                c.lambda_geom, c.hidden_dim, c.groups,     c.seed};
}

cm_status cm_gradcheck(const cm_gradcheck_config* config, cm_gradcheck_result* result, double* triples,
                       size_t capacity) {
  return guard([&] {
    need(config, "config");
    need(result, "result");
    GradCheckConfig c;
    c.views = config->views;
    c.points = config->points;
    c.directions = config->directions;
    c.step = config->step;
    c.use_groupnorm = config->use_groupnorm != 0;
    c.lambda_geom = config->lambda_geom;
    c.hidden_dim = config->hidden_dim;
    c.groups = config->groups;
    c.seed = config->seed;
    const GradCheckReport r = gradcheck(c);
    *result = cm_gradcheck_result{static_cast<int>(r.directions.size()), r.rejected, r.max_rel_error,
                                  static_cast<int64_t>(r.parameters), static_cast<int64_t>(r.nodes)};
    if (triples)
      for (size_t k = 0; k < r.directions.size() && k < capacity; ++k) {
        triples[3 * k] = r.directions[k].analytic;
        triples[3 * k + 1] = r.directions[k].numeric;
        triples[3 * k + 2] = r.directions[k].rel_error;
      }
  });
}

}  // extern "C"
