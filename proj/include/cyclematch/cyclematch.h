#ifndef CYCLEMATCH_CYCLEMATCH_H
#define CYCLEMATCH_CYCLEMATCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define CM_API __declspec(dllexport)
#else
#define CM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call returning cm_status records a message readable
   through cm_last_error() on the calling thread when it fails. */
typedef enum cm_status {
  CM_OK = 0,
  CM_E_INVALID_ARGUMENT = 1,
  CM_E_FORMAT = 2,
  CM_E_DIMENSION_MISMATCH = 3,
  CM_E_ZERO_DEGREE_NODE = 4,
  CM_E_DEGENERATE_BASELINE = 5,
  CM_E_CONVERGENCE_FAILURE = 6,
  CM_E_SINGULAR_SYSTEM = 7,
  CM_E_SINKHORN_NO_CONVERGE = 8,
  CM_E_NON_FINITE_LOSS = 9,
  CM_E_STALE_CACHE = 10,
  CM_E_SPEC = 11,
  CM_E_IO = 12,
  CM_E_INTERNAL = 100
} cm_status;

CM_API const char* cm_status_name(cm_status status);
CM_API const char* cm_last_error(void);
CM_API const char* cm_version(void);

/* Opaque handles. Each has a matching *_free that accepts NULL. */
typedef struct cm_graph cm_graph;
typedef struct cm_ground_truth cm_ground_truth;
typedef struct cm_scene cm_scene;
typedef struct cm_matrix cm_matrix;
typedef struct cm_model cm_model;
typedef struct cm_trainer cm_trainer;

CM_API void cm_graph_free(cm_graph* graph);
CM_API void cm_ground_truth_free(cm_ground_truth* gt);
CM_API void cm_scene_free(cm_scene* scene);
CM_API void cm_matrix_free(cm_matrix* matrix);
CM_API void cm_model_free(cm_model* model);
CM_API void cm_trainer_free(cm_trainer* trainer);
/* Releases text returned through a char** out parameter. */
CM_API void cm_string_free(char* text);

/* Dense matrices, row-major copies. */
CM_API cm_status cm_matrix_create(int64_t rows, int64_t cols, const double* row_major, cm_matrix** out);
CM_API cm_status cm_matrix_shape(const cm_matrix* m, int64_t* rows, int64_t* cols);
CM_API cm_status cm_matrix_get(const cm_matrix* m, int64_t row, int64_t col, double* value);
CM_API cm_status cm_matrix_copy_data(const cm_matrix* m, double* row_major, size_t capacity);
/* Comma-separated rows without a header, 17 significant digits. */
CM_API cm_status cm_matrix_save_csv(const cm_matrix* m, const char* path);
CM_API cm_status cm_matrix_load_csv(const char* path, cm_matrix** out);

/* Synthetic generation. */
typedef struct cm_synth_spec {
  int views;
  int points;
  int descriptor_dim;
  double descriptor_noise_sigma;
  double edge_noise_sigma;
  double outlier_rate;
  uint64_t seed;
} cm_synth_spec;

CM_API void cm_synth_spec_default(cm_synth_spec* spec);
CM_API cm_status cm_gen_graph(const cm_synth_spec* spec, cm_graph** graph, cm_ground_truth** gt);
CM_API cm_status cm_gen_scene(const cm_synth_spec* spec, cm_graph** graph, cm_scene** scene);
CM_API cm_status cm_scene_ground_truth(const cm_scene* scene, cm_ground_truth** gt);

/* Graphs (CGRF), ground truth (GTRF) and scenes (SCNF). */
CM_API cm_status cm_graph_load(const char* path, cm_graph** out);
CM_API cm_status cm_graph_save(const cm_graph* graph, const char* path);
CM_API cm_status cm_graph_info(const cm_graph* graph, int64_t* nodes, int* views, int* feature_dim);
CM_API cm_status cm_graph_adjacency(const cm_graph* graph, cm_matrix** out);
CM_API cm_status cm_graph_features(const cm_graph* graph, cm_matrix** out);
/* Writes `similarity` as an adjacency-only CGRF over the graph's views. The
   stored matrix is symmetrized, clamped to [0, 1] and zero within views. */
CM_API cm_status cm_similarity_save(const cm_graph* graph, const cm_matrix* similarity, const char* path);
CM_API cm_status cm_similarity_load(const char* path, cm_matrix** out);

CM_API cm_status cm_ground_truth_load(const char* path, cm_ground_truth** out);
CM_API cm_status cm_ground_truth_save(const cm_ground_truth* gt, const char* path);
CM_API cm_status cm_ground_truth_info(const cm_ground_truth* gt, int64_t* nodes, int* views, int* universe_dim);
/* The n x universe_dim one-hot assignment X with X X^T the true adjacency. */
CM_API cm_status cm_ground_truth_embedding(const cm_ground_truth* gt, cm_matrix** out);
CM_API cm_status cm_scene_load(const char* path, cm_scene** out);
CM_API cm_status cm_scene_save(const cm_scene* scene, const char* path);

/* Baselines. `param` is the ridge weight for matchals and the step for
   pgdds; a value <= 0 selects the default. Spectral ignores iters. */
typedef enum cm_baseline { CM_BASELINE_SPECTRAL = 0, CM_BASELINE_MATCHALS = 1, CM_BASELINE_PGDDS = 2 } cm_baseline;

CM_API cm_status cm_baseline_parse(const char* name, cm_baseline* out);
CM_API const char* cm_baseline_name(cm_baseline method);
CM_API cm_status cm_run_baseline(const cm_graph* graph, cm_baseline method, int rank, int iters, double param,
                                 cm_matrix** similarity, double* seconds);

/* Evaluation. */
typedef struct cm_metrics {
  double l1;
  double l2;
  double runtime_s;
  double same_mean;
  double same_std;
  double diff_mean;
  double diff_std;
} cm_metrics;

/* S restricted to cross-view entries against the truth. */
CM_API cm_status cm_evaluate_similarity(const cm_matrix* similarity, const cm_ground_truth* gt, cm_metrics* out);
/* Rows are scaled to unit length first; zero rows stay zero. */
CM_API cm_status cm_evaluate_embedding(const cm_matrix* embedding, const cm_ground_truth* gt, cm_metrics* out);

typedef struct cm_metrics_row {
  const char* method;
  int views;
  int points;
  double noise;
  double outliers;
  int iters;
  uint64_t seed;
  cm_metrics metrics;
} cm_metrics_row;

CM_API cm_status cm_format_metrics_csv(const cm_metrics_row* rows, size_t count, int header, char** text);

/* Orthogonal Procrustes: embedding * Q closest to the ground-truth X. */
CM_API cm_status cm_procrustes_align(const cm_matrix* embedding, const cm_ground_truth* gt, cm_matrix** aligned,
                                     int* rank_deficient);

/* Iteration sweep over `instances` graphs with seeds derived from spec->seed.
   Returns the metrics CSV with a header. With timing 0 the runtime column is
   written as 0 so the output depends on the inputs alone. */
CM_API cm_status cm_sweep(const cm_synth_spec* spec, int instances, cm_baseline method, const int* iters,
                          size_t iters_count, int timing, char** csv);

/* Training. */
typedef struct cm_train_config {
  int steps;
  double lr0;
  double decay;
  double lambda_geom;
  int use_geometric;
  int use_groupnorm;
  int eval_every;
  int eval_graphs;
  uint64_t seed;
  int scene_source; /* 0: descriptor graphs, 1: multi-view scenes */
  cm_synth_spec graph;
  int hidden_dim;
  int groups;
  int zero_init;
} cm_train_config;

CM_API void cm_train_config_default(cm_train_config* config);
CM_API cm_status cm_trainer_create(const cm_train_config* config, cm_trainer** out);
CM_API cm_status cm_trainer_resume(const cm_train_config* config, const char* checkpoint, cm_trainer** out);
CM_API cm_status cm_trainer_run(cm_trainer* trainer, int steps);
CM_API cm_status cm_trainer_steps_done(const cm_trainer* trainer, int64_t* steps);
/* Log rows accumulated by this handle. */
CM_API cm_status cm_trainer_log_csv(const cm_trainer* trainer, int header, char** csv);
CM_API cm_status cm_trainer_evaluate(const cm_trainer* trainer, cm_metrics* out);
CM_API cm_status cm_trainer_save(const cm_trainer* trainer, const char* path);
CM_API cm_status cm_trainer_model(const cm_trainer* trainer, cm_model** out);

CM_API cm_status cm_model_load(const char* path, cm_model** out);
CM_API cm_status cm_model_save(const cm_model* model, const char* path);
CM_API cm_status cm_model_infer(const cm_model* model, const cm_graph* graph, cm_matrix** embedding);

/* Ablation: the base configuration against a copy with one flag flipped,
   trained once per seed. Returns the ablation CSV. */
typedef enum cm_ablation { CM_ABLATE_GROUPNORM = 0, CM_ABLATE_GEOMETRIC = 1 } cm_ablation;

CM_API cm_status cm_ablate(const cm_train_config* base, cm_ablation flag, const uint64_t* seeds, size_t seed_count,
                           char** csv);

/* Directional finite-difference check of the full model gradient. */
typedef struct cm_gradcheck_config {
  int views;
  int points;
  int directions;
  double step;
  int use_groupnorm;
  double lambda_geom;
  int hidden_dim;
  int groups;
  uint64_t seed;
} cm_gradcheck_config;

typedef struct cm_gradcheck_result {
  int directions;
  int rejected;
  double max_rel_error;
  int64_t parameters;
  int64_t nodes;
} cm_gradcheck_result;

CM_API void cm_gradcheck_config_default(cm_gradcheck_config* config);
/* Optional per-direction output: up to `capacity` triples of
   (analytic, numeric, relative error). */
CM_API cm_status cm_gradcheck(const cm_gradcheck_config* config, cm_gradcheck_result* result, double* triples,
                              size_t capacity);

#ifdef __cplusplus
}
#endif

#endif
