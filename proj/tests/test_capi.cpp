#include "cyclematch/cyclematch.h"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Graph = std::unique_ptr<cm_graph, Deleter<cm_graph, cm_graph_free>>;
using Truth = std::unique_ptr<cm_ground_truth, Deleter<cm_ground_truth, cm_ground_truth_free>>;
using Scene = std::unique_ptr<cm_scene, Deleter<cm_scene, cm_scene_free>>;
using Mat = std::unique_ptr<cm_matrix, Deleter<cm_matrix, cm_matrix_free>>;
using Model = std::unique_ptr<cm_model, Deleter<cm_model, cm_model_free>>;
using TrainerPtr = std::unique_ptr<cm_trainer, Deleter<cm_trainer, cm_trainer_free>>;
using Text = std::unique_ptr<char, Deleter<char, cm_string_free>>;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "cyclematch_test_capi";
  fs::create_directories(dir);
  return dir / name;
}

std::vector<double> data_of(const cm_matrix* m, int64_t& rows, int64_t& cols) {
  REQUIRE(cm_matrix_shape(m, &rows, &cols) == CM_OK);
  std::vector<double> v(static_cast<size_t>(rows * cols));
  REQUIRE(cm_matrix_copy_data(m, v.data(), v.size()) == CM_OK);
  return v;
}

struct Instance {
  Graph graph;
  Truth gt;
};

Instance noiseless(int views, int points, uint64_t seed) {
  cm_synth_spec spec;
  cm_synth_spec_default(&spec);
  spec.views = views;
  spec.points = points;
  spec.seed = seed;
  cm_graph* g = nullptr;
  cm_ground_truth* t = nullptr;
  REQUIRE(cm_gen_graph(&spec, &g, &t) == CM_OK);
  return {Graph(g), Truth(t)};
}

int line_count(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

// Returns column `index` of every data row of a CSV text.
std::vector<std::string> column(const std::string& csv, int index) {
  std::istringstream is(csv);
  std::string line;
  std::getline(is, line);
  std::vector<std::string> out;
  while (std::getline(is, line)) {
    std::istringstream ls(line);
    std::string cell;
    for (int k = 0; k <= index; ++k) std::getline(ls, cell, ',');
    out.push_back(cell);
  }
  return out;
}

cm_train_config tiny_training() {
  cm_train_config c;
  cm_train_config_default(&c);
  c.steps = 4;
  c.eval_every = 2;
  c.eval_graphs = 2;
  c.hidden_dim = 16;
  c.groups = 4;
  c.graph.views = 3;
  c.graph.points = 6;
  c.graph.descriptor_dim = 8;
  c.seed = 5;
  return c;
}

}  // namespace

TEST_CASE("status codes and last error") {
  CHECK(std::string(cm_status_name(CM_OK)) == "Ok");
  CHECK(std::string(cm_status_name(CM_E_FORMAT)) == "FormatError");
  CHECK(std::string(cm_status_name(CM_E_SINKHORN_NO_CONVERGE)) == "SinkhornNoConverge");
  CHECK(std::string(cm_status_name(CM_E_INTERNAL)) == "InternalError");

  cm_graph* g = nullptr;
  CHECK(cm_graph_load(nullptr, &g) == CM_E_INVALID_ARGUMENT);
  CHECK(std::string(cm_last_error()).find("null") != std::string::npos);
  CHECK(g == nullptr);
  CHECK(cm_graph_load(scratch("missing.cgrf").c_str(), &g) == CM_E_IO);

  std::ofstream(scratch("bad.cgrf")) << "not a graph\n";
  CHECK(cm_graph_load(scratch("bad.cgrf").c_str(), &g) == CM_E_FORMAT);
  CHECK(std::string(cm_last_error()).find(":1") != std::string::npos);

  cm_matrix* m = nullptr;
  CHECK(cm_matrix_create(1, 1, nullptr, &m) == CM_E_INVALID_ARGUMENT);
  const double one = 1.0;
  CHECK(cm_matrix_create(1, 1, &one, &m) == CM_OK);
  CHECK(std::string(cm_last_error()).empty());
  cm_matrix_free(m);

  cm_graph_free(nullptr);
  cm_matrix_free(nullptr);
  cm_string_free(nullptr);
}

TEST_CASE("matrices round trip through CSV bit for bit") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal;
  std::vector<double> v(7 * 3);
  for (auto& x : v) x = normal(rng);
  v[4] = 1.0 / 3.0;
  cm_matrix* raw = nullptr;
  REQUIRE(cm_matrix_create(7, 3, v.data(), &raw) == CM_OK);
  Mat m(raw);
  double x = 0.0;
  CHECK(cm_matrix_get(m.get(), 1, 1, &x) == CM_OK);
  CHECK(x == v[4]);
  CHECK(cm_matrix_get(m.get(), 7, 0, &x) == CM_E_INVALID_ARGUMENT);

  const auto path = scratch("m.csv");
  REQUIRE(cm_matrix_save_csv(m.get(), path.c_str()) == CM_OK);
  REQUIRE(cm_matrix_load_csv(path.c_str(), &raw) == CM_OK);
  Mat back(raw);
  int64_t r = 0, c = 0;
  CHECK(data_of(back.get(), r, c) == v);
  CHECK(r == 7);
  CHECK(c == 3);

  std::vector<double> small(2);
  CHECK(cm_matrix_copy_data(m.get(), small.data(), small.size()) == CM_E_INVALID_ARGUMENT);

  std::ofstream(scratch("ragged.csv")) << "1,2\n3\n";
  CHECK(cm_matrix_load_csv(scratch("ragged.csv").c_str(), &raw) == CM_E_FORMAT);
  CHECK(std::string(cm_last_error()).find(":2") != std::string::npos);
}

TEST_CASE("generated graphs, ground truth and scenes") {
  Instance inst = noiseless(3, 10, 1);
  int64_t nodes = 0;
  int views = 0, width = 0, universe = 0;
  REQUIRE(cm_graph_info(inst.graph.get(), &nodes, &views, &width) == CM_OK);
  CHECK(nodes == 30);
  CHECK(views == 3);
  CHECK(width == 16);
  REQUIRE(cm_ground_truth_info(inst.gt.get(), &nodes, &views, &universe) == CM_OK);
  CHECK(nodes == 30);
  CHECK(universe == 10);

  // Noiseless graphs carry the true adjacency: X X^T off the diagonal.
  cm_matrix* raw = nullptr;
  REQUIRE(cm_graph_adjacency(inst.graph.get(), &raw) == CM_OK);
  Mat a(raw);
  REQUIRE(cm_ground_truth_embedding(inst.gt.get(), &raw) == CM_OK);
  Mat x(raw);
  int64_t ar = 0, ac = 0, xr = 0, xc = 0;
  const auto av = data_of(a.get(), ar, ac);
  const auto xv = data_of(x.get(), xr, xc);
  for (int64_t i = 0; i < ar; ++i)
    for (int64_t j = 0; j < ac; ++j) {
      if (i == j) continue;
      double dot = 0.0;
      for (int64_t k = 0; k < xc; ++k) dot += xv[i * xc + k] * xv[j * xc + k];
      CHECK(av[i * ac + j] == dot);
    }

  const auto gpath = scratch("g.cgrf");
  const auto tpath = scratch("g.gtrf");
  REQUIRE(cm_graph_save(inst.graph.get(), gpath.c_str()) == CM_OK);
  REQUIRE(cm_ground_truth_save(inst.gt.get(), tpath.c_str()) == CM_OK);
  cm_graph* g2 = nullptr;
  REQUIRE(cm_graph_load(gpath.c_str(), &g2) == CM_OK);
  Graph loaded(g2);
  REQUIRE(cm_graph_adjacency(loaded.get(), &raw) == CM_OK);
  Mat a2(raw);
  CHECK(data_of(a2.get(), ar, ac) == av);

  cm_synth_spec spec;
  cm_synth_spec_default(&spec);
  spec.points = 8;
  spec.seed = 2;
  cm_graph* sg = nullptr;
  cm_scene* sc = nullptr;
  REQUIRE(cm_gen_scene(&spec, &sg, &sc) == CM_OK);
  Graph scene_graph(sg);
  Scene scene(sc);
  cm_ground_truth* st = nullptr;
  REQUIRE(cm_scene_ground_truth(scene.get(), &st) == CM_OK);
  Truth scene_gt(st);
  REQUIRE(cm_ground_truth_info(scene_gt.get(), &nodes, nullptr, &universe) == CM_OK);
  CHECK(nodes == 24);
  CHECK(universe == 8);
  const auto spath = scratch("s.scnf");
  REQUIRE(cm_scene_save(scene.get(), spath.c_str()) == CM_OK);
  REQUIRE(cm_scene_load(spath.c_str(), &sc) == CM_OK);
  cm_scene_free(sc);

  spec.views = 0;
  CHECK(cm_gen_graph(&spec, &sg, &st) == CM_E_SPEC);
}

TEST_CASE("evaluation of ideal embeddings and similarities") {
  Instance inst = noiseless(3, 10, 3);
  cm_matrix* raw = nullptr;
  REQUIRE(cm_ground_truth_embedding(inst.gt.get(), &raw) == CM_OK);
  Mat x(raw);
  cm_metrics m{};
  REQUIRE(cm_evaluate_embedding(x.get(), inst.gt.get(), &m) == CM_OK);
  CHECK(m.l1 == 0.0);
  CHECK(m.same_mean == 1.0);
  CHECK(m.diff_mean == 0.0);

  // Scaling rows does not change the score.
  int64_t r = 0, c = 0;
  auto v = data_of(x.get(), r, c);
  for (int64_t i = 0; i < r; ++i)
    for (int64_t k = 0; k < c; ++k) v[i * c + k] *= 2.0 + static_cast<double>(i);
  REQUIRE(cm_matrix_create(r, c, v.data(), &raw) == CM_OK);
  Mat scaled(raw);
  cm_metrics ms{};
  REQUIRE(cm_evaluate_embedding(scaled.get(), inst.gt.get(), &ms) == CM_OK);
  CHECK(ms.l1 == 0.0);

  REQUIRE(cm_graph_adjacency(inst.graph.get(), &raw) == CM_OK);
  Mat a(raw);
  REQUIRE(cm_evaluate_similarity(a.get(), inst.gt.get(), &m) == CM_OK);
  CHECK(m.l1 == 0.0);
  CHECK(m.l2 == 0.0);

  REQUIRE(cm_graph_features(inst.graph.get(), &raw) == CM_OK);
  Mat f(raw);
  CHECK(cm_evaluate_similarity(f.get(), inst.gt.get(), &m) == CM_E_DIMENSION_MISMATCH);

  const cm_metrics_row row{"identity", 3, 10, 0.0, 0.1, 0, 9, m};
  char* text = nullptr;
  REQUIRE(cm_format_metrics_csv(&row, 1, 1, &text) == CM_OK);
  const std::string csv = text;
  cm_string_free(text);
  CHECK(csv.rfind("method,views,points,noise,outliers,iters,seed,l1,l2,runtime_s,", 0) == 0);
  CHECK(csv.find("\nidentity,3,10,0,0.10000000000000001,0,9,0,0,") != std::string::npos);
  REQUIRE(cm_format_metrics_csv(&row, 1, 0, &text) == CM_OK);
  CHECK(std::string(text).rfind("identity,", 0) == 0);
  cm_string_free(text);
}

TEST_CASE("procrustes recovers a rotated assignment") {
  Instance inst = noiseless(3, 6, 4);
  cm_matrix* raw = nullptr;
  REQUIRE(cm_ground_truth_embedding(inst.gt.get(), &raw) == CM_OK);
  Mat x(raw);
  int64_t n = 0, d = 0;
  const auto xv = data_of(x.get(), n, d);
  // Rotation in the (0, 1) plane.
  const double t = 0.7;
  std::vector<double> rotated = xv;
  for (int64_t i = 0; i < n; ++i) {
    rotated[i * d] = std::cos(t) * xv[i * d] - std::sin(t) * xv[i * d + 1];
    rotated[i * d + 1] = std::sin(t) * xv[i * d] + std::cos(t) * xv[i * d + 1];
  }
  REQUIRE(cm_matrix_create(n, d, rotated.data(), &raw) == CM_OK);
  Mat e(raw);
  int deficient = -1;
  REQUIRE(cm_procrustes_align(e.get(), inst.gt.get(), &raw, &deficient) == CM_OK);
  Mat aligned(raw);
  CHECK(deficient == 0);
  const auto av = data_of(aligned.get(), n, d);
  double worst = 0.0;
  for (size_t k = 0; k < av.size(); ++k) worst = std::max(worst, std::abs(av[k] - xv[k]));
  CHECK(worst < 1e-10);
}

TEST_CASE("baselines through the C API") {
  Instance inst = noiseless(4, 10, 5);
  cm_baseline method{};
  REQUIRE(cm_baseline_parse("spectral", &method) == CM_OK);
  CHECK(method == CM_BASELINE_SPECTRAL);
  CHECK(cm_baseline_parse("sinkhorn", &method) == CM_E_INVALID_ARGUMENT);
  CHECK(std::string(cm_baseline_name(CM_BASELINE_PGDDS)) == "pgdds");

  cm_matrix* raw = nullptr;
  double seconds = -1.0;
  REQUIRE(cm_run_baseline(inst.graph.get(), CM_BASELINE_SPECTRAL, 10, 0, 0.0, &raw, &seconds) == CM_OK);
  Mat s(raw);
  CHECK(seconds >= 0.0);
  cm_metrics m{};
  REQUIRE(cm_evaluate_similarity(s.get(), inst.gt.get(), &m) == CM_OK);
  CHECK(m.l1 <= 1e-6);

  // The adjacency-only file is clamped to [0, 1] and reloads as the same matrix.
  const auto path = scratch("spectral.cgrf");
  REQUIRE(cm_similarity_save(inst.graph.get(), s.get(), path.c_str()) == CM_OK);
  REQUIRE(cm_similarity_load(path.c_str(), &raw) == CM_OK);
  Mat back(raw);
  int64_t r = 0, c = 0;
  const auto sv = data_of(s.get(), r, c);
  const auto bv = data_of(back.get(), r, c);
  double worst = 0.0;
  for (size_t k = 0; k < sv.size(); ++k)
    worst = std::max(worst, std::abs(std::min(1.0, std::max(0.0, sv[k])) - bv[k]));
  CHECK(worst <= 1e-6);
  cm_graph* g = nullptr;
  REQUIRE(cm_graph_load(path.c_str(), &g) == CM_OK);
  int width = -1;
  CHECK(cm_graph_info(g, nullptr, nullptr, &width) == CM_OK);
  CHECK(width == 0);
  cm_graph_free(g);

  REQUIRE(cm_run_baseline(inst.graph.get(), CM_BASELINE_PGDDS, 10, 15, 0.0, &raw, nullptr) == CM_OK);
  Mat p(raw);
  REQUIRE(cm_evaluate_similarity(p.get(), inst.gt.get(), &m) == CM_OK);
  CHECK(m.l1 <= 1e-2);
  REQUIRE(cm_run_baseline(inst.graph.get(), CM_BASELINE_MATCHALS, 10, 5, 0.0, &raw, nullptr) == CM_OK);
  cm_matrix_free(raw);
  CHECK(cm_run_baseline(inst.graph.get(), CM_BASELINE_MATCHALS, 10, 0, 0.0, &raw, nullptr) ==
        CM_E_INVALID_ARGUMENT);
}

TEST_CASE("sweep output is deterministic without timing") {
  cm_synth_spec spec;
  cm_synth_spec_default(&spec);
  spec.points = 8;
  spec.outlier_rate = 0.1;
  spec.seed = 11;
  const int iters[] = {5, 10};
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(cm_sweep(&spec, 3, CM_BASELINE_MATCHALS, iters, 2, 0, &a) == CM_OK);
  REQUIRE(cm_sweep(&spec, 3, CM_BASELINE_MATCHALS, iters, 2, 0, &b) == CM_OK);
  const std::string sa = a, sb = b;
  cm_string_free(a);
  cm_string_free(b);
  CHECK(sa == sb);
  CHECK(line_count(sa) == 1 + 3 * 2);
  for (const auto& cell : column(sa, 9)) CHECK(cell == "0");
  const auto seeds = column(sa, 6);
  CHECK(seeds[0] == seeds[1]);
  CHECK(seeds[0] != seeds[2]);

  REQUIRE(cm_sweep(&spec, 2, CM_BASELINE_SPECTRAL, iters, 1, 0, &a) == CM_OK);
  CHECK(line_count(a) == 3);
  cm_string_free(a);
  CHECK(cm_sweep(&spec, 0, CM_BASELINE_PGDDS, iters, 2, 0, &a) == CM_E_INVALID_ARGUMENT);
}

TEST_CASE("training, checkpoints and inference") {
  const cm_train_config config = tiny_training();
  cm_trainer* raw = nullptr;
  REQUIRE(cm_trainer_create(&config, &raw) == CM_OK);
  TrainerPtr trainer(raw);
  REQUIRE(cm_trainer_run(trainer.get(), 3) == CM_OK);
  int64_t done = 0;
  REQUIRE(cm_trainer_steps_done(trainer.get(), &done) == CM_OK);
  CHECK(done == 3);
  char* log = nullptr;
  REQUIRE(cm_trainer_log_csv(trainer.get(), 1, &log) == CM_OK);
  CHECK(line_count(log) == 4);
  CHECK(std::string(log).rfind("step,loss,", 0) == 0);
  cm_string_free(log);

  const auto ckpt = scratch("model.gcnm");
  REQUIRE(cm_trainer_save(trainer.get(), ckpt.c_str()) == CM_OK);
  REQUIRE(cm_trainer_run(trainer.get(), 1) == CM_OK);
  REQUIRE(cm_trainer_resume(&config, ckpt.c_str(), &raw) == CM_OK);
  TrainerPtr resumed(raw);
  REQUIRE(cm_trainer_run(resumed.get(), 1) == CM_OK);
  char* a = nullptr;
  char* b = nullptr;
  REQUIRE(cm_trainer_log_csv(trainer.get(), 0, &a) == CM_OK);
  REQUIRE(cm_trainer_log_csv(resumed.get(), 0, &b) == CM_OK);
  // The resumed handle's only row equals the fourth row of the original.
  const std::string sa = a;
  cm_string_free(a);
  CHECK(sa.substr(sa.size() - std::string(b).size()) == b);
  cm_string_free(b);

  cm_metrics m{};
  REQUIRE(cm_trainer_evaluate(trainer.get(), &m) == CM_OK);
  CHECK(m.l1 >= 0.0);

  cm_model* model_raw = nullptr;
  REQUIRE(cm_model_load(ckpt.c_str(), &model_raw) == CM_OK);
  Model model(model_raw);
  cm_synth_spec spec = config.graph;
  spec.seed = 99;
  cm_graph* g = nullptr;
  cm_ground_truth* t = nullptr;
  REQUIRE(cm_gen_graph(&spec, &g, &t) == CM_OK);
  Graph graph(g);
  Truth gt(t);
  cm_matrix* e = nullptr;
  REQUIRE(cm_model_infer(model.get(), graph.get(), &e) == CM_OK);
  Mat embedding(e);
  int64_t rows = 0, cols = 0;
  const auto ev = data_of(embedding.get(), rows, cols);
  CHECK(rows == 18);
  CHECK(cols == 6);
  for (int64_t i = 0; i < rows; ++i) {
    double norm = 0.0;
    for (int64_t k = 0; k < cols; ++k) norm += ev[i * cols + k] * ev[i * cols + k];
    CHECK(std::abs(norm - 1.0) < 1e-12);
  }

  cm_synth_spec wide = spec;
  wide.descriptor_dim = 4;
  REQUIRE(cm_gen_graph(&wide, &g, &t) == CM_OK);
  Graph other(g);
  Truth other_gt(t);
  CHECK(cm_model_infer(model.get(), other.get(), &e) == CM_E_DIMENSION_MISMATCH);

  cm_train_config bad = config;
  bad.steps = 0;
  CHECK(cm_trainer_create(&bad, &raw) == CM_E_SPEC);
  bad = config;
  bad.lr0 = 1e300;
  REQUIRE(cm_trainer_create(&bad, &raw) == CM_OK);
  TrainerPtr diverging(raw);
  CHECK(cm_trainer_run(diverging.get(), 5) == CM_E_NON_FINITE_LOSS);
}

TEST_CASE("ablation CSV") {
  cm_train_config config = tiny_training();
  config.steps = 2;
  config.eval_every = 2;
  const uint64_t seeds[] = {1, 2};
  char* csv = nullptr;
  REQUIRE(cm_ablate(&config, CM_ABLATE_GROUPNORM, seeds, 2, &csv) == CM_OK);
  const std::string s = csv;
  cm_string_free(csv);
  CHECK(line_count(s) == 3);
  CHECK(s.find("\ngroupnorm=on,2,") != std::string::npos);
  CHECK(s.find("\ngroupnorm=off,2,") != std::string::npos);
  CHECK(cm_ablate(&config, CM_ABLATE_GROUPNORM, seeds, 0, &csv) == CM_E_INVALID_ARGUMENT);
}

TEST_CASE("gradcheck through the C API") {
  cm_gradcheck_config config;
  cm_gradcheck_config_default(&config);
  config.seed = 7;
  std::vector<double> triples(3 * 20);
  cm_gradcheck_result r{};
  REQUIRE(cm_gradcheck(&config, &r, triples.data(), 20) == CM_OK);
  CHECK(r.directions == 20);
  CHECK(r.nodes == 18);
  CHECK(r.max_rel_error <= 1e-4);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const double a = triples[3 * k], n = triples[3 * k + 1];
    const double rel = std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-12});
    CHECK(std::abs(rel - triples[3 * k + 2]) <= 1e-15);
    worst = std::max(worst, rel);
  }
  CHECK(worst == r.max_rel_error);

  config.directions = 0;
  CHECK(cm_gradcheck(&config, &r, nullptr, 0) == CM_E_SPEC);
}
