#include "config.hpp"

#include "cyclematch/cyclematch.h"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using cyclematch::cli::ConfigError;
using cyclematch::cli::OptionSet;

namespace {

// Failures of the library or the file system: exit code 2.
struct RuntimeFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad invocations detected after parsing: exit code 1.
struct UsageFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

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

void check(cm_status status) {
  if (status != CM_OK) throw RuntimeFailure(std::string(cm_status_name(status)) + ": " + cm_last_error());
}

std::string real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

void write_text(const fs::path& path, const std::string& text, bool append = false) {
  ensure_parent(path);
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw RuntimeFailure("IoError: cannot open " + path.string() + " for writing");
  os << text;
  if (!os.flush()) throw RuntimeFailure("IoError: write failed: " + path.string());
}

std::string with_extension(const fs::path& path, const char* ext) {
  fs::path p = path;
  return p.replace_extension(ext).string();
}

Text metrics_csv(const cm_metrics_row& row, bool header) {
  char* text = nullptr;
  check(cm_format_metrics_csv(&row, 1, header ? 1 : 0, &text));
  return Text(text);
}

// Options shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

struct Command {
  CLI::App* app = nullptr;
  std::unique_ptr<OptionSet> options;
  Common common;
  std::function<int(const Common&)> run;

  Command(CLI::App& parent, const std::string& name, const std::string& help, std::uint64_t default_seed,
          bool out_required, const std::string& out_help) {
    app = parent.add_subcommand(name, help);
    options = std::make_unique<OptionSet>(app);
    common.seed = default_seed;
    options->add("seed", common.seed, "Random seed (default: $CYCLEMATCH_SEED or 0)");
    app->add_option("--config", common.config, "Config file of 'key = value' lines; flags take precedence");
    auto* out = options->add("out", common.out, out_help);
    if (out_required) out->required();
  }
};

void add_spec_options(OptionSet& o, cm_synth_spec& s) {
  o.add("views", s.views, "Number of views");
  o.add("points", s.points, "Points per view");
  o.add("descriptor-dim", s.descriptor_dim, "Descriptor width");
  o.add("descriptor-noise", s.descriptor_noise_sigma, "Descriptor noise sigma");
  o.add("edge-noise", s.edge_noise_sigma, "Edge weight noise sigma");
  o.add("outliers", s.outlier_rate, "Outlier edge rate");
}

struct TrainOptions {
  cm_train_config config{};
  std::string source = "synthetic";
  bool geometric = false;
  bool groupnorm = true;
  bool zero_init = false;

  void add(OptionSet& o) {
    add_spec_options(o, config.graph);
    o.add("source", source, "Training graphs: synthetic or scene")
        ->check(CLI::IsMember({"synthetic", "scene"}));
    o.add("steps", config.steps, "Optimizer steps");
    o.add("lr0", config.lr0, "Base learning rate");
    o.add("decay", config.decay, "Per-step learning rate decay");
    o.add("lambda-geom", config.lambda_geom, "Weight of the geometric loss");
    o.add("geometric", geometric, "Add the geometric loss (scene source only)");
    o.add("groupnorm", groupnorm, "Group normalization in hidden layers");
    o.add("eval-every", config.eval_every, "Held-out evaluation interval in steps");
    o.add("eval-graphs", config.eval_graphs, "Held-out graphs per evaluation");
    o.add("hidden-dim", config.hidden_dim, "Hidden layer width");
    o.add("groups", config.groups, "Group norm groups");
    o.add("zero-init", zero_init, "Start from all-zero weights");
  }

  cm_train_config resolve(std::uint64_t seed) {
    config.use_geometric = geometric ? 1 : 0;
    config.use_groupnorm = groupnorm ? 1 : 0;
    config.zero_init = zero_init ? 1 : 0;
    config.scene_source = source == "scene" ? 1 : 0;
    config.seed = seed;
    return config;
  }
};

TrainOptions make_train_options() {
  TrainOptions t;
  cm_train_config_default(&t.config);
  t.geometric = t.config.use_geometric != 0;
  t.groupnorm = t.config.use_groupnorm != 0;
  t.zero_init = t.config.zero_init != 0;
  return t;
}

int run_gen(const Common& c, cm_synth_spec spec, bool scene) {
  spec.seed = c.seed;
  const fs::path out = c.out;
  ensure_parent(out);
  cm_graph* graph = nullptr;
  if (scene) {
    cm_scene* s = nullptr;
    check(cm_gen_scene(&spec, &graph, &s));
    Graph g(graph);
    Scene sc(s);
    cm_ground_truth* gt = nullptr;
    check(cm_scene_ground_truth(sc.get(), &gt));
    Truth t(gt);
    check(cm_graph_save(g.get(), out.string().c_str()));
    check(cm_ground_truth_save(t.get(), with_extension(out, ".gtrf").c_str()));
    check(cm_scene_save(sc.get(), with_extension(out, ".scnf").c_str()));
    std::cout << out.string() << ' ' << with_extension(out, ".gtrf") << ' ' << with_extension(out, ".scnf") << '\n';
    return 0;
  }
  cm_ground_truth* gt = nullptr;
  check(cm_gen_graph(&spec, &graph, &gt));
  Graph g(graph);
  Truth t(gt);
  check(cm_graph_save(g.get(), out.string().c_str()));
  check(cm_ground_truth_save(t.get(), with_extension(out, ".gtrf").c_str()));
  std::cout << out.string() << ' ' << with_extension(out, ".gtrf") << '\n';
  return 0;
}

Graph load_graph(const std::string& path) {
  cm_graph* g = nullptr;
  check(cm_graph_load(path.c_str(), &g));
  return Graph(g);
}

Truth load_truth(const std::string& path) {
  cm_ground_truth* t = nullptr;
  check(cm_ground_truth_load(path.c_str(), &t));
  return Truth(t);
}

int run_train(const Common& c, TrainOptions& opts, const std::string& resume, bool timing) {
  const cm_train_config config = opts.resolve(c.seed);
  const fs::path dir = c.out;
  fs::create_directories(dir);
  const auto start = std::chrono::steady_clock::now();
  cm_trainer* raw = nullptr;
  check(resume.empty() ? cm_trainer_create(&config, &raw) : cm_trainer_resume(&config, resume.c_str(), &raw));
  TrainerPtr trainer(raw);
  int64_t done = 0;
  check(cm_trainer_steps_done(trainer.get(), &done));
  if (done > config.steps) throw UsageFailure("checkpoint already has " + std::to_string(done) + " steps");
  while (done < config.steps) {
    const int chunk = static_cast<int>(std::min<int64_t>(config.eval_every, config.steps - done));
    check(cm_trainer_run(trainer.get(), chunk));
    done += chunk;
    std::cout << "step " << done << '/' << config.steps << '\n' << std::flush;
  }
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  char* log = nullptr;
  const fs::path log_path = dir / "train_log.csv";
  const bool append = !resume.empty() && fs::exists(log_path);
  check(cm_trainer_log_csv(trainer.get(), append ? 0 : 1, &log));
  Text log_text(log);
  write_text(log_path, log_text.get(), append);
  check(cm_trainer_save(trainer.get(), (dir / "model.gcnm").string().c_str()));

  cm_metrics m{};
  check(cm_trainer_evaluate(trainer.get(), &m));
  m.runtime_s = timing ? seconds : 0.0;
  const cm_metrics_row row{"gcn", config.graph.views, config.graph.points, config.graph.edge_noise_sigma,
                           config.graph.outlier_rate, config.steps, c.seed, m};
  const Text csv = metrics_csv(row, true);
  write_text(dir / "metrics.csv", csv.get());
  std::cout << csv.get();
  return 0;
}

int run_infer(const Common& c, const std::string& model_path, const std::string& graph_path,
              const std::string& gt_path, bool align) {
  if (align && gt_path.empty()) throw UsageFailure("--align needs --gt");
  cm_model* raw = nullptr;
  check(cm_model_load(model_path.c_str(), &raw));
  Model model(raw);
  const Graph graph = load_graph(graph_path);
  cm_matrix* e = nullptr;
  check(cm_model_infer(model.get(), graph.get(), &e));
  Mat embedding(e);
  if (!gt_path.empty()) {
    const Truth gt = load_truth(gt_path);
    cm_metrics m{};
    check(cm_evaluate_embedding(embedding.get(), gt.get(), &m));
    int views = 0, universe = 0;
    check(cm_ground_truth_info(gt.get(), nullptr, &views, &universe));
    const cm_metrics_row row{"gcn", views, universe, std::nan(""), std::nan(""), 0, c.seed, m};
    std::cout << metrics_csv(row, true).get();
    if (align) {
      cm_matrix* aligned = nullptr;
      int deficient = 0;
      check(cm_procrustes_align(embedding.get(), gt.get(), &aligned, &deficient));
      embedding.reset(aligned);
      if (deficient) std::cerr << "cyclematch: warning: embedding is rank deficient; alignment is not unique\n";
    }
  }
  ensure_parent(c.out);
  check(cm_matrix_save_csv(embedding.get(), c.out.c_str()));
  return 0;
}

int run_baseline(const Common& c, const std::string& method_name, const std::string& graph_path,
                 const std::string& gt_path, int rank, int iters, double param, bool timing) {
  cm_baseline method{};
  if (cm_baseline_parse(method_name.c_str(), &method) != CM_OK) throw UsageFailure(cm_last_error());
  const Graph graph = load_graph(graph_path);
  std::optional<Truth> gt;
  if (!gt_path.empty()) gt = load_truth(gt_path);
  int views = 0;
  check(cm_graph_info(graph.get(), nullptr, &views, nullptr));
  if (rank <= 0) {
    if (!gt) throw UsageFailure("--rank is required without --gt");
    check(cm_ground_truth_info(gt->get(), nullptr, nullptr, &rank));
  }
  cm_matrix* s = nullptr;
  double seconds = 0.0;
  check(cm_run_baseline(graph.get(), method, rank, iters, param, &s, &seconds));
  Mat sim(s);
  ensure_parent(c.out);
  check(cm_similarity_save(graph.get(), sim.get(), c.out.c_str()));
  if (gt) {
    cm_metrics m{};
    check(cm_evaluate_similarity(sim.get(), gt->get(), &m));
    m.runtime_s = timing ? seconds : 0.0;
    const cm_metrics_row row{cm_baseline_name(method), views, rank, std::nan(""), std::nan(""),
                             method == CM_BASELINE_SPECTRAL ? 1 : iters, c.seed, m};
    const Text csv = metrics_csv(row, true);
    write_text(with_extension(c.out, ".csv"), csv.get());
    std::cout << csv.get();
  }
  return 0;
}

int run_eval(const Common& c, const std::string& graph_path, const std::string& gt_path,
             const std::string& embedding, const std::string& similarity) {
  if (embedding.empty() == similarity.empty()) throw UsageFailure("give exactly one of --embedding and --similarity");
  const Truth gt = load_truth(gt_path);
  int views = 0, universe = 0;
  check(cm_ground_truth_info(gt.get(), nullptr, &views, &universe));
  cm_metrics m{};
  std::string method;
  if (!similarity.empty()) {
    cm_matrix* s = nullptr;
    check(cm_similarity_load(similarity.c_str(), &s));
    Mat sim(s);
    check(cm_evaluate_similarity(sim.get(), gt.get(), &m));
    method = "similarity";
  } else {
    cm_matrix* e = nullptr;
    if (embedding == "identity") {
      if (graph_path.empty()) throw UsageFailure("--embedding identity needs --graph");
      const Graph graph = load_graph(graph_path);
      check(cm_graph_features(graph.get(), &e));
      method = "identity";
    } else {
      check(cm_matrix_load_csv(embedding.c_str(), &e));
      method = "embedding";
    }
    Mat emb(e);
    check(cm_evaluate_embedding(emb.get(), gt.get(), &m));
  }
  const cm_metrics_row row{method.c_str(), views, universe, std::nan(""), std::nan(""), 0, c.seed, m};
  const Text csv = metrics_csv(row, true);
  if (!c.out.empty()) write_text(c.out, csv.get());
  std::cout << csv.get();
  return 0;
}

int run_sweep(const Common& c, cm_synth_spec spec, const std::string& method_name, int instances,
              const std::vector<int>& iters, bool timing) {
  cm_baseline method{};
  if (cm_baseline_parse(method_name.c_str(), &method) != CM_OK) throw UsageFailure(cm_last_error());
  spec.seed = c.seed;
  char* csv = nullptr;
  check(cm_sweep(&spec, instances, method, iters.data(), iters.size(), timing ? 1 : 0, &csv));
  const Text text(csv);
  write_text(c.out, text.get());
  std::cout << text.get();
  return 0;
}

int run_ablate(const Common& c, TrainOptions& opts, const std::string& flag, const std::vector<std::uint64_t>& seeds) {
  const cm_train_config base = opts.resolve(c.seed);
  const cm_ablation which = flag == "groupnorm" ? CM_ABLATE_GROUPNORM : CM_ABLATE_GEOMETRIC;
  char* csv = nullptr;
  check(cm_ablate(&base, which, seeds.data(), seeds.size(), &csv));
  const Text text(csv);
  write_text(c.out, text.get());
  std::cout << text.get();
  return 0;
}

int run_gradcheck(const Common& c, cm_gradcheck_config config, const std::string& groupnorm, double tolerance) {
  config.seed = c.seed;
  std::string report = "groupnorm,directions,rejected,parameters,nodes,max_rel_error\n";
  bool ok = true;
  for (int gn : {1, 0}) {
    if ((gn && groupnorm == "off") || (!gn && groupnorm == "on")) continue;
    config.use_groupnorm = gn;
    cm_gradcheck_result r{};
    check(cm_gradcheck(&config, &r, nullptr, 0));
    report += std::string(gn ? "on" : "off") + ',' + std::to_string(r.directions) + ',' + std::to_string(r.rejected) +
              ',' + std::to_string(r.parameters) + ',' + std::to_string(r.nodes) + ',' + real(r.max_rel_error) + '\n';
    ok = ok && r.max_rel_error <= tolerance;
  }
  if (!c.out.empty()) write_text(c.out, report);
  std::cout << report;
  if (!ok) throw RuntimeFailure("ConvergenceFailure: relative error above " + real(tolerance));
  return 0;
}

std::uint64_t env_seed() {
  const char* env = std::getenv("CYCLEMATCH_SEED");
  if (!env) return 0;
  std::uint64_t seed = 0;
  if (!cyclematch::cli::parse_value(env, seed)) throw UsageFailure("CYCLEMATCH_SEED must be an unsigned integer");
  return seed;
}

int usage_error(const CLI::App& app, const std::string& what) {
  std::cerr << "cyclematch: error: " << what << "\n\n";
  const CLI::App* shown = &app;
  for (const CLI::App* sub : app.get_subcommands()) shown = sub;
  std::cerr << shown->help();
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-consistent multi-image matching with graph convolutional embeddings.", "cyclematch"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", cm_version());

  std::uint64_t seed0 = 0;
  try {
    seed0 = env_seed();
  } catch (const UsageFailure& e) {
    return usage_error(app, e.what());
  }

  std::vector<std::unique_ptr<Command>> commands;
  auto command = [&](const std::string& name, const std::string& help, bool out_required, const std::string& out_help) {
    commands.push_back(std::make_unique<Command>(app, name, help, seed0, out_required, out_help));
    return commands.back().get();
  };

  // gen-graph / gen-scene
  cm_synth_spec graph_spec{};
  cm_synth_spec_default(&graph_spec);
  Command* gen_graph = command("gen-graph", "Generate a synthetic correspondence graph with ground truth", true,
                               "Graph file (.cgrf); ground truth goes next to it as .gtrf");
  add_spec_options(*gen_graph->options, graph_spec);
  gen_graph->run = [&](const Common& c) { return run_gen(c, graph_spec, false); };

  cm_synth_spec scene_spec{};
  cm_synth_spec_default(&scene_spec);
  Command* gen_scene = command("gen-scene", "Generate a synthetic multi-view scene and its graph", true,
                               "Graph file (.cgrf); .gtrf and .scnf go next to it");
  add_spec_options(*gen_scene->options, scene_spec);
  gen_scene->run = [&](const Common& c) { return run_gen(c, scene_spec, true); };

  // train
  TrainOptions train_opts = make_train_options();
  std::string resume;
  bool train_timing = false;
  Command* train = command("train", "Train the embedding network", true,
                           "Output directory for model.gcnm, train_log.csv and metrics.csv");
  train_opts.add(*train->options);
  train->options->add("resume", resume, "Continue from a checkpoint");
  train->options->add("timing", train_timing, "Record wall-clock seconds in metrics.csv");
  train->run = [&](const Common& c) { return run_train(c, train_opts, resume, train_timing); };

  // infer
  std::string infer_model, infer_graph, infer_gt;
  bool infer_align = false;
  Command* infer = command("infer", "Embed a graph with a trained model", true, "Embedding CSV file");
  infer->options->add("model", infer_model, "Model checkpoint (.gcnm)")->required();
  infer->options->add("graph", infer_graph, "Input graph (.cgrf)")->required();
  infer->options->add("gt", infer_gt, "Ground truth (.gtrf); prints metrics");
  infer->options->add("align", infer_align, "Rotate the embedding onto the ground truth before writing");
  infer->run = [&](const Common& c) { return run_infer(c, infer_model, infer_graph, infer_gt, infer_align); };

  // baseline
  std::string base_method, base_graph, base_gt;
  int base_rank = 0, base_iters = 50;
  double base_param = 0.0;
  bool base_timing = false;
  Command* baseline = command("baseline", "Run a synchronization baseline", true,
                              "Soft match matrix (.cgrf); metrics go next to it as .csv");
  baseline->options->add("method", base_method, "spectral, matchals or pgdds")->required();
  baseline->options->add("graph", base_graph, "Input graph (.cgrf)")->required();
  baseline->options->add("gt", base_gt, "Ground truth (.gtrf)");
  baseline->options->add("rank", base_rank, "Universe size; 0 takes it from --gt");
  baseline->options->add("iters", base_iters, "Iterations for matchals and pgdds");
  baseline->options->add("param", base_param, "Ridge weight (matchals) or step (pgdds); 0 for the default");
  baseline->options->add("timing", base_timing, "Record wall-clock seconds in the metrics row");
  baseline->run = [&](const Common& c) {
    return run_baseline(c, base_method, base_graph, base_gt, base_rank, base_iters, base_param, base_timing);
  };

  // eval
  std::string eval_graph, eval_gt, eval_embedding, eval_similarity;
  Command* eval = command("eval", "Score an embedding or soft match matrix", false,
                          "Metrics CSV file (also printed)");
  eval->options->add("graph", eval_graph, "Input graph (.cgrf), for --embedding identity");
  eval->options->add("gt", eval_gt, "Ground truth (.gtrf)")->required();
  eval->options->add("embedding", eval_embedding, "Embedding CSV, or 'identity' for the graph's descriptors");
  eval->options->add("similarity", eval_similarity, "Soft match matrix (.cgrf)");
  eval->run = [&](const Common& c) { return run_eval(c, eval_graph, eval_gt, eval_embedding, eval_similarity); };

  // sweep
  cm_synth_spec sweep_spec{};
  cm_synth_spec_default(&sweep_spec);
  sweep_spec.points = 30;
  sweep_spec.outlier_rate = 0.1;
  std::string sweep_method = "matchals";
  int sweep_instances = 20;
  std::vector<int> sweep_iters{15, 25, 50};
  bool sweep_timing = false;
  Command* sweep = command("sweep", "Iteration sweep of a baseline over synthetic instances", true, "Metrics CSV file");
  add_spec_options(*sweep->options, sweep_spec);
  sweep->options->add("method", sweep_method, "spectral, matchals or pgdds");
  sweep->options->add("instances", sweep_instances, "Number of synthetic graphs");
  sweep->options->add("iters", sweep_iters, "Comma-separated iteration counts");
  sweep->options->add("timing", sweep_timing, "Record wall-clock seconds in the runtime column");
  sweep->run = [&](const Common& c) {
    return run_sweep(c, sweep_spec, sweep_method, sweep_instances, sweep_iters, sweep_timing);
  };

  // ablate
  TrainOptions ablate_opts = make_train_options();
  std::string ablate_flag;
  std::vector<std::uint64_t> ablate_seeds{1, 2, 3};
  Command* ablate = command("ablate", "Train with and without one component over several seeds", true,
                            "Ablation CSV file");
  ablate_opts.add(*ablate->options);
  ablate->options->add("flag", ablate_flag, "Component to flip: groupnorm or geometric")
      ->required()
      ->check(CLI::IsMember({"groupnorm", "geometric"}));
  ablate->options->add("seeds", ablate_seeds, "Comma-separated training seeds");
  ablate->run = [&](const Common& c) { return run_ablate(c, ablate_opts, ablate_flag, ablate_seeds); };

  // gradcheck
  cm_gradcheck_config gc{};
  cm_gradcheck_config_default(&gc);
  std::string gc_groupnorm = "both";
  double gc_tolerance = 1e-4;
  Command* gradcheck = command("gradcheck", "Finite-difference check of the model gradient", false,
                               "Report CSV file (also printed)");
  gradcheck->options->add("views", gc.views, "Number of views");
  gradcheck->options->add("points", gc.points, "Points per view");
  gradcheck->options->add("directions", gc.directions, "Accepted random directions");
  gradcheck->options->add("step", gc.step, "Central difference step");
  gradcheck->options->add("lambda-geom", gc.lambda_geom, "Weight of the geometric loss");
  gradcheck->options->add("hidden-dim", gc.hidden_dim, "Hidden layer width");
  gradcheck->options->add("groups", gc.groups, "Group norm groups");
  gradcheck->options->add("groupnorm", gc_groupnorm, "on, off or both")->check(CLI::IsMember({"on", "off", "both"}));
  gradcheck->options->add("tolerance", gc_tolerance, "Largest accepted relative error");
  gradcheck->run = [&](const Common& c) { return run_gradcheck(c, gc, gc_groupnorm, gc_tolerance); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* shown = &app;
    for (const CLI::App* sub : app.get_subcommands()) shown = sub;
    std::cout << shown->help();
    return 0;
  } catch (const CLI::CallForVersion&) {
    std::cout << cm_version() << '\n';
    return 0;
  } catch (const CLI::ParseError& e) {
    return usage_error(app, e.what());
  }

  for (auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      if (!cmd->common.config.empty())
        cmd->options->apply(cyclematch::cli::load_config(cmd->common.config), cmd->common.config);
      return cmd->run(cmd->common);
    } catch (const ConfigError& e) {
      return usage_error(app, e.what());
    } catch (const UsageFailure& e) {
      return usage_error(app, e.what());
    } catch (const std::exception& e) {
      std::cerr << "cyclematch: " << e.what() << '\n';
      return 2;
    }
  }
  return usage_error(app, "no subcommand");
}
