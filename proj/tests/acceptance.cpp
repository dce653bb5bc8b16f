// Prints one PASS/FAIL line per acceptance criterion. With arguments, runs
// only the listed criteria (e.g. `acceptance 1 4 7`).

#include "cyclematch/baselines.hpp"
#include "cyclematch/eval.hpp"
#include "cyclematch/geometry.hpp"
#include "cyclematch/gradcheck.hpp"
#include "cyclematch/losses.hpp"
#include "cyclematch/rng.hpp"
#include "cyclematch/train.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cyclematch;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double mean(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / v.size(); }

Matrix row_normalized(Matrix m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (n > 0.0) m.row(i) /= n;
  }
  return m;
}

// 3 views, p = 30, 10% outliers; seeds disjoint from the unit tests.
std::vector<SynthGraph> ordering_instances() {
  std::vector<SynthGraph> out;
  for (std::uint64_t k = 0; k < 20; ++k) {
    SynthGraphSpec spec;
    spec.views = 3;
    spec.points = 30;
    spec.outlier_rate = 0.1;
    spec.seed = derive_seed(20240, 1, k);
    out.push_back(gen_graph(spec));
  }
  return out;
}

double cross_view_l1(const Matrix& s, const GroundTruth& gt) {
  return error_report(restrict_cross_view(s, gt.view_of), gt.adjacency).l1;
}

Outcome gradients() {
  double worst = 0.0;
  int rejected = 0;
  const double seconds = time_method([&] {
    for (bool gn : {true, false}) {
      GradCheckConfig c;
      c.use_groupnorm = gn;
      c.directions = 20;
      c.seed = 7;
      const GradCheckReport r = gradcheck(c);
      worst = std::max(worst, r.max_rel_error);
      rejected += r.rejected;
    }
  });
  return {worst <= 1e-4 && seconds < 10.0,
          fmt("max rel err %.3g (tol 1e-4) over 2x20 directions, %d kink-rejected; %.1f s (< 10 s)", worst, rejected,
              seconds)};
}

HeldOutEval train_synthetic(int views, double outliers, int steps) {
  TrainConfig c;
  c.steps = steps;
  c.graph.views = views;
  c.graph.points = 10;
  c.graph.outlier_rate = outliers;
  c.eval_every = steps;
  c.eval_graphs = 8;
  c.seed = 1;
  Trainer t(c);
  t.run(steps);
  return t.evaluate();
}

Outcome table1() {
  const auto t0 = std::chrono::steady_clock::now();
  const HeldOutEval a = train_synthetic(3, 0.0, 4000);
  const HeldOutEval b = train_synthetic(5, 0.0, 4000);
  const HeldOutEval c = train_synthetic(3, 0.1, 4000);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  const bool pass = a.stats.same_mean >= 0.95 && a.stats.diff_mean <= 0.20 && b.stats.same_mean >= 0.97 &&
                    c.stats.same_mean >= 0.85;
  return {pass, fmt("3v same %.4f (>= 0.95) diff %.4f (<= 0.20); 5v same %.4f (>= 0.97); 3v+10%% outliers same %.4f "
                    "(>= 0.85); %.1f min total",
                    a.stats.same_mean, a.stats.diff_mean, b.stats.same_mean, c.stats.same_mean, minutes)};
}

Outcome descriptor_baseline() {
  std::vector<double> same, diff;
  for (std::uint64_t k = 0; k < 10; ++k) {
    SynthGraphSpec spec;
    spec.points = 30;
    spec.seed = derive_seed(20241, 1, k);
    const SynthGraph g = gen_graph(spec);
    const SimilarityStats s = embedding_similarity_stats(row_normalized(g.graph.features()), g.gt);
    same.push_back(s.same_mean);
    diff.push_back(s.diff_mean);
  }
  const double sm = mean(same), dm = mean(diff);
  return {sm >= 0.35 && sm <= 0.65 && dm >= 0.05 && dm <= 0.45,
          fmt("same %.4f in [0.35,0.65], diff %.4f in [0.05,0.45] (10 graphs, 3 views, p=30)", sm, dm)};
}

Outcome spectral_exactness() {
  double worst = 0.0;
  const double seconds = time_method([&] {
    for (int views : {3, 4, 5})
      for (int p : {10, 30}) {
        SynthGraphSpec spec;
        spec.views = views;
        spec.points = p;
        spec.seed = derive_seed(20242, views, p);
        const SynthGraph g = gen_graph(spec);
        worst = std::max(worst, cross_view_l1(spectral(g.graph.adjacency(), p).S, g.gt));
      }
  });
  return {worst <= 1e-6 && seconds < 10.0,
          fmt("max L1 %.3g (<= 1e-6) over views {3,4,5} x p {10,30}; %.2f s (< 10 s)", worst, seconds)};
}

Outcome baseline_ordering(const std::vector<SynthGraph>& inst) {
  std::vector<double> pg50, ma50, ma15, sp;
  const double seconds = time_method([&] {
    for (const SynthGraph& g : inst) {
      const Matrix& a = g.graph.adjacency();
      pg50.push_back(cross_view_l1(pgdds(a, 30, g.gt.view_of, 50).S, g.gt));
      ma50.push_back(cross_view_l1(matchals(a, 30, 50).S, g.gt));
      ma15.push_back(cross_view_l1(matchals(a, 30, 15).S, g.gt));
      sp.push_back(cross_view_l1(spectral(a, 30).S, g.gt));
    }
  });
  const double p = mean(pg50), m = mean(ma50), m15 = mean(ma15), s = mean(sp);
  return {p <= m && m <= s && m <= m15 && seconds < 300.0,
          fmt("pgdds@50 %.5f <= matchals@50 %.5f [%s] <= spectral %.5f [%s]; matchals@50 <= matchals@15 %.5f [%s]; "
              "%.1f s (< 300 s)",
              p, m, p <= m ? "ok" : "violated", s, m <= s ? "ok" : "violated", m15, m <= m15 ? "ok" : "violated",
              seconds)};
}

Outcome runtime_ordering(const std::vector<SynthGraph>& inst) {
  TrainConfig c;
  c.steps = 200;
  c.graph.points = 30;
  c.graph.outlier_rate = 0.1;
  c.eval_every = 200;
  c.eval_graphs = 1;
  c.seed = 3;
  const GcnModel model = train(c).model;
  std::vector<double> gcn, pg;
  for (const SynthGraph& g : inst) {
    gcn.push_back(time_method([&] {
      const Matrix e = model_forward(model, augmented_operator(g.graph), g.graph.features());
      if (e.rows() != g.graph.node_count()) std::abort();
    }));
    pg.push_back(time_method([&] { pgdds(g.graph.adjacency(), 30, g.gt.view_of, 50); }));
  }
  const double ratio = mean(pg) / mean(gcn);
  return {ratio >= 5.0, fmt("gcn forward %.5f s, pgdds@50 %.5f s, speedup %.1fx (>= 5x)", mean(gcn), mean(pg), ratio)};
}

Outcome rotation_invariance() {
  Philox rng(derive_seed(20243, 0, 0));
  double loss_gap = 0.0, entry_gap = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    SynthGraphSpec spec;
    spec.points = 12;
    spec.outlier_rate = 0.1;
    spec.seed = derive_seed(20243, 1, trial);
    const SynthScene s = gen_scene(spec);
    const Matrix g = build_prior(s.scene, s.graph).G;
    const Eigen::Index n = s.graph.node_count();
    Matrix e(n, 12), r(12, 12);
    for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < r.size(); ++i) r.data()[i] = rng.normal();
    e = row_normalized(e);
    const Matrix q = Eigen::HouseholderQR<Matrix>(r).householderQ();
    const Matrix eq = e * q;
    const double l0 = combined_loss(s.graph.adjacency(), &g, e, {}).total;
    const double l1 = combined_loss(s.graph.adjacency(), &g, eq, {}).total;
    loss_gap = std::max(loss_gap, std::abs(l1 - l0));
    entry_gap = std::max(entry_gap, (eq * eq.transpose() - e * e.transpose()).cwiseAbs().maxCoeff());
  }
  return {loss_gap <= 1e-10 && entry_gap <= 1e-10,
          fmt("max |dloss| %.3g, max |d(EE^T)| %.3g (both <= 1e-10) over 20 rotations", loss_gap, entry_gap)};
}

Outcome epipolar_prior() {
  double true_max = 0.0;
  std::vector<double> false_vals;
  const double seconds = time_method([&] {
    Philox rng(derive_seed(20244, 0, 0));
    for (std::uint64_t k = 0; k < 10; ++k) {
      SynthGraphSpec spec;
      spec.points = 30;
      spec.descriptor_noise_sigma = 0.0;
      spec.seed = derive_seed(20244, 1, k);
      const SynthScene s = gen_scene(spec);
      const Matrix r = epipolar_residual_matrix(s.scene, s.graph);
      const auto& view = s.graph.view_of();
      const Matrix& a = s.scene.gt.adjacency;
      const int n = s.graph.node_count();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
          if (a(i, j) > 0.5) true_max = std::max(true_max, r(i, j));
      for (int t = 0; t < 200; ++t) {
        const int i = static_cast<int>(rng.uniform() * n), j = static_cast<int>(rng.uniform() * n);
        if (view[i] != view[j] && a(i, j) < 0.5) false_vals.push_back(r(i, j));
      }
    }
  });
  std::nth_element(false_vals.begin(), false_vals.begin() + false_vals.size() / 2, false_vals.end());
  const double median = false_vals[false_vals.size() / 2];
  return {true_max <= 1e-9 && median > 1e-3 && seconds < 10.0,
          fmt("true pairs max %.3g (<= 1e-9), random non-corresponding median %.4f (> 1e-3, %zu pairs); %.2f s", true_max,
              median, false_vals.size(), seconds)};
}

Outcome ablation(bool geometric) {
  TrainConfig base;
  base.steps = 6000;
  base.lr0 = 1e-3;
  base.graph.points = 30;
  base.graph.outlier_rate = 0.1;
  base.eval_every = 6000;
  base.eval_graphs = 8;
  base.source = geometric ? GraphSource::Scene : GraphSource::Synthetic;
  AblationArm on{geometric ? "geometric=on" : "groupnorm=on", base};
  AblationArm off{geometric ? "geometric=off" : "groupnorm=off", base};
  if (geometric) on.config.use_geometric = true;
  else off.config.use_groupnorm = false;
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<AblationRow> rows = ablate({on, off}, {1, 2, 3});
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  return {rows[0].mean_l1 <= rows[1].mean_l1 && minutes <= 60.0,
          fmt("%s L1 %.5f +- %.5f <= %s L1 %.5f +- %.5f (3 seeds, p=30, 10%% outliers); %.1f min", rows[0].label.c_str(),
              rows[0].mean_l1, rows[0].std_l1, rows[1].label.c_str(), rows[1].mean_l1, rows[1].std_l1, minutes)};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream os;
  os << is.rdbuf();
  return os.str();
}

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "cyclematch_acceptance";
  fs::remove_all(root);
  const std::string small = "--views 3 --points 6 --descriptor-dim 8";
  const std::string train = small + " --hidden-dim 16 --steps 5 --eval-every 5 --eval-graphs 2";
  const std::vector<std::string> commands = {
      "gen-graph " + small + " --seed 8 --out g.cgrf",
      "gen-scene --views 3 --points 8 --seed 8 --out s.cgrf",
      "train " + train + " --seed 8 --out run",
      "train --views 3 --points 8 --hidden-dim 16 --steps 5 --eval-every 5 --eval-graphs 2 --source scene --geometric true --seed 8 --out run_geo",
      "infer --model run/model.gcnm --graph g.cgrf --gt g.gtrf --out e.csv",
      "baseline --method spectral --graph g.cgrf --gt g.gtrf --out sp.cgrf",
      "baseline --method matchals --graph g.cgrf --gt g.gtrf --iters 5 --out ma.cgrf",
      "baseline --method pgdds --graph g.cgrf --gt g.gtrf --iters 5 --out pg.cgrf",
      "eval --graph g.cgrf --gt g.gtrf --embedding identity --out eval.csv",
      "eval --graph g.cgrf --gt g.gtrf --similarity ma.cgrf --out eval_ma.csv",
      "sweep --instances 2 --points 6 --iters 3,6 --seed 8 --out sweep.csv",
      "ablate " + train + " --flag groupnorm --seeds 1,2 --out ablate.csv",
      "gradcheck --seed 8 --directions 5 --hidden-dim 16 --out gc.csv",
  };
  for (const char* tag : {"a", "b"}) {
    const fs::path dir = root / tag;
    fs::create_directories(dir);
    for (std::size_t k = 0; k < commands.size(); ++k) {
      const std::string cmd = "cd " + dir.string() + " && env -u CYCLEMATCH_SEED " + CYCLEMATCH_CLI + " " +
                              commands[k] + " >stdout_" + std::to_string(k) + ".txt 2>&1";
      const int status = std::system(cmd.c_str());
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
        return {false, "command failed: cyclematch " + commands[k]};
    }
  }
  int files = 0;
  std::vector<std::string> differing;
  for (const auto& entry : fs::recursive_directory_iterator(root / "a")) {
    if (!entry.is_regular_file()) continue;
    const fs::path rel = fs::relative(entry.path(), root / "a");
    if (slurp(entry.path()) != slurp(root / "b" / rel)) differing.push_back(rel.string());
    ++files;
  }
  std::string detail = fmt("%zu subcommand runs, %d output files (stdout included) compared byte-for-byte",
                           commands.size(), files);
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

Outcome projection_marginals(const std::vector<SynthGraph>& inst) {
  double worst = 0.0;
  std::size_t projections = 0;
  bool complete = true;
  for (const SynthGraph& g : inst) {
    PgddsTrace trace;
    pgdds(g.graph.adjacency(), 30, g.gt.view_of, 50, 0.0, &trace);
    complete = complete && trace.marginal_error.size() >= 50;
    projections += trace.marginal_error.size();
    for (double e : trace.marginal_error) worst = std::max(worst, e);
  }
  return {complete && worst <= 1e-6,
          fmt("max |row/col sum - 1| %.3g (<= 1e-6) over %zu projections on 20 instances", worst, projections)};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  auto wanted = [&](int k) { return selected.empty() || selected.count(k) > 0; };

  std::vector<SynthGraph> inst;
  auto instances = [&]() -> const std::vector<SynthGraph>& {
    if (inst.empty()) inst = ordering_instances();
    return inst;
  };

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient correctness", gradients},
      {"synthetic training quality", table1},
      {"descriptor initialization band", descriptor_baseline},
      {"spectral exactness", spectral_exactness},
      {"baseline ordering", [&] { return baseline_ordering(instances()); }},
      {"runtime ordering", [&] { return runtime_ordering(instances()); }},
      {"rotation invariance", rotation_invariance},
      {"epipolar prior", epipolar_prior},
      {"geometric-loss ablation", [] { return ablation(true); }},
      {"group-norm ablation", [] { return ablation(false); }},
      {"determinism", determinism},
      {"doubly stochastic projection", [&] { return projection_marginals(instances()); }},
  };

  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!wanted(id)) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2d %-30s %s  %s\n", id, criteria[k].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
