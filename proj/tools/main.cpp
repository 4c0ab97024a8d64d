#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "statfuse/calibration.hpp"
#include "statfuse/core.hpp"
#include "statfuse/fusion.hpp"
#include "statfuse/io.hpp"
#include "statfuse/metrics.hpp"
#include "statfuse/rng.hpp"
#include "statfuse/synth.hpp"

namespace fs = std::filesystem;
using namespace statfuse;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t combine_seed(std::uint64_t a, std::uint64_t b) {
  return Rng::mix(a ^ Rng::mix(b + 0x9E3779B97F4A7C15ull));
}

std::string scene_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene%04d.sft", i);
  return buf;
}

std::string sample_name(int scene, int t) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "scene%04d.sample%02d.sft", scene, t);
  return buf;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string preset;
  fs::path out;
  std::uint64_t seed = 0;
  int scenes = 4;
  int height = 256;
  int width = 256;
  int classes = 6;
  int region = 8;
  int samples = 8;
};

int cmd_simulate(const SimulateArgs& a) {
  synth::Scenario scenario;
  if (a.preset == "complementary") {
    scenario = synth::complementary_scenario(a.classes);
  } else if (a.preset == "degraded") {
    scenario = synth::degraded_scenario(a.classes);
  } else if (a.preset == "sample_stacks") {
    scenario = synth::sample_stacks_scenario(a.classes, a.samples);
  } else {
    throw UsageError("unknown preset '" + a.preset + "'");
  }

  fs::create_directories(a.out / "gt");
  for (const auto& e : scenario.experts) fs::create_directories(a.out / e.id);

  synth::SceneSpec scene;
  scene.height = a.height;
  scene.width = a.width;
  scene.region_size = a.region;
  scene.class_frequencies.assign(a.classes, 1.0 / a.classes);

  for (int i = 0; i < a.scenes; ++i) {
    scene.seed = combine_seed(a.seed, 1000 + i);
    const LabelMap gt = synth::generate_scene(scene);
    io::write_tensor(a.out / "gt" / scene_name(i), gt);
    for (std::size_t e = 0; e < scenario.experts.size(); ++e) {
      const std::uint64_t expert_seed = combine_seed(scene.seed, e + 1);
      if (scenario.sample_count > 0) {
        const auto stack = synth::simulate_expert_stack(
            gt, scenario.experts[e], expert_seed, scenario.sample_count);
        for (int t = 0; t < static_cast<int>(stack.size()); ++t)
          io::write_tensor(a.out / scenario.experts[e].id / sample_name(i, t),
                           stack[t]);
      } else {
        io::write_tensor(a.out / scenario.experts[e].id / scene_name(i),
                         synth::simulate_expert(gt, scenario.experts[e],
                                                expert_seed));
      }
    }
  }

  io::Manifest manifest;
  manifest.gt_dir = "gt";
  for (const auto& e : scenario.experts) manifest.experts.push_back({e.id, e.id});
  io::write_manifest(a.out / "manifest.tsv", manifest);

  std::ofstream specs(a.out / "experts.txt", std::ios::trunc);
  specs << std::setprecision(17);
  for (const auto& e : scenario.experts) {
    specs << "expert " << e.id << "\n";
    for (std::size_t k = 0; k < e.generative_alphas.size(); ++k) {
      specs << "alpha " << k;
      for (double v : e.generative_alphas[k]) specs << " " << v;
      specs << "\n";
    }
  }
  std::cout << "wrote " << a.scenes << " scenes to " << a.out.string() << "\n";
  return 0;
}

// --------------------------------------------------------------- data load

struct DevData {
  io::Manifest manifest;
  std::vector<std::string> basenames;
  std::vector<LabelMap> gt;
  std::vector<std::vector<ScoreMap>> expert_scores;  // [expert][image]
};

DevData load_scores_and_gt(const fs::path& manifest_path) {
  DevData d;
  d.manifest = io::read_manifest(manifest_path);
  d.basenames = io::matched_basenames(d.manifest);
  for (const auto& n : d.basenames)
    d.gt.push_back(io::read_label_map(d.manifest.gt_dir / n));
  d.expert_scores.resize(d.manifest.experts.size());
  for (std::size_t e = 0; e < d.manifest.experts.size(); ++e)
    for (const auto& n : d.basenames)
      d.expert_scores[e].push_back(
          io::read_score_map(d.manifest.experts[e].dir / n));
  return d;
}

int infer_classes(const DevData& d) {
  return d.expert_scores.front().front().classes();
}

// --------------------------------------------------------------- calibrate

struct CalibrateArgs {
  fs::path manifest;
  fs::path out;
  int ignore_index = -1;
  std::string names;  // comma-separated, optional
};

ClassSet make_class_set(int k, int ignore_index, const std::string& names) {
  ClassSet cs = ClassSet::with_default_names(
      k, ignore_index >= 0 ? std::optional<int>(ignore_index) : std::nullopt);
  if (!names.empty()) {
    cs.names.clear();
    std::istringstream ss(names);
    std::string n;
    while (std::getline(ss, n, ',')) cs.names.push_back(n);
    cs.validate();
    if (static_cast<int>(cs.names.size()) != k)
      throw UsageError("--names must list exactly " + std::to_string(k) +
                       " names");
  }
  return cs;
}

int cmd_calibrate(const CalibrateArgs& a) {
  const DevData dev = load_scores_and_gt(a.manifest);
  FusionModel model;
  model.class_set = make_class_set(infer_classes(dev), a.ignore_index, a.names);

  std::vector<ConfusionMatrix> confusions;
  for (std::size_t e = 0; e < dev.expert_scores.size(); ++e) {
    ConfusionMatrix m(model.class_set.count);
    for (std::size_t i = 0; i < dev.gt.size(); ++i)
      accumulate_confusion(argmax_labels(dev.expert_scores[e][i]), dev.gt[i],
                           model.class_set, m);
    confusions.push_back(m);
    model.experts.push_back({dev.manifest.experts[e].id, std::move(m), {}});
  }
  model.prior = prior_from_confusions(confusions);
  io::save_model(a.out, model);
  std::cout << "calibrated " << model.experts.size() << " experts, wrote "
            << a.out.string() << "\n";
  return 0;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  fs::path manifest;
  fs::path model;
  fs::path out;  // empty: overwrite --model
  double beta = 0.0;
  double delta = 0.0;
  int max_iter = 1000;
  double subsample = 1.0;
  std::uint64_t seed = 0;
};

int cmd_fit(const FitArgs& a) {
  FusionModel model = io::load_model(a.model);
  const DevData dev = load_scores_and_gt(a.manifest);
  if (dev.expert_scores.size() != model.experts.size())
    throw UsageError("manifest expert count does not match model " +
                     a.model.string());

  std::optional<Subsample> sub;
  if (a.subsample < 1.0) sub = Subsample{a.subsample, a.seed};

  RegularizationConfig cfg;
  cfg.beta = a.beta;
  cfg.delta = a.delta;
  cfg.max_iterations = a.max_iter;

  for (std::size_t e = 0; e < model.experts.size(); ++e) {
    const auto* entry = model.find_expert(dev.manifest.experts[e].id);
    if (!entry)
      throw UsageError("expert '" + dev.manifest.experts[e].id +
                       "' from the manifest is not in the model");
    SuffStats stats(model.class_set.count);
    for (std::size_t i = 0; i < dev.gt.size(); ++i)
      accumulate_suffstats(dev.expert_scores[e][i], dev.gt[i], model.class_set,
                           stats, sub);
    const_cast<FusionModel::Expert*>(entry)->dirichlet =
        fit_expert_dirichlet(stats, cfg);
  }
  model.beta = a.beta;
  model.delta = a.delta;
  io::save_model(a.out.empty() ? a.model : a.out, model);
  std::cout << "fitted Dirichlet parameters (beta=" << a.beta
            << ", delta=" << a.delta << ")\n";
  return 0;
}

// -------------------------------------------------------------------- fuse

struct FuseArgs {
  fs::path manifest;
  fs::path model;  // optional for average/variance
  std::string method;
  fs::path out;
  double smoothing = 1.0;
};

std::vector<SampleStack> load_stacks(const io::Manifest& manifest,
                                     const std::string& basename) {
  // stack files are named <base>.sampleNN.sft next to the gt basename
  const std::string stem = fs::path(basename).stem().string();
  std::vector<SampleStack> stacks;
  for (const auto& e : manifest.experts) {
    SampleStack st;
    st.expert_id = e.id;
    for (int t = 0;; ++t) {
      char buf[48];
      std::snprintf(buf, sizeof(buf), "%s.sample%02d.sft", stem.c_str(), t);
      const fs::path p = e.dir / buf;
      if (!fs::exists(p)) break;
      st.samples.push_back(io::read_score_map(p));
    }
    if (st.samples.size() < 2)
      throw io::FormatError("expert '" + e.id + "' has fewer than 2 samples for " +
                            basename + " (expected files " + stem +
                            ".sampleNN.sft)");
    stacks.push_back(std::move(st));
  }
  return stacks;
}

int cmd_fuse(const FuseArgs& a) {
  const io::Manifest manifest = io::read_manifest(a.manifest);
  const bool needs_model = (a.method == "bayes" || a.method == "dirichlet");
  if (needs_model && a.model.empty())
    throw UsageError("--method " + a.method + " requires --model");

  FusionModel model;
  if (needs_model) {
    model = io::load_model(a.model);
    if (a.method == "dirichlet")
      for (const auto& e : model.experts)
        if (!e.dirichlet)
          throw UsageError("model " + a.model.string() +
                           " lacks a 'dirichlet' section for expert '" + e.id +
                           "'; run 'statfuse fit' first");
  }

  std::vector<std::string> ids;
  for (const auto& e : manifest.experts) ids.push_back(e.id);
  fs::create_directories(a.out);

  std::vector<std::string> basenames;
  if (a.method == "variance") {
    // gt basenames drive the stacks; expert dirs hold per-sample files
    if (!fs::is_directory(manifest.gt_dir))
      throw io::FormatError("gt directory missing: " + manifest.gt_dir.string());
    for (const auto& entry : fs::directory_iterator(manifest.gt_dir))
      if (entry.is_regular_file())
        basenames.push_back(entry.path().filename().string());
    std::sort(basenames.begin(), basenames.end());
  } else {
    basenames = io::matched_basenames(manifest);
  }

  FusionOptions opts;
  opts.smoothing = a.smoothing;
  for (const auto& n : basenames) {
    FusedResult fused;
    if (a.method == "variance") {
      fused = fuse_variance(load_stacks(manifest, n));
    } else {
      std::vector<ScoreMap> scores;
      for (const auto& e : manifest.experts)
        scores.push_back(io::read_score_map(e.dir / n));
      if (a.method == "average") {
        fused = fuse_average(scores);
      } else if (a.method == "bayes") {
        std::vector<LabelMap> labels;
        for (const auto& s : scores) labels.push_back(argmax_labels(s));
        fused = fuse_bayes(ids, labels, model, opts);
      } else if (a.method == "dirichlet") {
        fused = fuse_dirichlet(ids, scores, model, opts);
      } else {
        throw UsageError("unknown method '" + a.method + "'");
      }
    }
    io::write_tensor(a.out / n, fused.labels);
  }
  std::cout << "fused " << basenames.size() << " images with method "
            << a.method << "\n";
  return 0;
}

// -------------------------------------------------------------------- eval

struct EvalArgs {
  fs::path pred_dir;
  fs::path gt_dir;
  fs::path out;  // prefix; writes <out>.txt and <out>.tsv
  int classes = 0;
  int ignore_index = -1;
  std::string names;
};

int cmd_eval(const EvalArgs& a) {
  std::vector<std::string> basenames;
  if (!fs::is_directory(a.gt_dir))
    throw io::FormatError("gt directory missing: " + a.gt_dir.string());
  for (const auto& entry : fs::directory_iterator(a.gt_dir))
    if (entry.is_regular_file())
      basenames.push_back(entry.path().filename().string());
  std::sort(basenames.begin(), basenames.end());
  if (basenames.empty())
    throw io::FormatError("gt directory empty: " + a.gt_dir.string());

  std::vector<LabelMap> preds, gts;
  int max_label = 0;
  for (const auto& n : basenames) {
    const fs::path p = a.pred_dir / n;
    if (!fs::exists(p))
      throw io::FormatError("prediction missing for " + n + " in " +
                            a.pred_dir.string());
    preds.push_back(io::read_label_map(p));
    gts.push_back(io::read_label_map(a.gt_dir / n));
    for (auto v : preds.back().raw()) max_label = std::max<int>(max_label, v);
    for (auto v : gts.back().raw()) max_label = std::max<int>(max_label, v);
  }
  const int k = a.classes > 0 ? a.classes : max_label + 1;
  const ClassSet cs = make_class_set(std::max(k, 2), a.ignore_index, a.names);

  const EvalReport report = evaluate_batch(preds, gts, cs);
  write_report_text(std::cout, report, cs);
  std::ofstream txt(a.out.string() + ".txt", std::ios::trunc);
  write_report_text(txt, report, cs);
  std::ofstream tsv(a.out.string() + ".tsv", std::ios::trunc);
  write_report_tsv(tsv, report, cs);
  return 0;
}

// ------------------------------------------------------------- grid-search

struct GridArgs {
  fs::path manifest;
  fs::path model;
  fs::path out;
  std::vector<double> beta_grid = {0.0, 0.1, 0.2, 0.3, 0.5};
  std::vector<double> delta_grid = {0.0, 1e-4, 1e-3, 1e-2, 1e-1};
  double subsample = 1.0;
  std::uint64_t seed = 0;
  bool update_model = false;
};

int cmd_grid_search(const GridArgs& a) {
  FusionModel model = io::load_model(a.model);
  const DevData dev = load_scores_and_gt(a.manifest);
  if (dev.expert_scores.size() != model.experts.size())
    throw UsageError("manifest expert count does not match model");

  std::optional<Subsample> sub;
  if (a.subsample < 1.0) sub = Subsample{a.subsample, a.seed};

  const GridSearchResult result = grid_search(
      dev.expert_scores, dev.gt, model, a.beta_grid, a.delta_grid, sub);

  std::ofstream os(a.out, std::ios::trunc);
  os << std::setprecision(17);
  os << "beta\tdelta\tmean_iou\tmle_fallbacks\n";
  for (const auto& p : result.table)
    os << p.beta << "\t" << p.delta << "\t" << p.mean_iou << "\t"
       << p.mle_fallbacks << "\n";
  os << "best\t" << result.beta << "\t" << result.delta << "\n";
  std::cout << "best beta=" << result.beta << " delta=" << result.delta
            << "\n";

  if (a.update_model) {
    FitArgs fit;
    fit.manifest = a.manifest;
    fit.model = a.model;
    fit.beta = result.beta;
    fit.delta = result.delta;
    fit.subsample = a.subsample;
    fit.seed = a.seed;
    return cmd_fit(fit);
  }
  return 0;
}

// ------------------------------------------------------------------- bench

struct BenchArgs {
  std::string method;  // empty: all
  int height = 384;
  int width = 768;
  int classes = 12;
  int experts = 2;
  int samples = 8;
  int trials = 100;
  std::uint64_t seed = 1;
};

int cmd_bench(const BenchArgs& a) {
  // constant in-memory inputs, prepared once before timing
  synth::SceneSpec scene;
  scene.height = a.height;
  scene.width = a.width;
  scene.region_size = 8;
  scene.class_frequencies.assign(a.classes, 1.0 / a.classes);
  scene.seed = a.seed;
  const LabelMap gt = synth::generate_scene(scene);

  std::vector<std::vector<double>> alphas(
      a.classes, std::vector<double>(a.classes, 1.0));
  for (int k = 0; k < a.classes; ++k) alphas[k][k] += 20.0;

  std::vector<std::string> ids;
  std::vector<ScoreMap> scores;
  std::vector<LabelMap> labels;
  std::vector<SampleStack> stacks;
  FusionModel model;
  model.class_set = ClassSet::with_default_names(a.classes);
  std::vector<ConfusionMatrix> confusions;
  for (int e = 0; e < a.experts; ++e) {
    ids.push_back("expert" + std::to_string(e));
    synth::ExpertSpec spec{ids.back(), alphas};
    scores.push_back(synth::simulate_expert(gt, spec, combine_seed(a.seed, e)));
    labels.push_back(argmax_labels(scores.back()));
    SampleStack st;
    st.expert_id = ids.back();
    st.samples = synth::simulate_expert_stack(gt, spec,
                                              combine_seed(a.seed, 100 + e),
                                              a.samples);
    stacks.push_back(std::move(st));

    ConfusionMatrix m(a.classes);
    accumulate_confusion(labels.back(), gt, model.class_set, m);
    confusions.push_back(m);
    SuffStats stats(a.classes);
    accumulate_suffstats(scores.back(), gt, model.class_set, stats);
    FusionModel::Expert entry;
    entry.id = ids.back();
    entry.confusion = std::move(m);
    entry.dirichlet = fit_expert_dirichlet(stats, {});
    model.experts.push_back(std::move(entry));
  }
  model.prior = prior_from_confusions(confusions);

  std::map<std::string, std::function<void()>> runners = {
      {"bayes", [&] { fuse_bayes(ids, labels, model); }},
      {"dirichlet", [&] { fuse_dirichlet(ids, scores, model); }},
      {"average", [&] { fuse_average(scores); }},
      {"variance", [&] { fuse_variance(stacks); }},
  };
  std::vector<std::string> methods;
  if (a.method.empty()) {
    methods = {"bayes", "dirichlet", "average", "variance"};
  } else {
    if (!runners.count(a.method))
      throw UsageError("unknown method '" + a.method + "'");
    methods = {a.method};
  }
  std::cout << std::fixed << std::setprecision(3);
  for (const auto& m : methods) {
    const BenchResult r = bench_inference(runners[m], a.trials);
    std::cout << m << "  " << r.mean_ms << " ms +- " << r.stddev_ms
              << " ms  (" << a.trials << " trials, " << a.height << "x"
              << a.width << "x" << a.classes << ", " << a.experts
              << " experts)\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"statfuse: statistical fusion of independently trained "
               "classifier outputs"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic dataset");
  c_sim->add_option("--preset", sim.preset,
                    "complementary | degraded | sample_stacks")
      ->required();
  c_sim->add_option("--out", sim.out, "output directory")->required();
  c_sim->add_option("--seed", sim.seed, "random seed")->required();
  c_sim->add_option("--scenes", sim.scenes, "number of scenes");
  c_sim->add_option("--height", sim.height);
  c_sim->add_option("--width", sim.width);
  c_sim->add_option("--classes", sim.classes);
  c_sim->add_option("--region", sim.region, "square region side");
  c_sim->add_option("--samples", sim.samples, "Monte-Carlo samples per stack");

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand(
      "calibrate", "Build confusion matrices and prior from a dev manifest");
  c_cal->add_option("--manifest", cal.manifest)->required();
  c_cal->add_option("--out", cal.out, "model file to write")->required();
  c_cal->add_option("--ignore", cal.ignore_index, "class excluded from stats");
  c_cal->add_option("--names", cal.names, "comma-separated class names");

  FitArgs fit;
  auto* c_fit = app.add_subcommand(
      "fit", "Add Dirichlet parameters to an existing model");
  c_fit->add_option("--manifest", fit.manifest)->required();
  c_fit->add_option("--model", fit.model)->required();
  c_fit->add_option("--out", fit.out, "defaults to overwriting --model");
  c_fit->add_option("--beta", fit.beta, "discrimination weight in [0,1)");
  c_fit->add_option("--delta", fit.delta, "norm penalty >= 0");
  c_fit->add_option("--max-iter", fit.max_iter);
  c_fit->add_option("--subsample", fit.subsample, "per-image element rate");
  c_fit->add_option("--seed", fit.seed, "subsample seed");

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "Fuse expert outputs");
  c_fuse->add_option("--manifest", fuse.manifest)->required();
  c_fuse->add_option("--method", fuse.method,
                     "bayes | dirichlet | average | variance")
      ->required();
  c_fuse->add_option("--model", fuse.model,
                     "required for bayes and dirichlet");
  c_fuse->add_option("--out", fuse.out, "directory for fused label tensors")
      ->required();
  c_fuse->add_option("--smoothing", fuse.smoothing,
                     "confusion add-c smoothing");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate fused labels against gt");
  c_eval->add_option("--pred", ev.pred_dir)->required();
  c_eval->add_option("--gt", ev.gt_dir)->required();
  c_eval->add_option("--out", ev.out, "report prefix (.txt/.tsv)")->required();
  c_eval->add_option("--classes", ev.classes, "class count (default: inferred)");
  c_eval->add_option("--ignore", ev.ignore_index);
  c_eval->add_option("--names", ev.names, "comma-separated class names");

  GridArgs grid;
  auto* c_grid = app.add_subcommand(
      "grid-search", "Search beta/delta on the dev set by mean IoU");
  c_grid->add_option("--manifest", grid.manifest)->required();
  c_grid->add_option("--model", grid.model)->required();
  c_grid->add_option("--out", grid.out, "table file to write")->required();
  c_grid->add_option("--beta-grid", grid.beta_grid)->delimiter(',');
  c_grid->add_option("--delta-grid", grid.delta_grid)->delimiter(',');
  c_grid->add_option("--subsample", grid.subsample);
  c_grid->add_option("--seed", grid.seed);
  c_grid->add_flag("--update-model", grid.update_model,
                   "refit the model at the best pair");

  BenchArgs bench;
  auto* c_bench = app.add_subcommand(
      "bench", "Time fusion methods on constant in-memory input");
  c_bench->add_option("--method", bench.method, "default: all methods");
  c_bench->add_option("--height", bench.height);
  c_bench->add_option("--width", bench.width);
  c_bench->add_option("--classes", bench.classes);
  c_bench->add_option("--experts", bench.experts);
  c_bench->add_option("--samples", bench.samples);
  c_bench->add_option("--trials", bench.trials)
      ->check(CLI::Range(2, 1000000));
  c_bench->add_option("--seed", bench.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_cal) return cmd_calibrate(cal);
    if (*c_fit) return cmd_fit(fit);
    if (*c_fuse) return cmd_fuse(fuse);
    if (*c_eval) return cmd_eval(ev);
    if (*c_grid) return cmd_grid_search(grid);
    if (*c_bench) return cmd_bench(bench);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
