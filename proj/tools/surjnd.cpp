// surjnd: SUR / JND prediction from local quality degradation and masking.
//
//   surjnd synth             write a synthetic dataset (manifest + annotations)
//   surjnd extract-features  fill the per-source feature cache
//   surjnd train             fit an SVR model on cached features
//   surjnd predict           predict SUR curves and JND points
//   surjnd evaluate          k-fold evaluation with report files
//   surjnd sur-fit           Gaussian / empirical SUR from annotations
//
// Exit codes: 0 ok, 1 internal, 2 configuration, 3 data, 4 numeric.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "surjnd/surjnd.hpp"

namespace fs = std::filesystem;
using namespace surjnd;

namespace {

struct PipelineOptions {
  std::string metric = "psnr_mapped";
  SegmentConfig segments;
  SlopeParams slope;

  PipelineConfig resolve() const {
    PipelineConfig c;
    c.metric = parse_metric(metric);
    c.segments = segments;
    c.slope = slope;
    validate(c.segments);
    validate(c.slope);
    return c;
  }
};

void add_pipeline_options(CLI::App* app, PipelineOptions& o) {
  app->add_option("--metric", o.metric, "Local quality index: psnr_mapped, struct_sim or external")
      ->capture_default_str();
  app->add_option("--seg-width", o.segments.width, "Segment width W in pixels")->capture_default_str();
  app->add_option("--seg-height", o.segments.height, "Segment height H in pixels")->capture_default_str();
  app->add_option("--seg-duration", o.segments.duration, "Segment duration T in seconds")
      ->capture_default_str();
  app->add_option("--overlap", o.segments.overlap, "Spatial overlap fraction of neighbouring segments")
      ->capture_default_str();
  app->add_option("--slope-k", o.slope.k, "Slope look-back k in grid steps")->capture_default_str();
  app->add_option("--slope-p", o.slope.p, "Fraction p of segments kept by slope ranking")
      ->capture_default_str();
}

struct SvrOptions {
  SvrHyperParams params;
  bool grid_search = true;
  int inner_folds = 4;
  std::uint64_t seed = 2017;
};

void add_svr_options(CLI::App* app, SvrOptions& o) {
  app->add_option("--C", o.params.C, "SVR regularisation C (used when grid search is off)")
      ->capture_default_str();
  app->add_option("--epsilon", o.params.epsilon, "SVR tube width epsilon (grid search off)")
      ->capture_default_str();
  app->add_option("--gamma", o.params.gamma, "RBF width gamma (grid search off)")->capture_default_str();
  app->add_option("--tolerance", o.params.tolerance, "SMO stopping tolerance")->capture_default_str();
  app->add_flag("--grid-search,!--no-grid-search", o.grid_search,
                "Select C, gamma, epsilon by group-wise inner cross-validation")
      ->capture_default_str();
  app->add_option("--inner-folds", o.inner_folds, "Inner folds for grid search")->capture_default_str();
  app->add_option("--seed", o.seed, "Seed for fold shuffles")->capture_default_str();
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::vector<int> parse_grid(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  for (std::string w; is >> w;) out.push_back(static_cast<int>(csv::parse_int(w, "qp grid")));
  return out;
}

void ensure_writable_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw Error(ErrorKind::io, "cannot create output directory " + dir.string());
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorKind::io, "cannot write " + p.string());
  return out;
}

void log_line(const std::string& s) { std::cerr << "[surjnd] " << s << '\n'; }

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
  SyntheticConfig config;
  std::string fps = "12";
  int qp_first = 0, qp_last = 50, qp_step = 2;
  std::uint64_t seed = 2017;
  bool materialize = false;
  std::string out;
};

int run_synth(const SynthOptions& o) {
  SyntheticConfig c = o.config;
  c.frame_rate = detail::parse_ratio(o.fps.find(':') == std::string::npos ? o.fps + ":1" : o.fps, "fps");
  if (o.qp_step < 1) throw Error(ErrorKind::configuration, "qp step must be >= 1");
  c.qp_grid = qp_grid(o.qp_first, o.qp_last, o.qp_step);
  validate(c);
  synthetic_metadata(c);
  const auto ds = generate_synthetic(c, o.seed);
  write_synthetic_dataset(ds, o.out, o.materialize);
  log_line("wrote " + std::to_string(ds.recipes.size()) + " synthetic sources to " + o.out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// extract-features

struct DatasetOptions {
  std::string manifest;
  std::string cache = "surjnd-cache";
  unsigned threads = 0;
  PipelineOptions pipeline;
};

int run_extract(const DatasetOptions& o, const std::string& features_out) {
  const PipelineConfig pc = o.pipeline.resolve();
  const DatasetManifest m = load_manifest(o.manifest);
  ExtractionOptions eo{pc, fs::path(o.cache), o.threads, log_line};
  CacheStats stats;
  const auto features = extract_dataset_features(m, eo, &stats);
  for (const auto& n : stats.notes) log_line(n);
  log_line(std::to_string(stats.fresh) + " fresh, " + std::to_string(stats.computed) + " extracted, " +
           std::to_string(stats.repaired) + " repaired");
  if (!features_out.empty()) {
    std::vector<FeatureVector> all;
    for (const auto& [id, rows] : features) all.insert(all.end(), rows.begin(), rows.end());
    auto out = open_out(features_out);
    write_features(out, all);
  }
  return kExitOk;
}

/// Cached features only; a miss names the extraction step.
std::map<std::string, std::vector<FeatureVector>> cached_features(const DatasetManifest& m,
                                                                  const DatasetOptions& o) {
  const PipelineConfig pc = o.pipeline.resolve();
  std::map<std::string, std::vector<FeatureVector>> out;
  std::string missing;
  for (const auto& s : m.sources) {
    bool corrupt = false;
    const auto fp = source_fingerprint(m, s, pc);
    auto rows = detail::read_cached(o.cache, s, fp, m.qp_grid, corrupt);
    if (!rows) missing += " " + s.id + (corrupt ? "(corrupt)" : "");
    else out[s.id] = std::move(*rows);
  }
  if (!missing.empty())
    throw Error(ErrorKind::missing_data,
                "no up-to-date cached features for:" + missing +
                    "; run `surjnd extract-features --manifest " + o.manifest + " --cache " + o.cache +
                    "` with the same pipeline options first");
  return out;
}

// ---------------------------------------------------------------------------
// train

int run_train(const DatasetOptions& o, const SvrOptions& so, const std::string& model_path) {
  const PipelineConfig pc = o.pipeline.resolve();
  validate(so.params);
  const DatasetManifest m = load_manifest(o.manifest);
  const auto features = cached_features(m, o);
  const auto annotations = load_manifest_annotations(m);

  FeatureMatrix x(kFeatureDim);
  std::vector<double> y;
  std::vector<int> groups;
  Fingerprint data_fp;
  int g = 0;
  std::size_t used = 0;
  for (const auto& s : m.sources) {
    GaussianJndModel fit;
    try {
      fit = fit_gaussian(annotations.at(s.id));
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_sample) throw;
      log_line("excluded " + s.id + ": " + e.what());
      continue;
    }
    data_fp.add_field(source_fingerprint(m, s, pc));
    for (const auto& f : features.at(s.id)) {
      x.push_back(f.x);
      y.push_back(gaussian_sur(fit, f.qp));
      groups.push_back(g);
    }
    ++g;
    ++used;
  }
  if (x.rows() == 0) throw Error(ErrorKind::insufficient_data, "no training samples");

  SvrHyperParams params = so.params;
  std::string search = "off";
  if (so.grid_search) {
    const int inner = std::min<int>(so.inner_folds, g);
    const auto r = grid_search(x, y, groups, SvrGrid{}, so.params, inner, so.seed);
    params = r.best;
    search = "on inner_folds=" + std::to_string(inner) + " best_mse=" + csv::format_double(r.best_mse);
  }
  SvrModel model = train(x, y, params);
  model.metadata["pipeline"] = describe(pc);
  model.metadata["qp_grid"] = join(m.qp_grid);
  model.metadata["grid_search"] = search;
  model.metadata["seed"] = std::to_string(so.seed);
  model.metadata["hyperparams"] = "C=" + csv::format_double(params.C) + " epsilon=" +
                                  csv::format_double(params.epsilon) + " gamma=" +
                                  csv::format_double(params.gamma);
  model.metadata["training_sources"] = std::to_string(used);
  model.metadata["training_samples"] = std::to_string(x.rows());
  model.metadata["data_fingerprint"] = data_fp.hex();
  model.metadata["targets"] = "fitted_gaussian";
  auto out = open_out(model_path);
  save_model(model, out);
  log_line("trained on " + std::to_string(x.rows()) + " samples from " + std::to_string(used) +
           " sources; " + model.metadata["hyperparams"] + "; " + std::to_string(model.coefficients.size()) +
           " support vectors");
  return kExitOk;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
  std::string model;
  std::string features;
  std::string source;
  std::string annotations;
  std::string out;
  double threshold = kDefaultJndThreshold;
  DatasetOptions dataset;
};

int run_predict(const PredictOptions& o) {
  if (!(o.threshold > 0.0 && o.threshold < 1.0))
    throw Error(ErrorKind::configuration, "threshold must lie in (0, 1)");
  if (o.features.empty() == o.dataset.manifest.empty())
    throw Error(ErrorKind::configuration, "give exactly one of --features or --manifest");
  std::ifstream min(o.model);
  if (!min) throw Error(ErrorKind::io, "cannot open model " + o.model);
  const SvrModel model = load_model(min);

  std::map<std::string, std::vector<FeatureVector>> by_source;
  std::vector<int> grid;
  if (!o.features.empty()) {
    std::ifstream in(o.features);
    if (!in) throw Error(ErrorKind::io, "cannot open features " + o.features);
    for (auto& f : read_features(in)) by_source[f.source_id].push_back(std::move(f));
  } else {
    const DatasetManifest m = load_manifest(o.dataset.manifest);
    by_source = cached_features(m, o.dataset);
    grid = m.qp_grid;
  }
  if (const auto it = model.metadata.find("qp_grid"); grid.empty() && it != model.metadata.end())
    grid = parse_grid(it->second);
  if (!o.source.empty()) {
    if (!by_source.contains(o.source))
      throw Error(ErrorKind::missing_data, "no features for source '" + o.source + "'");
    by_source = {{o.source, by_source.at(o.source)}};
  }
  if (by_source.empty()) throw Error(ErrorKind::empty_input, "no sources to predict");

  std::map<std::string, JndAnnotationSet> ann;
  if (!o.annotations.empty()) {
    std::ifstream in(o.annotations);
    if (!in) throw Error(ErrorKind::io, "cannot open annotations " + o.annotations);
    ann = load_annotations(in);
  }

  struct Row {
    SurCurve curve;
    std::optional<double> jnd;
  };
  std::map<std::string, Row> rows;
  for (const auto& [id, feats] : by_source) {
    std::vector<int> g = grid;
    if (g.empty()) {
      for (const auto& f : feats) g.push_back(f.qp);
      std::sort(g.begin(), g.end());
    }
    Row r{predict_sur_curve(model, feats, g), std::nullopt};
    r.jnd = jnd_point(r.curve, o.threshold);
    rows.emplace(id, std::move(r));
  }

  ensure_writable_dir(o.out);
  {
    auto out = open_out(fs::path(o.out) / "curves.csv");
    out << "source_id,qp,sur\n";
    for (const auto& [id, r] : rows)
      for (std::size_t i = 0; i < r.curve.size(); ++i)
        out << id << ',' << r.curve.qps()[i] << ',' << csv::format_double(r.curve.values()[i]) << '\n';
  }
  {
    auto out = open_out(fs::path(o.out) / "jnd.csv");
    out << "source_id,jnd\n";
    for (const auto& [id, r] : rows) out << id << ',' << format_optional(r.jnd) << '\n';
  }
  for (const auto& [id, r] : rows) {
    std::cout << id << " JND " << format_optional(r.jnd) << '\n';
    const auto a = ann.find(id);
    if (a == ann.end()) continue;
    EvaluationReport overlay;
    SourceResult s;
    s.id = id;
    s.predicted = r.curve;
    s.truth = gaussian_curve(fit_gaussian(a->second), r.curve.qps());
    overlay.sources.push_back(std::move(s));
    auto out = open_out(fs::path(o.out) / (id + "_overlay.svg"));
    write_curves_svg(out, overlay);
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
  DatasetOptions dataset;
  SvrOptions svr;
  int folds = 5;
  std::string truth = "fitted_gaussian";
  double threshold = kDefaultJndThreshold;
  std::string out;
};

int run_evaluate(const EvaluateOptions& o) {
  const PipelineConfig pc = o.dataset.pipeline.resolve();
  validate(o.svr.params);
  EvaluationConfig ec;
  ec.folds = o.folds;
  ec.seed = o.svr.seed;
  ec.grid_search = o.svr.grid_search;
  ec.inner_folds = o.svr.inner_folds;
  ec.svr = o.svr.params;
  ec.truth = parse_truth_source(o.truth);
  ec.threshold = o.threshold;
  ec.threads = o.dataset.threads;
  if (!(ec.threshold > 0.0 && ec.threshold < 1.0))
    throw Error(ErrorKind::configuration, "threshold must lie in (0, 1)");
  const DatasetManifest m = load_manifest(o.dataset.manifest);
  ec.qp_grid = m.qp_grid;
  if (m.sources.size() < static_cast<std::size_t>(ec.folds) || ec.folds < 2)
    throw Error(ErrorKind::configuration, std::to_string(m.sources.size()) + " sources cannot fill " +
                                              std::to_string(ec.folds) + " folds");

  const auto annotations = load_manifest_annotations(m);
  ExtractionOptions eo{pc, fs::path(o.dataset.cache), o.dataset.threads, log_line};
  CacheStats stats;
  const auto features = extract_dataset_features(m, eo, &stats);
  for (const auto& n : stats.notes) log_line(n);
  const auto data = assemble_sources(m, features, annotations);
  const auto report = run_evaluation(data, ec);
  for (const auto& e : report.excluded) log_line("excluded " + e.id + ": " + e.reason);

  ensure_writable_dir(o.out);
  const fs::path dir(o.out);
  {
    auto out = open_out(dir / "per_source.csv");
    write_per_source_csv(out, report);
  }
  {
    auto out = open_out(dir / "aggregate.csv");
    write_aggregate_csv(out, report);
  }
  {
    auto out = open_out(dir / "curves.csv");
    write_curves_csv(out, report);
  }
  {
    auto out = open_out(dir / "scatter.svg");
    write_scatter_svg(out, report);
  }
  {
    auto out = open_out(dir / "curves.svg");
    write_curves_svg(out, report);
  }
  {
    nlohmann::json j;
    j["manifest"] = fs::absolute(o.dataset.manifest).string();
    j["pipeline"] = describe(pc);
    for (const auto& [k, v] : report.config) j["evaluation"][k] = v;
    j["fold_params"] = nlohmann::json::array();
    for (const auto& p : report.fold_params)
      j["fold_params"].push_back({{"C", p.C}, {"epsilon", p.epsilon}, {"gamma", p.gamma}});
    j["excluded"] = nlohmann::json::array();
    for (const auto& e : report.excluded) j["excluded"].push_back({{"id", e.id}, {"reason", e.reason}});
    j["mean_delta_sur"] = report.mean_delta_sur;
    j["mean_delta_qp"] = std::isnan(report.mean_delta_qp) ? nlohmann::json() : nlohmann::json(report.mean_delta_qp);
    j["qp_exclusions"] = report.qp_exclusions;
    auto out = open_out(dir / "config.json");
    out << j.dump(2) << '\n';
  }
  std::cout << "sources " << report.sources.size() << "  dSUR " << csv::format_double(report.mean_delta_sur)
            << "  dQP " << csv::format_double(report.mean_delta_qp) << "  (qp exclusions "
            << report.qp_exclusions << ", excluded sources " << report.excluded.size() << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// sur-fit

struct SurFitOptions {
  std::string annotations;
  std::string flags;
  std::string out;
  double threshold = kDefaultJndThreshold;
  int qp_first = 1, qp_last = kMaxQp, qp_step = 1;
};

int run_sur_fit(const SurFitOptions& o) {
  if (!(o.threshold > 0.0 && o.threshold < 1.0))
    throw Error(ErrorKind::configuration, "threshold must lie in (0, 1)");
  if (o.qp_step < 1 || o.qp_first < kMinQp || o.qp_last > kMaxQp || o.qp_first > o.qp_last)
    throw Error(ErrorKind::configuration, "qp grid must lie within 0..51 with step >= 1");
  const auto grid = qp_grid(o.qp_first, o.qp_last, o.qp_step);
  std::ifstream in(o.annotations);
  if (!in) throw Error(ErrorKind::io, "cannot open annotations " + o.annotations);
  auto sets = load_annotations(in);
  if (!o.flags.empty()) {
    std::ifstream fin(o.flags);
    if (!fin) throw Error(ErrorKind::io, "cannot open flags " + o.flags);
    load_noticed_flags(fin, sets);
  }
  if (sets.empty()) throw Error(ErrorKind::empty_input, "annotation file has no rows");

  std::ostringstream fits, curves;
  fits << "source_id,subjects,mean,std,gaussian_jnd,empirical_jnd,status\n";
  curves << "source_id,qp,empirical_sur,gaussian_sur\n";
  for (const auto& [id, a] : sets) {
    const SurCurve emp = empirical_curve(a, grid);
    const SurCurve emp_mono = monotone_project(grid, emp.values());
    std::optional<GaussianJndModel> fit;
    std::string status = "ok";
    try {
      fit = fit_gaussian(a);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_sample) throw;
      status = "degenerate";
      log_line(e.what());
    }
    fits << id << ',' << a.subject_count() << ',' << (fit ? csv::format_double(fit->mean) : "") << ','
         << (fit ? csv::format_double(fit->std) : "") << ','
         << (fit ? csv::format_double(gaussian_jnd(*fit, o.threshold)) : "") << ','
         << format_optional(jnd_point(emp_mono, o.threshold)) << ',' << status << '\n';
    for (std::size_t i = 0; i < grid.size(); ++i)
      curves << id << ',' << grid[i] << ',' << csv::format_double(emp.values()[i]) << ','
             << (fit ? csv::format_double(gaussian_sur(*fit, grid[i])) : "") << '\n';
  }
  if (o.out.empty()) {
    std::cout << fits.str();
    return kExitOk;
  }
  ensure_writable_dir(o.out);
  open_out(fs::path(o.out) / "fits.csv") << fits.str();
  open_out(fs::path(o.out) / "curves.csv") << curves.str();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"surjnd: satisfied-user-ratio and JND prediction for coded video"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for all subcommands");
  app.footer(
      "Defaults: segment W=320 H=180 T=0.5 s with 50% spatial overlap; slope k=2, kept fraction "
      "p=0.8; JND threshold 0.75; SVR C=10 epsilon=0.02 gamma=1/40 unless grid search "
      "(C {1,10,100}, gamma {0.0125,0.025,0.05}, epsilon {0.01,0.02,0.05}, 4 inner folds); seed 2017.\n"
      "Exit codes: 0 ok, 1 internal, 2 configuration, 3 data, 4 numeric.");

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "Write a synthetic dataset (manifest, annotations, optional clips)");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--sources", synth.config.sources, "Number of sources")->capture_default_str();
  c_synth->add_option("--width", synth.config.width, "Frame width")->capture_default_str();
  c_synth->add_option("--height", synth.config.height, "Frame height")->capture_default_str();
  c_synth->add_option("--duration", synth.config.duration, "Clip duration in seconds")->capture_default_str();
  c_synth->add_option("--fps", synth.fps, "Frame rate, N or N:D")->capture_default_str();
  c_synth->add_option("--qp-first", synth.qp_first, "First qp of the grid")->capture_default_str();
  c_synth->add_option("--qp-last", synth.qp_last, "Last qp of the grid")->capture_default_str();
  c_synth->add_option("--qp-step", synth.qp_step, "qp grid step")->capture_default_str();
  c_synth->add_option("--subjects", synth.config.subjects, "Subjects per source")->capture_default_str();
  c_synth->add_option("--jnd-base", synth.config.jnd_base, "JND mean at masking 0")->capture_default_str();
  c_synth->add_option("--jnd-slope", synth.config.jnd_slope, "JND mean increase at masking 1")
      ->capture_default_str();
  c_synth->add_option("--jnd-std", synth.config.jnd_std, "JND standard deviation")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Generator seed")->capture_default_str();
  c_synth->add_flag("--materialize", synth.materialize, "Also write reference and coded clips as Y4M");

  DatasetOptions extract;
  std::string features_out;
  auto* c_extract = app.add_subcommand("extract-features", "Compute 40-D features for every source and qp");
  c_extract->add_option("--manifest", extract.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  c_extract->add_option("--cache", extract.cache, "Feature cache directory")->capture_default_str();
  c_extract->add_option("--threads", extract.threads, "Worker threads (0 = all cores)")->capture_default_str();
  c_extract->add_option("--features-out", features_out, "Also write all features to one CSV");
  add_pipeline_options(c_extract, extract.pipeline);

  DatasetOptions train_ds;
  SvrOptions train_svr;
  std::string model_path;
  auto* c_train = app.add_subcommand("train", "Train the SVR on cached features of every manifest source");
  c_train->add_option("--manifest", train_ds.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  c_train->add_option("--cache", train_ds.cache, "Feature cache directory")->capture_default_str();
  c_train->add_option("--model", model_path, "Output model file")->required();
  add_pipeline_options(c_train, train_ds.pipeline);
  add_svr_options(c_train, train_svr);

  PredictOptions pred;
  auto* c_predict = app.add_subcommand("predict", "Predict SUR curves and JND points");
  c_predict->add_option("--model", pred.model, "Model file")->required()->check(CLI::ExistingFile);
  c_predict->add_option("--features", pred.features, "Feature CSV (source_id,qp,x0..x39)")->check(CLI::ExistingFile);
  c_predict->add_option("--manifest", pred.dataset.manifest, "Manifest whose cached features to use")
      ->check(CLI::ExistingFile);
  c_predict->add_option("--cache", pred.dataset.cache, "Feature cache directory")->capture_default_str();
  c_predict->add_option("--source", pred.source, "Only this source id");
  c_predict->add_option("--annotations", pred.annotations, "Annotations CSV for SVG overlays")
      ->check(CLI::ExistingFile);
  c_predict->add_option("--threshold", pred.threshold, "SUR level defining the JND point")->capture_default_str();
  c_predict->add_option("--out", pred.out, "Output directory")->required();
  add_pipeline_options(c_predict, pred.dataset.pipeline);

  EvaluateOptions eval;
  auto* c_eval = app.add_subcommand("evaluate", "k-fold cross-validated evaluation with report files");
  c_eval->add_option("--manifest", eval.dataset.manifest, "Dataset manifest (JSON)")->required()->check(CLI::ExistingFile);
  c_eval->add_option("--cache", eval.dataset.cache, "Feature cache directory")->capture_default_str();
  c_eval->add_option("--threads", eval.dataset.threads, "Worker threads (0 = all cores)")->capture_default_str();
  c_eval->add_option("--folds", eval.folds, "Number of folds")->capture_default_str();
  c_eval->add_option("--truth", eval.truth, "Ground truth: fitted_gaussian, empirical or generating")
      ->capture_default_str();
  c_eval->add_option("--threshold", eval.threshold, "SUR level defining the JND point")->capture_default_str();
  c_eval->add_option("--out", eval.out, "Report directory")->required();
  add_pipeline_options(c_eval, eval.dataset.pipeline);
  add_svr_options(c_eval, eval.svr);

  SurFitOptions surfit;
  auto* c_surfit = app.add_subcommand("sur-fit", "Gaussian and empirical SUR from JND annotations");
  c_surfit->add_option("--annotations", surfit.annotations, "CSV source_id,subject_id,first_jnd_qp")
      ->required()->check(CLI::ExistingFile);
  c_surfit->add_option("--flags", surfit.flags, "CSV source_id,subject_id,qp,noticed")->check(CLI::ExistingFile);
  c_surfit->add_option("--out", surfit.out, "Output directory (default: fits to stdout)");
  c_surfit->add_option("--threshold", surfit.threshold, "SUR level defining the JND point")->capture_default_str();
  c_surfit->add_option("--qp-first", surfit.qp_first, "First qp of the curve grid")->capture_default_str();
  c_surfit->add_option("--qp-last", surfit.qp_last, "Last qp of the curve grid")->capture_default_str();
  c_surfit->add_option("--qp-step", surfit.qp_step, "Curve grid step")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*c_synth) return run_synth(synth);
    if (*c_extract) return run_extract(extract, features_out);
    if (*c_train) return run_train(train_ds, train_svr, model_path);
    if (*c_predict) return run_predict(pred);
    if (*c_eval) return run_evaluate(eval);
    if (*c_surfit) return run_sur_fit(surfit);
  } catch (const Error& e) {
    std::cerr << "surjnd: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "surjnd: format error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "surjnd: internal error: " << e.what() << '\n';
    return kExitInternal;
  }
  return kExitInternal;
}
