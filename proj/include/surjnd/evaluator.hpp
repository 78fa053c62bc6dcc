#pragma once

// Dataset manifests, per-source feature extraction, k-fold evaluation with
// delta-SUR / delta-QP metrics, and report writers (CSV + SVG).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "surjnd/csv.hpp"
#include "surjnd/error.hpp"
#include "surjnd/features.hpp"
#include "surjnd/media_io.hpp"
#include "surjnd/parallel.hpp"
#include "surjnd/quality_index.hpp"
#include "surjnd/segmenter.hpp"
#include "surjnd/sur_model.hpp"
#include "surjnd/svr.hpp"
#include "surjnd/synthetic.hpp"

namespace surjnd {

// ---------------------------------------------------------------------------
// Manifest
//
// {
//   "format": "surjnd-manifest", "version": 1,
//   "qp_grid": [0, 2, ...],
//   "scores": "scores.csv",                        (optional, external metric)
//   "synthetic": { ...SyntheticConfig... },        (optional)
//   "synthetic_seed": 2017,                        (optional)
//   "sources": [
//     { "id": "...", "resolution": "1280x720",
//       "reference": "ref.y4m",
//       "coded": { "22": "qp22.y4m", ... },        (or "synthetic": {recipe})
//       "annotations": "jnd.csv", "flags": "flags.csv" (optional),
//       "generating_gaussian": {"mean": m, "std": s} (optional) }
//   ]
// }
// Relative paths resolve against the manifest's directory.

struct SourceEntry {
  std::string id;
  std::string resolution;
  std::filesystem::path reference;
  std::map<int, std::filesystem::path> coded;
  std::optional<SyntheticRecipe> synthetic;
  std::filesystem::path annotations;
  std::optional<std::filesystem::path> flags;
  std::optional<GaussianJndModel> generating;
};

struct DatasetManifest {
  int version = 1;
  std::vector<int> qp_grid;
  std::optional<std::filesystem::path> scores;
  std::optional<SyntheticConfig> synthetic;
  std::optional<std::uint64_t> synthetic_seed;
  std::vector<SourceEntry> sources;
  std::filesystem::path base_dir;

  std::filesystem::path resolve(const std::filesystem::path& p) const {
    return p.is_absolute() || p.empty() ? p : base_dir / p;
  }
};

inline constexpr int kManifestVersion = 1;

inline nlohmann::json to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["format"] = "surjnd-manifest";
  j["version"] = m.version;
  j["qp_grid"] = m.qp_grid;
  if (m.scores) j["scores"] = m.scores->generic_string();
  if (m.synthetic) j["synthetic"] = to_json(*m.synthetic);
  if (m.synthetic_seed) j["synthetic_seed"] = *m.synthetic_seed;
  j["sources"] = nlohmann::json::array();
  for (const auto& s : m.sources) {
    nlohmann::json e;
    e["id"] = s.id;
    e["resolution"] = s.resolution;
    if (!s.reference.empty()) e["reference"] = s.reference.generic_string();
    if (!s.coded.empty()) {
      nlohmann::json coded = nlohmann::json::object();
      for (const auto& [qp, p] : s.coded) coded[std::to_string(qp)] = p.generic_string();
      e["coded"] = coded;
    }
    if (s.synthetic) e["synthetic"] = to_json(*s.synthetic);
    e["annotations"] = s.annotations.generic_string();
    if (s.flags) e["flags"] = s.flags->generic_string();
    if (s.generating) e["generating_gaussian"] = {{"mean", s.generating->mean}, {"std", s.generating->std}};
    j["sources"].push_back(e);
  }
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j,
                                          const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    if (j.value("format", std::string()) != "surjnd-manifest")
      throw Error(ErrorKind::format, "manifest: missing format tag 'surjnd-manifest'");
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion)
      throw Error(ErrorKind::version, "manifest version " + std::to_string(m.version));
    m.qp_grid = j.at("qp_grid").get<std::vector<int>>();
    if (j.contains("scores")) m.scores = j.at("scores").get<std::string>();
    if (j.contains("synthetic")) m.synthetic = synthetic_config_from_json(j.at("synthetic"));
    if (j.contains("synthetic_seed")) m.synthetic_seed = j.at("synthetic_seed").get<std::uint64_t>();
    for (const auto& e : j.at("sources")) {
      SourceEntry s;
      s.id = e.at("id").get<std::string>();
      s.resolution = e.value("resolution", std::string());
      if (e.contains("reference")) s.reference = e.at("reference").get<std::string>();
      if (e.contains("coded"))
        for (const auto& [qp, p] : e.at("coded").items())
          s.coded[static_cast<int>(csv::parse_int(qp, "manifest coded qp"))] = p.get<std::string>();
      if (e.contains("synthetic")) s.synthetic = synthetic_recipe_from_json(s.id, e.at("synthetic"));
      s.annotations = e.at("annotations").get<std::string>();
      if (e.contains("flags")) s.flags = e.at("flags").get<std::string>();
      if (e.contains("generating_gaussian"))
        s.generating = GaussianJndModel{e.at("generating_gaussian").at("mean").get<double>(),
                                        e.at("generating_gaussian").at("std").get<double>()};
      m.sources.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("manifest: ") + e.what());
  }
  if (m.qp_grid.empty()) throw Error(ErrorKind::format, "manifest: empty qp_grid");
  std::set<std::string> ids;
  for (const auto& s : m.sources)
    if (!ids.insert(s.id).second) throw Error(ErrorKind::format, "manifest: duplicate source " + s.id);
  return m;
}

inline DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::io, "cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, "manifest: " + std::string(e.what()));
  }
  return manifest_from_json(j, path.parent_path());
}

inline void save_manifest(const DatasetManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::io, "cannot create " + path.string());
  out << to_json(m).dump(2) << '\n';
}

/// Lists what the manifest references but the filesystem lacks.
inline std::vector<std::string> missing_artifacts(const DatasetManifest& m, MetricId metric) {
  std::vector<std::string> out;
  auto need = [&](const std::filesystem::path& p, const std::string& what) {
    if (p.empty()) out.push_back(what + ": no path given");
    else if (!std::filesystem::exists(m.resolve(p))) out.push_back(what + ": " + m.resolve(p).string());
  };
  if (metric == MetricId::external) {
    if (!m.scores) out.push_back("external metric selected but manifest has no 'scores' table");
    else need(*m.scores, "score table");
  }
  for (const auto& s : m.sources) {
    if (!s.synthetic) {
      need(s.reference, s.id + " reference");
      if (metric != MetricId::external)
        for (int q : m.qp_grid) {
          const auto it = s.coded.find(q);
          if (it == s.coded.end()) out.push_back(s.id + " coded clip at qp " + std::to_string(q) + ": not listed");
          else need(it->second, s.id + " coded qp " + std::to_string(q));
        }
    } else if (!m.synthetic) {
      out.push_back(s.id + ": synthetic recipe but manifest has no synthetic config");
    }
    need(s.annotations, s.id + " annotations");
    if (s.flags) need(*s.flags, s.id + " flags");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Per-source features

struct PipelineConfig {
  MetricId metric = MetricId::psnr_mapped;
  SegmentConfig segments;
  SlopeParams slope;
};

/// Returns one coded clip per requested qp.
using CodedClipSource = std::function<Clip(int qp)>;

/// 40-D features of one source at every grid qp.
inline std::vector<FeatureVector> extract_source_features(
    const std::string& source_id, const Clip& reference, const CodedClipSource& coded_at,
    const std::vector<int>& grid, const PipelineConfig& cfg, const ScoreTable* table = nullptr) {
  validate(cfg.slope);
  const SegmentLayout l = layout(reference.metadata, cfg.segments);
  ScoresByQp scores;
  for (int qp : grid) {
    if (cfg.metric == MetricId::external) {
      const ExternalScores ext{table, source_id, qp};
      scores[qp] = score_all(cfg.metric, reference, reference, l, &ext);
    } else {
      const Clip coded = coded_at(qp);
      scores[qp] = score_all(cfg.metric, reference, coded, l);
    }
  }
  std::vector<QualityScore> ref_scores(l.size(), QualityScore(100.0));
  if (cfg.metric == MetricId::external && table != nullptr && table->has(source_id, kReferenceQp))
    ref_scores = table->scores(source_id, kReferenceQp);
  const auto deg = degradation_features(scores, ref_scores, cfg.slope);
  const MaskingFeature mask = masking_feature(reference, l);
  std::vector<FeatureVector> out;
  out.reserve(grid.size());
  for (int qp : grid) out.push_back(assemble(deg.at(qp), mask, source_id, qp));
  return out;
}

// ---------------------------------------------------------------------------
// Feature cache: CSV `source_id,qp,x0..x39`, ordered by (source_id, qp).

inline std::string feature_cache_header() {
  std::string h = "source_id,qp";
  for (std::size_t j = 0; j < kFeatureDim; ++j) h += ",x" + std::to_string(j);
  return h;
}

inline void write_features(std::ostream& out, std::vector<FeatureVector> rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.source_id, a.qp) < std::tie(b.source_id, b.qp);
  });
  out << feature_cache_header() << '\n';
  for (const auto& r : rows) {
    out << r.source_id << ',' << r.qp;
    for (double v : r.x) out << ',' << csv::format_double(v);
    out << '\n';
  }
}

inline std::vector<FeatureVector> read_features(std::istream& in) {
  csv::expect_header(in, feature_cache_header(), "feature cache");
  std::vector<FeatureVector> out;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const std::string where = "feature cache line " + std::to_string(line_no);
    const auto f = csv::split(line);
    if (f.size() != kFeatureDim + 2) throw Error(ErrorKind::corrupt_file, where + ": wrong field count");
    FeatureVector v;
    v.source_id = std::string(f[0]);
    try {
      v.qp = static_cast<int>(csv::parse_int(f[1], where));
      for (std::size_t j = 0; j < kFeatureDim; ++j) v.x[j] = csv::parse_double(f[j + 2], where);
    } catch (const Error& e) {
      throw Error(ErrorKind::corrupt_file, e.what());
    }
    for (double x : v.x)
      if (!std::isfinite(x)) throw Error(ErrorKind::corrupt_file, where + ": non-finite value");
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct SourceData {
  std::string id;
  std::string resolution;
  std::vector<FeatureVector> features;
  JndAnnotationSet annotations;
  std::optional<GaussianJndModel> generating;
};

struct FoldPlan {
  int k = 5;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::string>> test;
  std::vector<std::vector<std::string>> train;
};

/// Seeded shuffle, then round-robin assignment so fold sizes differ by at
/// most one.
inline FoldPlan plan_folds(std::vector<std::string> ids, int k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorKind::configuration, "need at least 2 folds");
  if (ids.size() < static_cast<std::size_t>(k))
    throw Error(ErrorKind::configuration, std::to_string(ids.size()) + " sources cannot fill " +
                                              std::to_string(k) + " folds");
  std::sort(ids.begin(), ids.end());
  std::mt19937_64 rng(seed);
  for (std::size_t i = ids.size(); i > 1; --i) std::swap(ids[i - 1], ids[rng() % i]);
  FoldPlan plan{k, seed, std::vector<std::vector<std::string>>(static_cast<std::size_t>(k)),
                std::vector<std::vector<std::string>>(static_cast<std::size_t>(k))};
  for (std::size_t i = 0; i < ids.size(); ++i)
    plan.test[i % static_cast<std::size_t>(k)].push_back(ids[i]);
  for (int f = 0; f < k; ++f) {
    for (int g = 0; g < k; ++g)
      if (g != f)
        plan.train[static_cast<std::size_t>(f)].insert(plan.train[static_cast<std::size_t>(f)].end(),
                                                       plan.test[static_cast<std::size_t>(g)].begin(),
                                                       plan.test[static_cast<std::size_t>(g)].end());
    std::sort(plan.train[static_cast<std::size_t>(f)].begin(), plan.train[static_cast<std::size_t>(f)].end());
    std::sort(plan.test[static_cast<std::size_t>(f)].begin(), plan.test[static_cast<std::size_t>(f)].end());
  }
  return plan;
}

/// Mean absolute SUR difference over a shared qp grid.
inline double delta_sur(const SurCurve& predicted, const SurCurve& truth) {
  if (predicted.qps() != truth.qps())
    throw Error(ErrorKind::shape, "SUR curves are sampled on different qp grids");
  double s = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    s += std::abs(predicted.values()[i] - truth.values()[i]);
  return s / static_cast<double>(predicted.size());
}

/// |predicted - truth|, or nullopt when either JND lies beyond the grid.
inline std::optional<double> delta_qp(std::optional<double> predicted, std::optional<double> truth) {
  if (!predicted || !truth) return std::nullopt;
  return std::abs(*predicted - *truth);
}

enum class TruthSource { fitted_gaussian, empirical, generating };

inline const char* to_string(TruthSource t) {
  switch (t) {
    case TruthSource::fitted_gaussian: return "fitted_gaussian";
    case TruthSource::empirical: return "empirical";
    case TruthSource::generating: return "generating";
  }
  return "?";
}

inline TruthSource parse_truth_source(std::string_view s) {
  if (s == "fitted_gaussian" || s == "gaussian") return TruthSource::fitted_gaussian;
  if (s == "empirical") return TruthSource::empirical;
  if (s == "generating") return TruthSource::generating;
  throw Error(ErrorKind::configuration, "unknown truth source '" + std::string(s) + "'");
}

struct EvaluationConfig {
  std::vector<int> qp_grid;
  int folds = 5;
  std::uint64_t seed = 2017;
  bool grid_search = true;
  SvrGrid grid;
  int inner_folds = 4;
  SvrHyperParams svr;
  TruthSource truth = TruthSource::fitted_gaussian;
  double threshold = kDefaultJndThreshold;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct SourceResult {
  std::string id;
  std::string resolution;
  int fold = -1;
  double delta_sur = 0.0;
  std::optional<double> predicted_jnd;
  std::optional<double> truth_jnd;
  std::optional<double> delta_qp;
  SurCurve predicted;
  SurCurve truth;
};

struct ExcludedSource {
  std::string id;
  std::string reason;
};

struct EvaluationReport {
  std::vector<SourceResult> sources;  // sorted by id
  std::vector<ExcludedSource> excluded;
  std::vector<SvrHyperParams> fold_params;
  double mean_delta_sur = 0.0;
  double mean_delta_qp = 0.0;
  std::size_t qp_exclusions = 0;  // sources with a beyond-grid JND
  std::map<std::string, std::string> config;
};

namespace detail {

inline SurCurve truth_curve(const SourceData& s, const GaussianJndModel& fitted,
                            const EvaluationConfig& c) {
  switch (c.truth) {
    case TruthSource::fitted_gaussian: return gaussian_curve(fitted, c.qp_grid);
    case TruthSource::empirical: return empirical_curve(s.annotations, c.qp_grid);
    case TruthSource::generating: return gaussian_curve(*s.generating, c.qp_grid);
  }
  return {};
}

inline std::optional<double> truth_jnd(const SourceData& s, const GaussianJndModel& fitted,
                                       const SurCurve& curve, const EvaluationConfig& c) {
  switch (c.truth) {
    case TruthSource::fitted_gaussian: return gaussian_jnd(fitted, c.threshold);
    case TruthSource::generating: return gaussian_jnd(*s.generating, c.threshold);
    case TruthSource::empirical: return jnd_point(curve, c.threshold);
  }
  return std::nullopt;
}

inline std::map<std::string, std::string> echo(const EvaluationConfig& c) {
  std::string grid;
  for (int q : c.qp_grid) grid += (grid.empty() ? "" : " ") + std::to_string(q);
  return {{"folds", std::to_string(c.folds)},
          {"seed", std::to_string(c.seed)},
          {"grid_search", c.grid_search ? "on" : "off"},
          {"inner_folds", std::to_string(c.inner_folds)},
          {"svr_C", csv::format_double(c.svr.C)},
          {"svr_epsilon", csv::format_double(c.svr.epsilon)},
          {"svr_gamma", csv::format_double(c.svr.gamma)},
          {"svr_tolerance", csv::format_double(c.svr.tolerance)},
          {"truth", to_string(c.truth)},
          {"training_targets", "fitted_gaussian"},
          {"threshold", csv::format_double(c.threshold)},
          {"qp_grid", grid}};
}

}  // namespace detail

/// k-fold evaluation. Training targets are the fitted-Gaussian SUR at each
/// qp; each test source's predicted curve is compared against the truth
/// curve selected by `config.truth`.
inline EvaluationReport run_evaluation(std::span<const SourceData> data, const EvaluationConfig& config) {
  if (config.qp_grid.empty()) throw Error(ErrorKind::configuration, "empty qp grid");
  EvaluationReport report;
  report.config = detail::echo(config);

  // Validate everything up front; nothing is trained if an artifact is missing.
  std::string missing;
  std::map<std::string, GaussianJndModel> fitted;
  std::map<std::string, const SourceData*> by_id;
  for (const auto& s : data) {
    std::set<int> have;
    for (const auto& f : s.features) have.insert(f.qp);
    for (int q : config.qp_grid)
      if (!have.contains(q)) missing += " " + s.id + "@qp" + std::to_string(q);
    if (config.truth == TruthSource::generating && !s.generating)
      missing += " " + s.id + "(no generating model)";
    try {
      fitted[s.id] = fit_gaussian(s.annotations);
      by_id[s.id] = &s;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::degenerate_sample) throw;
      report.excluded.push_back({s.id, e.what()});
    }
  }
  if (!missing.empty()) throw Error(ErrorKind::missing_data, "evaluation inputs missing:" + missing);

  std::vector<std::string> ids;
  for (const auto& [id, _] : by_id) ids.push_back(id);
  const FoldPlan plan = plan_folds(ids, config.folds, config.seed);

  auto rows_for = [&](const std::vector<std::string>& src_ids, FeatureMatrix& x,
                      std::vector<double>& y, std::vector<int>& groups) {
    x = FeatureMatrix(kFeatureDim);
    int g = 0;
    for (const auto& id : src_ids) {
      const SourceData& s = *by_id.at(id);
      for (const auto& f : s.features) {
        if (std::find(config.qp_grid.begin(), config.qp_grid.end(), f.qp) == config.qp_grid.end()) continue;
        x.push_back(f.x);
        y.push_back(gaussian_sur(fitted.at(id), f.qp));
        groups.push_back(g);
      }
      ++g;
    }
  };

  // Folds are independent; each writes only its own slot.
  std::vector<std::vector<SourceResult>> per_fold(static_cast<std::size_t>(plan.k));
  report.fold_params.resize(static_cast<std::size_t>(plan.k));
  parallel_for(static_cast<std::size_t>(plan.k), [&](std::size_t fold) {
    FeatureMatrix x;
    std::vector<double> y;
    std::vector<int> groups;
    rows_for(plan.train[fold], x, y, groups);
    SvrHyperParams params = config.svr;
    if (config.grid_search) {
      const int inner = std::min<int>(config.inner_folds, static_cast<int>(plan.train[fold].size()));
      params = grid_search(x, y, groups, config.grid, config.svr, inner, config.seed + fold + 1).best;
    }
    report.fold_params[fold] = params;
    const SvrModel model = train(x, y, params);
    for (const auto& id : plan.test[fold]) {
      const SourceData& s = *by_id.at(id);
      SourceResult r;
      r.id = id;
      r.resolution = s.resolution;
      r.fold = static_cast<int>(fold);
      r.predicted = predict_sur_curve(model, s.features, config.qp_grid);
      r.truth = detail::truth_curve(s, fitted.at(id), config);
      r.delta_sur = delta_sur(r.predicted, r.truth);
      r.predicted_jnd = jnd_point(r.predicted, config.threshold);
      r.truth_jnd = detail::truth_jnd(s, fitted.at(id), r.truth, config);
      r.delta_qp = delta_qp(r.predicted_jnd, r.truth_jnd);
      per_fold[fold].push_back(std::move(r));
    }
  }, config.threads);
  for (auto& v : per_fold)
    for (auto& r : v) report.sources.push_back(std::move(r));
  std::sort(report.sources.begin(), report.sources.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });

  double sur_sum = 0, qp_sum = 0;
  std::size_t qp_n = 0;
  for (const auto& r : report.sources) {
    sur_sum += r.delta_sur;
    if (r.delta_qp) {
      qp_sum += *r.delta_qp;
      ++qp_n;
    } else {
      ++report.qp_exclusions;
    }
  }
  report.mean_delta_sur = report.sources.empty() ? 0.0 : sur_sum / static_cast<double>(report.sources.size());
  report.mean_delta_qp = qp_n == 0 ? std::nan("") : qp_sum / static_cast<double>(qp_n);
  return report;
}

// ---------------------------------------------------------------------------
// Report files

inline std::string format_optional(const std::optional<double>& v) {
  return v ? csv::format_double(*v) : std::string("beyond_grid");
}

inline void write_per_source_csv(std::ostream& out, const EvaluationReport& r) {
  out << "source_id,resolution,fold,delta_sur,predicted_jnd,truth_jnd,delta_qp\n";
  for (const auto& s : r.sources)
    out << s.id << ',' << s.resolution << ',' << s.fold << ',' << csv::format_double(s.delta_sur)
        << ',' << format_optional(s.predicted_jnd) << ',' << format_optional(s.truth_jnd) << ','
        << (s.delta_qp ? csv::format_double(*s.delta_qp) : std::string("excluded")) << '\n';
}

/// Table layout: one column per resolution, rows dSUR and dQP (means over
/// sources), plus bookkeeping rows.
inline void write_aggregate_csv(std::ostream& out, const EvaluationReport& r) {
  std::map<std::string, std::vector<const SourceResult*>> by_res;
  for (const auto& s : r.sources) by_res[s.resolution.empty() ? "all" : s.resolution].push_back(&s);
  out << "metric";
  for (const auto& [res, _] : by_res) out << ',' << res;
  out << '\n';
  out << "dSUR";
  for (const auto& [res, v] : by_res) {
    double sum = 0;
    for (const auto* s : v) sum += s->delta_sur;
    out << ',' << csv::format_double(sum / static_cast<double>(v.size()));
  }
  out << "\ndQP";
  for (const auto& [res, v] : by_res) {
    double sum = 0;
    std::size_t n = 0;
    for (const auto* s : v)
      if (s->delta_qp) { sum += *s->delta_qp; ++n; }
    out << ',' << (n ? csv::format_double(sum / static_cast<double>(n)) : std::string("nan"));
  }
  out << "\nsources";
  for (const auto& [res, v] : by_res) out << ',' << v.size();
  out << "\nqp_excluded";
  for (const auto& [res, v] : by_res)
    out << ',' << std::count_if(v.begin(), v.end(), [](const auto* s) { return !s->delta_qp; });
  out << '\n';
}

inline void write_curves_csv(std::ostream& out, const EvaluationReport& r) {
  out << "source_id,qp,predicted_sur,truth_sur\n";
  for (const auto& s : r.sources)
    for (std::size_t i = 0; i < s.predicted.size(); ++i)
      out << s.id << ',' << s.predicted.qps()[i] << ',' << csv::format_double(s.predicted.values()[i])
          << ',' << csv::format_double(s.truth.values()[i]) << '\n';
}

namespace svg {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Canvas {
  double width = 480, height = 480, margin = 50;
  double x0, x1, y0, y1;

  double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
  double py(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }

  std::string frame(const std::string& title, const std::string& xlabel, const std::string& ylabel) const {
    std::ostringstream o;
    o << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << width - 2 * margin
      << "\" height=\"" << height - 2 * margin << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
      const double xv = x0 + (x1 - x0) * i / 5.0, yv = y0 + (y1 - y0) * i / 5.0;
      o << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(height - margin + 16)
        << "\" font-size=\"11\" text-anchor=\"middle\">" << num(xv) << "</text>\n";
      o << "<text x=\"" << num(margin - 6) << "\" y=\"" << num(py(yv) + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << num(yv) << "</text>\n";
    }
    o << "<text x=\"" << width / 2 << "\" y=\"20\" font-size=\"14\" text-anchor=\"middle\">" << title
      << "</text>\n";
    o << "<text x=\"" << width / 2 << "\" y=\"" << height - 10
      << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
    o << "<text x=\"14\" y=\"" << height / 2 << "\" font-size=\"12\" text-anchor=\"middle\" "
      << "transform=\"rotate(-90 14 " << height / 2 << ")\">" << ylabel << "</text>\n";
    return o.str();
  }
};

}  // namespace svg

/// Predicted vs. ground-truth JND scatter with the 45-degree line.
inline void write_scatter_svg(std::ostream& out, const EvaluationReport& r) {
  double lo = kMaxQp, hi = 0;
  for (const auto& s : r.sources)
    if (s.delta_qp) {
      lo = std::min({lo, *s.predicted_jnd, *s.truth_jnd});
      hi = std::max({hi, *s.predicted_jnd, *s.truth_jnd});
    }
  if (lo >= hi) { lo = 0; hi = kMaxQp; }
  lo = std::floor(lo) - 1;
  hi = std::ceil(hi) + 1;
  const svg::Canvas c{480, 480, 50, lo, hi, lo, hi};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\">\n";
  out << c.frame("Predicted vs. ground-truth JND", "ground-truth JND (qp)", "predicted JND (qp)");
  out << "<line x1=\"" << svg::num(c.px(lo)) << "\" y1=\"" << svg::num(c.py(lo)) << "\" x2=\""
      << svg::num(c.px(hi)) << "\" y2=\"" << svg::num(c.py(hi)) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  for (const auto& s : r.sources)
    if (s.delta_qp)
      out << "<circle cx=\"" << svg::num(c.px(*s.truth_jnd)) << "\" cy=\"" << svg::num(c.py(*s.predicted_jnd))
          << "\" r=\"3\" fill=\"steelblue\"><title>" << s.id << "</title></circle>\n";
  out << "</svg>\n";
}

/// Predicted (solid) and ground-truth (dashed) SUR curves for up to
/// `max_sources` sources.
inline void write_curves_svg(std::ostream& out, const EvaluationReport& r, std::size_t max_sources = 6) {
  static const char* colors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"};
  if (r.sources.empty()) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"400\"/>\n";
    return;
  }
  const auto& qps = r.sources.front().predicted.qps();
  const svg::Canvas c{560, 400, 50, double(qps.front()), double(qps.back()), 0.0, 1.0};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"400\">\n";
  out << c.frame("SUR curves: predicted (solid) vs. ground truth (dashed)", "qp", "SUR");
  for (std::size_t i = 0; i < std::min(max_sources, r.sources.size()); ++i) {
    const auto& s = r.sources[i];
    const char* col = colors[i % 6];
    for (int pass = 0; pass < 2; ++pass) {
      const SurCurve& curve = pass == 0 ? s.predicted : s.truth;
      out << "<polyline fill=\"none\" stroke=\"" << col << "\"" << (pass ? " stroke-dasharray=\"5 3\"" : "")
          << " points=\"";
      for (std::size_t k = 0; k < curve.size(); ++k)
        out << svg::num(c.px(curve.qps()[k])) << ',' << svg::num(c.py(curve.values()[k])) << ' ';
      out << "\"><title>" << s.id << "</title></polyline>\n";
    }
  }
  out << "</svg>\n";
}

}  // namespace surjnd
