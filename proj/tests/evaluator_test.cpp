#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "surjnd/dataset.hpp"
#include "surjnd/evaluator.hpp"

using namespace surjnd;
namespace fs = std::filesystem;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::io;
}

// Sources whose features encode (qp, JND mean) directly, with subjects drawn
// from N(mean, sd).
std::vector<SourceData> toy_sources(int n, std::uint64_t seed, const std::vector<int>& grid) {
  std::mt19937_64 rng(seed);
  std::vector<SourceData> out;
  for (int s = 0; s < n; ++s) {
    SourceData d;
    d.id = "src" + std::to_string(100 + s);
    d.resolution = s % 2 ? "1280x720" : "640x360";
    const double mean = 18.0 + 16.0 * (s + 0.5) / n;
    d.generating = GaussianJndModel{mean, 3.0};
    std::normal_distribution<double> g(mean, 3.0);
    d.annotations.source_id = d.id;
    for (int m = 0; m < 30; ++m) {
      d.annotations.subject_ids.push_back("u" + std::to_string(m));
      d.annotations.first_jnd.push_back(static_cast<int>(std::clamp(std::lround(g(rng)), 1L, 51L)));
    }
    for (int q : grid) {
      FeatureVector f;
      f.source_id = d.id;
      f.qp = q;
      f.x[0] = q / 50.0;
      f.x[1] = mean / 50.0;
      f.x[2] = (q - mean) / 50.0;
      d.features.push_back(f);
    }
    out.push_back(std::move(d));
  }
  return out;
}

EvaluationConfig fast_config(const std::vector<int>& grid) {
  EvaluationConfig c;
  c.qp_grid = grid;
  c.grid_search = false;
  c.svr = {10.0, 0.01, 1.0};
  c.threads = 1;
  return c;
}

double q_oracle(double z) { return 0.5 * (1.0 - std::erf(z / std::sqrt(2.0))); }

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("surjnd_eval_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

SyntheticConfig tiny_synthetic() {
  SyntheticConfig c;
  c.sources = 4;
  c.width = 64;
  c.height = 64;
  c.duration = 1.0;
  c.frame_rate = {8, 1};
  c.qp_grid = {0, 2, 4, 6};
  return c;
}

PipelineConfig tiny_pipeline() {
  PipelineConfig p;
  p.segments = {32, 32, 0.5, 0.5};
  return p;
}

}  // namespace

TEST(PlanFolds, Examples) {
  std::vector<std::string> ids;
  for (int i = 0; i < 220; ++i) ids.push_back("v" + std::to_string(i));
  const auto p = plan_folds(ids, 5, 2017);
  for (const auto& t : p.test) EXPECT_EQ(t.size(), 44u);
  for (const auto& t : p.train) EXPECT_EQ(t.size(), 176u);
  EXPECT_EQ(plan_folds(ids, 5, 2017).test, p.test);
  const auto ten = plan_folds(std::vector<std::string>(ids.begin(), ids.begin() + 10), 5, 1);
  for (const auto& t : ten.test) EXPECT_EQ(t.size(), 2u);
  EXPECT_EQ(kind_of([&] { plan_folds({"a", "b"}, 5, 1); }), ErrorKind::configuration);
}

// Property: folds partition the ids, sizes differ by at most one, train is
// the complement of test, and the plan ignores input order.
TEST(PlanFoldsProperty, Partition) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 150; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 9);
    const std::size_t n = static_cast<std::size_t>(k) + rng() % 100;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < n; ++i) ids.push_back("s" + std::to_string(rng() % 100000) + "_" + std::to_string(i));
    const std::uint64_t seed = rng();
    const auto p = plan_folds(ids, k, seed);
    std::multiset<std::string> seen;
    std::size_t lo = n, hi = 0;
    for (int f = 0; f < k; ++f) {
      const auto& t = p.test[static_cast<std::size_t>(f)];
      lo = std::min(lo, t.size());
      hi = std::max(hi, t.size());
      seen.insert(t.begin(), t.end());
      std::set<std::string> all(t.begin(), t.end());
      for (const auto& id : p.train[static_cast<std::size_t>(f)]) {
        ASSERT_FALSE(std::count(t.begin(), t.end(), id));
        all.insert(id);
      }
      ASSERT_EQ(all.size(), n);
    }
    ASSERT_EQ(seen, std::multiset<std::string>(ids.begin(), ids.end()));
    ASSERT_LE(hi - lo, 1u);
    auto shuffled = ids;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    ASSERT_EQ(plan_folds(shuffled, k, seed).test, p.test);
  }
}

TEST(DeltaSur, Examples) {
  const auto grid = qp_grid(0, 50, 2);
  const auto g = gaussian_curve({27, 3}, grid);
  EXPECT_EQ(delta_sur(g, g), 0.0);

  std::vector<double> a(grid.size(), 0.5), b(grid.size(), 0.54);
  EXPECT_NEAR(delta_sur(SurCurve(grid, a, CurveProvenance::empirical), SurCurve(grid, b, CurveProvenance::empirical)),
              0.04, 1e-15);

  const auto shifted = gaussian_curve({29, 3}, grid);
  double oracle = 0;
  for (int q : grid) oracle += std::abs(q_oracle((q - 29.0) / 3.0) - q_oracle((q - 27.0) / 3.0));
  oracle /= static_cast<double>(grid.size());
  EXPECT_NEAR(delta_sur(shifted, g), oracle, 1e-14);

  EXPECT_EQ(kind_of([&] { delta_sur(g, gaussian_curve({27, 3}, qp_grid(1, 51, 2))); }), ErrorKind::shape);
}

TEST(DeltaQp, Examples) {
  EXPECT_NEAR(*delta_qp(24.9, 25.0), 0.1, 1e-12);
  EXPECT_EQ(*delta_qp(30.0, 30.0), 0.0);
  EXPECT_FALSE(delta_qp(std::nullopt, 25.0).has_value());
  EXPECT_FALSE(delta_qp(25.0, std::nullopt).has_value());
}

TEST(Evaluation, SingleFoldZeroNoiseInterpolates) {
  // Train and test on the same sources with exact Gaussian targets.
  const auto grid = qp_grid(0, 50, 2);
  const auto data = toy_sources(10, 1, grid);
  FeatureMatrix x(kFeatureDim);
  std::vector<double> y;
  for (const auto& s : data)
    for (const auto& f : s.features) {
      x.push_back(f.x);
      y.push_back(gaussian_sur(*s.generating, f.qp));
    }
  const SvrHyperParams prm{100.0, 0.01, 1.0};
  const auto m = train(x, y, prm);
  for (const auto& s : data) {
    const auto pred = predict_sur_curve(m, s.features, grid);
    EXPECT_LE(delta_sur(pred, gaussian_curve(*s.generating, grid)), prm.epsilon + 0.01) << s.id;
  }
}

TEST(Evaluation, AggregatesRecomputeAndRunIsDeterministic) {
  const auto grid = qp_grid(0, 50, 2);
  auto data = toy_sources(15, 4, grid);
  auto c = fast_config(grid);
  const auto r = run_evaluation(data, c);
  ASSERT_EQ(r.sources.size(), 15u);
  double sur = 0, qp = 0;
  std::size_t n = 0;
  for (const auto& s : r.sources) {
    sur += s.delta_sur;
    EXPECT_NEAR(s.delta_sur, delta_sur(s.predicted, s.truth), 0);
    if (s.delta_qp) {
      qp += *s.delta_qp;
      ++n;
    }
  }
  EXPECT_DOUBLE_EQ(r.mean_delta_sur, sur / 15);
  EXPECT_DOUBLE_EQ(r.mean_delta_qp, qp / static_cast<double>(n));
  EXPECT_EQ(r.qp_exclusions, 15 - n);
  EXPECT_LT(r.mean_delta_sur, 0.1);

  std::ostringstream a1, a2, p1, p2;
  write_aggregate_csv(a1, r);
  write_per_source_csv(p1, r);
  c.threads = 3;
  const auto again = run_evaluation(data, c);
  write_aggregate_csv(a2, again);
  write_per_source_csv(p2, again);
  EXPECT_EQ(a1.str(), a2.str());
  EXPECT_EQ(p1.str(), p2.str());

  // Aggregate table: one column per resolution.
  std::istringstream in(a1.str());
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "metric,1280x720,640x360");
}

TEST(Evaluation, GridSearchRunIsDeterministic) {
  const auto grid = qp_grid(0, 50, 5);
  const auto data = toy_sources(10, 5, grid);
  auto c = fast_config(grid);
  c.grid_search = true;
  c.grid.C = {1, 10};
  c.grid.gamma = {0.5, 1.0};
  c.grid.epsilon = {0.01};
  const auto a = run_evaluation(data, c);
  const auto b = run_evaluation(data, c);
  std::ostringstream sa, sb;
  write_per_source_csv(sa, a);
  write_per_source_csv(sb, b);
  EXPECT_EQ(sa.str(), sb.str());
  for (std::size_t f = 0; f < a.fold_params.size(); ++f) EXPECT_EQ(a.fold_params[f], b.fold_params[f]);
}

TEST(Evaluation, DegenerateSourcesExcluded) {
  const auto grid = qp_grid(0, 50, 2);
  auto data = toy_sources(11, 6, grid);
  data.back().annotations.first_jnd.assign(30, 25);
  const auto r = run_evaluation(data, fast_config(grid));
  ASSERT_EQ(r.excluded.size(), 1u);
  EXPECT_EQ(r.excluded[0].id, data.back().id);
  EXPECT_EQ(r.sources.size(), 10u);
}

TEST(Evaluation, MissingInputsAbortBeforeTraining) {
  const auto grid = qp_grid(0, 50, 2);
  auto data = toy_sources(10, 7, grid);
  data[3].features.erase(data[3].features.begin() + 5);
  try {
    run_evaluation(data, fast_config(grid));
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_data);
    EXPECT_NE(std::string(e.what()).find(data[3].id + "@qp10"), std::string::npos) << e.what();
  }
  auto cfg = fast_config(grid);
  cfg.folds = 20;
  EXPECT_EQ(kind_of([&] { run_evaluation(toy_sources(10, 7, grid), cfg); }), ErrorKind::configuration);
}

TEST(Evaluation, TruthModes) {
  EXPECT_EQ(parse_truth_source("empirical"), TruthSource::empirical);
  EXPECT_EQ(parse_truth_source("generating"), TruthSource::generating);
  EXPECT_EQ(parse_truth_source("fitted_gaussian"), TruthSource::fitted_gaussian);
  EXPECT_EQ(kind_of([] { parse_truth_source("median"); }), ErrorKind::configuration);
  const auto grid = qp_grid(0, 50, 2);
  auto data = toy_sources(10, 8, grid);
  auto c = fast_config(grid);
  c.truth = TruthSource::empirical;
  const auto r = run_evaluation(data, c);
  for (const auto& s : r.sources) EXPECT_EQ(s.truth.provenance(), CurveProvenance::empirical);
  c.truth = TruthSource::generating;
  data[0].generating.reset();
  EXPECT_EQ(kind_of([&] { run_evaluation(data, c); }), ErrorKind::missing_data);
}

TEST(Reports, CsvAndSvgWriters) {
  const auto grid = qp_grid(0, 50, 2);
  const auto r = run_evaluation(toy_sources(10, 9, grid), fast_config(grid));
  std::ostringstream curves, scatter, overlay, per;
  write_curves_csv(curves, r);
  write_scatter_svg(scatter, r);
  write_curves_svg(overlay, r);
  write_per_source_csv(per, r);
  const std::string text = curves.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), static_cast<long>(1 + 10 * grid.size()));
  EXPECT_NE(scatter.str().find("<svg"), std::string::npos);
  EXPECT_NE(overlay.str().find("</svg>"), std::string::npos);
  EXPECT_EQ(per.str().substr(0, per.str().find('\n')),
            "source_id,resolution,fold,delta_sur,predicted_jnd,truth_jnd,delta_qp");
}

TEST(FeatureCache, WriteReadRoundTripAndCorruption) {
  std::vector<FeatureVector> rows(3);
  for (int i = 0; i < 3; ++i) {
    rows[static_cast<std::size_t>(i)].source_id = "b";
    rows[static_cast<std::size_t>(i)].qp = 10 - 2 * i;
    for (std::size_t j = 0; j < kFeatureDim; ++j) rows[static_cast<std::size_t>(i)].x[j] = 1.0 / (3.0 + static_cast<double>(i + j));
  }
  std::stringstream buf;
  write_features(buf, rows);
  const auto back = read_features(buf);
  ASSERT_EQ(back.size(), 3u);
  EXPECT_EQ(back[0].qp, 6);
  EXPECT_EQ(back[2].x, rows[0].x);

  std::istringstream bad(feature_cache_header() + "\nb,4,1,2\n");
  EXPECT_EQ(kind_of([&] { read_features(bad); }), ErrorKind::corrupt_file);
}

TEST(Manifest, RoundTripAndErrors) {
  const auto dir = scratch("manifest");
  const auto ds = generate_synthetic(tiny_synthetic(), 3);
  const auto m = write_synthetic_dataset(ds, dir, false);
  const auto back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(to_json(back), to_json(m));
  EXPECT_EQ(back.sources.size(), 4u);
  EXPECT_TRUE(missing_artifacts(back, MetricId::psnr_mapped).empty());
  EXPECT_FALSE(missing_artifacts(back, MetricId::external).empty());

  std::ofstream(dir / "bad.json") << R"({"format": "surjnd-manifest", "version": 9, "qp_grid": [1], "sources": []})";
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "bad.json"); }), ErrorKind::version);
  std::ofstream(dir / "bad2.json") << R"({"format": "other"})";
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "bad2.json"); }), ErrorKind::format);
  std::ofstream(dir / "bad3.json") << "{ not json";
  EXPECT_EQ(kind_of([&] { load_manifest(dir / "bad3.json"); }), ErrorKind::format);
  fs::remove_all(dir);
}

TEST(FeatureCache, IdempotentAndRepairsCorruptEntries) {
  const auto dir = scratch("cache");
  const auto m = write_synthetic_dataset(generate_synthetic(tiny_synthetic(), 5), dir, false);
  ExtractionOptions opt;
  opt.pipeline = tiny_pipeline();
  opt.cache_dir = dir / "cache";
  opt.threads = 1;
  CacheStats st;
  const auto first = extract_dataset_features(m, opt, &st);
  EXPECT_EQ(st.computed, 4u);
  std::ifstream f0(dir / "cache" / "syn001.features.csv");
  const std::string bytes((std::istreambuf_iterator<char>(f0)), {});

  const auto second = extract_dataset_features(m, opt, &st);
  EXPECT_EQ(st.fresh, 4u);
  EXPECT_EQ(st.computed, 0u);

  std::ofstream(dir / "cache" / "syn001.features.csv", std::ios::app) << "syn001,4,garbage\n";
  const auto third = extract_dataset_features(m, opt, &st);
  EXPECT_EQ(st.repaired, 1u);
  EXPECT_EQ(st.fresh, 3u);
  std::ifstream f1(dir / "cache" / "syn001.features.csv");
  EXPECT_EQ(std::string((std::istreambuf_iterator<char>(f1)), {}), bytes);
  for (const auto& [id, rows] : first) {
    ASSERT_EQ(rows.size(), third.at(id).size());
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].x, third.at(id)[i].x);
  }

  // A changed pipeline invalidates every entry.
  opt.pipeline.slope.p = 0.5;
  extract_dataset_features(m, opt, &st);
  EXPECT_EQ(st.computed, 4u);
  fs::remove_all(dir);
}

TEST(FeatureCache, MaterializedMatchesOnDemand) {
  const auto dir = scratch("materialized");
  const auto ds = generate_synthetic(tiny_synthetic(), 6);
  const auto a = write_synthetic_dataset(ds, dir / "a", false);
  const auto b = write_synthetic_dataset(ds, dir / "b", true);
  ExtractionOptions opt;
  opt.pipeline = tiny_pipeline();
  opt.threads = 1;
  const auto fa = extract_dataset_features(a, opt);
  const auto fb = extract_dataset_features(b, opt);
  for (const auto& [id, rows] : fa)
    for (std::size_t i = 0; i < rows.size(); ++i) EXPECT_EQ(rows[i].x, fb.at(id)[i].x);
  fs::remove(dir / "b" / b.sources[0].coded.at(4));
  EXPECT_EQ(kind_of([&] { extract_dataset_features(b, opt); }), ErrorKind::missing_data);
  fs::remove_all(dir);
}

TEST(ExternalScores, TablePathFeedsDegradationFeature) {
  // One 64x64 source, 32x32 segments: a 3x3x2 layout. The table gives
  // every segment score 100 - 3 qp, so each delta is 3 qp.
  const auto dir = scratch("external");
  SyntheticConfig sc = tiny_synthetic();
  sc.sources = 1;
  auto m = write_synthetic_dataset(generate_synthetic(sc, 8), dir, true);
  const Clip ref = load_reference(m, m.sources[0]);
  const auto l = layout(ref.metadata, tiny_pipeline().segments);
  {
    std::ofstream out(dir / "scores.csv");
    out << "clip_id,qp,w,h,t,score\n";
    for (int q : m.qp_grid)
      for (std::size_t i = 0; i < l.size(); ++i) {
        const auto idx = l.index_at(i);
        out << m.sources[0].id << ',' << q << ',' << idx.w << ',' << idx.h << ',' << idx.t << ','
            << 100 - 3 * q << '\n';
      }
  }
  m.scores = "scores.csv";
  ExtractionOptions opt;
  opt.pipeline = tiny_pipeline();
  opt.pipeline.metric = MetricId::external;
  opt.threads = 1;
  const auto f = extract_dataset_features(m, opt).at(m.sources[0].id);
  for (const auto& v : f) {
    const double delta = 3.0 * v.qp;
    for (int n = 1; n <= 20; ++n) EXPECT_EQ(v.x[static_cast<std::size_t>(n - 1)], delta <= 2.0 * n ? 1.0 : 0.0);
  }
  fs::remove_all(dir);
}
