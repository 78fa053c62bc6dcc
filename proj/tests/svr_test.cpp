#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "surjnd/svr.hpp"
#include "svr_oracle.hpp"

using namespace surjnd;

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

struct Problem {
  FeatureMatrix x;
  std::vector<double> y;
};

Problem random_problem(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g(0, 1);
  Problem p{FeatureMatrix(n, d), std::vector<double>(n)};
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) {
      p.x(i, j) = g(rng);
      s += p.x(i, j) * (j % 2 ? -0.5 : 1.0);
    }
    p.y[i] = std::tanh(s) + 0.1 * g(rng);
  }
  return p;
}

double sinc(double x) { return x == 0 ? 1.0 : std::sin(std::numbers::pi * x) / (std::numbers::pi * x); }

}  // namespace

TEST(FeatureScaler, Examples) {
  FeatureMatrix x(2, 1);
  x(0, 0) = 0;
  x(1, 0) = 2;
  const auto s = fit_scaler(x);
  EXPECT_DOUBLE_EQ(s.mean()[0], 1.0);
  EXPECT_DOUBLE_EQ(s.scale()[0], std::sqrt(2.0));

  FeatureMatrix same(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    same(i, 0) = 4.0;
    same(i, 1) = static_cast<double>(i);
  }
  const auto t = fit_scaler(same);
  EXPECT_EQ(t.scale()[0], 1.0);
  EXPECT_EQ(t.transform(std::vector<double>{5.0, 1.0})[0], 1.0);

  FeatureMatrix tiny(2, 1);
  tiny(1, 0) = 0.01;
  EXPECT_EQ(fit_scaler(tiny).scale()[0], kMinFeatureScale);
  EXPECT_EQ(kind_of([] { fit_scaler(FeatureMatrix(1, 3)); }), ErrorKind::insufficient_data);
  EXPECT_EQ(kind_of([&] { s.transform(std::vector<double>{1.0, 2.0}); }), ErrorKind::shape);
}

TEST(Svr, ParameterValidation) {
  Problem p{FeatureMatrix(2, 1), {0.0, 1.0}};
  p.x(1, 0) = 1;
  EXPECT_EQ(kind_of([&] { train(p.x, p.y, {0.0, 0.1, 1.0}); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { train(p.x, p.y, {1.0, -0.1, 1.0}); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { train(p.x, p.y, {1.0, 0.1, 0.0}); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([&] { train(FeatureMatrix(1), std::vector<double>{}, {}); }), ErrorKind::insufficient_data);
  p.x(0, 0) = std::nan("");
  EXPECT_EQ(kind_of([&] { train(p.x, p.y, {}); }), ErrorKind::numeric);
}

// SMO against the dense projected-gradient solve: objective agreement,
// box and equality constraints, KKT residuals.
TEST(SvrProperty, MatchesDenseQpOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 19;
    const std::size_t d = 1 + rng() % 5;
    const auto p = random_problem(rng, n, d);
    SvrHyperParams prm;
    prm.C = std::vector<double>{0.1, 0.5, 1, 3, 10}[rng() % 5];
    prm.epsilon = std::vector<double>{0.0, 0.01, 0.05, 0.2}[rng() % 4];
    prm.gamma = std::vector<double>{0.05, 0.2, 1.0}[rng() % 3];
    prm.tolerance = 1e-10;
    const FeatureScaler scaler = fit_scaler(p.x);
    const FeatureMatrix xs = scaler.transform(p.x);
    const auto m = train_scaled(xs, p.y, prm, scaler);
    ASSERT_TRUE(m.report.converged);
    const auto oracle = test::solve_qp_dense(kernel_matrix(xs, prm.gamma), p.y, prm.C, prm.epsilon);
    const double obj = dual_objective(m, xs, p.y);
    ASSERT_NEAR(obj, oracle.objective, 1e-6) << trial;
    ASSERT_NEAR(obj, m.report.objective, 1e-9);
    const auto coef = training_coefficients(m, xs);
    double sum = 0;
    for (double c : coef) {
      ASSERT_LE(std::abs(c), prm.C * (1 + 1e-12));
      sum += c;
    }
    ASSERT_NEAR(sum, 0.0, 1e-9);
    ASSERT_LE(max_kkt_violation(m, xs, p.y), prm.tolerance * 10);
  }
}

TEST(Svr, KktWithinDefaultTolerance) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_problem(rng, 60, 6);
    const auto m = train(p.x, p.y, {});
    const auto xs = m.scaler.transform(p.x);
    EXPECT_LE(max_kkt_violation(m, xs, p.y), m.params.tolerance);
  }
}

TEST(Svr, SincRecoveryWithGridSearch) {
  FeatureMatrix x(1);
  std::vector<double> y;
  std::vector<int> groups;
  for (int i = 0; i < 50; ++i) {
    const double v = -3.0 + 6.0 * i / 49.0;
    x.push_back(std::vector<double>{v});
    y.push_back(sinc(v));
    groups.push_back(i);
  }
  SvrGrid grid;
  grid.gamma = {0.5, 1.0, 2.0, 4.0};
  grid.epsilon = {0.001, 0.005, 0.01};
  const auto gs = grid_search(x, y, groups, grid, {}, 5, 1);
  const auto m = train(x, y, gs.best);
  double se = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double d = predict(m, x.row(i)) - y[i];
    se += d * d;
  }
  EXPECT_LE(std::sqrt(se / 50), 0.02);
}

TEST(GridSearch, GroupFoldsKeepGroupsTogether) {
  std::vector<int> groups;
  for (int g = 0; g < 12; ++g)
    for (int r = 0; r < 5; ++r) groups.push_back(g);
  const auto folds = group_folds(groups, 4, 3);
  ASSERT_EQ(folds.size(), 4u);
  std::vector<int> fold_of(12, -1);
  std::size_t total = 0;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    EXPECT_EQ(folds[f].size(), 15u);
    total += folds[f].size();
    for (auto r : folds[f]) {
      const int g = groups[r];
      EXPECT_TRUE(fold_of[g] == -1 || fold_of[g] == static_cast<int>(f));
      fold_of[g] = static_cast<int>(f);
    }
  }
  EXPECT_EQ(total, groups.size());
  EXPECT_EQ(group_folds(groups, 4, 3), folds);
  EXPECT_EQ(kind_of([&] { group_folds(groups, 13, 3); }), ErrorKind::configuration);
}

// Property: a saved and reloaded model predicts bit-identically.
TEST(SvrProperty, SaveLoadPredictsIdentically) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t d = 1 + rng() % 40;
    const auto p = random_problem(rng, 3 + rng() % 30, d);
    SvrHyperParams prm;
    prm.C = 0.5 + static_cast<double>(rng() % 100);
    prm.gamma = 1.0 / static_cast<double>(1 + rng() % 40);
    prm.epsilon = static_cast<double>(rng() % 10) / 100.0;
    auto m = train(p.x, p.y, prm);
    m.metadata["seed"] = std::to_string(trial);
    m.metadata["note"] = "two words";
    std::stringstream buf;
    save_model(m, buf);
    const auto back = load_model(buf);
    ASSERT_EQ(back.metadata, m.metadata);
    ASSERT_EQ(back.params, m.params);
    ASSERT_EQ(back.scaler, m.scaler);
    ASSERT_EQ(back.support_vectors, m.support_vectors);
    std::normal_distribution<double> g(0, 2);
    for (int k = 0; k < 5; ++k) {
      std::vector<double> q(d);
      for (auto& v : q) v = g(rng);
      ASSERT_EQ(predict(back, q), predict(m, q));
    }
  }
}

TEST(SvrPersistence, LoadErrors) {
  std::mt19937_64 rng(1);
  const auto p = random_problem(rng, 10, 3);
  const auto m = train(p.x, p.y, {});
  std::stringstream buf;
  save_model(m, buf);
  const std::string good = buf.str();

  std::istringstream version(std::string("surjnd-svr-model 2\n") + good.substr(good.find('\n') + 1));
  EXPECT_EQ(kind_of([&] { load_model(version); }), ErrorKind::version);
  std::istringstream truncated(good.substr(0, good.size() / 2));
  EXPECT_EQ(kind_of([&] { load_model(truncated); }), ErrorKind::corrupt_file);
  std::istringstream garbage("hello\n");
  EXPECT_EQ(kind_of([&] { load_model(garbage); }), ErrorKind::corrupt_file);
  std::string bad_num = good;
  bad_num.replace(bad_num.find("bias ") + 5, 3, "zz ");
  std::istringstream bn(bad_num);
  EXPECT_EQ(kind_of([&] { load_model(bn); }), ErrorKind::corrupt_file);

  EXPECT_EQ(kind_of([&] { predict(m, std::vector<double>{1.0}); }), ErrorKind::shape);
}

TEST(SvrCurve, PredictSurCurveProjectsAndReportsGaps) {
  FeatureMatrix x(1);
  std::vector<double> y;
  for (int q = 0; q <= 50; q += 2) {
    x.push_back(std::vector<double>{static_cast<double>(q)});
    y.push_back(std::clamp(1.0 - q / 40.0, 0.0, 1.0));
  }
  const auto m = train(x, y, {10.0, 0.01, 0.5});
  std::vector<FeatureVector> feats;
  for (int q = 0; q <= 50; q += 2) {
    FeatureVector f;
    f.qp = q;
    f.x[0] = q;
    feats.push_back(f);
  }
  // The model is 1-D; wrap it in a 40-D scaler that ignores the rest.
  SvrModel wide = m;
  std::vector<double> mean(kFeatureDim, 0.0), scale(kFeatureDim, 1.0);
  mean[0] = m.scaler.mean()[0];
  scale[0] = m.scaler.scale()[0];
  wide.scaler = FeatureScaler(mean, scale);
  FeatureMatrix sv(kFeatureDim);
  for (std::size_t s = 0; s < m.coefficients.size(); ++s) {
    std::vector<double> r(kFeatureDim, 0.0);
    r[0] = m.support_vectors(s, 0);
    sv.push_back(r);
  }
  wide.support_vectors = sv;
  const auto grid = qp_grid(0, 50, 2);
  const auto c = predict_sur_curve(wide, feats, grid);
  EXPECT_EQ(c.provenance(), CurveProvenance::predicted);
  EXPECT_TRUE(is_non_increasing(c.values()));
  for (double v : c.values()) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  feats.erase(feats.begin() + 3);
  try {
    predict_sur_curve(wide, feats, grid);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::missing_data);
    EXPECT_NE(std::string(e.what()).find(" 6"), std::string::npos);
  }
}
