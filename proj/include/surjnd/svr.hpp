#pragma once

// epsilon-SVR with an RBF kernel, trained by sequential minimal optimisation
// on the 2l-variable dual
//
//   min  1/2 b'Qb + p'b   s.t.  y'b = 0,  0 <= b <= C
//
// with b = [alpha; alpha*], y = [+1; -1], Q_st = y_s y_t k(x_s, x_t) and
// p = [eps - z; eps + z]. Each step updates the maximal-violating pair.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <tuple>
#include <string>
#include <vector>

#include "surjnd/csv.hpp"
#include "surjnd/error.hpp"
#include "surjnd/features.hpp"
#include "surjnd/sur_model.hpp"

namespace surjnd {

/// Dense row-major sample matrix.
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}
  explicit FeatureMatrix(std::size_t cols) : cols_(cols) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  void push_back(std::span<const double> r) {
    if (rows_ == 0 && cols_ == 0) cols_ = r.size();
    if (r.size() != cols_)
      throw Error(ErrorKind::shape, "row has " + std::to_string(r.size()) + " entries, expected " +
                                        std::to_string(cols_));
    data_.insert(data_.end(), r.begin(), r.end());
    ++rows_;
  }

  FeatureMatrix select(std::span<const std::size_t> rows) const {
    FeatureMatrix out(cols_);
    for (auto r : rows) out.push_back(row(r));
    return out;
  }

  friend bool operator==(const FeatureMatrix&, const FeatureMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// ---------------------------------------------------------------------------
// Standardisation

class FeatureScaler {
 public:
  FeatureScaler() = default;
  FeatureScaler(std::vector<double> mean, std::vector<double> scale)
      : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size())
      throw Error(ErrorKind::shape, "scaler mean and scale differ in length");
  }

  static FeatureScaler identity(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  }

  std::size_t dim() const { return mean_.size(); }
  const std::vector<double>& mean() const { return mean_; }
  /// Divisor per dimension; 1 for zero-variance dimensions (shift only).
  const std::vector<double>& scale() const { return scale_; }

  std::vector<double> transform(std::span<const double> x) const {
    if (x.size() != dim())
      throw Error(ErrorKind::shape, "feature has " + std::to_string(x.size()) +
                                        " dimensions, scaler expects " + std::to_string(dim()));
    std::vector<double> out(x.size());
    for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - mean_[j]) / scale_[j];
    return out;
  }

  FeatureMatrix transform(const FeatureMatrix& m) const {
    FeatureMatrix out(m.cols());
    for (std::size_t i = 0; i < m.rows(); ++i) out.push_back(transform(m.row(i)));
    return out;
  }

  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;

 private:
  std::vector<double> mean_;
  std::vector<double> scale_;
};

/// Lower bound on a non-zero scale. Histogram bins that are almost always
/// empty in training would otherwise blow up by orders of magnitude and push
/// any test sample with mass there out of every kernel's reach.
inline constexpr double kMinFeatureScale = 0.1;

/// Per-dimension mean and unbiased standard deviation (floored at
/// kMinFeatureScale; zero-variance dimensions get scale 1).
inline FeatureScaler fit_scaler(const FeatureMatrix& x) {
  if (x.rows() < 2) throw Error(ErrorKind::insufficient_data, "scaler needs >= 2 samples");
  const std::size_t d = x.cols();
  std::vector<double> mean(d, 0.0), scale(d, 0.0);
  const double n = static_cast<double>(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += x(i, j);
  for (auto& m : mean) m /= n;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < d; ++j) scale[j] += (x(i, j) - mean[j]) * (x(i, j) - mean[j]);
  for (auto& s : scale) {
    s = std::sqrt(s / (n - 1.0));
    s = s > 1e-12 ? std::max(s, kMinFeatureScale) : 1.0;
  }
  return {std::move(mean), std::move(scale)};
}

// ---------------------------------------------------------------------------
// Model

struct SvrHyperParams {
  double C = 10.0;
  double epsilon = 0.02;
  double gamma = 1.0 / 40.0;
  double tolerance = 1e-3;
  long max_iterations = 10'000'000;

  friend bool operator==(const SvrHyperParams&, const SvrHyperParams&) = default;
};

inline void validate(const SvrHyperParams& p) {
  if (!(p.C > 0.0)) throw Error(ErrorKind::configuration, "SVR C must be > 0");
  if (!(p.epsilon >= 0.0)) throw Error(ErrorKind::configuration, "SVR epsilon must be >= 0");
  if (!(p.gamma > 0.0)) throw Error(ErrorKind::configuration, "SVR gamma must be > 0");
  if (!(p.tolerance > 0.0)) throw Error(ErrorKind::configuration, "SVR tolerance must be > 0");
  if (p.max_iterations < 1) throw Error(ErrorKind::configuration, "SVR max_iterations must be >= 1");
}

struct TrainingReport {
  long iterations = 0;
  bool converged = false;
  double objective = 0.0;  // minimisation form of the dual
};

struct SvrModel {
  FeatureScaler scaler;
  SvrHyperParams params;
  FeatureMatrix support_vectors;      // scaled space
  std::vector<double> coefficients;   // alpha - alpha*
  double bias = 0.0;
  TrainingReport report;
  std::map<std::string, std::string> metadata;

  std::size_t dim() const { return scaler.dim(); }
};

inline double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
  double d2 = 0;
  for (std::size_t j = 0; j < a.size(); ++j) {
    const double d = a[j] - b[j];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

/// Symmetric kernel matrix of the rows of `x`.
inline std::vector<double> kernel_matrix(const FeatureMatrix& x, double gamma) {
  const std::size_t l = x.rows();
  std::vector<double> k(l * l);
  for (std::size_t i = 0; i < l; ++i) {
    k[i * l + i] = 1.0;
    for (std::size_t j = i + 1; j < l; ++j) k[i * l + j] = k[j * l + i] = rbf_kernel(x.row(i), x.row(j), gamma);
  }
  return k;
}

namespace detail {

inline void require_finite(std::span<const double> v, const char* what) {
  for (double x : v)
    if (!std::isfinite(x)) throw Error(ErrorKind::numeric, std::string("non-finite ") + what);
}

struct DualSolution {
  std::vector<double> coef;  // alpha - alpha*, length l
  double rho = 0.0;
  TrainingReport report;
};

/// SMO on a precomputed l x l kernel matrix.
inline DualSolution solve_dual(std::span<const double> kernel, std::span<const double> z,
                               const SvrHyperParams& prm) {
  const std::size_t l = z.size();
  const std::size_t n = 2 * l;
  const double C = prm.C;
  constexpr double kTau = 1e-12;
  std::vector<double> alpha(n, 0.0), grad(n), p(n);
  std::vector<signed char> y(n);
  for (std::size_t i = 0; i < l; ++i) {
    y[i] = 1;
    y[i + l] = -1;
    p[i] = prm.epsilon - z[i];
    p[i + l] = prm.epsilon + z[i];
  }
  grad = p;
  auto K = [&](std::size_t s, std::size_t t) { return kernel[(s % l) * l + (t % l)]; };
  auto Q = [&](std::size_t s, std::size_t t) { return y[s] * y[t] * K(s, t); };

  DualSolution out;
  long iter = 0;
  bool converged = false;
  while (iter < prm.max_iterations) {
    double gmax = -std::numeric_limits<double>::infinity();
    double gmax2 = -std::numeric_limits<double>::infinity();
    std::size_t i = n, j = n;
    for (std::size_t t = 0; t < n; ++t) {
      if (y[t] == 1) {
        if (alpha[t] < C && -grad[t] >= gmax) { gmax = -grad[t]; i = t; }
        if (alpha[t] > 0 && grad[t] >= gmax2) { gmax2 = grad[t]; j = t; }
      } else {
        if (alpha[t] < C && -grad[t] >= gmax2) { gmax2 = -grad[t]; j = t; }
        if (alpha[t] > 0 && grad[t] >= gmax) { gmax = grad[t]; i = t; }
      }
    }
    if (i == n || j == n || gmax + gmax2 < prm.tolerance) {
      converged = true;
      break;
    }
    ++iter;

    const double old_i = alpha[i], old_j = alpha[j];
    if (y[i] != y[j]) {
      double quad = Q(i, i) + Q(j, j) + 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0) {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = diff; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = -diff; }
      }
      if (diff > 0) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = C - diff; }
      } else {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = C + diff; }
      }
    } else {
      double quad = Q(i, i) + Q(j, j) - 2 * Q(i, j);
      if (quad <= 0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > C) {
        if (alpha[i] > C) { alpha[i] = C; alpha[j] = sum - C; }
      } else {
        if (alpha[j] < 0) { alpha[j] = 0; alpha[i] = sum; }
      }
      if (sum > C) {
        if (alpha[j] > C) { alpha[j] = C; alpha[i] = sum - C; }
      } else {
        if (alpha[i] < 0) { alpha[i] = 0; alpha[j] = sum; }
      }
    }
    const double di = alpha[i] - old_i;
    const double dj = alpha[j] - old_j;
    // Q_ti = y_t y_i K(t, i); both halves of t share one kernel row.
    const double* ki = kernel.data() + (i % l) * l;
    const double* kj = kernel.data() + (j % l) * l;
    const double ci = y[i] * di, cj = y[j] * dj;
    for (std::size_t t = 0; t < l; ++t) {
      const double g = ki[t] * ci + kj[t] * cj;
      grad[t] += g;
      grad[t + l] -= g;
    }
  }

  // Bias: average over free variables, else midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double sum_free = 0;
  int nr_free = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= C) {
      if (y[t] == -1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0) {
      if (y[t] == 1) ub = std::min(ub, yg); else lb = std::max(lb, yg);
    } else {
      ++nr_free;
      sum_free += yg;
    }
  }
  out.rho = nr_free > 0 ? sum_free / nr_free : 0.5 * (ub + lb);

  double obj = 0;
  for (std::size_t t = 0; t < n; ++t) obj += alpha[t] * (grad[t] + p[t]);
  out.report = {iter, converged, 0.5 * obj};
  out.coef.resize(l);
  for (std::size_t t = 0; t < l; ++t) out.coef[t] = alpha[t] - alpha[t + l];
  return out;
}

inline SvrModel model_from_solution(const DualSolution& sol, const FeatureMatrix& x_scaled,
                                    const SvrHyperParams& params, FeatureScaler scaler) {
  SvrModel m;
  m.scaler = std::move(scaler);
  m.params = params;
  m.bias = -sol.rho;
  m.report = sol.report;
  m.support_vectors = FeatureMatrix(x_scaled.cols());
  for (std::size_t i = 0; i < sol.coef.size(); ++i) {
    if (sol.coef[i] == 0.0) continue;
    m.support_vectors.push_back(x_scaled.row(i));
    m.coefficients.push_back(sol.coef[i]);
  }
  return m;
}

}  // namespace detail

/// Trains on already-scaled samples; `scaler` is stored for prediction.
inline SvrModel train_scaled(const FeatureMatrix& x_scaled, std::span<const double> targets,
                             const SvrHyperParams& params, FeatureScaler scaler) {
  validate(params);
  if (x_scaled.rows() == 0) throw Error(ErrorKind::insufficient_data, "no training samples");
  if (x_scaled.rows() != targets.size())
    throw Error(ErrorKind::shape, "sample and target counts differ");
  if (scaler.dim() != x_scaled.cols())
    throw Error(ErrorKind::shape, "scaler dimension differs from the samples");
  for (std::size_t i = 0; i < x_scaled.rows(); ++i) detail::require_finite(x_scaled.row(i), "feature");
  detail::require_finite(targets, "target");
  const auto k = kernel_matrix(x_scaled, params.gamma);
  return detail::model_from_solution(detail::solve_dual(k, targets, params), x_scaled, params,
                                     std::move(scaler));
}

/// Fits a standardising scaler on `x` and trains in the scaled space.
inline SvrModel train(const FeatureMatrix& x, std::span<const double> targets,
                      const SvrHyperParams& params) {
  if (x.rows() == 0) throw Error(ErrorKind::insufficient_data, "no training samples");
  for (std::size_t i = 0; i < x.rows(); ++i) detail::require_finite(x.row(i), "feature");
  FeatureScaler scaler = x.rows() >= 2 ? fit_scaler(x) : FeatureScaler::identity(x.cols());
  const FeatureMatrix scaled = scaler.transform(x);
  return train_scaled(scaled, targets, params, std::move(scaler));
}

/// Kernel expansion in the scaled space, bias included.
inline double decision_scaled(const SvrModel& m, std::span<const double> x_scaled) {
  double f = m.bias;
  for (std::size_t s = 0; s < m.coefficients.size(); ++s)
    f += m.coefficients[s] * rbf_kernel(x_scaled, m.support_vectors.row(s), m.params.gamma);
  return f;
}

/// Prediction for a raw (unscaled) feature; not clamped.
inline double predict(const SvrModel& m, std::span<const double> x) {
  if (x.size() != m.dim())
    throw Error(ErrorKind::shape, "feature has " + std::to_string(x.size()) +
                                      " dimensions, model expects " + std::to_string(m.dim()));
  detail::require_finite(x, "feature");
  return decision_scaled(m, m.scaler.transform(x));
}

// ---------------------------------------------------------------------------
// Post-hoc optimality checks

/// alpha - alpha* for every training row, recovered by matching rows against
/// the stored support vectors (zero for rows that are not support vectors).
inline std::vector<double> training_coefficients(const SvrModel& m, const FeatureMatrix& x_scaled) {
  std::vector<double> coef(x_scaled.rows(), 0.0);
  std::vector<bool> used(m.coefficients.size(), false);
  for (std::size_t i = 0; i < x_scaled.rows(); ++i) {
    const auto r = x_scaled.row(i);
    for (std::size_t s = 0; s < m.coefficients.size(); ++s) {
      if (used[s]) continue;
      const auto sv = m.support_vectors.row(s);
      if (std::equal(r.begin(), r.end(), sv.begin())) {
        coef[i] = m.coefficients[s];
        used[s] = true;
        break;
      }
    }
  }
  return coef;
}

/// 1/2 c'Kc - z'c + eps |c|_1 over the training set: the minimisation form of
/// the dual objective at the model's coefficients.
inline double dual_objective(const SvrModel& m, const FeatureMatrix& x_scaled,
                             std::span<const double> targets) {
  const auto c = training_coefficients(m, x_scaled);
  double quad = 0, lin = 0, l1 = 0;
  for (std::size_t a = 0; a < c.size(); ++a) {
    if (c[a] == 0.0) continue;
    for (std::size_t b = 0; b < c.size(); ++b)
      if (c[b] != 0.0) quad += c[a] * c[b] * rbf_kernel(x_scaled.row(a), x_scaled.row(b), m.params.gamma);
    lin += targets[a] * c[a];
    l1 += std::abs(c[a]);
  }
  return 0.5 * quad - lin + m.params.epsilon * l1;
}

/// Largest violation of the epsilon-SVR optimality conditions over the
/// training rows, in target units.
inline double max_kkt_violation(const SvrModel& m, const FeatureMatrix& x_scaled,
                                std::span<const double> targets) {
  const auto coef = training_coefficients(m, x_scaled);
  const double C = m.params.C, eps = m.params.epsilon;
  const double at_bound = 1e-12 * std::max(1.0, C);
  double worst = 0;
  for (std::size_t i = 0; i < x_scaled.rows(); ++i) {
    const double r = targets[i] - decision_scaled(m, x_scaled.row(i));
    const double c = coef[i];
    double v = 0;
    if (c >= C - at_bound) v = std::max(0.0, eps - r);          // alpha = C
    else if (c > at_bound) v = std::abs(r - eps);               // 0 < alpha < C
    else if (c <= -C + at_bound) v = std::max(0.0, r + eps);    // alpha* = C
    else if (c < -at_bound) v = std::abs(r + eps);              // 0 < alpha* < C
    else v = std::max(0.0, std::abs(r) - eps);                  // both zero
    worst = std::max(worst, v);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Hyper-parameter search

struct SvrGrid {
  std::vector<double> C{1.0, 10.0, 100.0};
  std::vector<double> gamma{0.0125, 0.025, 0.05};
  std::vector<double> epsilon{0.01, 0.02, 0.05};
};

struct GridSearchResult {
  SvrHyperParams best;
  double best_mse = std::numeric_limits<double>::infinity();
  struct Entry {
    SvrHyperParams params;
    double mse;
  };
  std::vector<Entry> entries;
};

/// Splits group labels into `folds` near-equal parts after a seeded shuffle.
inline std::vector<std::vector<std::size_t>> group_folds(std::span<const int> groups, int folds,
                                                         std::uint64_t seed) {
  std::vector<int> unique(groups.begin(), groups.end());
  std::sort(unique.begin(), unique.end());
  unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
  if (folds < 2 || static_cast<std::size_t>(folds) > unique.size())
    throw Error(ErrorKind::configuration, "cannot split " + std::to_string(unique.size()) +
                                              " groups into " + std::to_string(folds) + " folds");
  std::mt19937_64 rng(seed);
  std::shuffle(unique.begin(), unique.end(), rng);
  std::map<int, int> fold_of;
  for (std::size_t i = 0; i < unique.size(); ++i) fold_of[unique[i]] = static_cast<int>(i % folds);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(folds));
  for (std::size_t i = 0; i < groups.size(); ++i)
    out[static_cast<std::size_t>(fold_of[groups[i]])].push_back(i);
  return out;
}

/// Exhaustive search minimising validation MSE over group-wise folds. The
/// kernel matrix of each inner training split is shared by every (C, eps)
/// pair with the same gamma.
inline GridSearchResult grid_search(const FeatureMatrix& x, std::span<const double> targets,
                                    std::span<const int> groups, const SvrGrid& grid,
                                    const SvrHyperParams& base, int folds, std::uint64_t seed) {
  if (x.rows() != targets.size() || x.rows() != groups.size())
    throw Error(ErrorKind::shape, "grid search inputs differ in length");
  const auto parts = group_folds(groups, folds, seed);
  std::map<std::tuple<double, double, double>, double> sse;
  for (std::size_t f = 0; f < parts.size(); ++f) {
    std::vector<std::size_t> train_rows;
    for (std::size_t g = 0; g < parts.size(); ++g)
      if (g != f) train_rows.insert(train_rows.end(), parts[g].begin(), parts[g].end());
    std::sort(train_rows.begin(), train_rows.end());
    const FeatureMatrix xtr = x.select(train_rows);
    std::vector<double> ytr;
    for (auto r : train_rows) ytr.push_back(targets[r]);
    const FeatureScaler scaler = fit_scaler(xtr);
    const FeatureMatrix str = scaler.transform(xtr);
    std::vector<std::vector<double>> sval;
    for (auto r : parts[f]) sval.push_back(scaler.transform(x.row(r)));
    for (double gamma : grid.gamma) {
      const auto k = kernel_matrix(str, gamma);
      for (double C : grid.C)
        for (double eps : grid.epsilon) {
          SvrHyperParams prm = base;
          prm.C = C;
          prm.gamma = gamma;
          prm.epsilon = eps;
          validate(prm);
          const auto model = detail::model_from_solution(detail::solve_dual(k, ytr, prm), str,
                                                         prm, scaler);
          double e = 0;
          for (std::size_t v = 0; v < sval.size(); ++v) {
            const double d = decision_scaled(model, sval[v]) - targets[parts[f][v]];
            e += d * d;
          }
          sse[{C, gamma, eps}] += e;
        }
    }
  }
  GridSearchResult out;
  // Iterate in declaration order so ties resolve deterministically.
  for (double C : grid.C)
    for (double gamma : grid.gamma)
      for (double eps : grid.epsilon) {
        SvrHyperParams prm = base;
        prm.C = C;
        prm.gamma = gamma;
        prm.epsilon = eps;
        const double mse = sse[{C, gamma, eps}] / static_cast<double>(x.rows());
        out.entries.push_back({prm, mse});
        if (mse < out.best_mse) {
          out.best_mse = mse;
          out.best = prm;
        }
      }
  return out;
}

// ---------------------------------------------------------------------------
// SUR curve assembly

/// Predicts SUR at every grid qp from that qp's feature, then projects the
/// raw predictions onto non-increasing curves in [0, 1].
inline SurCurve predict_sur_curve(const SvrModel& m, std::span<const FeatureVector> features,
                                  const std::vector<int>& grid) {
  std::map<int, const FeatureVector*> by_qp;
  for (const auto& f : features) by_qp[f.qp] = &f;
  std::string gaps;
  for (int q : grid)
    if (!by_qp.contains(q)) gaps += " " + std::to_string(q);
  if (!gaps.empty()) throw Error(ErrorKind::missing_data, "no features at qp" + gaps);
  std::vector<double> raw;
  raw.reserve(grid.size());
  for (int q : grid) raw.push_back(predict(m, by_qp.at(q)->x));
  return monotone_project(grid, raw);
}

// ---------------------------------------------------------------------------
// Persistence. Text format, every real written as a C99 hex float so that a
// reloaded model predicts bit-identically:
//
//   surjnd-svr-model 1
//   dim <d>
//   params <C> <epsilon> <gamma> <tolerance> <max_iterations>
//   report <iterations> <converged> <objective>
//   scaler_mean <d values>
//   scaler_scale <d values>
//   bias <b>
//   meta <key> <value...>            (zero or more)
//   support_vectors <n>
//   sv <coef> <d values>             (n lines)
//   end

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline std::string hex(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline std::vector<std::string> words(const std::string& line) {
  std::istringstream is(line);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

}  // namespace detail

inline void save_model(const SvrModel& m, std::ostream& out) {
  out << "surjnd-svr-model " << kModelFormatVersion << '\n';
  out << "dim " << m.dim() << '\n';
  out << "params " << detail::hex(m.params.C) << ' ' << detail::hex(m.params.epsilon) << ' '
      << detail::hex(m.params.gamma) << ' ' << detail::hex(m.params.tolerance) << ' '
      << m.params.max_iterations << '\n';
  out << "report " << m.report.iterations << ' ' << (m.report.converged ? 1 : 0) << ' '
      << detail::hex(m.report.objective) << '\n';
  out << "scaler_mean";
  for (double v : m.scaler.mean()) out << ' ' << detail::hex(v);
  out << "\nscaler_scale";
  for (double v : m.scaler.scale()) out << ' ' << detail::hex(v);
  out << "\nbias " << detail::hex(m.bias) << '\n';
  for (const auto& [k, v] : m.metadata) {
    if (k.empty() || k.find_first_of(" \t\n") != std::string::npos || v.find('\n') != std::string::npos)
      throw Error(ErrorKind::format, "model metadata key/value not serialisable: " + k);
    out << "meta " << k << ' ' << v << '\n';
  }
  out << "support_vectors " << m.coefficients.size() << '\n';
  for (std::size_t s = 0; s < m.coefficients.size(); ++s) {
    out << "sv " << detail::hex(m.coefficients[s]);
    for (double v : m.support_vectors.row(s)) out << ' ' << detail::hex(v);
    out << '\n';
  }
  out << "end\n";
  if (!out) throw Error(ErrorKind::io, "failed to write model");
}

inline SvrModel load_model(std::istream& in) {
  auto corrupt = [](const std::string& why) { return Error(ErrorKind::corrupt_file, "model: " + why); };
  std::string line;
  auto next = [&](const char* key) {
    if (!std::getline(in, line)) throw corrupt(std::string("unexpected end before '") + key + "'");
    auto w = detail::words(line);
    if (w.empty() || w[0] != key) throw corrupt(std::string("expected '") + key + "'");
    return w;
  };
  auto num = [&](const std::string& s) {
    try {
      return csv::parse_double(s, "model");
    } catch (const Error&) {
      throw corrupt("bad number '" + s + "'");
    }
  };
  auto integer = [&](const std::string& s) {
    try {
      return csv::parse_int(s, "model");
    } catch (const Error&) {
      throw corrupt("bad integer '" + s + "'");
    }
  };

  if (!std::getline(in, line)) throw corrupt("empty file");
  const auto head = detail::words(line);
  if (head.size() != 2 || head[0] != "surjnd-svr-model") throw corrupt("missing signature");
  if (head[1] != std::to_string(kModelFormatVersion))
    throw Error(ErrorKind::version, "model format version '" + head[1] + "' is not supported");

  SvrModel m;
  const auto dim_w = next("dim");
  if (dim_w.size() != 2) throw corrupt("bad dim line");
  const auto dim = static_cast<std::size_t>(integer(dim_w[1]));
  const auto pw = next("params");
  if (pw.size() != 6) throw corrupt("bad params line");
  m.params = {num(pw[1]), num(pw[2]), num(pw[3]), num(pw[4]), static_cast<long>(integer(pw[5]))};
  const auto rw = next("report");
  if (rw.size() != 4) throw corrupt("bad report line");
  m.report = {static_cast<long>(integer(rw[1])), integer(rw[2]) != 0, num(rw[3])};
  auto vec = [&](const char* key) {
    const auto w = next(key);
    if (w.size() != dim + 1) throw corrupt(std::string("bad ") + key + " line");
    std::vector<double> v;
    for (std::size_t j = 1; j < w.size(); ++j) v.push_back(num(w[j]));
    return v;
  };
  auto mean = vec("scaler_mean");
  auto scale = vec("scaler_scale");
  m.scaler = FeatureScaler(std::move(mean), std::move(scale));
  const auto bw = next("bias");
  if (bw.size() != 2) throw corrupt("bad bias line");
  m.bias = num(bw[1]);

  std::size_t n_sv = 0;
  while (true) {
    if (!std::getline(in, line)) throw corrupt("unexpected end in metadata");
    if (line.rfind("meta ", 0) == 0) {
      const auto rest = line.substr(5);
      const auto sp = rest.find(' ');
      if (sp == std::string::npos) m.metadata[rest] = "";
      else m.metadata[rest.substr(0, sp)] = rest.substr(sp + 1);
      continue;
    }
    const auto w = detail::words(line);
    if (w.size() != 2 || w[0] != "support_vectors") throw corrupt("expected 'support_vectors'");
    n_sv = static_cast<std::size_t>(integer(w[1]));
    break;
  }
  m.support_vectors = FeatureMatrix(dim);
  for (std::size_t s = 0; s < n_sv; ++s) {
    const auto w = next("sv");
    if (w.size() != dim + 2) throw corrupt("bad sv line");
    m.coefficients.push_back(num(w[1]));
    std::vector<double> row;
    for (std::size_t j = 2; j < w.size(); ++j) row.push_back(num(w[j]));
    m.support_vectors.push_back(row);
  }
  next("end");
  return m;
}

}  // namespace surjnd
