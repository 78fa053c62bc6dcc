#pragma once

// Satisfied-user-ratio curves: empirical from per-subject JND annotations,
// parametric from a Gaussian JND model, and the 75 % JND read-out.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "surjnd/csv.hpp"
#include "surjnd/error.hpp"

namespace surjnd {

inline constexpr int kMinQp = 0;
inline constexpr int kMaxQp = 51;
inline constexpr double kDefaultJndThreshold = 0.75;

struct JndAnnotationSet {
  std::string source_id;
  std::vector<std::string> subject_ids;
  std::vector<int> first_jnd;  // parallel to subject_ids
  // Optional raw responses: qp -> subject -> noticed a difference.
  std::map<int, std::map<std::string, bool>> noticed;

  int subject_count() const { return static_cast<int>(first_jnd.size()); }
};

struct GaussianJndModel {
  double mean = 0.0;
  double std = 1.0;
};

enum class CurveProvenance { empirical, gaussian, predicted };

inline const char* to_string(CurveProvenance p) {
  switch (p) {
    case CurveProvenance::empirical: return "empirical";
    case CurveProvenance::gaussian: return "gaussian";
    case CurveProvenance::predicted: return "predicted";
  }
  return "?";
}

inline bool is_non_increasing(std::span<const double> v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[i - 1]) return false;
  return true;
}

/// SUR sampled on an increasing qp grid. Gaussian and predicted curves are
/// guaranteed non-increasing; a predicted curve can only be produced by
/// monotone_project.
class SurCurve {
 public:
  SurCurve() = default;
  SurCurve(std::vector<int> qps, std::vector<double> values, CurveProvenance provenance)
      : qps_(std::move(qps)), values_(std::move(values)), provenance_(provenance) {
    if (qps_.size() != values_.size() || qps_.empty())
      throw Error(ErrorKind::shape, "SUR curve needs one value per grid point");
    for (std::size_t i = 1; i < qps_.size(); ++i)
      if (qps_[i] <= qps_[i - 1])
        throw Error(ErrorKind::contract, "SUR curve qp grid must be strictly increasing");
    for (double v : values_)
      if (!(v >= 0.0 && v <= 1.0))
        throw Error(ErrorKind::range, "SUR value " + csv::format_double(v) + " outside [0, 1]");
    if (provenance_ != CurveProvenance::empirical && !is_non_increasing(values_))
      throw Error(ErrorKind::contract,
                  std::string(to_string(provenance_)) + " SUR curve must be non-increasing");
  }

  const std::vector<int>& qps() const { return qps_; }
  const std::vector<double>& values() const { return values_; }
  CurveProvenance provenance() const { return provenance_; }
  std::size_t size() const { return qps_.size(); }

 private:
  std::vector<int> qps_;
  std::vector<double> values_;
  CurveProvenance provenance_ = CurveProvenance::empirical;
};

inline std::vector<int> qp_grid(int first = 1, int last = kMaxQp, int step = 1) {
  std::vector<int> g;
  for (int q = first; q <= last; q += step) g.push_back(q);
  return g;
}

// ---------------------------------------------------------------------------
// Gaussian model

/// Sample mean and unbiased sample standard deviation of the first-JND qps.
inline GaussianJndModel fit_gaussian(const JndAnnotationSet& a) {
  const auto& x = a.first_jnd;
  if (x.size() < 2)
    throw Error(ErrorKind::degenerate_sample, "source '" + a.source_id +
                                                  "' needs at least two JND samples");
  const double n = static_cast<double>(x.size());
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double ss = 0;
  for (int v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0))
    throw Error(ErrorKind::degenerate_sample, "source '" + a.source_id +
                                                  "' has identical JND samples");
  return {mean, sd};
}

/// Upper-tail probability of the standard normal.
inline double q_function(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

/// z such that q_function(z) = p, for p in (0, 1).
inline double inverse_q(double p) {
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorKind::range, "inverse_q needs p in (0, 1)");
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200 && hi - lo > 1e-15; ++i) {
    const double mid = 0.5 * (lo + hi);
    (q_function(mid) > p ? lo : hi) = mid;
  }
  double z = 0.5 * (lo + hi);
  // Newton polish: d/dz Q = -phi(z).
  for (int i = 0; i < 3; ++i) {
    const double phi = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
    if (phi < 1e-300) break;
    z += (q_function(z) - p) / phi;
  }
  return z;
}

inline double gaussian_sur(const GaussianJndModel& m, double qp) {
  return q_function((qp - m.mean) / m.std);
}

/// Analytic qp at which the Gaussian SUR equals `threshold`.
inline double gaussian_jnd(const GaussianJndModel& m, double threshold = kDefaultJndThreshold) {
  return m.mean + m.std * inverse_q(threshold);
}

inline SurCurve gaussian_curve(const GaussianJndModel& m, const std::vector<int>& grid) {
  std::vector<double> v;
  v.reserve(grid.size());
  for (int q : grid) v.push_back(gaussian_sur(m, q));
  return {grid, std::move(v), CurveProvenance::gaussian};
}

// ---------------------------------------------------------------------------
// Empirical SUR

/// 1 - (subjects noticing at qp) / M. Uses raw responses when recorded at
/// this qp, otherwise a subject notices iff its first JND <= qp.
inline double empirical_sur(const JndAnnotationSet& a, int qp) {
  if (const auto it = a.noticed.find(qp); it != a.noticed.end() && !it->second.empty()) {
    const auto noticing = std::count_if(it->second.begin(), it->second.end(),
                                        [](const auto& kv) { return kv.second; });
    return 1.0 - static_cast<double>(noticing) / static_cast<double>(it->second.size());
  }
  if (a.first_jnd.empty())
    throw Error(ErrorKind::missing_data, "source '" + a.source_id + "' has no annotations");
  const auto noticing = std::count_if(a.first_jnd.begin(), a.first_jnd.end(),
                                      [qp](int j) { return j <= qp; });
  return 1.0 - static_cast<double>(noticing) / static_cast<double>(a.first_jnd.size());
}

inline SurCurve empirical_curve(const JndAnnotationSet& a, const std::vector<int>& grid) {
  std::vector<double> v;
  v.reserve(grid.size());
  for (int q : grid) v.push_back(empirical_sur(a, q));
  return {grid, std::move(v), CurveProvenance::empirical};
}

// ---------------------------------------------------------------------------
// Monotone projection and JND read-out

/// Least-squares closest non-increasing sequence (pool adjacent violators),
/// then clamped to [0, 1].
inline std::vector<double> project_non_increasing(std::span<const double> values) {
  struct Block {
    double sum;
    std::size_t count;
    double mean() const { return sum / static_cast<double>(count); }
  };
  std::vector<Block> blocks;
  blocks.reserve(values.size());
  for (double v : values) {
    blocks.push_back({v, 1});
    while (blocks.size() > 1 && blocks[blocks.size() - 2].mean() < blocks.back().mean()) {
      const Block top = blocks.back();
      blocks.pop_back();
      blocks.back().sum += top.sum;
      blocks.back().count += top.count;
    }
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (const auto& b : blocks) out.insert(out.end(), b.count, std::clamp(b.mean(), 0.0, 1.0));
  return out;
}

inline SurCurve monotone_project(std::vector<int> grid, std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::empty_input, "nothing to project");
  return {std::move(grid), project_non_increasing(values), CurveProvenance::predicted};
}

/// Smallest qp at which the curve reaches `threshold`, interpolated linearly
/// between grid points. std::nullopt when the curve never gets there
/// (the beyond-grid case).
inline std::optional<double> jnd_point(const SurCurve& curve,
                                       double threshold = kDefaultJndThreshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw Error(ErrorKind::range, "JND threshold must lie in (0, 1)");
  const auto& v = curve.values();
  const auto& q = curve.qps();
  if (!is_non_increasing(v))
    throw Error(ErrorKind::contract, "JND read-out needs a non-increasing curve");
  if (v.front() <= threshold) return static_cast<double>(q.front());
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] <= threshold) {
      const double frac = (v[i - 1] - threshold) / (v[i - 1] - v[i]);
      return q[i - 1] + frac * (q[i] - q[i - 1]);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Annotation files

/// CSV `source_id,subject_id,first_jnd_qp`.
inline std::map<std::string, JndAnnotationSet> load_annotations(std::istream& in) {
  csv::expect_header(in, "source_id,subject_id,first_jnd_qp", "annotations");
  std::map<std::string, JndAnnotationSet> out;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const std::string where = "annotations line " + std::to_string(line_no);
    const auto f = csv::split(line);
    if (f.size() != 3) throw Error(ErrorKind::format, where + ": expected 3 fields");
    const auto qp = csv::parse_int(f[2], where);
    if (qp < 1 || qp > kMaxQp)
      throw Error(ErrorKind::range, where + ": first JND qp must lie in 1..51");
    auto& set = out[std::string(f[0])];
    set.source_id = std::string(f[0]);
    set.subject_ids.emplace_back(f[1]);
    set.first_jnd.push_back(static_cast<int>(qp));
  }
  return out;
}

/// CSV `source_id,subject_id,qp,noticed`, merged into `sets`.
inline void load_noticed_flags(std::istream& in, std::map<std::string, JndAnnotationSet>& sets) {
  csv::expect_header(in, "source_id,subject_id,qp,noticed", "flags");
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const std::string where = "flags line " + std::to_string(line_no);
    const auto f = csv::split(line);
    if (f.size() != 4) throw Error(ErrorKind::format, where + ": expected 4 fields");
    const auto qp = csv::parse_int(f[2], where);
    if (qp < kMinQp || qp > kMaxQp) throw Error(ErrorKind::range, where + ": qp outside 0..51");
    const auto flag = csv::parse_int(f[3], where);
    if (flag != 0 && flag != 1) throw Error(ErrorKind::format, where + ": noticed must be 0 or 1");
    auto& set = sets[std::string(f[0])];
    set.source_id = std::string(f[0]);
    set.noticed[static_cast<int>(qp)][std::string(f[1])] = flag == 1;
  }
}

}  // namespace surjnd
