#pragma once

// 40-D feature per (source, qp): a 20-bin cumulative quality-degradation
// curve over significant segments, followed by 10-bin spatial and temporal
// randomness histograms of the reference clip.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "surjnd/error.hpp"
#include "surjnd/media_io.hpp"
#include "surjnd/quality_index.hpp"
#include "surjnd/segmenter.hpp"

namespace surjnd {

inline constexpr std::size_t kDegradationBins = 20;
inline constexpr std::size_t kMaskingBins = 10;
inline constexpr std::size_t kFeatureDim = kDegradationBins + 2 * kMaskingBins;

struct SlopeParams {
  int k = 2;       // qp distance to the neighbouring coded clip
  double p = 0.8;  // fraction of segments kept

  friend bool operator==(const SlopeParams&, const SlopeParams&) = default;
};

inline void validate(const SlopeParams& s) {
  if (s.k < 1) throw Error(ErrorKind::configuration, "slope stride k must be >= 1");
  if (!(s.p > 0.0 && s.p <= 1.0))
    throw Error(ErrorKind::configuration, "selection fraction p must lie in (0, 1]");
}

struct DegradationFeature {
  std::array<double, kDegradationBins> f{};
};

struct MaskingFeature {
  std::array<double, 2 * kMaskingBins> m{};

  std::span<const double, kMaskingBins> sr() const {
    return std::span<const double, kMaskingBins>(m.data(), kMaskingBins);
  }
  std::span<const double, kMaskingBins> tr() const {
    return std::span<const double, kMaskingBins>(m.data() + kMaskingBins, kMaskingBins);
  }
};

struct FeatureVector {
  std::string source_id;
  int qp = 0;
  std::array<double, kFeatureDim> x{};
};

/// Per-segment scores of every coded clip of one source, keyed by qp.
using ScoresByQp = std::map<int, std::vector<QualityScore>>;

// ---------------------------------------------------------------------------
// Significant segment selection

/// (V(qp - k) - V(qp)) / k for one segment.
inline double slope(const ScoresByQp& scores, std::size_t segment, int qp,
                    const SlopeParams& params) {
  validate(params);
  const auto cur = scores.find(qp);
  const auto prev = scores.find(qp - params.k);
  if (cur == scores.end() || prev == scores.end())
    throw Error(ErrorKind::missing_data, "slope at qp " + std::to_string(qp) +
                                             " needs scores at qp " + std::to_string(qp) +
                                             " and " + std::to_string(qp - params.k));
  if (segment >= cur->second.size() || segment >= prev->second.size())
    throw Error(ErrorKind::missing_data, "no score for segment " + std::to_string(segment));
  return (prev->second[segment].value() - cur->second[segment].value()) / params.k;
}

inline std::size_t selection_count(std::size_t n, double p) {
  // ceil(p n), immune to p n landing a hair above an integer.
  const double raw = p * static_cast<double>(n);
  auto count = static_cast<std::size_t>(std::ceil(raw - 1e-9 * std::max(1.0, raw)));
  return std::clamp<std::size_t>(count, 1, n);
}

/// Flat indices (ascending) of the ceil(p N) segments with the largest slope.
/// Ties keep the earlier (t, h, w) index.
inline std::vector<std::size_t> select_significant(std::span<const double> slopes, double p) {
  if (slopes.empty()) throw Error(ErrorKind::empty_input, "no segments to select from");
  if (!(p > 0.0 && p <= 1.0))
    throw Error(ErrorKind::configuration, "selection fraction p must lie in (0, 1]");
  std::vector<std::size_t> order(slopes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return slopes[a] > slopes[b]; });
  order.resize(selection_count(slopes.size(), p));
  std::sort(order.begin(), order.end());
  return order;
}

// ---------------------------------------------------------------------------
// Cumulative degradation curve

/// f[n-1] = fraction of deltas <= 2n, n = 1..20. Deltas above 40 fall in no
/// bin.
inline DegradationFeature degradation_feature(std::span<const double> deltas) {
  if (deltas.empty()) throw Error(ErrorKind::empty_input, "no score differences");
  std::array<std::size_t, kDegradationBins + 1> hist{};
  for (double d : deltas) {
    // Smallest n with d <= 2n.
    const double n = std::ceil(d / 2.0);
    const auto bin = n <= 1.0 ? std::size_t{1} : static_cast<std::size_t>(std::min(n, 21.0));
    ++hist[bin - 1];
  }
  DegradationFeature out;
  std::size_t running = 0;
  const double total = static_cast<double>(deltas.size());
  for (std::size_t j = 0; j < kDegradationBins; ++j) {
    running += hist[j];
    out.f[j] = static_cast<double>(running) / total;
  }
  return out;
}

/// Degradation features for every qp of one source. `reference_scores` are
/// the reference-vs-itself scores (all 100 for the built-in metrics).
inline std::map<int, DegradationFeature> degradation_features(
    const ScoresByQp& scores, std::span<const QualityScore> reference_scores,
    const SlopeParams& params) {
  validate(params);
  std::map<int, DegradationFeature> out;
  for (const auto& [qp, cur] : scores) {
    if (cur.size() != reference_scores.size())
      throw Error(ErrorKind::shape, "qp " + std::to_string(qp) + " has " +
                                        std::to_string(cur.size()) + " scores, reference has " +
                                        std::to_string(reference_scores.size()));
    std::vector<std::size_t> keep;
    if (qp - params.k < 0) {
      keep.resize(cur.size());
      std::iota(keep.begin(), keep.end(), std::size_t{0});
    } else {
      std::vector<double> slopes(cur.size());
      for (std::size_t s = 0; s < cur.size(); ++s) slopes[s] = slope(scores, s, qp, params);
      keep = select_significant(slopes, params.p);
    }
    std::vector<double> deltas;
    deltas.reserve(keep.size());
    for (std::size_t s : keep) deltas.push_back(reference_scores[s].value() - cur[s].value());
    out.emplace(qp, degradation_feature(deltas));
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSF-inspired low-pass prefilter: separable [1 4 6 4 1] / 16 with
// half-sample symmetric extension.

namespace detail {

inline int reflect(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) i = i < 0 ? -i - 1 : 2 * n - i - 1;
  return i;
}

template <typename T>
FloatPlane binomial5(const BasicPlane<T>& in) {
  static constexpr double k[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};
  const int w = in.width, h = in.height;
  FloatPlane tmp(w, h), out(w, h);
  for (int y = 0; y < h; ++y) {
    const auto src = in.row(y);
    auto dst = tmp.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      if (x >= 2 && x + 2 < w) {
        for (int j = 0; j < 5; ++j) acc += k[j] * src[x + j - 2];
      } else {
        for (int j = 0; j < 5; ++j) acc += k[j] * src[reflect(x + j - 2, w)];
      }
      dst[x] = acc;
    }
  }
  for (int y = 0; y < h; ++y) {
    int rows[5];
    for (int j = 0; j < 5; ++j) rows[j] = reflect(y + j - 2, h);
    auto dst = out.row(y);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int j = 0; j < 5; ++j) acc += k[j] * tmp.at(x, rows[j]);
      dst[x] = acc;
    }
  }
  return out;
}

}  // namespace detail

inline FloatPlane csf_prefilter(const Plane& plane) { return detail::binomial5(plane); }
inline FloatPlane csf_prefilter(const FloatPlane& plane) { return detail::binomial5(plane); }

inline std::vector<FloatPlane> csf_prefilter(const Clip& clip) {
  std::vector<FloatPlane> out;
  out.reserve(clip.frames.size());
  for (const auto& f : clip.frames) out.push_back(csf_prefilter(f.luma));
  return out;
}

// ---------------------------------------------------------------------------
// Spatial and temporal randomness

inline constexpr double kStabilizer = 1.0;  // 8-bit sample units
inline constexpr int kSrBlock = 8;          // at the 2x reduced scale
inline constexpr int kSrDecimation = 2;
inline constexpr int kTrBlock = 16;
inline constexpr int kTrSearch = 4;

namespace detail {

inline constexpr double kFlatBlockStd = 1e-6;

inline double sample_std(std::span<const double> v) {
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / (n - 1.0));
}

// Solves the symmetric 4x4 system a x = b by Gaussian elimination with
// partial pivoting. Returns false when singular.
inline bool solve4(std::array<std::array<double, 5>, 4>& a, std::array<double, 4>& x) {
  for (int c = 0; c < 4; ++c) {
    int piv = c;
    for (int r = c + 1; r < 4; ++r)
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    if (std::abs(a[piv][c]) < 1e-12) return false;
    std::swap(a[c], a[piv]);
    for (int r = c + 1; r < 4; ++r) {
      const double f = a[r][c] / a[c][c];
      for (int k = c; k < 5; ++k) a[r][k] -= f * a[c][k];
    }
  }
  for (int c = 3; c >= 0; --c) {
    double s = a[c][4];
    for (int k = c + 1; k < 4; ++k) s -= a[c][k] * x[k];
    x[c] = s / a[c][c];
  }
  return true;
}

/// Randomness of one square block: RMS residual of the least-squares
/// predictor v(x,y) ~ c0 v(x-1,y) + c1 v(x,y-1) + c2 v(x-1,y-1) + c3, fitted
/// on the block's interior, divided by the block's sample deviation.
inline double block_spatial_randomness(std::span<const double> block, int n) {
  const double sd = sample_std(block);
  if (sd < kFlatBlockStd) return 0.0;
  auto v = [&](int x, int y) { return block[static_cast<std::size_t>(y) * n + x]; };
  // Centre the samples to keep the normal equations well conditioned.
  const double mean = std::accumulate(block.begin(), block.end(), 0.0) / block.size();
  std::array<std::array<double, 5>, 4> normal{};
  for (int y = 1; y < n; ++y)
    for (int x = 1; x < n; ++x) {
      const double r[4] = {v(x - 1, y) - mean, v(x, y - 1) - mean, v(x - 1, y - 1) - mean, 1.0};
      const double target = v(x, y) - mean;
      for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) normal[i][j] += r[i] * r[j];
        normal[i][4] += r[i] * target;
      }
    }
  std::array<double, 4> c{};
  if (auto a = normal; !solve4(a, c)) {
    // Collinear regressors (a pure ramp, say): a whisper of ridge damping
    // picks one of the equally good predictors.
    a = normal;
    for (int i = 0; i < 4; ++i) a[i][i] += 1e-9 * (1.0 + a[i][i]);
    if (!solve4(a, c)) c = {};
  }
  double ss = 0;
  int count = 0;
  for (int y = 1; y < n; ++y)
    for (int x = 1; x < n; ++x) {
      const double pred = c[0] * (v(x - 1, y) - mean) + c[1] * (v(x, y - 1) - mean) +
                          c[2] * (v(x - 1, y - 1) - mean) + c[3];
      const double e = v(x, y) - mean - pred;
      ss += e * e;
      ++count;
    }
  return std::min(1.0, std::sqrt(ss / count) / (sd + kStabilizer));
}

}  // namespace detail

/// Mean block randomness over the segment's frames, computed on the
/// segment sampled at every second pixel (the prefiltered signal reduced
/// one octave).
inline double spatial_randomness(const SegmentView<double>& seg) {
  const int n = kSrBlock;
  const int span_px = n * kSrDecimation;
  if (seg.rect.width < span_px || seg.rect.height < span_px)
    throw Error(ErrorKind::shape, "segment smaller than one " + std::to_string(span_px) + "x" +
                                      std::to_string(span_px) + " randomness block");
  if (seg.frame_count() < 1) throw Error(ErrorKind::shape, "segment has no frames");
  const int bx_count = seg.rect.width / span_px;
  const int by_count = seg.rect.height / span_px;
  std::vector<double> block(static_cast<std::size_t>(n) * n);
  double total = 0;
  std::size_t count = 0;
  for (int f = 0; f < seg.frame_count(); ++f)
    for (int by = 0; by < by_count; ++by)
      for (int bx = 0; bx < bx_count; ++bx) {
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x)
            block[static_cast<std::size_t>(y) * n + x] =
                seg.sample(f, bx * span_px + x * kSrDecimation, by * span_px + y * kSrDecimation);
        total += detail::block_spatial_randomness(block, n);
        ++count;
      }
  return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

/// Mean over consecutive frame pairs and 16x16 blocks of the best-match RMS
/// residual (full search, +-4 px, candidates inside the frame) divided by
/// the block's sample deviation.
inline double temporal_randomness(const SegmentView<double>& seg) {
  if (seg.frame_count() < 2) throw Error(ErrorKind::shape, "temporal randomness needs >= 2 frames");
  const int n = kTrBlock;
  if (seg.rect.width < n || seg.rect.height < n)
    throw Error(ErrorKind::shape, "segment smaller than one 16x16 block");
  const int bx_count = seg.rect.width / n;
  const int by_count = seg.rect.height / n;
  const double area = static_cast<double>(n) * n;
  std::vector<double> cur(static_cast<std::size_t>(n) * n);
  double total = 0;
  std::size_t count = 0;
  for (int f = 1; f < seg.frame_count(); ++f) {
    const FloatPlane& prev = *seg.frames[static_cast<std::size_t>(f - 1)];
    const FloatPlane& now = *seg.frames[static_cast<std::size_t>(f)];
    for (int by = 0; by < by_count; ++by)
      for (int bx = 0; bx < bx_count; ++bx) {
        const int x0 = seg.rect.x + bx * n;
        const int y0 = seg.rect.y + by * n;
        for (int y = 0; y < n; ++y)
          for (int x = 0; x < n; ++x)
            cur[static_cast<std::size_t>(y) * n + x] = now.at(x0 + x, y0 + y);
        const double sd = detail::sample_std(cur);
        double best = std::numeric_limits<double>::infinity();
        for (int dy = -kTrSearch; dy <= kTrSearch; ++dy) {
          const int cy = y0 + dy;
          if (cy < 0 || cy + n > prev.height) continue;
          for (int dx = -kTrSearch; dx <= kTrSearch; ++dx) {
            const int cx = x0 + dx;
            if (cx < 0 || cx + n > prev.width) continue;
            double sse = 0;
            for (int y = 0; y < n && sse < best; ++y) {
              const double* p = prev.samples.data() + static_cast<std::size_t>(cy + y) * prev.width + cx;
              const double* c = cur.data() + static_cast<std::size_t>(y) * n;
              for (int x = 0; x < n; ++x) {
                const double e = c[x] - p[x];
                sse += e * e;
              }
            }
            best = std::min(best, sse);
          }
        }
        total += std::min(1.0, std::sqrt(best / area) / (sd + kStabilizer));
        ++count;
      }
  }
  return std::clamp(total / static_cast<double>(count), 0.0, 1.0);
}

namespace detail {

inline std::size_t histogram_bin(double v) {
  // Ten uniform bins on [0, 1]; the last bin is closed on the right.
  const auto b = static_cast<std::ptrdiff_t>(std::floor(std::clamp(v, 0.0, 1.0) * kMaskingBins));
  return static_cast<std::size_t>(std::min<std::ptrdiff_t>(b, kMaskingBins - 1));
}

}  // namespace detail

struct SegmentRandomness {
  std::vector<double> sr;  // (t, h, w) order
  std::vector<double> tr;
};

inline SegmentRandomness segment_randomness(std::span<const FloatPlane> filtered,
                                            const SegmentLayout& l) {
  SegmentRandomness out;
  out.sr.reserve(l.size());
  out.tr.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto view = extract(filtered, l.index_at(i), l);
    out.sr.push_back(spatial_randomness(view));
    out.tr.push_back(temporal_randomness(view));
  }
  return out;
}

inline MaskingFeature masking_histograms(const SegmentRandomness& r) {
  MaskingFeature out;
  for (double v : r.sr) out.m[detail::histogram_bin(v)] += 1.0;
  for (double v : r.tr) out.m[kMaskingBins + detail::histogram_bin(v)] += 1.0;
  const double n_sr = static_cast<double>(r.sr.size());
  const double n_tr = static_cast<double>(r.tr.size());
  for (std::size_t j = 0; j < kMaskingBins; ++j) {
    out.m[j] /= n_sr;
    out.m[kMaskingBins + j] /= n_tr;
  }
  return out;
}

/// Masking feature of a reference clip: [Hist10(SR), Hist10(TR)].
inline MaskingFeature masking_feature(const Clip& reference, const SegmentLayout& l) {
  const auto filtered = csf_prefilter(reference);
  return masking_histograms(segment_randomness(filtered, l));
}

inline FeatureVector assemble(const DegradationFeature& deg, const MaskingFeature& mask,
                              std::string source_id, int qp) {
  FeatureVector v;
  v.source_id = std::move(source_id);
  v.qp = qp;
  std::copy(deg.f.begin(), deg.f.end(), v.x.begin());
  std::copy(mask.m.begin(), mask.m.end(), v.x.begin() + kDegradationBins);
  return v;
}

}  // namespace surjnd
