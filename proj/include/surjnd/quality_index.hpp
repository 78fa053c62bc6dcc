#pragma once

// Local full-reference quality of a distorted segment against its reference,
// on a 0..100 scale. Two built-in luma indices are provided; any other
// metric (e.g. VMAF) enters through a per-segment ScoreTable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surjnd/csv.hpp"
#include "surjnd/error.hpp"
#include "surjnd/media_io.hpp"
#include "surjnd/segmenter.hpp"

namespace surjnd {

class QualityScore {
 public:
  constexpr QualityScore() = default;
  explicit QualityScore(double v) : value_(v) {
    if (!(v >= 0.0 && v <= 100.0))
      throw Error(ErrorKind::range, "quality score " + csv::format_double(v) +
                                        " outside [0, 100]");
  }
  constexpr double value() const { return value_; }
  friend constexpr auto operator<=>(const QualityScore&, const QualityScore&) = default;

 private:
  double value_ = 100.0;
};

enum class MetricId { psnr_mapped, struct_sim, external };

inline const char* to_string(MetricId m) {
  switch (m) {
    case MetricId::psnr_mapped: return "psnr_mapped";
    case MetricId::struct_sim: return "struct_sim";
    case MetricId::external: return "external";
  }
  return "?";
}

inline MetricId parse_metric(std::string_view s) {
  if (s == "psnr_mapped") return MetricId::psnr_mapped;
  if (s == "struct_sim") return MetricId::struct_sim;
  if (s == "external") return MetricId::external;
  throw Error(ErrorKind::configuration, "unknown metric '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// ScoreTable: CSV `clip_id,qp,w,h,t,score`, one row per segment. Rows with
// qp = -1 optionally give the reference-against-itself score.

inline constexpr int kReferenceQp = -1;

class ScoreTable {
 public:
  ScoreTable() = default;
  explicit ScoreTable(SegmentLayout layout) : layout_(layout) {}

  const SegmentLayout& layout() const { return layout_; }

  bool has(const std::string& clip_id, int qp) const {
    return entries_.contains({clip_id, qp});
  }

  const std::vector<QualityScore>& scores(const std::string& clip_id, int qp) const {
    const auto it = entries_.find({clip_id, qp});
    if (it == entries_.end())
      throw Error(ErrorKind::missing_score, "no scores for clip '" + clip_id + "' at qp " +
                                                std::to_string(qp));
    return it->second;
  }

  QualityScore lookup(const std::string& clip_id, int qp, const SegmentIndex& index) const {
    if (!layout_.contains(index))
      throw Error(ErrorKind::missing_score, "segment " + to_string(index) + " not in table layout");
    return scores(clip_id, qp)[layout_.flat(index)];
  }

  void insert(const std::string& clip_id, int qp, std::vector<QualityScore> scores) {
    if (scores.size() != layout_.size())
      throw Error(ErrorKind::incomplete_table, "score array size does not match layout");
    entries_[{clip_id, qp}] = std::move(scores);
  }

  std::vector<std::pair<std::string, int>> keys() const {
    std::vector<std::pair<std::string, int>> out;
    for (const auto& [k, v] : entries_) out.push_back(k);
    return out;
  }

 private:
  SegmentLayout layout_;
  std::map<std::pair<std::string, int>, std::vector<QualityScore>> entries_;
};

/// Parses a score table and checks it covers `layout` completely for every
/// (clip, qp) pair it mentions.
inline ScoreTable load_score_table(std::istream& in, const SegmentLayout& layout) {
  csv::expect_header(in, "clip_id,qp,w,h,t,score", "score table");
  std::map<std::pair<std::string, int>, std::vector<std::optional<double>>> partial;
  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (csv::trim(line).empty()) continue;
    const std::string where = "score table line " + std::to_string(line_no);
    const auto f = csv::split(line);
    if (f.size() != 6) throw Error(ErrorKind::format, where + ": expected 6 fields");
    const std::string clip(f[0]);
    const int qp = static_cast<int>(csv::parse_int(f[1], where));
    if (qp < kReferenceQp || qp > 51)
      throw Error(ErrorKind::range, where + ": qp " + std::to_string(qp) + " outside -1..51");
    const SegmentIndex idx{static_cast<int>(csv::parse_int(f[2], where)),
                           static_cast<int>(csv::parse_int(f[3], where)),
                           static_cast<int>(csv::parse_int(f[4], where))};
    if (!layout.contains(idx))
      throw Error(ErrorKind::bounds, where + ": segment " + to_string(idx) + " outside layout");
    const double v = csv::parse_double(f[5], where);
    if (!(v >= 0.0 && v <= 100.0))
      throw Error(ErrorKind::range, where + ": score " + std::string(f[5]) + " outside [0, 100]");
    auto& slots = partial[{clip, qp}];
    if (slots.empty()) slots.resize(layout.size());
    auto& slot = slots[layout.flat(idx)];
    if (slot) throw Error(ErrorKind::format, where + ": duplicate row for " + to_string(idx));
    slot = v;
  }

  ScoreTable table(layout);
  std::string gaps;
  std::size_t gap_count = 0;
  for (auto& [key, slots] : partial) {
    std::vector<QualityScore> scores;
    scores.reserve(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      if (!slots[i]) {
        if (gap_count++ < 20)
          gaps += " " + key.first + "@qp" + std::to_string(key.second) +
                  to_string(layout.index_at(i));
        continue;
      }
      scores.emplace_back(*slots[i]);
    }
    if (scores.size() == slots.size()) table.insert(key.first, key.second, std::move(scores));
  }
  if (gap_count > 0)
    throw Error(ErrorKind::incomplete_table,
                std::to_string(gap_count) + " missing segment rows:" + gaps +
                    (gap_count > 20 ? " ..." : ""));
  return table;
}

// ---------------------------------------------------------------------------
// Built-in per-frame indices.

namespace detail {

inline constexpr double kPeak = 255.0;
inline constexpr double kLosslessPsnrDb = 60.0;

inline double map_psnr(double mse) {
  if (mse <= 0.0) return 100.0;
  const double psnr = 10.0 * std::log10(kPeak * kPeak / mse);
  return std::clamp(100.0 * psnr / kLosslessPsnrDb, 0.0, 100.0);
}

inline double frame_mse(const Plane& ref, const Plane& dist, const Rect& r) {
  std::int64_t sse = 0;
  for (int y = r.y; y < r.y + r.height; ++y) {
    const auto a = ref.row(y);
    const auto b = dist.row(y);
    for (int x = r.x; x < r.x + r.width; ++x) {
      const int d = int(a[x]) - int(b[x]);
      sse += d * d;
    }
  }
  return static_cast<double>(sse) / (static_cast<double>(r.width) * r.height);
}

inline constexpr int kSsimWindow = 8;

inline double ssim_window(const Plane& ref, const Plane& dist, int x0, int y0, int w, int h) {
  constexpr double c1 = (0.01 * kPeak) * (0.01 * kPeak);
  constexpr double c2 = (0.03 * kPeak) * (0.03 * kPeak);
  double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) {
      const double a = ref.at(x, y);
      const double b = dist.at(x, y);
      sa += a; sb += b; saa += a * a; sbb += b * b; sab += a * b;
    }
  const double n = static_cast<double>(w) * h;
  const double ma = sa / n, mb = sb / n;
  const double va = std::max(0.0, saa / n - ma * ma);
  const double vb = std::max(0.0, sbb / n - mb * mb);
  const double cov = sab / n - ma * mb;
  return ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
}

/// Mean SSIM over non-overlapping 8x8 windows tiled from the rectangle
/// origin; a rectangle narrower than one window is treated as one window.
inline double frame_ssim(const Plane& ref, const Plane& dist, const Rect& r) {
  const int ww = std::min(kSsimWindow, r.width);
  const int wh = std::min(kSsimWindow, r.height);
  double total = 0;
  int count = 0;
  for (int y = r.y; y + wh <= r.y + r.height; y += wh)
    for (int x = r.x; x + ww <= r.x + r.width; x += ww) {
      total += ssim_window(ref, dist, x, y, ww, wh);
      ++count;
    }
  return total / count;
}

inline void require_same_shape(const SegmentView<std::uint8_t>& ref,
                               const SegmentView<std::uint8_t>& dist) {
  if (ref.rect.width != dist.rect.width || ref.rect.height != dist.rect.height ||
      ref.frame_count() != dist.frame_count())
    throw Error(ErrorKind::shape, "reference and distorted segments differ in shape");
}

}  // namespace detail

/// Per-frame psnr_mapped score: min(100, 100 * PSNR / 60).
inline double psnr_mapped_frame(const Plane& ref, const Plane& dist, const Rect& r) {
  return detail::map_psnr(detail::frame_mse(ref, dist, r));
}

/// Per-frame struct_sim score: 100 * mean SSIM, clamped at 0.
inline double struct_sim_frame(const Plane& ref, const Plane& dist, const Rect& r) {
  return std::clamp(100.0 * detail::frame_ssim(ref, dist, r), 0.0, 100.0);
}

/// Source of externally computed scores for one coded clip.
struct ExternalScores {
  const ScoreTable* table = nullptr;
  std::string clip_id;
  int qp = 0;
};

inline QualityScore score(MetricId metric, const SegmentView<std::uint8_t>& ref,
                          const SegmentView<std::uint8_t>& dist,
                          const ExternalScores* external = nullptr) {
  detail::require_same_shape(ref, dist);
  if (metric == MetricId::external) {
    if (external == nullptr || external->table == nullptr)
      throw Error(ErrorKind::missing_score, "external metric requires a score table");
    return external->table->lookup(external->clip_id, external->qp, dist.index);
  }
  double total = 0.0;
  for (int f = 0; f < ref.frame_count(); ++f) {
    const Plane& a = *ref.frames[static_cast<std::size_t>(f)];
    const Plane& b = *dist.frames[static_cast<std::size_t>(f)];
    total += metric == MetricId::psnr_mapped ? psnr_mapped_frame(a, b, ref.rect)
                                             : struct_sim_frame(a, b, dist.rect);
  }
  return QualityScore(std::clamp(total / ref.frame_count(), 0.0, 100.0));
}

namespace detail {

// psnr_mapped over the whole grid using one summed-area table per frame.
inline std::vector<QualityScore> score_all_psnr(const Clip& ref, const Clip& coded,
                                                const SegmentLayout& l) {
  const int w = ref.metadata.width;
  const int h = ref.metadata.height;
  std::vector<double> sums(l.size(), 0.0);
  std::vector<std::int64_t> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto at = [&](int x, int y) -> std::int64_t& {
    return sat[static_cast<std::size_t>(y) * (w + 1) + x];
  };
  for (int t = 0; t < l.windows; ++t) {
    for (int f = t * l.frames_per_window; f < (t + 1) * l.frames_per_window; ++f) {
      const Plane& a = ref.frames[static_cast<std::size_t>(f)].luma;
      const Plane& b = coded.frames[static_cast<std::size_t>(f)].luma;
      for (int y = 0; y < h; ++y) {
        const auto ra = a.row(y);
        const auto rb = b.row(y);
        std::int64_t row = 0;
        for (int x = 0; x < w; ++x) {
          const int d = int(ra[x]) - int(rb[x]);
          row += d * d;
          at(x + 1, y + 1) = at(x + 1, y) + row;
        }
      }
      const double area = static_cast<double>(l.seg_width) * l.seg_height;
      for (int hh = 0; hh < l.rows; ++hh)
        for (int ww = 0; ww < l.cols; ++ww) {
          const int x0 = ww * l.x_stride, y0 = hh * l.y_stride;
          const int x1 = x0 + l.seg_width, y1 = y0 + l.seg_height;
          const std::int64_t sse = at(x1, y1) - at(x0, y1) - at(x1, y0) + at(x0, y0);
          sums[l.flat({ww, hh, t})] += map_psnr(static_cast<double>(sse) / area);
        }
    }
  }
  std::vector<QualityScore> out;
  out.reserve(sums.size());
  for (double s : sums) out.emplace_back(std::clamp(s / l.frames_per_window, 0.0, 100.0));
  return out;
}

}  // namespace detail

/// Scores every segment of `coded` against `reference`; result is in (t, h, w)
/// row-major order.
inline std::vector<QualityScore> score_all(MetricId metric, const Clip& reference,
                                           const Clip& coded, const SegmentLayout& l,
                                           const ExternalScores* external = nullptr) {
  if (metric == MetricId::external) {
    if (external == nullptr || external->table == nullptr)
      throw Error(ErrorKind::missing_score, "external metric requires a score table");
    if (!(external->table->layout() == l))
      throw Error(ErrorKind::shape, "score table layout differs from the clip layout");
    return external->table->scores(external->clip_id, external->qp);
  }
  require_aligned(reference, coded);
  if (metric == MetricId::psnr_mapped) return detail::score_all_psnr(reference, coded, l);
  std::vector<QualityScore> out;
  out.reserve(l.size());
  for (std::size_t i = 0; i < l.size(); ++i) {
    const SegmentIndex idx = l.index_at(i);
    try {
      out.push_back(score(metric, extract(reference, idx, l), extract(coded, idx, l), external));
    } catch (const Error& e) {
      throw Error(e.kind(), "segment " + to_string(idx) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace surjnd
