#pragma once

// Partitioning of a clip into overlapping W x H x T spatial-temporal
// segments. Spatial neighbours overlap; temporal windows are disjoint.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "surjnd/error.hpp"
#include "surjnd/media_io.hpp"

namespace surjnd {

struct SegmentConfig {
  int width = 320;
  int height = 180;
  double duration = 0.5;  // seconds
  double overlap = 0.5;   // spatial only

  friend bool operator==(const SegmentConfig&, const SegmentConfig&) = default;
};

struct SegmentIndex {
  int w = 0;
  int h = 0;
  int t = 0;

  // Ordering is (t, h, w), the storage order of score arrays.
  friend auto operator<=>(const SegmentIndex& a, const SegmentIndex& b) {
    if (auto c = a.t <=> b.t; c != 0) return c;
    if (auto c = a.h <=> b.h; c != 0) return c;
    return a.w <=> b.w;
  }
  friend bool operator==(const SegmentIndex&, const SegmentIndex&) = default;
};

inline std::string to_string(const SegmentIndex& i) {
  return "(w=" + std::to_string(i.w) + ",h=" + std::to_string(i.h) +
         ",t=" + std::to_string(i.t) + ")";
}

struct SegmentLayout {
  int cols = 0;
  int rows = 0;
  int windows = 0;
  int x_stride = 0;
  int y_stride = 0;
  int frames_per_window = 0;
  int seg_width = 0;
  int seg_height = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(cols) * rows * windows;
  }
  bool contains(const SegmentIndex& i) const {
    return i.w >= 0 && i.w < cols && i.h >= 0 && i.h < rows && i.t >= 0 && i.t < windows;
  }
  /// Position of `i` in a (t, h, w) row-major array.
  std::size_t flat(const SegmentIndex& i) const {
    return (static_cast<std::size_t>(i.t) * rows + i.h) * cols + i.w;
  }
  SegmentIndex index_at(std::size_t flat_index) const {
    const auto per_window = static_cast<std::size_t>(cols) * rows;
    const auto t = flat_index / per_window;
    const auto rem = flat_index % per_window;
    return {static_cast<int>(rem % cols), static_cast<int>(rem / cols), static_cast<int>(t)};
  }

  friend bool operator==(const SegmentLayout&, const SegmentLayout&) = default;
};

inline void validate(const SegmentConfig& c) {
  if (c.width < 1 || c.height < 1)
    throw Error(ErrorKind::configuration, "segment dimensions must be positive");
  if (!(c.duration > 0.0))
    throw Error(ErrorKind::configuration, "segment duration must be positive");
  if (!(c.overlap >= 0.0 && c.overlap < 1.0))
    throw Error(ErrorKind::configuration, "spatial overlap must lie in [0, 1)");
}

inline SegmentLayout layout(const ClipMetadata& metadata, const SegmentConfig& config) {
  validate(config);
  if (config.width > metadata.width || config.height > metadata.height)
    throw Error(ErrorKind::configuration,
                "segment " + std::to_string(config.width) + "x" +
                    std::to_string(config.height) + " exceeds frame " +
                    std::to_string(metadata.width) + "x" + std::to_string(metadata.height));
  const double fps = metadata.frame_rate.value();
  const double clip_seconds = metadata.duration();
  // Small slack so that e.g. 150 frames / 30 fps / 0.5 s is exactly 10.
  constexpr double kSlack = 1e-9;
  if (config.duration > clip_seconds + kSlack)
    throw Error(ErrorKind::configuration, "segment duration exceeds clip duration");

  SegmentLayout l;
  l.seg_width = config.width;
  l.seg_height = config.height;
  l.x_stride = std::max(1, static_cast<int>(std::ceil(config.width * (1.0 - config.overlap) - kSlack)));
  l.y_stride = std::max(1, static_cast<int>(std::ceil(config.height * (1.0 - config.overlap) - kSlack)));
  l.cols = (metadata.width - config.width) / l.x_stride + 1;
  l.rows = (metadata.height - config.height) / l.y_stride + 1;
  l.frames_per_window = std::max(1, static_cast<int>(std::lround(config.duration * fps)));
  l.windows = static_cast<int>(std::floor(clip_seconds / config.duration + kSlack));
  // Rounding frames_per_window up can overrun the clip; drop such windows.
  l.windows = std::min(l.windows, metadata.frame_count / l.frames_per_window);
  if (l.windows < 1)
    throw Error(ErrorKind::configuration, "clip too short for one temporal window");
  return l;
}

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Non-owning window onto one segment of a plane sequence. `frames` holds
/// the planes of the segment's frame range only.
template <typename T>
struct SegmentView {
  SegmentIndex index;
  Rect rect;
  int first_frame = 0;
  std::vector<const BasicPlane<T>*> frames;

  int frame_count() const { return static_cast<int>(frames.size()); }
  int frame_end() const { return first_frame + frame_count(); }
  const T& sample(int frame, int x, int y) const {
    return frames[static_cast<std::size_t>(frame)]->at(rect.x + x, rect.y + y);
  }
};

namespace detail {

inline Rect segment_rect(const SegmentIndex& index, const SegmentLayout& l) {
  if (!l.contains(index))
    throw Error(ErrorKind::bounds, "segment " + to_string(index) + " outside " +
                                       std::to_string(l.cols) + "x" + std::to_string(l.rows) +
                                       "x" + std::to_string(l.windows) + " grid");
  return {index.w * l.x_stride, index.h * l.y_stride, l.seg_width, l.seg_height};
}

}  // namespace detail

/// Segment over an arbitrary plane sequence (e.g. filtered luma).
template <typename T>
SegmentView<T> extract(std::span<const BasicPlane<T>> planes, const SegmentIndex& index,
                       const SegmentLayout& l) {
  SegmentView<T> v;
  v.index = index;
  v.rect = detail::segment_rect(index, l);
  v.first_frame = index.t * l.frames_per_window;
  if (v.first_frame + l.frames_per_window > static_cast<int>(planes.size()))
    throw Error(ErrorKind::bounds, "segment " + to_string(index) + " runs past the last frame");
  v.frames.reserve(static_cast<std::size_t>(l.frames_per_window));
  for (int f = 0; f < l.frames_per_window; ++f) {
    const auto& p = planes[static_cast<std::size_t>(v.first_frame + f)];
    if (v.rect.x + v.rect.width > p.width || v.rect.y + v.rect.height > p.height)
      throw Error(ErrorKind::bounds, "segment " + to_string(index) + " leaves the frame");
    v.frames.push_back(&p);
  }
  return v;
}

inline SegmentView<std::uint8_t> extract(const Clip& clip, const SegmentIndex& index,
                                         const SegmentLayout& l) {
  SegmentView<std::uint8_t> v;
  v.index = index;
  v.rect = detail::segment_rect(index, l);
  v.first_frame = index.t * l.frames_per_window;
  if (v.first_frame + l.frames_per_window > static_cast<int>(clip.frames.size()))
    throw Error(ErrorKind::bounds, "segment " + to_string(index) + " runs past the last frame");
  if (v.rect.x + v.rect.width > clip.metadata.width ||
      v.rect.y + v.rect.height > clip.metadata.height)
    throw Error(ErrorKind::bounds, "segment " + to_string(index) + " leaves the frame");
  v.frames.reserve(static_cast<std::size_t>(l.frames_per_window));
  for (int f = 0; f < l.frames_per_window; ++f)
    v.frames.push_back(&clip.frames[static_cast<std::size_t>(v.first_frame + f)].luma);
  return v;
}

}  // namespace surjnd
