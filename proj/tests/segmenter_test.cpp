#include <random>
#include <set>
#include <vector>

#include <gtest/gtest.h>

#include "surjnd/segmenter.hpp"
#include "test_support.hpp"

using namespace surjnd;

namespace {

// Independent enumeration: walk every pixel offset and keep those on the
// stride lattice whose window still fits.
int enumerate_positions(int extent, int window, double overlap) {
  int stride = 1;
  while (stride < window * (1.0 - overlap) - 1e-9) ++stride;
  int n = 0;
  for (int x = 0; x + window <= extent; ++x)
    if (x % stride == 0) ++n;
  return n;
}

int enumerate_windows(int frames, Rational fps, double seconds) {
  int fpw = 0;
  double best = 1e300;
  for (int f = 1; f <= 10000; ++f) {
    const double d = std::abs(f - seconds * fps.value());
    if (d <= best) { best = d; fpw = f; }
  }
  int n = 0;
  while ((n + 1) * seconds <= frames / fps.value() + 1e-9 && (n + 1) * fpw <= frames) ++n;
  return n;
}

}  // namespace

TEST(Segmenter, DefaultGrid720p) {
  const auto l = layout(test::meta(1280, 720, 150), SegmentConfig{});
  EXPECT_EQ(l.cols, 7);
  EXPECT_EQ(l.rows, 7);
  EXPECT_EQ(l.windows, 10);
  EXPECT_EQ(l.size(), 490u);
  EXPECT_EQ(l.x_stride, 160);
  EXPECT_EQ(l.y_stride, 90);
  EXPECT_EQ(l.frames_per_window, 15);
}

TEST(Segmenter, EnumerationOracleGrids) {
  struct Case { int w, h; std::size_t total; } cases[] = {{1920, 1080, 1210}, {640, 360, 90}, {1280, 720, 490}};
  for (const auto& c : cases) {
    const auto l = layout(test::meta(c.w, c.h, 150), SegmentConfig{});
    const std::size_t brute = static_cast<std::size_t>(enumerate_positions(c.w, 320, 0.5)) *
                              enumerate_positions(c.h, 180, 0.5) * enumerate_windows(150, {30, 1}, 0.5);
    EXPECT_EQ(brute, c.total);
    EXPECT_EQ(l.size(), c.total) << c.w << "x" << c.h;
  }
}

TEST(Segmenter, ConfigurationErrors) {
  auto kind = [](const ClipMetadata& m, SegmentConfig c) {
    try {
      layout(m, c);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::io;
  };
  EXPECT_EQ(kind(test::meta(300, 720, 150), {}), ErrorKind::configuration);
  EXPECT_EQ(kind(test::meta(1280, 100, 150), {}), ErrorKind::configuration);
  EXPECT_EQ(kind(test::meta(1280, 720, 10), {}), ErrorKind::configuration);
  EXPECT_EQ(kind(test::meta(1280, 720, 150), {320, 180, 0.5, 1.0}), ErrorKind::configuration);
  EXPECT_EQ(kind(test::meta(1280, 720, 150), {320, 180, 0.0, 0.5}), ErrorKind::configuration);
  EXPECT_EQ(kind(test::meta(1280, 720, 150), {0, 180, 0.5, 0.5}), ErrorKind::configuration);
}

TEST(Segmenter, ExtractExamples) {
  const auto m = test::meta(1280, 720, 150);
  const auto l = layout(m, SegmentConfig{});
  std::vector<Plane> planes(150, Plane(1280, 720));
  const std::span<const Plane> span(planes);

  const auto first = extract(span, {0, 0, 0}, l);
  EXPECT_EQ(first.rect, (Rect{0, 0, 320, 180}));
  EXPECT_EQ(first.first_frame, 0);
  EXPECT_EQ(first.frame_end(), 15);

  const auto last = extract(span, {6, 6, 9}, l);
  EXPECT_EQ(last.rect, (Rect{960, 540, 320, 180}));
  EXPECT_EQ(last.first_frame, 135);
  EXPECT_EQ(last.frame_end(), 150);
  EXPECT_EQ(last.frames.front(), &planes[135]);

  for (SegmentIndex bad : {SegmentIndex{7, 0, 0}, SegmentIndex{0, 7, 0}, SegmentIndex{0, 0, 10},
                           SegmentIndex{-1, 0, 0}}) {
    try {
      extract(span, bad, l);
      ADD_FAILURE() << to_string(bad);
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::bounds);
    }
  }
}

TEST(Segmenter, ExtractFromClipSamples) {
  const Clip c = test::noise_clip(test::meta(64, 48, 8, {4, 1}), 3);
  const auto l = layout(c.metadata, {32, 24, 1.0, 0.5});
  EXPECT_EQ(l.cols, 3);
  EXPECT_EQ(l.rows, 3);
  EXPECT_EQ(l.windows, 2);
  const auto v = extract(c, {2, 1, 1}, l);
  EXPECT_EQ(v.rect, (Rect{32, 12, 32, 24}));
  EXPECT_EQ(v.sample(0, 0, 0), c.frames[4].luma.at(32, 12));
  EXPECT_EQ(v.sample(3, 31, 23), c.frames[7].luma.at(63, 35));
}

TEST(Segmenter, CoverageOn720p) {
  const auto l = layout(test::meta(1280, 720, 150), SegmentConfig{});
  std::vector<int> cx(1280, 0), cy(720, 0);
  for (int w = 0; w < l.cols; ++w)
    for (int x = w * l.x_stride; x < w * l.x_stride + l.seg_width; ++x) ++cx[static_cast<std::size_t>(x)];
  for (int h = 0; h < l.rows; ++h)
    for (int y = h * l.y_stride; y < h * l.y_stride + l.seg_height; ++y) ++cy[static_cast<std::size_t>(y)];
  for (int x = 0; x < 1280; ++x) EXPECT_GE(cx[static_cast<std::size_t>(x)], 1);
  for (int y = 0; y < 720; ++y) EXPECT_GE(cy[static_cast<std::size_t>(y)], 1);
  for (int x = 160; x < 1120; ++x)
    for (int y = 90; y < 630; y += 7)
      ASSERT_GE(cx[static_cast<std::size_t>(x)] * cy[static_cast<std::size_t>(y)], 4);
}

TEST(Segmenter, FlatOrderIsTimeRowColumn) {
  const auto l = layout(test::meta(1280, 720, 150), SegmentConfig{});
  std::vector<SegmentIndex> all;
  for (std::size_t i = 0; i < l.size(); ++i) {
    const auto idx = l.index_at(i);
    EXPECT_EQ(l.flat(idx), i);
    all.push_back(idx);
  }
  EXPECT_TRUE(std::is_sorted(all.begin(), all.end()));
  EXPECT_EQ(l.index_at(1), (SegmentIndex{1, 0, 0}));
  EXPECT_EQ(l.index_at(7), (SegmentIndex{0, 1, 0}));
  EXPECT_EQ(l.index_at(49), (SegmentIndex{0, 0, 1}));
}

// Property: random geometry against the enumeration oracle, plus temporal
// windows disjoint, consecutive and inside the clip.
TEST(SegmenterProperty, RandomGeometryMatchesEnumeration) {
  std::mt19937_64 rng(5);
  const Rational rates[] = {{24, 1}, {25, 1}, {30, 1}, {30000, 1001}, {60, 1}, {12, 1}, {50, 1}};
  int checked = 0;
  while (checked < 150) {
    SegmentConfig c;
    c.width = 8 + static_cast<int>(rng() % 200);
    c.height = 8 + static_cast<int>(rng() % 120);
    c.overlap = static_cast<double>(rng() % 90) / 100.0;
    c.duration = 0.1 + static_cast<double>(rng() % 20) / 10.0;
    const Rational fps = rates[rng() % 7];
    const int w = c.width + static_cast<int>(rng() % 700);
    const int h = c.height + static_cast<int>(rng() % 400);
    const int frames = 1 + static_cast<int>(rng() % 200);
    const auto m = test::meta(w, h, frames, fps);
    SegmentLayout l;
    try {
      l = layout(m, c);
    } catch (const Error& e) {
      ASSERT_EQ(e.kind(), ErrorKind::configuration);
      ASSERT_EQ(enumerate_windows(frames, fps, c.duration), 0);
      continue;
    }
    ++checked;
    ASSERT_EQ(l.cols, enumerate_positions(w, c.width, c.overlap));
    ASSERT_EQ(l.rows, enumerate_positions(h, c.height, c.overlap));
    ASSERT_EQ(l.windows, enumerate_windows(frames, fps, c.duration));
    ASSERT_EQ(layout(m, c), l);
    int expected_first = 0;
    for (int t = 0; t < l.windows; ++t) {
      const int first = t * l.frames_per_window;
      ASSERT_EQ(first, expected_first);
      expected_first = first + l.frames_per_window;
      ASSERT_LE(expected_first, frames);
    }
    const auto last = detail::segment_rect({l.cols - 1, l.rows - 1, 0}, l);
    ASSERT_LE(last.x + last.width, w);
    ASSERT_LE(last.y + last.height, h);
    ASSERT_GT(last.x + last.width + l.x_stride, w);
  }
}
