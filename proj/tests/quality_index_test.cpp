#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "surjnd/quality_index.hpp"
#include "test_support.hpp"

using namespace surjnd;

namespace {

Clip offset_clip(const Clip& c, int offset, ClipRole role) {
  Clip out = c;
  out.role = role;
  for (auto& f : out.frames)
    for (auto& s : f.luma.samples) s = static_cast<std::uint8_t>(std::clamp(int(s) + offset, 0, 255));
  return out;
}

// Brute force: per frame SSE over every pixel of the rectangle, PSNR in dB,
// linear map, then the plain mean over frames.
double psnr_oracle(const SegmentView<std::uint8_t>& a, const SegmentView<std::uint8_t>& b) {
  double total = 0;
  for (int f = 0; f < a.frame_count(); ++f) {
    long double sse = 0;
    for (int y = 0; y < a.rect.height; ++y)
      for (int x = 0; x < a.rect.width; ++x) {
        const long double d = static_cast<long double>(a.sample(f, x, y)) - b.sample(f, x, y);
        sse += d * d;
      }
    const long double mse = sse / (a.rect.width * a.rect.height);
    const double v = mse == 0 ? 100.0 : std::min(100.0, std::max(0.0, 100.0 * double(10.0L * std::log10(65025.0L / mse)) / 60.0));
    total += v;
  }
  return total / a.frame_count();
}

std::string table_csv(const SegmentLayout& l, const std::string& clip, int qp, double skip_score = -1,
                      std::size_t skip = static_cast<std::size_t>(-1)) {
  std::ostringstream out;
  out << "clip_id,qp,w,h,t,score\n";
  for (std::size_t i = 0; i < l.size(); ++i) {
    if (i == skip) {
      if (skip_score < 0) continue;
    }
    const auto idx = l.index_at(i);
    out << clip << ',' << qp << ',' << idx.w << ',' << idx.h << ',' << idx.t << ','
        << (i == skip ? skip_score : 50.0 + static_cast<double>(i % 37)) << '\n';
  }
  return out.str();
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorKind::io;
}

}  // namespace

TEST(QualityIndex, PsnrOffsetSixteenMatchesBruteForce) {
  const Clip ref = test::constant_clip(test::meta(64, 48, 4), 100);
  const Clip dist = offset_clip(ref, 16, ClipRole::coded_at(30));
  const auto l = layout(ref.metadata, {32, 24, 4.0 / 30, 0.5});
  const auto a = extract(ref, {0, 0, 0}, l);
  const auto b = extract(dist, {0, 0, 0}, l);
  const double expected = psnr_oracle(a, b);
  EXPECT_NEAR(expected, 100.0 * (10.0 * std::log10(65025.0 / 256.0)) / 60.0, 1e-12);
  EXPECT_NEAR(score(MetricId::psnr_mapped, a, b).value(), expected, 1e-9);
  EXPECT_NEAR(expected, 40.08, 0.01);
}

TEST(QualityIndex, StructSimLuminanceTermOnly) {
  const Clip ref = test::constant_clip(test::meta(16, 16, 2), 128);
  const Clip dist = test::constant_clip(test::meta(16, 16, 2), 144);
  const auto l = layout(ref.metadata, {8, 8, 2.0 / 30, 0.0});
  const double c1 = (0.01 * 255) * (0.01 * 255);
  const double lum = (2.0 * 128 * 144 + c1) / (128.0 * 128 + 144.0 * 144 + c1);
  const double s = score(MetricId::struct_sim, extract(ref, {1, 1, 0}, l), extract(dist, {1, 1, 0}, l)).value();
  EXPECT_NEAR(s, 100.0 * lum, 1e-9);
  EXPECT_LT(s, 100.0);
}

TEST(QualityIndex, ShapeMismatch) {
  const Clip a = test::noise_clip(test::meta(64, 48, 4), 1);
  const auto l1 = layout(a.metadata, {32, 24, 4.0 / 30, 0.5});
  const auto l2 = layout(a.metadata, {16, 24, 4.0 / 30, 0.5});
  EXPECT_EQ(kind_of([&] { score(MetricId::psnr_mapped, extract(a, {0, 0, 0}, l1), extract(a, {0, 0, 0}, l2)); }),
            ErrorKind::shape);
}

TEST(QualityIndex, ExternalWithoutTableIsMissingScore) {
  const Clip a = test::noise_clip(test::meta(64, 48, 4), 1);
  const auto l = layout(a.metadata, {32, 24, 4.0 / 30, 0.5});
  EXPECT_EQ(kind_of([&] { score(MetricId::external, extract(a, {0, 0, 0}, l), extract(a, {0, 0, 0}, l)); }),
            ErrorKind::missing_score);
  ScoreTable empty(l);
  ExternalScores ext{&empty, "x", 10};
  EXPECT_EQ(kind_of([&] { score(MetricId::external, extract(a, {0, 0, 0}, l), extract(a, {0, 0, 0}, l), &ext); }),
            ErrorKind::missing_score);
}

TEST(QualityIndex, Identical720pGivesAllHundred) {
  const Clip ref = test::noise_clip(test::meta(1280, 720, 150), 9);
  const auto l = layout(ref.metadata, SegmentConfig{});
  const auto s = score_all(MetricId::psnr_mapped, ref, ref, l);
  ASSERT_EQ(s.size(), 490u);
  for (const auto& v : s) EXPECT_EQ(v.value(), 100.0);
}

TEST(QualityIndex, ParseMetric) {
  EXPECT_EQ(parse_metric("psnr_mapped"), MetricId::psnr_mapped);
  EXPECT_EQ(parse_metric("struct_sim"), MetricId::struct_sim);
  EXPECT_EQ(parse_metric("external"), MetricId::external);
  EXPECT_EQ(kind_of([] { parse_metric("vmaf"); }), ErrorKind::configuration);
  EXPECT_EQ(kind_of([] { QualityScore(100.5); }), ErrorKind::range);
}

// Property: every built-in metric scores a segment against itself as 100.
TEST(QualityIndexProperty, Reflexivity) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 16 + static_cast<int>(rng() % 48);
    const int h = 16 + static_cast<int>(rng() % 40);
    const Clip c = test::noise_clip(test::meta(w, h, 4), rng());
    const auto l = layout(c.metadata, {8 + static_cast<int>(rng() % 9), 8 + static_cast<int>(rng() % 9), 2.0 / 30, 0.5});
    const auto idx = l.index_at(rng() % l.size());
    for (auto m : {MetricId::psnr_mapped, MetricId::struct_sim})
      ASSERT_NEAR(score(m, extract(c, idx, l), extract(c, idx, l)).value(), 100.0, 1e-9) << trial;
  }
}

TEST(QualityIndex, PsnrNonIncreasingWithNoise) {
  const Clip ref = test::constant_clip(test::meta(96, 64, 8), 128);
  const auto l = layout(ref.metadata, {96, 64, 8.0 / 30, 0.5});
  double prev = 101.0;
  for (int level = 1; level <= 12; ++level) {
    const Clip d = test::add_noise(ref, 1.5 * level, 77 + static_cast<std::uint64_t>(level), ClipRole::coded_at(level));
    const double s = score(MetricId::psnr_mapped, extract(ref, {0, 0, 0}, l), extract(d, {0, 0, 0}, l)).value();
    EXPECT_LE(s, prev) << "level " << level;
    prev = s;
  }
}

// Property: segment score equals the mean of independently computed frame
// scores, and the summed-area path agrees with the direct per-segment path.
TEST(QualityIndexProperty, FrameMeanAndGridPathAgree) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int w = 24 + static_cast<int>(rng() % 40);
    const int h = 24 + static_cast<int>(rng() % 30);
    const int frames = 2 + static_cast<int>(rng() % 5);
    const Clip ref = test::noise_clip(test::meta(w, h, frames), rng());
    const Clip dist = test::add_noise(ref, 1.0 + static_cast<double>(rng() % 30), rng(), ClipRole::coded_at(20));
    const auto l = layout(ref.metadata, {8 + static_cast<int>(rng() % 16), 8 + static_cast<int>(rng() % 16),
                                         static_cast<double>(1 + rng() % frames) / 30.0, 0.5});
    const auto all = score_all(MetricId::psnr_mapped, ref, dist, l);
    const auto ss = score_all(MetricId::struct_sim, ref, dist, l);
    for (std::size_t i = 0; i < l.size(); ++i) {
      const auto idx = l.index_at(i);
      const auto a = extract(ref, idx, l);
      const auto b = extract(dist, idx, l);
      ASSERT_NEAR(all[i].value(), psnr_oracle(a, b), 1e-9);
      double mean = 0;
      for (int f = 0; f < a.frame_count(); ++f) mean += struct_sim_frame(*a.frames[f], *b.frames[f], a.rect);
      ASSERT_NEAR(ss[i].value(), mean / a.frame_count(), 1e-9);
    }
  }
}

TEST(ScoreTable, WellFormedLoadsAndPassesThrough) {
  const Clip ref = test::noise_clip(test::meta(1280, 720, 150), 1);
  const auto l = layout(ref.metadata, SegmentConfig{});
  std::istringstream in(table_csv(l, "src01", 30));
  const auto t = load_score_table(in, l);
  ASSERT_TRUE(t.has("src01", 30));
  ASSERT_EQ(t.scores("src01", 30).size(), 490u);
  EXPECT_EQ(t.lookup("src01", 30, {6, 6, 9}).value(), 50.0 + static_cast<double>(489 % 37));
  ExternalScores ext{&t, "src01", 30};
  const auto s = score_all(MetricId::external, ref, ref, l, &ext);
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(s[i].value(), 50.0 + static_cast<double>(i % 37));
}

TEST(ScoreTable, Errors) {
  const auto l = layout(test::meta(1280, 720, 150), SegmentConfig{});
  {
    std::istringstream in(table_csv(l, "a", 30, 101.0, 5));
    EXPECT_EQ(kind_of([&] { load_score_table(in, l); }), ErrorKind::range);
  }
  {
    std::istringstream in(table_csv(l, "a", 30, -1, 12));
    try {
      load_score_table(in, l);
      ADD_FAILURE();
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::incomplete_table);
      EXPECT_NE(std::string(e.what()).find(to_string(l.index_at(12))), std::string::npos) << e.what();
    }
  }
  {
    std::istringstream in("clip_id,qp,w,h,t,score\na,30,7,0,0,50\n");
    EXPECT_EQ(kind_of([&] { load_score_table(in, l); }), ErrorKind::bounds);
  }
  {
    std::istringstream in("clip,qp,w,h,t,score\n");
    EXPECT_EQ(kind_of([&] { load_score_table(in, l); }), ErrorKind::format);
  }
  {
    std::istringstream in(table_csv(l, "a", 30) + "a,30,0,0,0,50\n");
    EXPECT_EQ(kind_of([&] { load_score_table(in, l); }), ErrorKind::format);
  }
  const auto other = layout(test::meta(640, 360, 150), SegmentConfig{});
  std::istringstream in(table_csv(l, "a", 30));
  const auto t = load_score_table(in, l);
  const Clip c = test::constant_clip(test::meta(640, 360, 150), 0);
  ExternalScores ext{&t, "a", 30};
  EXPECT_EQ(kind_of([&] { score_all(MetricId::external, c, c, other, &ext); }), ErrorKind::shape);
}
