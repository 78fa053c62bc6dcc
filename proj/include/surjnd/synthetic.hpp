#pragma once

// Procedural stand-in for a JND dataset. Each source mixes a moving smooth
// gradient and a structured texture with a per-frame noise field whose
// weight follows the source's masking strength mu in [0, 1], varying slowly
// across the frame. Coded copies are quantisation surrogates (plus a little
// blur) whose step grows with qp, and the ground-truth first-JND
// distribution is N(a + b mu, s^2).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "surjnd/error.hpp"
#include "surjnd/features.hpp"
#include "surjnd/media_io.hpp"
#include "surjnd/sur_model.hpp"

namespace surjnd {

struct SyntheticConfig {
  int sources = 40;
  int width = 640;
  int height = 360;
  double duration = 2.0;
  Rational frame_rate{12, 1};
  std::vector<int> qp_grid = surjnd::qp_grid(0, 50, 2);
  int subjects = 30;
  double jnd_base = 22.0;   // JND mean at mu = 0
  double jnd_slope = 12.0;  // added to the mean at mu = 1
  double jnd_std = 4.0;
};

struct SyntheticRecipe {
  std::string source_id;
  double masking = 0.0;  // mu
  std::uint64_t seed = 0;
  double gradient_angle = 0.0;   // radians
  double gradient_speed = 0.0;   // px per frame
  double gradient_period = 0.0;  // px
  double texture_period = 0.0;   // px
  double texture_speed = 0.0;    // px per frame
};

inline GaussianJndModel generating_model(const SyntheticConfig& c, const SyntheticRecipe& r) {
  return {c.jnd_base + c.jnd_slope * r.masking, c.jnd_std};
}

namespace detail {

/// Uniform double in [0, 1) from the top 53 bits; identical on every
/// platform, unlike std::uniform_real_distribution.
inline double unit(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double standard_normal(std::mt19937_64& rng) {
  double u1 = unit(rng);
  while (u1 <= 0.0) u1 = unit(rng);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline std::uint8_t to_sample(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace detail

inline ClipMetadata synthetic_metadata(const SyntheticConfig& c) {
  ClipMetadata m;
  m.width = c.width;
  m.height = c.height;
  m.frame_rate = c.frame_rate;
  m.frame_count = static_cast<int>(std::lround(c.duration * c.frame_rate.value()));
  m.chroma = ChromaLayout::k420;
  validate(m);
  if (m.frame_count < 1) throw Error(ErrorKind::configuration, "synthetic clip has no frames");
  return m;
}

inline Clip render_reference(const SyntheticConfig& c, const SyntheticRecipe& r) {
  constexpr double kGradientAmp = 60.0;
  constexpr double kTextureAmp = 25.0;
  constexpr double kNoiseAmp = 70.0;
  const ClipMetadata m = synthetic_metadata(c);
  Clip clip{m, {}, ClipRole::reference()};
  clip.frames.reserve(static_cast<std::size_t>(m.frame_count));
  std::mt19937_64 rng(r.seed);
  const double two_pi = 2.0 * std::numbers::pi;
  const double ca = std::cos(r.gradient_angle), sa = std::sin(r.gradient_angle);
  // Past ~0.7 the noise dominates every segment and the randomness measures
  // saturate, so mu is mapped onto [0, kNoiseReach].
  constexpr double kNoiseReach = 0.7;
  constexpr double kNoiseSpread = 0.12;
  std::vector<double> weight(static_cast<std::size_t>(m.width) * static_cast<std::size_t>(m.height));
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x)
      weight[static_cast<std::size_t>(y) * static_cast<std::size_t>(m.width) + static_cast<std::size_t>(x)] =
          std::clamp(kNoiseReach * r.masking +
                         kNoiseSpread * std::sin(two_pi * (double(x) / m.width + 0.5 * y / m.height) +
                                                 r.gradient_angle),
                     0.0, 1.0);
  // Separable texture factors, recomputed per frame for the drift.
  std::vector<double> tex_x(static_cast<std::size_t>(m.width));
  std::vector<double> tex_y(static_cast<std::size_t>(m.height));
  for (int f = 0; f < m.frame_count; ++f) {
    Frame frame = blank_frame(m);
    for (int x = 0; x < m.width; ++x)
      tex_x[static_cast<std::size_t>(x)] = std::sin(two_pi * (x - r.texture_speed * f) / r.texture_period);
    for (int y = 0; y < m.height; ++y)
      tex_y[static_cast<std::size_t>(y)] = std::sin(two_pi * y / (1.3 * r.texture_period));
    for (int y = 0; y < m.height; ++y) {
      auto row = frame.luma.row(y);
      for (int x = 0; x < m.width; ++x) {
        const double phase = (x * ca + y * sa - r.gradient_speed * f) / r.gradient_period;
        const double smooth = kGradientAmp * std::sin(two_pi * phase) +
                              kTextureAmp * tex_x[static_cast<std::size_t>(x)] *
                                  tex_y[static_cast<std::size_t>(y)];
        const double noise = kNoiseAmp * (2.0 * detail::unit(rng) - 1.0);
        const double mu = weight[static_cast<std::size_t>(y) * static_cast<std::size_t>(m.width) +
                                 static_cast<std::size_t>(x)];
        row[x] = detail::to_sample(128.0 + (1.0 - mu) * smooth + mu * noise);
      }
    }
    clip.frames.push_back(std::move(frame));
  }
  return clip;
}

/// Blur mix weight and quantiser step of the coded surrogate at `qp`.
inline double surrogate_blur(int qp) { return 0.1 * std::clamp(qp / 51.0, 0.0, 1.0); }
inline double surrogate_step(int qp) { return std::exp2(qp / 12.0); }

/// Coded surrogate: quantise((1 - w) ref + w blur(ref), step). The blur
/// weight stays small so distortion is mostly content-independent. qp 0 is
/// lossless.
inline Clip render_coded(const Clip& reference, int qp) {
  const double w = surrogate_blur(qp);
  const double step = surrogate_step(qp);
  Clip out{reference.metadata, {}, ClipRole::coded_at(qp)};
  out.frames.reserve(reference.frames.size());
  for (const auto& f : reference.frames) {
    Frame g = f;
    if (qp > 0) {
      const FloatPlane blurred = csf_prefilter(f.luma);
      for (std::size_t i = 0; i < g.luma.samples.size(); ++i) {
        const double v = (1.0 - w) * f.luma.samples[i] + w * blurred.samples[i];
        g.luma.samples[i] = detail::to_sample(std::round(v / step) * step);
      }
    }
    out.frames.push_back(std::move(g));
  }
  return out;
}

struct SyntheticDataset {
  SyntheticConfig config;
  std::uint64_t seed = 0;
  std::vector<SyntheticRecipe> recipes;
  std::map<std::string, JndAnnotationSet> annotations;
};

inline void validate(const SyntheticConfig& c) {
  if (c.sources < 1) throw Error(ErrorKind::configuration, "need at least one synthetic source");
  if (c.subjects < 2) throw Error(ErrorKind::configuration, "need at least two subjects");
  if (!(c.jnd_std > 0.0)) throw Error(ErrorKind::configuration, "JND std must be > 0");
  if (c.qp_grid.empty()) throw Error(ErrorKind::configuration, "empty qp grid");
  for (int q : c.qp_grid)
    if (q < kMinQp || q > kMaxQp) throw Error(ErrorKind::configuration, "qp grid outside 0..51");
  if (!std::is_sorted(c.qp_grid.begin(), c.qp_grid.end()))
    throw Error(ErrorKind::configuration, "qp grid must be increasing");
}

/// Recipes and subject annotations; clips are rendered on demand.
inline SyntheticDataset generate_synthetic(const SyntheticConfig& c, std::uint64_t seed) {
  validate(c);
  synthetic_metadata(c);
  SyntheticDataset ds{c, seed, {}, {}};
  std::mt19937_64 rng(seed);
  // Stratified masking strengths, presented in shuffled order.
  std::vector<double> mus(static_cast<std::size_t>(c.sources));
  for (int s = 0; s < c.sources; ++s)
    mus[static_cast<std::size_t>(s)] = (s + detail::unit(rng)) / c.sources;
  for (std::size_t i = mus.size(); i > 1; --i) std::swap(mus[i - 1], mus[rng() % i]);

  for (int s = 0; s < c.sources; ++s) {
    SyntheticRecipe r;
    char id[32];
    std::snprintf(id, sizeof id, "syn%03d", s);
    r.source_id = id;
    r.masking = mus[static_cast<std::size_t>(s)];
    r.seed = rng();
    r.gradient_angle = 2.0 * std::numbers::pi * detail::unit(rng);
    r.gradient_speed = 0.5 + 2.0 * detail::unit(rng);
    r.gradient_period = 200.0 + 400.0 * detail::unit(rng);
    r.texture_period = 16.0 + 32.0 * detail::unit(rng);
    r.texture_speed = 1.5 * detail::unit(rng);

    const GaussianJndModel truth = generating_model(c, r);
    JndAnnotationSet ann;
    ann.source_id = r.source_id;
    for (int m = 0; m < c.subjects; ++m) {
      const double x = truth.mean + truth.std * detail::standard_normal(rng);
      char subject[16];
      std::snprintf(subject, sizeof subject, "u%02d", m);
      ann.subject_ids.emplace_back(subject);
      ann.first_jnd.push_back(static_cast<int>(std::clamp(std::lround(x), 1L, long{kMaxQp})));
    }
    ds.annotations.emplace(r.source_id, std::move(ann));
    ds.recipes.push_back(std::move(r));
  }
  return ds;
}

// JSON round-trip for manifests.

inline nlohmann::json to_json(const SyntheticConfig& c) {
  return {{"sources", c.sources},
          {"width", c.width},
          {"height", c.height},
          {"duration", c.duration},
          {"frame_rate", std::to_string(c.frame_rate.num) + ":" + std::to_string(c.frame_rate.den)},
          {"qp_grid", c.qp_grid},
          {"subjects", c.subjects},
          {"jnd_base", c.jnd_base},
          {"jnd_slope", c.jnd_slope},
          {"jnd_std", c.jnd_std}};
}

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  SyntheticConfig c;
  c.sources = j.value("sources", c.sources);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.duration = j.value("duration", c.duration);
  if (j.contains("frame_rate")) c.frame_rate = detail::parse_ratio(j.at("frame_rate").get<std::string>(), "frame rate");
  c.qp_grid = j.value("qp_grid", c.qp_grid);
  c.subjects = j.value("subjects", c.subjects);
  c.jnd_base = j.value("jnd_base", c.jnd_base);
  c.jnd_slope = j.value("jnd_slope", c.jnd_slope);
  c.jnd_std = j.value("jnd_std", c.jnd_std);
  validate(c);
  return c;
}

inline nlohmann::json to_json(const SyntheticRecipe& r) {
  return {{"masking", r.masking},
          {"seed", r.seed},
          {"gradient_angle", r.gradient_angle},
          {"gradient_speed", r.gradient_speed},
          {"gradient_period", r.gradient_period},
          {"texture_period", r.texture_period},
          {"texture_speed", r.texture_speed}};
}

inline SyntheticRecipe synthetic_recipe_from_json(const std::string& id, const nlohmann::json& j) {
  SyntheticRecipe r;
  r.source_id = id;
  r.masking = j.at("masking").get<double>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.gradient_angle = j.at("gradient_angle").get<double>();
  r.gradient_speed = j.at("gradient_speed").get<double>();
  r.gradient_period = j.at("gradient_period").get<double>();
  r.texture_period = j.at("texture_period").get<double>();
  r.texture_speed = j.at("texture_speed").get<double>();
  return r;
}

}  // namespace surjnd
