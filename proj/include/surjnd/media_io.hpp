#pragma once

// Planar 8-bit video containers plus YUV4MPEG2 and raw-YUV readers/writers.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "surjnd/error.hpp"

namespace surjnd {

template <typename T>
struct BasicPlane {
  int width = 0;
  int height = 0;
  std::vector<T> samples;  // row-major

  BasicPlane() = default;
  BasicPlane(int w, int h, T fill = T{})
      : width(w), height(h),
        samples(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {}

  T& at(int x, int y) { return samples[static_cast<std::size_t>(y) * width + x]; }
  const T& at(int x, int y) const {
    return samples[static_cast<std::size_t>(y) * width + x];
  }
  std::span<T> row(int y) {
    return {samples.data() + static_cast<std::size_t>(y) * width,
            static_cast<std::size_t>(width)};
  }
  std::span<const T> row(int y) const {
    return {samples.data() + static_cast<std::size_t>(y) * width,
            static_cast<std::size_t>(width)};
  }
  std::size_t size() const { return samples.size(); }

  friend bool operator==(const BasicPlane&, const BasicPlane&) = default;
};

using Plane = BasicPlane<std::uint8_t>;
using FloatPlane = BasicPlane<double>;

enum class ChromaLayout { k420, k422, k444 };

inline const char* to_string(ChromaLayout c) {
  switch (c) {
    case ChromaLayout::k420: return "420";
    case ChromaLayout::k422: return "422";
    case ChromaLayout::k444: return "444";
  }
  return "?";
}

struct Rational {
  int num = 0;
  int den = 1;

  double value() const { return static_cast<double>(num) / den; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct ClipMetadata {
  int width = 0;
  int height = 0;
  Rational frame_rate{30, 1};
  int frame_count = 0;
  ChromaLayout chroma = ChromaLayout::k420;
  int bit_depth = 8;

  double duration() const { return frame_count / frame_rate.value(); }

  int chroma_width() const {
    return chroma == ChromaLayout::k444 ? width : (width + 1) / 2;
  }
  int chroma_height() const {
    return chroma == ChromaLayout::k420 ? (height + 1) / 2 : height;
  }
  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(width) * height +
           2 * static_cast<std::size_t>(chroma_width()) * chroma_height();
  }

  friend bool operator==(const ClipMetadata&, const ClipMetadata&) = default;
};

inline void validate(const ClipMetadata& m) {
  if (m.width < 1 || m.height < 1)
    throw Error(ErrorKind::format, "clip dimensions must be positive");
  if (m.frame_rate.num <= 0 || m.frame_rate.den <= 0)
    throw Error(ErrorKind::format, "frame rate must be positive");
  if (m.bit_depth != 8)
    throw Error(ErrorKind::unsupported_format, "only 8-bit video is supported");
}

struct Frame {
  Plane luma;
  Plane chroma_b;
  Plane chroma_r;

  friend bool operator==(const Frame&, const Frame&) = default;
};

inline Frame blank_frame(const ClipMetadata& m, std::uint8_t luma = 0) {
  return Frame{Plane(m.width, m.height, luma),
               Plane(m.chroma_width(), m.chroma_height(), 128),
               Plane(m.chroma_width(), m.chroma_height(), 128)};
}

/// A clip is either the pristine reference or a coded copy at some QP.
struct ClipRole {
  bool coded = false;
  int qp = -1;

  static ClipRole reference() { return {}; }
  static ClipRole coded_at(int qp) {
    if (qp < 0 || qp > 51)
      throw Error(ErrorKind::range, "qp must lie in 0..51, got " + std::to_string(qp));
    return {true, qp};
  }
  friend bool operator==(const ClipRole&, const ClipRole&) = default;
};

struct Clip {
  ClipMetadata metadata;
  std::vector<Frame> frames;
  ClipRole role;
};

inline const Plane& luma(const Clip& clip, int frame_index) {
  if (frame_index < 0 || frame_index >= static_cast<int>(clip.frames.size()))
    throw Error(ErrorKind::bounds, "frame index " + std::to_string(frame_index) +
                                       " outside [0, " +
                                       std::to_string(clip.frames.size()) + ")");
  return clip.frames[static_cast<std::size_t>(frame_index)].luma;
}

/// Reference and coded clips must agree on geometry and length.
inline void require_aligned(const Clip& reference, const Clip& coded) {
  const auto& a = reference.metadata;
  const auto& b = coded.metadata;
  if (a.width != b.width || a.height != b.height)
    throw Error(ErrorKind::shape, "reference is " + std::to_string(a.width) + "x" +
                                      std::to_string(a.height) + " but coded clip is " +
                                      std::to_string(b.width) + "x" +
                                      std::to_string(b.height));
  if (reference.frames.size() != coded.frames.size())
    throw Error(ErrorKind::shape, "frame count mismatch: reference has " +
                                      std::to_string(reference.frames.size()) +
                                      ", coded clip has " +
                                      std::to_string(coded.frames.size()));
}

// ---------------------------------------------------------------------------
// YUV4MPEG2

namespace detail {

inline int parse_positive_int(std::string_view s, const char* what) {
  if (s.empty()) throw Error(ErrorKind::format, std::string("empty ") + what);
  long long v = 0;
  for (char c : s) {
    if (c < '0' || c > '9')
      throw Error(ErrorKind::format, std::string("bad ") + what + " '" + std::string(s) + "'");
    v = v * 10 + (c - '0');
    if (v > 1'000'000'000) throw Error(ErrorKind::format, std::string(what) + " too large");
  }
  return static_cast<int>(v);
}

inline Rational parse_ratio(std::string_view s, const char* what) {
  const auto colon = s.find(':');
  if (colon == std::string_view::npos)
    throw Error(ErrorKind::format, std::string(what) + " must be num:den");
  return {parse_positive_int(s.substr(0, colon), what),
          parse_positive_int(s.substr(colon + 1), what)};
}

inline ChromaLayout parse_chroma(std::string_view s) {
  if (s == "420" || s == "420jpeg" || s == "420paldv" || s == "420mpeg2")
    return ChromaLayout::k420;
  if (s == "422") return ChromaLayout::k422;
  if (s == "444") return ChromaLayout::k444;
  throw Error(ErrorKind::unsupported_format, "chroma layout C" + std::string(s));
}

inline void read_plane(std::istream& in, Plane& p) {
  in.read(reinterpret_cast<char*>(p.samples.data()),
          static_cast<std::streamsize>(p.samples.size()));
  if (static_cast<std::size_t>(in.gcount()) != p.samples.size())
    throw Error(ErrorKind::truncation, "frame payload ended early");
}

inline void write_plane(std::ostream& out, const Plane& p) {
  out.write(reinterpret_cast<const char*>(p.samples.data()),
            static_cast<std::streamsize>(p.samples.size()));
}

inline Frame read_frame_payload(std::istream& in, const ClipMetadata& m) {
  Frame f{Plane(m.width, m.height), Plane(m.chroma_width(), m.chroma_height()),
          Plane(m.chroma_width(), m.chroma_height())};
  read_plane(in, f.luma);
  read_plane(in, f.chroma_b);
  read_plane(in, f.chroma_r);
  return f;
}

}  // namespace detail

/// Parses the YUV4MPEG2 stream header. On return the stream is positioned at
/// the first FRAME marker. frame_count is left at 0.
inline ClipMetadata parse_stream_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::format, "empty stream");
  constexpr std::string_view kMagic = "YUV4MPEG2";
  if (line.compare(0, kMagic.size(), kMagic) != 0 ||
      (line.size() > kMagic.size() && line[kMagic.size()] != ' '))
    throw Error(ErrorKind::format, "missing YUV4MPEG2 signature");

  ClipMetadata m;
  bool have_w = false, have_h = false, have_f = false;
  std::istringstream tokens(line.substr(kMagic.size()));
  std::string tok;
  while (tokens >> tok) {
    const std::string_view body = std::string_view(tok).substr(1);
    switch (tok[0]) {
      case 'W': m.width = detail::parse_positive_int(body, "width"); have_w = true; break;
      case 'H': m.height = detail::parse_positive_int(body, "height"); have_h = true; break;
      case 'F': m.frame_rate = detail::parse_ratio(body, "frame rate"); have_f = true; break;
      case 'C': m.chroma = detail::parse_chroma(body); break;
      case 'I':
        if (body != "p" && body != "?")
          throw Error(ErrorKind::unsupported_format, "interlaced Y4M (I" + std::string(body) + ")");
        break;
      case 'A':
      case 'X':
        break;
      default:
        throw Error(ErrorKind::format, "unknown header token '" + tok + "'");
    }
  }
  if (!have_w) throw Error(ErrorKind::format, "header lacks width token");
  if (!have_h) throw Error(ErrorKind::format, "header lacks height token");
  if (!have_f) throw Error(ErrorKind::format, "header lacks frame-rate token");
  validate(m);
  return m;
}

/// Reads every remaining frame. The returned metadata carries the actual
/// number of frames read.
inline Clip read_clip(std::istream& in, const ClipMetadata& metadata,
                      ClipRole role = ClipRole::reference()) {
  validate(metadata);
  Clip clip{metadata, {}, role};
  std::string marker;
  while (true) {
    if (in.peek() == std::char_traits<char>::eof()) break;
    if (!std::getline(in, marker))
      throw Error(ErrorKind::truncation, "stream ended inside a frame marker");
    if (marker.compare(0, 5, "FRAME") != 0)
      throw Error(ErrorKind::format, "expected FRAME marker at frame " +
                                         std::to_string(clip.frames.size()));
    clip.frames.push_back(detail::read_frame_payload(in, metadata));
  }
  if (clip.frames.empty()) throw Error(ErrorKind::truncation, "stream contains no frames");
  clip.metadata.frame_count = static_cast<int>(clip.frames.size());
  return clip;
}

inline void write_y4m(std::ostream& out, const Clip& clip) {
  const auto& m = clip.metadata;
  out << "YUV4MPEG2 W" << m.width << " H" << m.height << " F" << m.frame_rate.num << ':'
      << m.frame_rate.den << " Ip A1:1 C" << to_string(m.chroma) << '\n';
  for (const auto& f : clip.frames) {
    out << "FRAME\n";
    detail::write_plane(out, f.luma);
    detail::write_plane(out, f.chroma_b);
    detail::write_plane(out, f.chroma_r);
  }
  if (!out) throw Error(ErrorKind::io, "failed to write Y4M stream");
}

inline Clip read_y4m_file(const std::filesystem::path& path,
                          ClipRole role = ClipRole::reference()) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  const ClipMetadata m = parse_stream_header(in);
  return read_clip(in, m, role);
}

inline void write_y4m_file(const std::filesystem::path& path, const Clip& clip) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::io, "cannot create " + path.string());
  write_y4m(out, clip);
}

// ---------------------------------------------------------------------------
// Raw planar YUV with a JSON sidecar:
//   {"width": 1280, "height": 720, "frame_rate": "30:1", "chroma": "420"}

inline ClipMetadata parse_sidecar(const nlohmann::json& j) {
  ClipMetadata m;
  try {
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    const auto& fr = j.at("frame_rate");
    if (fr.is_string())
      m.frame_rate = detail::parse_ratio(fr.get<std::string>(), "frame rate");
    else
      m.frame_rate = {fr.get<int>(), 1};
    m.chroma = detail::parse_chroma(j.value("chroma", std::string("420")));
    m.bit_depth = j.value("bit_depth", 8);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::format, std::string("sidecar: ") + e.what());
  }
  validate(m);
  return m;
}

inline Clip read_raw_yuv(std::istream& in, const ClipMetadata& metadata,
                         ClipRole role = ClipRole::reference()) {
  validate(metadata);
  Clip clip{metadata, {}, role};
  while (in.peek() != std::char_traits<char>::eof())
    clip.frames.push_back(detail::read_frame_payload(in, metadata));
  if (clip.frames.empty()) throw Error(ErrorKind::truncation, "stream contains no frames");
  clip.metadata.frame_count = static_cast<int>(clip.frames.size());
  return clip;
}

/// Opens `path` as Y4M, or as raw YUV when a `<path>.json` sidecar exists.
inline Clip read_clip_file(const std::filesystem::path& path,
                           ClipRole role = ClipRole::reference()) {
  auto sidecar = path;
  sidecar += ".json";
  if (path.extension() != ".y4m" && std::filesystem::exists(sidecar)) {
    std::ifstream js(sidecar);
    nlohmann::json j;
    try {
      js >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::format, sidecar.string() + ": " + e.what());
    }
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
    return read_raw_yuv(in, parse_sidecar(j), role);
  }
  return read_y4m_file(path, role);
}

}  // namespace surjnd
