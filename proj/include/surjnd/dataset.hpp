#pragma once

// Manifest-level plumbing: clip loading, annotation gathering, content
// fingerprints, the per-source feature cache, and writing synthetic datasets
// to disk.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "surjnd/evaluator.hpp"
#include "surjnd/parallel.hpp"

namespace surjnd {

// ---------------------------------------------------------------------------
// Fingerprints (64-bit FNV-1a)

class Fingerprint {
 public:
  Fingerprint& add(std::string_view bytes) {
    for (unsigned char c : bytes) {
      h_ ^= c;
      h_ *= 0x100000001b3ull;
    }
    return *this;
  }
  Fingerprint& add_field(std::string_view s) {
    add(s);
    return add(std::string_view("\x1f", 1));
  }
  Fingerprint& add_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw Error(ErrorKind::io, "cannot read " + p.string());
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) add(std::string_view(buf, static_cast<std::size_t>(in.gcount())));
    return add_field("");
  }
  std::uint64_t value() const { return h_; }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ull;
};

inline std::string describe(const PipelineConfig& c) {
  return std::string(to_string(c.metric)) + " W=" + std::to_string(c.segments.width) +
         " H=" + std::to_string(c.segments.height) + " T=" + csv::format_double(c.segments.duration) +
         " overlap=" + csv::format_double(c.segments.overlap) + " k=" + std::to_string(c.slope.k) +
         " p=" + csv::format_double(c.slope.p);
}

/// Content fingerprint of everything that determines a source's features.
inline std::string source_fingerprint(const DatasetManifest& m, const SourceEntry& s,
                                      const PipelineConfig& cfg) {
  Fingerprint f;
  f.add_field("surjnd-features-1").add_field(describe(cfg)).add_field(s.id);
  for (int q : m.qp_grid) f.add_field(std::to_string(q));
  if (s.synthetic) {
    f.add_field(to_json(*m.synthetic).dump()).add_field(to_json(*s.synthetic).dump());
  } else {
    f.add_file(m.resolve(s.reference));
    if (cfg.metric != MetricId::external)
      for (int q : m.qp_grid) f.add_file(m.resolve(s.coded.at(q)));
  }
  if (cfg.metric == MetricId::external && m.scores) f.add_file(m.resolve(*m.scores));
  return f.hex();
}

// ---------------------------------------------------------------------------
// Clips and annotations

inline Clip load_reference(const DatasetManifest& m, const SourceEntry& s) {
  if (s.synthetic) return render_reference(*m.synthetic, *s.synthetic);
  return read_clip_file(m.resolve(s.reference), ClipRole::reference());
}

inline Clip load_coded(const DatasetManifest& m, const SourceEntry& s, const Clip& reference, int qp) {
  if (s.synthetic) return render_coded(reference, qp);
  const auto it = s.coded.find(qp);
  if (it == s.coded.end())
    throw Error(ErrorKind::missing_data, s.id + ": no coded clip at qp " + std::to_string(qp));
  return read_clip_file(m.resolve(it->second), ClipRole::coded_at(qp));
}

/// Annotation sets for every manifest source (files may be shared).
inline std::map<std::string, JndAnnotationSet> load_manifest_annotations(const DatasetManifest& m) {
  std::map<std::filesystem::path, std::map<std::string, JndAnnotationSet>> files;
  std::map<std::filesystem::path, bool> flags_loaded;
  std::map<std::string, JndAnnotationSet> out;
  for (const auto& s : m.sources) {
    const auto path = m.resolve(s.annotations);
    if (!files.contains(path)) {
      std::ifstream in(path);
      if (!in) throw Error(ErrorKind::io, "cannot open annotations " + path.string());
      files[path] = load_annotations(in);
    }
    auto& sets = files[path];
    if (s.flags) {
      const auto fpath = m.resolve(*s.flags);
      if (!flags_loaded[fpath]) {
        std::ifstream in(fpath);
        if (!in) throw Error(ErrorKind::io, "cannot open flags " + fpath.string());
        load_noticed_flags(in, sets);
        flags_loaded[fpath] = true;
      }
    }
    const auto it = sets.find(s.id);
    if (it == sets.end())
      throw Error(ErrorKind::missing_data, "no annotations for source '" + s.id + "' in " + path.string());
    out[s.id] = it->second;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Feature cache: <dir>/<source>.features.csv + <source>.fingerprint

struct CacheStats {
  std::size_t fresh = 0;
  std::size_t computed = 0;
  std::size_t repaired = 0;
  std::vector<std::string> notes;
};

namespace detail {

inline std::optional<std::vector<FeatureVector>> read_cached(const std::filesystem::path& dir,
                                                             const SourceEntry& s,
                                                             const std::string& fingerprint,
                                                             const std::vector<int>& grid,
                                                             bool& corrupt) {
  corrupt = false;
  std::ifstream fp(dir / (s.id + ".fingerprint"));
  std::string stored;
  if (!fp || !std::getline(fp, stored) || stored != fingerprint) return std::nullopt;
  std::ifstream in(dir / (s.id + ".features.csv"));
  if (!in) return std::nullopt;
  try {
    auto rows = read_features(in);
    std::map<int, FeatureVector> by_qp;
    for (auto& r : rows)
      if (r.source_id == s.id) by_qp[r.qp] = std::move(r);
    std::vector<FeatureVector> out;
    for (int q : grid) {
      const auto it = by_qp.find(q);
      if (it == by_qp.end()) {
        corrupt = true;
        return std::nullopt;
      }
      out.push_back(it->second);
    }
    return out;
  } catch (const Error&) {
    corrupt = true;
    return std::nullopt;
  }
}

inline void write_cached(const std::filesystem::path& dir, const SourceEntry& s,
                         const std::string& fingerprint, const std::vector<FeatureVector>& rows) {
  std::filesystem::create_directories(dir);
  const auto csv_path = dir / (s.id + ".features.csv");
  const auto tmp = dir / (s.id + ".features.csv.tmp");
  {
    std::ofstream out(tmp);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    write_features(out, rows);
  }
  std::filesystem::rename(tmp, csv_path);
  std::ofstream fp(dir / (s.id + ".fingerprint"));
  fp << fingerprint << '\n';
}

}  // namespace detail

struct ExtractionOptions {
  PipelineConfig pipeline;
  std::optional<std::filesystem::path> cache_dir;
  unsigned threads = 0;
  std::function<void(const std::string&)> log;
};

/// Features for every manifest source at every grid qp, served from the
/// cache when its fingerprint matches. Corrupt or partial cache entries are
/// recomputed and rewritten.
inline std::map<std::string, std::vector<FeatureVector>> extract_dataset_features(
    const DatasetManifest& m, const ExtractionOptions& opt, CacheStats* stats = nullptr) {
  if (const auto gaps = missing_artifacts(m, opt.pipeline.metric); !gaps.empty()) {
    std::string msg = "manifest artifacts missing:";
    for (const auto& g : gaps) msg += "\n  " + g;
    throw Error(ErrorKind::missing_data, msg);
  }
  std::optional<ScoreTable> table;
  std::vector<std::vector<FeatureVector>> results(m.sources.size());
  std::vector<int> state(m.sources.size(), 0);  // 0 fresh, 1 computed, 2 repaired
  std::vector<std::string> fingerprints(m.sources.size());
  for (std::size_t i = 0; i < m.sources.size(); ++i)
    fingerprints[i] = source_fingerprint(m, m.sources[i], opt.pipeline);

  std::mutex log_mutex;
  auto log = [&](const std::string& s) {
    if (!opt.log) return;
    std::lock_guard lock(log_mutex);
    opt.log(s);
  };
  std::mutex table_mutex;
  auto score_table_for = [&](const Clip& ref) -> const ScoreTable* {
    if (opt.pipeline.metric != MetricId::external) return nullptr;
    std::lock_guard lock(table_mutex);
    const SegmentLayout l = layout(ref.metadata, opt.pipeline.segments);
    if (!table) {
      std::ifstream in(m.resolve(*m.scores));
      if (!in) throw Error(ErrorKind::io, "cannot open score table " + m.resolve(*m.scores).string());
      table = load_score_table(in, l);
    } else if (!(table->layout() == l)) {
      throw Error(ErrorKind::shape, "sources differ in segment layout; one score table cannot serve both");
    }
    return &*table;
  };

  parallel_for(m.sources.size(), [&](std::size_t i) {
    const SourceEntry& s = m.sources[i];
    bool corrupt = false;
    if (opt.cache_dir) {
      if (auto cached = detail::read_cached(*opt.cache_dir, s, fingerprints[i], m.qp_grid, corrupt)) {
        results[i] = std::move(*cached);
        return;
      }
    }
    try {
      const Clip ref = load_reference(m, s);
      const ScoreTable* t = score_table_for(ref);
      results[i] = extract_source_features(
          s.id, ref, [&](int qp) { return load_coded(m, s, ref, qp); }, m.qp_grid, opt.pipeline, t);
    } catch (const Error& e) {
      throw Error(e.kind(), "source '" + s.id + "': " + e.what());
    }
    state[i] = corrupt ? 2 : 1;
    if (opt.cache_dir) detail::write_cached(*opt.cache_dir, s, fingerprints[i], results[i]);
    log(std::string(corrupt ? "repaired " : "extracted ") + s.id);
  }, opt.threads);

  std::map<std::string, std::vector<FeatureVector>> out;
  CacheStats st;
  for (std::size_t i = 0; i < m.sources.size(); ++i) {
    out[m.sources[i].id] = std::move(results[i]);
    if (state[i] == 0) ++st.fresh;
    else if (state[i] == 1) ++st.computed;
    else {
      ++st.repaired;
      st.notes.push_back("cache entry for '" + m.sources[i].id + "' was corrupt and has been rebuilt");
    }
  }
  if (stats) *stats = st;
  return out;
}

/// Joins features, annotations and optional generating models per source.
inline std::vector<SourceData> assemble_sources(
    const DatasetManifest& m, const std::map<std::string, std::vector<FeatureVector>>& features,
    const std::map<std::string, JndAnnotationSet>& annotations) {
  std::vector<SourceData> out;
  for (const auto& s : m.sources) {
    SourceData d;
    d.id = s.id;
    d.resolution = s.resolution;
    const auto f = features.find(s.id);
    if (f == features.end()) throw Error(ErrorKind::missing_data, "no features for source '" + s.id + "'");
    d.features = f->second;
    d.annotations = annotations.at(s.id);
    d.generating = s.generating;
    out.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic dataset on disk

inline std::string resolution_tag(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

/// Writes manifest.json and annotations.csv under `dir`. With
/// `materialize`, reference and coded clips are also written as Y4M files
/// and the manifest points at them; otherwise sources carry their recipes
/// and clips are rendered on demand.
inline DatasetManifest write_synthetic_dataset(const SyntheticDataset& ds, const std::filesystem::path& dir,
                                               bool materialize) {
  std::filesystem::create_directories(dir);
  DatasetManifest m;
  m.qp_grid = ds.config.qp_grid;
  m.base_dir = dir;
  m.synthetic = ds.config;
  m.synthetic_seed = ds.seed;
  {
    std::ofstream out(dir / "annotations.csv");
    if (!out) throw Error(ErrorKind::io, "cannot write " + (dir / "annotations.csv").string());
    out << "source_id,subject_id,first_jnd_qp\n";
    for (const auto& r : ds.recipes) {
      const auto& a = ds.annotations.at(r.source_id);
      for (std::size_t i = 0; i < a.first_jnd.size(); ++i)
        out << r.source_id << ',' << a.subject_ids[i] << ',' << a.first_jnd[i] << '\n';
    }
  }
  for (const auto& r : ds.recipes) {
    SourceEntry s;
    s.id = r.source_id;
    s.resolution = resolution_tag(ds.config.width, ds.config.height);
    s.annotations = "annotations.csv";
    s.generating = generating_model(ds.config, r);
    if (materialize) {
      const auto sub = std::filesystem::path("clips") / r.source_id;
      std::filesystem::create_directories(dir / sub);
      const Clip ref = render_reference(ds.config, r);
      s.reference = sub / "ref.y4m";
      write_y4m_file(dir / s.reference, ref);
      for (int q : ds.config.qp_grid) {
        char name[32];
        std::snprintf(name, sizeof name, "qp%02d.y4m", q);
        s.coded[q] = sub / name;
        write_y4m_file(dir / s.coded[q], render_coded(ref, q));
      }
    } else {
      s.synthetic = r;
    }
    m.sources.push_back(std::move(s));
  }
  save_manifest(m, dir / "manifest.json");
  return m;
}

}  // namespace surjnd
