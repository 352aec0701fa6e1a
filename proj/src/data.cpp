#include "dad/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "bytes.hpp"
#include "dad/error.hpp"

namespace dad {

namespace fs = std::filesystem;
using json = nlohmann::json;

void FeatureSequence::validate() const {
  if (length == 0) throw ContractError("feature sequence '" + video_id + "' is empty");
  if (dim == 0) throw ContractError("feature sequence '" + video_id + "' has D = 0");
  if (tokens.size() != length * dim) {
    throw DimensionError("feature sequence '" + video_id + "' holds " +
                         std::to_string(tokens.size()) + " values, expected " +
                         std::to_string(length * dim));
  }
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!std::isfinite(tokens[i])) {
      throw NumericalError("feature sequence '" + video_id + "' has a non-finite value at index " +
                           std::to_string(i));
    }
  }
}

void LabelGrid::validate() const {
  if (length == 0) throw ContractError("label grid is empty");
  if (classes == 0) throw ContractError("label grid has C = 0");
  if (labels.size() != length * classes) {
    throw DimensionError("label grid holds " + std::to_string(labels.size()) +
                         " values, expected " + std::to_string(length * classes));
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 1) throw ContractError("label grid value at index " + std::to_string(i) + " is not 0/1");
  }
}

// ---------------------------------------------------------------------------
// Binary formats

std::vector<std::uint8_t> encode_features(const FeatureSequence& seq) {
  seq.validate();
  bytes::Writer w;
  w.raw("DADF", 4);
  w.u16(kDataFormatVersion);
  w.u32(static_cast<std::uint32_t>(seq.length));
  w.u32(static_cast<std::uint32_t>(seq.dim));
  w.buffer().reserve(14 + 4 * seq.tokens.size());
  for (float v : seq.tokens) w.f32(v);
  return std::move(w.buffer());
}

namespace {

// Reads the shared 14-byte header and checks that the payload fits exactly.
std::pair<std::size_t, std::size_t> read_header(bytes::Reader& r, const char* magic,
                                                const char* dim_name, std::size_t elem_size) {
  r.magic(magic);
  const std::size_t version_at = r.offset();
  const std::uint16_t version = r.u16("version");
  if (version != kDataFormatVersion) {
    r.fail("unsupported version " + std::to_string(version), version_at);
  }
  const std::size_t t_at = r.offset();
  const std::uint32_t t = r.u32("T");
  const std::size_t d_at = r.offset();
  const std::uint32_t d = r.u32(dim_name);
  if (t == 0) r.fail("T must be >= 1", t_at);
  if (d == 0) r.fail(std::string(dim_name) + " must be >= 1", d_at);
  const std::uint64_t count = static_cast<std::uint64_t>(t) * d;
  if (count > r.remaining() / elem_size) {
    r.fail("payload of " + std::to_string(t) + "x" + std::to_string(d) + " exceeds the " +
               std::to_string(r.remaining()) + " bytes present",
           r.offset() + r.remaining());
  }
  if (count * elem_size != r.remaining()) {
    r.fail("trailing bytes after payload", r.offset() + count * elem_size);
  }
  return {t, d};
}

}  // namespace

FeatureSequence decode_features(const std::vector<std::uint8_t>& data) {
  bytes::Reader r(data, "feature file");
  const auto [t, d] = read_header(r, "DADF", "D", 4);
  FeatureSequence seq;
  seq.length = t;
  seq.dim = d;
  seq.tokens.resize(t * d);
  for (std::size_t i = 0; i < t * d; ++i) {
    const std::size_t at = r.offset();
    seq.tokens[i] = r.f32("token");
    if (!std::isfinite(seq.tokens[i])) r.fail("non-finite token value", at);
  }
  return seq;
}

std::vector<std::uint8_t> encode_labels(const LabelGrid& grid) {
  grid.validate();
  bytes::Writer w;
  w.raw("DADL", 4);
  w.u16(kDataFormatVersion);
  w.u32(static_cast<std::uint32_t>(grid.length));
  w.u32(static_cast<std::uint32_t>(grid.classes));
  w.raw(grid.labels.data(), grid.labels.size());
  return std::move(w.buffer());
}

LabelGrid decode_labels(const std::vector<std::uint8_t>& data) {
  bytes::Reader r(data, "label file");
  const auto [t, c] = read_header(r, "DADL", "C", 1);
  LabelGrid grid;
  grid.length = t;
  grid.classes = c;
  grid.labels.resize(t * c);
  for (std::size_t i = 0; i < t * c; ++i) {
    const std::size_t at = r.offset();
    const std::uint8_t v = r.u8("label");
    if (v > 1) {
      r.fail("label value " + std::to_string(v) + " at step " + std::to_string(i / c) +
                 ", class " + std::to_string(i % c) + " is not 0/1",
             at);
    }
    grid.labels[i] = v;
  }
  return grid;
}

void write_features(const fs::path& path, const FeatureSequence& seq) {
  bytes::write_file(path, encode_features(seq));
}

FeatureSequence read_features(const fs::path& path) {
  FeatureSequence seq = decode_features(bytes::read_file(path));
  seq.video_id = path.stem().string();
  return seq;
}

void write_labels(const fs::path& path, const LabelGrid& grid) {
  bytes::write_file(path, encode_labels(grid));
}

LabelGrid read_labels(const fs::path& path) { return decode_labels(bytes::read_file(path)); }

// ---------------------------------------------------------------------------
// Manifest

std::vector<const Video*> Dataset::split(const std::string& name) const {
  std::vector<const Video*> out;
  for (const auto& v : videos) {
    if (v.split == name) out.push_back(&v);
  }
  return out;
}

std::vector<ManifestEntry> read_manifest_entries(const fs::path& path, std::size_t* feature_dim,
                                                 std::size_t* num_classes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what(), e.byte);
  }
  const fs::path base = path.parent_path();
  try {
    if (doc.at("version").get<int>() != 1) throw ConfigError("manifest: unsupported version");
    if (feature_dim) *feature_dim = doc.value("feature_dim", std::size_t{0});
    if (num_classes) *num_classes = doc.value("num_classes", std::size_t{0});
    std::vector<ManifestEntry> entries;
    std::set<std::string> ids;
    for (const auto& v : doc.at("videos")) {
      ManifestEntry e;
      e.video_id = v.at("id").get<std::string>();
      e.features = v.at("features").get<std::string>();
      e.labels = v.at("labels").get<std::string>();
      e.split = v.value("split", std::string("train"));
      if (e.features.is_relative()) e.features = base / e.features;
      if (e.labels.is_relative()) e.labels = base / e.labels;
      if (!ids.insert(e.video_id).second) throw ConfigError("manifest: duplicate video id '" + e.video_id + "'");
      entries.push_back(std::move(e));
    }
    return entries;
  } catch (const json::exception& e) {
    throw ConfigError("manifest " + path.string() + ": " + e.what());
  }
}

void write_manifest(const fs::path& path, std::size_t feature_dim, std::size_t num_classes,
                    const std::vector<ManifestEntry>& entries) {
  json doc;
  doc["version"] = 1;
  doc["feature_dim"] = feature_dim;
  doc["num_classes"] = num_classes;
  doc["videos"] = json::array();
  const fs::path base = path.parent_path();
  for (const auto& e : entries) {
    doc["videos"].push_back({{"id", e.video_id},
                             {"features", e.features.lexically_relative(base).generic_string()},
                             {"labels", e.labels.lexically_relative(base).generic_string()},
                             {"split", e.split}});
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw ConfigError("cannot write manifest " + path.string());
  out << doc.dump(2) << "\n";
}

Dataset load_manifest(const fs::path& path) {
  Dataset ds;
  const auto entries = read_manifest_entries(path, &ds.feature_dim, &ds.num_classes);
  for (const auto& e : entries) {
    if (!fs::exists(e.features)) throw ConfigError("manifest: missing feature file " + e.features.string());
    if (!fs::exists(e.labels)) throw ConfigError("manifest: missing label file " + e.labels.string());
    Video v;
    v.features = read_features(e.features);
    v.features.video_id = e.video_id;
    v.labels = read_labels(e.labels);
    v.split = e.split;
    if (v.features.length != v.labels.length) {
      throw ConfigError("manifest: video '" + e.video_id + "' has " +
                        std::to_string(v.features.length) + " feature steps but " +
                        std::to_string(v.labels.length) + " label steps");
    }
    if (ds.feature_dim == 0) ds.feature_dim = v.features.dim;
    if (ds.num_classes == 0) ds.num_classes = v.labels.classes;
    if (v.features.dim != ds.feature_dim) {
      throw ConfigError("manifest: video '" + e.video_id + "' has D = " +
                        std::to_string(v.features.dim) + ", expected " + std::to_string(ds.feature_dim));
    }
    if (v.labels.classes != ds.num_classes) {
      throw ConfigError("manifest: video '" + e.video_id + "' has C = " +
                        std::to_string(v.labels.classes) + ", expected " + std::to_string(ds.num_classes));
    }
    ds.videos.push_back(std::move(v));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

void SyntheticSpec::validate() const {
  if (num_videos == 0) throw ConfigError("synthetic: num_videos must be >= 1");
  if (num_test > num_videos) throw ConfigError("synthetic: num_test exceeds num_videos");
  if (min_length == 0 || min_length > max_length) throw ConfigError("synthetic: invalid length range");
  if (num_classes == 0 || feature_dim == 0) throw ConfigError("synthetic: C and D must be >= 1");
  if (max_concurrency == 0 || max_concurrency > num_classes) {
    throw ConfigError("synthetic: max_concurrency must lie in [1, C]");
  }
  if (min_instances > max_instances) throw ConfigError("synthetic: invalid instance range");
  if (!(noise_sigma >= 0.0)) throw ConfigError("synthetic: noise_sigma must be >= 0");
  if (!durations.empty() && durations.size() != num_classes) {
    throw ConfigError("synthetic: durations must list one range per class");
  }
  for (const auto& [lo, hi] : resolved_durations()) {
    if (lo == 0 || lo > hi) throw ConfigError("synthetic: invalid duration range");
    if (hi > min_length) {
      throw ConfigError("synthetic: duration " + std::to_string(hi) +
                        " exceeds the shortest video length " + std::to_string(min_length));
    }
  }
  for (const auto& p : co_occurrences) {
    if (p.first >= num_classes || p.second >= num_classes || p.first == p.second) {
      throw ConfigError("synthetic: co-occurrence pair references invalid classes");
    }
    if (!(p.probability >= 0.0 && p.probability <= 1.0)) {
      throw ConfigError("synthetic: co-occurrence probability must lie in [0, 1]");
    }
  }
  if (max_concurrency < 2 && !co_occurrences.empty()) {
    throw ConfigError("synthetic: co-occurrence pairs need max_concurrency >= 2");
  }
}

std::vector<std::pair<std::size_t, std::size_t>> SyntheticSpec::resolved_durations() const {
  if (!durations.empty()) return durations;
  const std::size_t l = std::max<std::size_t>(min_length, 1);
  const std::pair<std::size_t, std::size_t> cycle[3] = {
      {std::max<std::size_t>(1, l / 32), std::max<std::size_t>(1, l / 8)},
      {std::max<std::size_t>(1, l / 8), std::max<std::size_t>(1, l / 4)},
      {std::max<std::size_t>(1, l / 4), std::max<std::size_t>(1, l / 2)},
  };
  std::vector<std::pair<std::size_t, std::size_t>> out(num_classes);
  for (std::size_t c = 0; c < num_classes; ++c) out[c] = cycle[c % 3];
  return out;
}

namespace {

std::vector<std::vector<float>> make_signatures(std::size_t classes, std::size_t dim,
                                                RandomSource& rng) {
  std::vector<std::vector<double>> basis;
  std::vector<std::vector<float>> out;
  for (std::size_t c = 0; c < classes; ++c) {
    std::vector<double> v(dim);
    for (;;) {
      for (auto& x : v) x = rng.normal();
      // Gram-Schmidt against earlier signatures while an orthogonal
      // direction still exists.
      if (c < dim) {
        for (int pass = 0; pass < 2; ++pass) {
          for (const auto& b : basis) {
            double dot = 0.0;
            for (std::size_t d = 0; d < dim; ++d) dot += v[d] * b[d];
            for (std::size_t d = 0; d < dim; ++d) v[d] -= dot * b[d];
          }
        }
      }
      double norm = 0.0;
      for (double x : v) norm += x * x;
      norm = std::sqrt(norm);
      if (norm > 1e-6) {
        for (auto& x : v) x /= norm;
        break;
      }
    }
    basis.push_back(v);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, RandomSource& rng) {
  spec.validate();
  const auto durations = spec.resolved_durations();
  const std::size_t C = spec.num_classes, D = spec.feature_dim;
  constexpr int kPlacementAttempts = 50;

  SyntheticCorpus corpus;
  corpus.signatures = make_signatures(C, D, rng);
  corpus.pair_trials.assign(spec.co_occurrences.size(), {0, 0});

  std::vector<std::vector<std::size_t>> partners(C);  // class -> pair indices
  for (std::size_t p = 0; p < spec.co_occurrences.size(); ++p) {
    partners[spec.co_occurrences[p].first].push_back(p);
  }

  for (std::size_t vi = 0; vi < spec.num_videos; ++vi) {
    const std::size_t L = static_cast<std::size_t>(
        rng.uniform_int(static_cast<std::int64_t>(spec.min_length),
                        static_cast<std::int64_t>(spec.max_length)));
    LabelGrid grid;
    grid.length = L;
    grid.classes = C;
    grid.labels.assign(L * C, 0);
    std::vector<std::size_t> active(L, 0);

    // Marks [s, e) for class c, returning how many steps were newly set.
    auto fits = [&](const std::vector<std::size_t>& classes, std::size_t s, std::size_t e) {
      for (std::size_t t = s; t < e; ++t) {
        std::size_t added = 0;
        for (std::size_t c : classes) added += grid.labels[t * C + c] == 0 ? 1 : 0;
        if (active[t] + added > spec.max_concurrency) return false;
      }
      return true;
    };
    auto mark = [&](std::size_t c, std::size_t s, std::size_t e) {
      for (std::size_t t = s; t < e; ++t) {
        if (grid.labels[t * C + c] == 0) {
          grid.labels[t * C + c] = 1;
          ++active[t];
        }
      }
    };

    for (std::size_t c = 0; c < C; ++c) {
      const auto instances = static_cast<std::size_t>(
          rng.uniform_int(static_cast<std::int64_t>(spec.min_instances),
                          static_cast<std::int64_t>(spec.max_instances)));
      for (std::size_t k = 0; k < instances; ++k) {
        // Decide the co-occurring partners once per instance, then place the
        // whole group atomically.
        std::vector<std::size_t> group{c};
        std::vector<std::size_t> pulled_pairs;
        for (std::size_t p : partners[c]) {
          if (rng.bernoulli(spec.co_occurrences[p].probability)) {
            const std::size_t j = spec.co_occurrences[p].second;
            if (std::find(group.begin(), group.end(), j) == group.end()) group.push_back(j);
            pulled_pairs.push_back(p);
          }
        }
        const auto [dlo, dhi] = durations[c];
        for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
          const auto len = static_cast<std::size_t>(
              rng.uniform_int(static_cast<std::int64_t>(dlo), static_cast<std::int64_t>(dhi)));
          const auto start = static_cast<std::size_t>(rng.uniform_index(L - len + 1));
          if (!fits(group, start, start + len)) continue;
          for (std::size_t g = 0; g < group.size(); ++g) {
            mark(group[g], start, start + len);
            corpus.intervals.push_back(
                {vi, group[g], start, start + len, g == 0 ? -1 : static_cast<std::int64_t>(c)});
          }
          for (std::size_t p : partners[c]) ++corpus.pair_trials[p].first;
          for (std::size_t p : pulled_pairs) ++corpus.pair_trials[p].second;
          break;
        }
      }
    }

    FeatureSequence seq;
    seq.video_id = "syn" + std::string(vi < 10 ? "000" : vi < 100 ? "00" : vi < 1000 ? "0" : "") +
                   std::to_string(vi);
    seq.length = L;
    seq.dim = D;
    seq.tokens.assign(L * D, 0.0f);
    for (std::size_t t = 0; t < L; ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        double v = 0.0;
        for (std::size_t c = 0; c < C; ++c) {
          if (grid.labels[t * C + c]) v += corpus.signatures[c][d];
        }
        if (spec.noise_sigma > 0.0) v += rng.normal(0.0, spec.noise_sigma);
        seq.tokens[t * D + d] = static_cast<float>(v);
      }
    }

    Video video;
    video.features = std::move(seq);
    video.labels = std::move(grid);
    video.split = vi >= spec.num_videos - spec.num_test ? "test" : "train";
    corpus.videos.push_back(std::move(video));
  }
  return corpus;
}

fs::path write_corpus(const fs::path& dir, const std::vector<Video>& videos) {
  fs::create_directories(dir);
  std::vector<ManifestEntry> entries;
  std::size_t D = 0, C = 0;
  for (const auto& v : videos) {
    const fs::path f = dir / (v.features.video_id + ".dadf");
    const fs::path l = dir / (v.features.video_id + ".dadl");
    write_features(f, v.features);
    write_labels(l, v.labels);
    entries.push_back({v.features.video_id, f, l, v.split});
    D = v.features.dim;
    C = v.labels.classes;
  }
  const fs::path manifest = dir / "manifest.json";
  write_manifest(manifest, D, C, entries);
  return manifest;
}

// ---------------------------------------------------------------------------
// Converters

LabelGrid rasterize_annotations(const std::vector<Annotation>& annotations, std::size_t length,
                                std::size_t classes, double segment_sec, RasterPolicy policy) {
  if (length == 0 || classes == 0) throw ContractError("rasterize: empty grid");
  if (!(segment_sec > 0.0)) throw ContractError("rasterize: segment length must be > 0");
  LabelGrid grid;
  grid.length = length;
  grid.classes = classes;
  grid.labels.assign(length * classes, 0);
  for (const auto& a : annotations) {
    if (a.cls >= classes) throw ContractError("rasterize: class index out of range");
    if (!(a.end_sec > a.start_sec)) continue;
    for (std::size_t t = 0; t < length; ++t) {
      const double lo = static_cast<double>(t) * segment_sec;
      const double hi = lo + segment_sec;
      const double overlap = std::min(hi, a.end_sec) - std::max(lo, a.start_sec);
      const bool hit = policy == RasterPolicy::AnyOverlap ? overlap > 0.0
                                                          : overlap >= 0.5 * segment_sec;
      if (hit) grid.labels[t * classes + a.cls] = 1;
    }
  }
  return grid;
}

FeatureSequence pack_raw_features(const fs::path& raw_path, std::size_t dim, std::string video_id) {
  if (dim == 0) throw ContractError("pack: D must be >= 1");
  const auto data = bytes::read_file(raw_path);
  if (data.size() % (4 * dim) != 0 || data.empty()) {
    throw FormatError("raw feature file " + raw_path.string() + " is not a whole number of " +
                          std::to_string(dim) + "-dim f32 rows",
                      data.size() - data.size() % (4 * dim));
  }
  bytes::Reader r(data, "raw feature file");
  FeatureSequence seq;
  seq.video_id = std::move(video_id);
  seq.dim = dim;
  seq.length = data.size() / (4 * dim);
  seq.tokens.resize(seq.length * dim);
  for (auto& v : seq.tokens) v = r.f32("token");
  seq.validate();
  return seq;
}

}  // namespace dad
