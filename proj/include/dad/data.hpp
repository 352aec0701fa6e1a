#pragma once

// Token-feature and label containers, their binary file formats, the dataset
// manifest, and a synthetic dense multi-label corpus generator.
//
// Feature file (DADF), little-endian:
//   "DADF" | u16 version=1 | u32 T | u32 D | T*D f32, row-major
// Label file (DADL), little-endian:
//   "DADL" | u16 version=1 | u32 T | u32 C | T*C bytes in {0, 1}, row-major

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dad/random.hpp"

namespace dad {

inline constexpr std::uint16_t kDataFormatVersion = 1;

struct FeatureSequence {
  std::string video_id;
  std::size_t length = 0;  // T_vid
  std::size_t dim = 0;     // D
  std::vector<float> tokens;  // length x dim

  float at(std::size_t t, std::size_t d) const { return tokens[t * dim + d]; }
  void validate() const;
};

struct LabelGrid {
  std::size_t length = 0;   // T_vid
  std::size_t classes = 0;  // C
  std::vector<std::uint8_t> labels;  // length x classes, values in {0, 1}

  std::uint8_t at(std::size_t t, std::size_t c) const { return labels[t * classes + c]; }
  void validate() const;
};

struct Video {
  FeatureSequence features;
  LabelGrid labels;
  std::string split = "train";
};

void write_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::filesystem::path& path);
void write_labels(const std::filesystem::path& path, const LabelGrid& grid);
LabelGrid read_labels(const std::filesystem::path& path);

// In-memory byte forms of the same formats.
std::vector<std::uint8_t> encode_features(const FeatureSequence& seq);
FeatureSequence decode_features(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> encode_labels(const LabelGrid& grid);
LabelGrid decode_labels(const std::vector<std::uint8_t>& bytes);

struct ManifestEntry {
  std::string video_id;
  std::filesystem::path features;  // resolved against the manifest directory
  std::filesystem::path labels;
  std::string split;
};

// A loaded dataset with one global (D, C).
struct Dataset {
  std::size_t feature_dim = 0;
  std::size_t num_classes = 0;
  std::vector<Video> videos;

  std::vector<const Video*> split(const std::string& name) const;
  bool empty() const { return videos.empty(); }
};

// Manifest (JSON):
//   {"version": 1, "feature_dim": D, "num_classes": C,
//    "videos": [{"id": ..., "features": ..., "labels": ..., "split": "train"|"test"}]}
// Relative paths resolve against the manifest's directory.
std::vector<ManifestEntry> read_manifest_entries(const std::filesystem::path& path,
                                                 std::size_t* feature_dim = nullptr,
                                                 std::size_t* num_classes = nullptr);
void write_manifest(const std::filesystem::path& path, std::size_t feature_dim,
                    std::size_t num_classes, const std::vector<ManifestEntry>& entries);
Dataset load_manifest(const std::filesystem::path& path);

struct CoOccurrence {
  std::size_t first;
  std::size_t second;
  double probability;
};

struct SyntheticSpec {
  std::size_t num_videos = 20;
  std::size_t num_test = 4;  // last num_test videos get split "test"
  std::size_t min_length = 64;
  std::size_t max_length = 64;
  std::size_t num_classes = 8;
  std::size_t feature_dim = 32;
  std::size_t max_concurrency = 3;
  // Duration range (inclusive) per class; when empty, classes cycle through
  // short/medium/long ranges scaled to min_length.
  std::vector<std::pair<std::size_t, std::size_t>> durations;
  // Instances placed per class per video, inclusive range.
  std::size_t min_instances = 1;
  std::size_t max_instances = 2;
  std::vector<CoOccurrence> co_occurrences;
  double noise_sigma = 0.05;

  void validate() const;
  // Duration ranges after applying the default cycle.
  std::vector<std::pair<std::size_t, std::size_t>> resolved_durations() const;
};

// One placed action instance. `source` is the class whose placement pulled
// this one in through a co-occurrence pair, or -1 for independent draws.
struct PlacedInterval {
  std::size_t video;
  std::size_t cls;
  std::size_t start;
  std::size_t end;  // exclusive
  std::int64_t source = -1;
};

struct SyntheticCorpus {
  std::vector<Video> videos;
  std::vector<std::vector<float>> signatures;  // C x D unit vectors
  std::vector<PlacedInterval> intervals;
  // Per co-occurrence pair: independent placements of `first` considered and
  // how many of them pulled `second` along.
  std::vector<std::pair<std::size_t, std::size_t>> pair_trials;
};

// Labels are random intervals per class under the concurrency cap, with
// co-occurring classes injected over the same span; each token is the sum of
// the active classes' signatures plus Gaussian noise.
SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, RandomSource& rng);

// Writes every video as DADF/DADL pairs plus manifest.json under `dir`.
std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const std::vector<Video>& videos);

// Rasterizes (class, start_sec, end_sec) annotations onto token boundaries of
// `segment_sec` each. AnyOverlap marks a token when any part of it is
// covered; Majority requires at least half of it.
enum class RasterPolicy { AnyOverlap, Majority };
struct Annotation {
  std::size_t cls;
  double start_sec;
  double end_sec;
};
LabelGrid rasterize_annotations(const std::vector<Annotation>& annotations, std::size_t length,
                                std::size_t classes, double segment_sec, RasterPolicy policy);

// Packs a raw little-endian f32 matrix (e.g. externally extracted T x 1024
// clip features) into a FeatureSequence.
FeatureSequence pack_raw_features(const std::filesystem::path& raw_path, std::size_t dim,
                                  std::string video_id);

}  // namespace dad
