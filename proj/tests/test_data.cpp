#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "bytes.hpp"
#include "dad/data.hpp"
#include "dad/error.hpp"

using namespace dad;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("dad_test_data_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

FeatureSequence random_features(std::size_t T, std::size_t D, RandomSource& rng) {
  FeatureSequence s;
  s.video_id = "v";
  s.length = T;
  s.dim = D;
  s.tokens.resize(T * D);
  for (auto& x : s.tokens) x = static_cast<float>(rng.normal(0.0, 10.0));
  return s;
}

LabelGrid random_labels(std::size_t T, std::size_t C, RandomSource& rng) {
  LabelGrid g;
  g.length = T;
  g.classes = C;
  g.labels.resize(T * C);
  for (auto& x : g.labels) x = rng.bernoulli(0.3) ? 1 : 0;
  return g;
}

template <class F>
std::uint64_t format_error_offset(F&& f) {
  try {
    f();
  } catch (const FormatError& e) {
    return e.offset();
  }
  ADD_FAILURE() << "expected FormatError";
  return ~0ull;
}

}  // namespace

TEST(Formats, RoundTripRandomShapes) {
  RandomSource rng(1);
  for (int i = 0; i < 50; ++i) {
    const std::size_t T = 1 + rng.uniform_index(80), D = 1 + rng.uniform_index(40);
    const auto f = random_features(T, D, rng);
    const auto f2 = decode_features(encode_features(f));
    EXPECT_EQ(f2.length, T);
    EXPECT_EQ(f2.dim, D);
    EXPECT_EQ(f2.tokens, f.tokens);
    const auto g = random_labels(T, D, rng);
    const auto g2 = decode_labels(encode_labels(g));
    EXPECT_EQ(g2.labels, g.labels);
    EXPECT_EQ(encode_labels(g2), encode_labels(g));
  }
}

TEST(Formats, HeaderLayout) {
  FeatureSequence f;
  f.length = 2;
  f.dim = 1;
  f.tokens = {1.0f, -2.0f};
  const auto b = encode_features(f);
  ASSERT_EQ(b.size(), 4u + 2 + 4 + 4 + 8);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 4), "DADF");
  EXPECT_EQ(b[4], 1);
  EXPECT_EQ(b[5], 0);
  EXPECT_EQ(b[6], 2);
  EXPECT_EQ(b[10], 1);
  // 1.0f little-endian
  EXPECT_EQ(b[14], 0x00);
  EXPECT_EQ(b[17], 0x3f);
}

TEST(Formats, ErrorsCarryOffsets) {
  RandomSource rng(2);
  auto bytes = encode_features(random_features(4, 3, rng));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_EQ(format_error_offset([&] { decode_features(bad_magic); }), 0u);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_EQ(format_error_offset([&] { decode_features(bad_version); }), 4u);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_GE(format_error_offset([&] { decode_features(truncated); }), 14u);
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_EQ(format_error_offset([&] { decode_features(trailing); }), bytes.size());
  auto zero_len = bytes;
  zero_len[6] = zero_len[7] = zero_len[8] = zero_len[9] = 0;
  EXPECT_THROW(decode_features(zero_len), FormatError);
  auto nan = bytes;
  nan[14] = 0x00; nan[15] = 0x00; nan[16] = 0xc0; nan[17] = 0x7f;
  EXPECT_EQ(format_error_offset([&] { decode_features(nan); }), 14u);
  auto huge = bytes;
  huge[6] = huge[7] = huge[8] = huge[9] = 0xff;
  EXPECT_THROW(decode_features(huge), FormatError);
}

TEST(Formats, LabelsMustBeBinary) {
  RandomSource rng(3);
  auto bytes = encode_labels(random_labels(3, 4, rng));
  bytes[14 + 6] = 2;  // step 1, class 2
  try {
    decode_labels(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 20u);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("class 2"), std::string::npos) << e.what();
  }
  bytes = encode_labels(random_labels(3, 4, rng));
  EXPECT_THROW(decode_features(bytes), FormatError);
}

TEST(Formats, FileRoundTrip) {
  const auto dir = scratch("files");
  RandomSource rng(4);
  const auto f = random_features(7, 5, rng);
  write_features(dir / "a" / "x.dadf", f);
  EXPECT_EQ(read_features(dir / "a" / "x.dadf").tokens, f.tokens);
  EXPECT_THROW(read_features(dir / "missing.dadf"), Error);
}

TEST(Manifest, WriteAndLoad) {
  const auto dir = scratch("manifest");
  SyntheticSpec spec;
  spec.num_videos = 5;
  spec.num_test = 2;
  RandomSource rng(5);
  const auto corpus = generate_synthetic(spec, rng);
  const auto manifest = write_corpus(dir, corpus.videos);
  const auto data = load_manifest(manifest);
  EXPECT_EQ(data.feature_dim, 32u);
  EXPECT_EQ(data.num_classes, 8u);
  ASSERT_EQ(data.videos.size(), 5u);
  EXPECT_EQ(data.split("train").size(), 3u);
  EXPECT_EQ(data.split("test").size(), 2u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_EQ(data.videos[i].features.tokens, corpus.videos[i].features.tokens);
    EXPECT_EQ(data.videos[i].labels.labels, corpus.videos[i].labels.labels);
    EXPECT_EQ(data.videos[i].features.video_id, corpus.videos[i].features.video_id);
  }
  // Paths are stored relative to the manifest.
  std::ifstream in(manifest);
  const auto j = nlohmann::json::parse(in);
  EXPECT_FALSE(fs::path(j["videos"][0]["features"].get<std::string>()).is_absolute());
}

TEST(Manifest, RejectsInconsistentInputs) {
  const auto dir = scratch("manifest_bad");
  SyntheticSpec spec;
  spec.num_videos = 2;
  spec.num_test = 1;
  RandomSource rng(6);
  const auto manifest = write_corpus(dir, generate_synthetic(spec, rng).videos);
  std::ifstream in(manifest);
  const auto good = nlohmann::json::parse(in);
  auto write = [&](const nlohmann::json& j) {
    std::ofstream(dir / "m.json") << j.dump();
    return dir / "m.json";
  };
  auto dup = good;
  dup["videos"][1]["id"] = dup["videos"][0]["id"];
  EXPECT_THROW(load_manifest(write(dup)), Error);
  auto wrong_dim = good;
  wrong_dim["feature_dim"] = 31;
  EXPECT_THROW(load_manifest(write(wrong_dim)), Error);
  auto missing = good;
  missing["videos"][0]["features"] = "nope.dadf";
  EXPECT_THROW(load_manifest(write(missing)), Error);
  auto swapped = good;
  swapped["videos"][0]["features"] = good["videos"][0]["labels"];
  EXPECT_THROW(load_manifest(write(swapped)), FormatError);
  std::ofstream(dir / "broken.json") << "{not json";
  EXPECT_THROW(load_manifest(dir / "broken.json"), Error);
  EXPECT_NO_THROW(load_manifest(write(good)));
}

TEST(Synthetic, RespectsSpec) {
  SyntheticSpec spec;
  spec.co_occurrences = {{0, 4, 0.7}};
  RandomSource rng(7);
  const auto corpus = generate_synthetic(spec, rng);
  ASSERT_EQ(corpus.videos.size(), 20u);
  const auto durations = spec.resolved_durations();
  for (const auto& v : corpus.videos) {
    EXPECT_EQ(v.features.length, 64u);
    EXPECT_EQ(v.features.dim, 32u);
    for (std::size_t t = 0; t < 64; ++t) {
      std::size_t active = 0;
      for (std::size_t c = 0; c < 8; ++c) active += v.labels.at(t, c);
      EXPECT_LE(active, 3u);
    }
  }
  for (const auto& iv : corpus.intervals) {
    const std::size_t len = iv.end - iv.start;
    if (iv.source < 0) {
      EXPECT_GE(len, durations[iv.cls].first);
      EXPECT_LE(len, durations[iv.cls].second);
    }
    for (std::size_t t = iv.start; t < iv.end; ++t) {
      EXPECT_EQ(corpus.videos[iv.video].labels.at(t, iv.cls), 1);
    }
  }
  EXPECT_EQ(corpus.videos[15].split, "train");
  EXPECT_EQ(corpus.videos[16].split, "test");
  // Multi-scale durations: short, medium and long classes.
  EXPECT_LT(durations[0].second, durations[2].first);
}

TEST(Synthetic, SignaturesAreOrthonormal) {
  SyntheticSpec spec;
  RandomSource rng(8);
  const auto corpus = generate_synthetic(spec, rng);
  for (std::size_t a = 0; a < 8; ++a)
    for (std::size_t b = 0; b < 8; ++b) {
      double dot = 0.0;
      for (std::size_t d = 0; d < 32; ++d) dot += corpus.signatures[a][d] * corpus.signatures[b][d];
      EXPECT_NEAR(dot, a == b ? 1.0 : 0.0, 1e-6);
    }
}

TEST(Synthetic, NoiselessLabelsRecoverableByLeastSquares) {
  SyntheticSpec spec;
  spec.noise_sigma = 0.0;
  RandomSource rng(9);
  const auto corpus = generate_synthetic(spec, rng);
  // Orthonormal signatures: the least-squares coefficients are the projections.
  for (const auto& v : corpus.videos) {
    for (std::size_t t = 0; t < v.features.length; ++t) {
      for (std::size_t c = 0; c < 8; ++c) {
        double coef = 0.0;
        for (std::size_t d = 0; d < 32; ++d) coef += v.features.at(t, d) * corpus.signatures[c][d];
        ASSERT_EQ(coef > 0.5 ? 1 : 0, v.labels.at(t, c));
        ASSERT_NEAR(coef, v.labels.at(t, c), 1e-5);
      }
    }
  }
}

TEST(Synthetic, CertainCoOccurrenceAlwaysPulls) {
  SyntheticSpec spec;
  spec.co_occurrences = {{1, 5, 1.0}};
  RandomSource rng(10);
  const auto corpus = generate_synthetic(spec, rng);
  ASSERT_GT(corpus.pair_trials[0].first, 0u);
  EXPECT_EQ(corpus.pair_trials[0].first, corpus.pair_trials[0].second);
  for (const auto& iv : corpus.intervals) {
    if (iv.cls != 1 || iv.source >= 0) continue;
    for (std::size_t t = iv.start; t < iv.end; ++t) {
      EXPECT_EQ(corpus.videos[iv.video].labels.at(t, 5), 1);
    }
  }
}

TEST(Synthetic, CoOccurrenceRateTracksProbability) {
  SyntheticSpec spec;
  spec.num_videos = 400;
  spec.num_test = 0;
  spec.co_occurrences = {{0, 4, 0.7}};
  RandomSource rng(11);
  const auto corpus = generate_synthetic(spec, rng);
  const double rate = static_cast<double>(corpus.pair_trials[0].second) / corpus.pair_trials[0].first;
  EXPECT_NEAR(rate, 0.7, 0.05);
}

TEST(Synthetic, DeterministicPerSeed) {
  SyntheticSpec spec;
  RandomSource a(12), b(12), c(13);
  const auto x = generate_synthetic(spec, a), y = generate_synthetic(spec, b),
             z = generate_synthetic(spec, c);
  EXPECT_EQ(x.videos[3].features.tokens, y.videos[3].features.tokens);
  EXPECT_EQ(x.videos[3].labels.labels, y.videos[3].labels.labels);
  EXPECT_NE(x.videos[3].features.tokens, z.videos[3].features.tokens);
}

TEST(Synthetic, InvalidSpecsRejected) {
  SyntheticSpec s;
  s.durations = std::vector<std::pair<std::size_t, std::size_t>>(8, {10, 100});
  EXPECT_THROW(s.validate(), ConfigError);
  s = SyntheticSpec{};
  s.max_concurrency = 1;
  s.co_occurrences = {{0, 1, 0.5}};
  EXPECT_THROW(s.validate(), ConfigError);
  s = SyntheticSpec{};
  s.co_occurrences = {{0, 1, 1.5}};
  EXPECT_THROW(s.validate(), ConfigError);
}

TEST(Rasterize, Policies) {
  // Tokens of 1 s; an action over [0.4, 2.2) s.
  const std::vector<Annotation> ann = {{1, 0.4, 2.2}};
  const auto any = rasterize_annotations(ann, 4, 2, 1.0, RasterPolicy::AnyOverlap);
  const auto maj = rasterize_annotations(ann, 4, 2, 1.0, RasterPolicy::Majority);
  EXPECT_EQ(any.at(0, 1), 1);
  EXPECT_EQ(any.at(1, 1), 1);
  EXPECT_EQ(any.at(2, 1), 1);
  EXPECT_EQ(any.at(3, 1), 0);
  EXPECT_EQ(maj.at(0, 1), 1);  // covers 0.6 of the token
  EXPECT_EQ(maj.at(1, 1), 1);
  EXPECT_EQ(maj.at(2, 1), 0);  // covers 0.2
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(any.at(t, 0), 0);
}

TEST(Convert, PackRawFeatures) {
  const auto dir = scratch("raw");
  bytes::Writer w;
  for (int i = 0; i < 6; ++i) w.f32(static_cast<float>(i));
  bytes::write_file(dir / "raw.bin", w.buffer());
  const auto seq = pack_raw_features(dir / "raw.bin", 3, "clip");
  EXPECT_EQ(seq.length, 2u);
  EXPECT_EQ(seq.at(1, 2), 5.0f);
  EXPECT_THROW(pack_raw_features(dir / "raw.bin", 4, "clip"), FormatError);
}
