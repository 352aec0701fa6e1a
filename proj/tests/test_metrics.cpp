#include <gtest/gtest.h>

#include "dad/error.hpp"
#include "dad/metrics.hpp"
#include "oracles.hpp"

using namespace dad;

namespace {

std::optional<double> ap(std::vector<double> s, std::vector<std::uint8_t> l) {
  return average_precision(s, l);
}

bool any_positive(const FramePool& p) {
  for (auto v : p.labels)
    if (v) return true;
  return false;
}

}  // namespace

TEST(AveragePrecision, HandExample) {
  EXPECT_EQ(*ap({0.9, 0.8, 0.7}, {1, 0, 1}), (1.0 + 2.0 / 3.0) / 2.0);
  EXPECT_NEAR(*ap({0.9, 0.8, 0.7}, {1, 0, 1}), 0.8333333333, 1e-9);
}

TEST(AveragePrecision, EdgeCases) {
  EXPECT_EQ(*ap({0.1, 0.9, 0.5}, {1, 1, 1}), 1.0);
  EXPECT_EQ(*ap({0.9, 0.8, 0.1}, {1, 1, 0}), 1.0);
  EXPECT_FALSE(ap({0.5, 0.2}, {0, 0}).has_value());
  // Ties keep input order.
  EXPECT_EQ(*ap({0.5, 0.5}, {0, 1}), 0.5);
  EXPECT_EQ(*ap({0.5, 0.5}, {1, 0}), 1.0);
  EXPECT_THROW(ap({0.5}, {1, 0}), DimensionError);
}

TEST(AveragePrecision, MatchesBruteForceExactly) {
  RandomSource rng(1);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng.uniform_index(50);
    std::vector<double> s(n);
    std::vector<std::uint8_t> l(n);
    for (auto& x : s) x = static_cast<double>(rng.uniform_index(8)) / 7.0;
    for (auto& x : l) x = rng.bernoulli(0.4);
    const auto a = average_precision(s, l), b = oracle::average_precision(s, l);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) ASSERT_EQ(*a, *b);
  }
}

TEST(AveragePrecision, InvariantUnderMonotoneRescaling) {
  RandomSource rng(2);
  for (int i = 0; i < 50; ++i) {
    std::vector<double> s(30), t(30);
    std::vector<std::uint8_t> l(30);
    for (std::size_t k = 0; k < 30; ++k) {
      s[k] = rng.uniform();
      t[k] = 3.0 * s[k] * s[k] * s[k] + 1.0;
      l[k] = rng.bernoulli(0.5);
    }
    l[0] = 1;
    EXPECT_EQ(*average_precision(s, l), *average_precision(t, l));
  }
}

TEST(PerFrameMap, MatchesBruteForceExactly) {
  RandomSource rng(3);
  int checked = 0;
  while (checked < 100) {
    const auto pool = oracle::random_pool(rng);
    if (!any_positive(pool)) continue;
    MetricsReport r;
    per_frame_map(pool, r);
    ASSERT_EQ(r.per_frame_map, oracle::per_frame_map(pool));
    ++checked;
  }
}

TEST(PerFrameMap, SkipsClassesWithoutPositives) {
  FramePool pool;
  pool.classes = 2;
  pool.append(std::vector<double>{0.9, 0.1, 0.8, 0.2, 0.7, 0.3},
              std::vector<std::uint8_t>{1, 0, 0, 0, 1, 0}, 3);
  MetricsReport r;
  per_frame_map(pool, r);
  EXPECT_EQ(r.evaluated_classes, 1u);
  EXPECT_FALSE(r.per_class_ap[1].has_value());
  EXPECT_EQ(r.per_frame_map, (1.0 + 2.0 / 3.0) / 2.0);
  FramePool empty;
  empty.classes = 2;
  empty.append(std::vector<double>{0.1, 0.2}, std::vector<std::uint8_t>{0, 0}, 1);
  EXPECT_THROW(per_frame_map(empty, r), ContractError);
}

TEST(FramePool, AppendKeepsOnlyValidRows) {
  FramePool pool;
  pool.classes = 1;
  pool.append(std::vector<double>{0.1, 0.2, 0.3}, std::vector<std::uint8_t>{1, 0, 1}, 2);
  pool.append(std::vector<double>{0.4}, std::vector<std::uint8_t>{1}, 1);
  EXPECT_EQ(pool.frames(), 3u);
  EXPECT_EQ(pool.video_offsets, (std::vector<std::size_t>{0, 2}));
  EXPECT_THROW(pool.append(std::vector<double>{0.1}, std::vector<std::uint8_t>{1}, 2),
               DimensionError);
}

TEST(ActionConditional, MatchesBruteForceExactly) {
  RandomSource rng(4);
  int checked = 0;
  while (checked < 100) {
    const auto pool = oracle::random_pool(rng);
    const std::size_t tau = rng.uniform_index(5);
    const auto ref = oracle::action_conditional(pool, tau, 0.5);
    if (ref.pairs == 0) {
      EXPECT_THROW(action_conditional_metrics(pool, tau, 0.5), ContractError);
      continue;
    }
    const auto got = action_conditional_metrics(pool, tau, 0.5);
    ASSERT_EQ(got.pairs, ref.pairs);
    ASSERT_EQ(got.precision, ref.precision);
    ASSERT_EQ(got.recall, ref.recall);
    ASSERT_EQ(got.f1, ref.f1);
    ASSERT_EQ(got.map, ref.map);
    ++checked;
  }
}

TEST(ActionConditional, HandExample) {
  // Class 1 occurs at frame 0; with tau = 1 frames 0 and 1 form the condition
  // set for class 0.
  FramePool pool;
  pool.classes = 2;
  pool.append(std::vector<double>{0.9, 0.0, 0.2, 0.0, 0.8, 0.0},
              std::vector<std::uint8_t>{1, 1, 1, 0, 1, 0}, 3);
  const auto ac = action_conditional_metrics(pool, 1, 0.5);
  // Pair (0 | 1): frames 0, 1: predictions {1, 0}, labels {1, 1}: P=1, R=0.5, AP=1.
  // Pair (1 | 0): frames 0..2; class 1 positive at frame 0 only, never predicted: P=0, R=0.
  EXPECT_EQ(ac.pairs, 2u);
  EXPECT_DOUBLE_EQ(ac.precision, 0.5);
  EXPECT_DOUBLE_EQ(ac.recall, 0.25);
  EXPECT_DOUBLE_EQ(ac.f1, 2 * 0.5 * 0.25 / 0.75);
}

TEST(ActionConditional, WindowsStopAtVideoBoundaries) {
  // Video 0 holds a false positive for class 0 and no class 1. If windows
  // crossed videos it would enter the (0 | 1) set and halve its precision.
  FramePool pool;
  pool.classes = 2;
  pool.append(std::vector<double>{0.9, 0.0}, std::vector<std::uint8_t>{0, 0}, 1);
  pool.append(std::vector<double>{0.9, 0.0}, std::vector<std::uint8_t>{1, 1}, 1);
  const auto ac = action_conditional_metrics(pool, 5, 0.5);
  EXPECT_EQ(ac.pairs, 2u);
  EXPECT_DOUBLE_EQ(ac.precision, 0.5);
}

TEST(Report, KeyValuesAndText) {
  FramePool pool;
  pool.classes = 2;
  pool.append(std::vector<double>{0.9, 0.1, 0.2, 0.8}, std::vector<std::uint8_t>{1, 1, 0, 1}, 2);
  const std::vector<std::size_t> taus = {0, 1};
  const auto r = evaluate(pool, taus, 0.5);
  const auto kv = r.to_key_values();
  EXPECT_NE(kv.find("per_frame_map="), std::string::npos);
  EXPECT_NE(kv.find("class.1.ap="), std::string::npos);
  EXPECT_NE(kv.find("ac.tau1.precision="), std::string::npos);
  EXPECT_NE(r.to_text().find("per-frame mAP"), std::string::npos);
}
