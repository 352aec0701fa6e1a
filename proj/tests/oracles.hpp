#pragma once

// Brute-force reference implementations shared by the unit tests and the
// acceptance binary. Written from the metric definitions, without sorting.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "dad/metrics.hpp"
#include "dad/random.hpp"

namespace dad::oracle {

// Rank of sample i: every sample with a higher score, plus ties that come
// earlier in input order, plus itself. Precision at each positive is then
// (positives within that prefix) / rank, summed in rank order.
inline std::optional<double> average_precision(const std::vector<double>& s,
                                               const std::vector<std::uint8_t>& l) {
  const std::size_t n = s.size();
  std::vector<std::pair<std::size_t, std::size_t>> at_positive;  // (rank, hits)
  for (std::size_t i = 0; i < n; ++i) {
    if (!l[i]) continue;
    std::size_t rank = 0, hits = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const bool before = s[j] > s[i] || (s[j] == s[i] && j <= i);
      if (!before) continue;
      ++rank;
      hits += l[j];
    }
    at_positive.push_back({rank, hits});
  }
  if (at_positive.empty()) return std::nullopt;
  std::sort(at_positive.begin(), at_positive.end());
  double sum = 0.0;
  for (auto [rank, hits] : at_positive) sum += static_cast<double>(hits) / static_cast<double>(rank);
  return sum / static_cast<double>(at_positive.size());
}

inline double per_frame_map(const FramePool& pool) {
  double sum = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t c = 0; c < pool.classes; ++c) {
    std::vector<double> s;
    std::vector<std::uint8_t> l;
    for (std::size_t f = 0; f < pool.frames(); ++f) {
      s.push_back(pool.score(f, c));
      l.push_back(pool.label(f, c));
    }
    if (auto ap = average_precision(s, l)) {
      sum += *ap;
      ++evaluated;
    }
  }
  return sum / static_cast<double>(evaluated);
}

inline ActionConditional action_conditional(const FramePool& pool, std::size_t tau,
                                            double threshold) {
  const std::size_t N = pool.frames(), C = pool.classes;
  std::vector<std::size_t> video(N, 0);
  for (std::size_t v = 0; v < pool.video_offsets.size(); ++v) {
    for (std::size_t f = pool.video_offsets[v]; f < N; ++f) video[f] = v;
  }
  ActionConditional out;
  out.tau = tau;
  for (std::size_t i = 0; i < C; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      if (i == j) continue;
      std::vector<double> s;
      std::vector<std::uint8_t> l;
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t f = 0; f < N; ++f) {
        bool near = false;
        for (std::size_t g = 0; g < N; ++g) {
          const std::size_t d = f > g ? f - g : g - f;
          if (video[g] == video[f] && d <= tau && pool.label(g, j)) near = true;
        }
        if (!near) continue;
        s.push_back(pool.score(f, i));
        l.push_back(pool.label(f, i));
        const bool pred = pool.score(f, i) >= threshold;
        const bool gt = pool.label(f, i) != 0;
        if (pred && gt) ++tp;
        if (pred && !gt) ++fp;
        if (!pred && gt) ++fn;
      }
      if (s.empty() || tp + fn == 0) continue;
      out.precision += tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
      out.recall += static_cast<double>(tp) / static_cast<double>(tp + fn);
      out.map += *average_precision(s, l);
      ++out.pairs;
    }
  }
  if (out.pairs == 0) return out;
  const double n = static_cast<double>(out.pairs);
  out.precision /= n;
  out.recall /= n;
  out.map /= n;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

// Small random pool with coarse scores, so ties are common.
inline FramePool random_pool(RandomSource& rng, std::size_t max_videos = 3,
                             std::size_t max_len = 20, std::size_t max_classes = 4) {
  FramePool pool;
  pool.classes = 2 + rng.uniform_index(max_classes - 1);
  const std::size_t videos = 1 + rng.uniform_index(max_videos);
  for (std::size_t v = 0; v < videos; ++v) {
    const std::size_t len = 1 + rng.uniform_index(max_len);
    std::vector<double> s(len * pool.classes);
    std::vector<std::uint8_t> l(len * pool.classes);
    for (auto& x : s) x = static_cast<double>(rng.uniform_index(11)) / 10.0;
    for (auto& x : l) x = rng.bernoulli(0.35) ? 1 : 0;
    pool.append(s, l, len);
  }
  return pool;
}

}  // namespace dad::oracle
