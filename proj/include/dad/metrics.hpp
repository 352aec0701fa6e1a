#pragma once

// Per-frame mAP and action-conditional metrics over pooled frames.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace dad {

// All-points average precision. Samples are ranked by descending score with
// ties kept in their original order. Returns nullopt when there are no
// positives.
std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> labels);

// Row-major frames x classes matrices pooled over every evaluated frame.
struct FramePool {
  std::size_t classes = 0;
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  // Start offset of each video in frames; consecutive entries bound a video.
  // Temporal windows never cross video boundaries.
  std::vector<std::size_t> video_offsets;

  std::size_t frames() const { return classes == 0 ? 0 : labels.size() / classes; }
  // Appends the first `valid` rows of a video.
  void append(std::span<const double> video_scores, std::span<const std::uint8_t> video_labels,
              std::size_t valid);
  double score(std::size_t f, std::size_t c) const { return scores[f * classes + c]; }
  std::uint8_t label(std::size_t f, std::size_t c) const { return labels[f * classes + c]; }
};

struct ActionConditional {
  std::size_t tau = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double map = 0.0;
  std::size_t pairs = 0;  // ordered pairs that contributed
};

struct MetricsReport {
  double per_frame_map = 0.0;
  std::vector<std::optional<double>> per_class_ap;
  std::vector<std::size_t> positives;
  std::size_t frames = 0;
  std::size_t evaluated_classes = 0;
  double threshold = 0.5;
  std::vector<ActionConditional> action_conditional;

  std::string to_text() const;
  // One key=value per line.
  std::string to_key_values() const;
};

// Fills per_frame_map, per_class_ap, positives, frames. Throws ContractError
// when no class has a positive frame.
void per_frame_map(const FramePool& pool, MetricsReport& report);

// For each ordered pair (i, j), i != j, the condition set holds the frames
// with class j positive somewhere in [t - tau, t + tau] of the same video.
// On that set: precision/recall of (score_i >= threshold) against class i,
// and AP of class i scores. Pairs whose set is empty or holds no class-i
// positive are skipped. Precision with no predicted positives counts as 0.
// P, R and mAP are means over the kept pairs; F1 is the harmonic mean of the
// aggregated P and R. Throws ContractError when no pair qualifies.
ActionConditional action_conditional_metrics(const FramePool& pool, std::size_t tau,
                                             double threshold);

MetricsReport evaluate(const FramePool& pool, std::span<const std::size_t> taus, double threshold);

}  // namespace dad
