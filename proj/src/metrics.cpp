#include "dad/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dad/error.hpp"

namespace dad {

std::optional<double> average_precision(std::span<const double> scores,
                                        std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size()) throw DimensionError("average_precision: size mismatch");
  std::size_t positives = 0;
  for (auto l : labels) positives += l ? 1 : 0;
  if (positives == 0) return std::nullopt;
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size() && hits < positives; ++k) {
    if (labels[order[k]]) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  return sum / static_cast<double>(positives);
}

void FramePool::append(std::span<const double> video_scores,
                       std::span<const std::uint8_t> video_labels, std::size_t valid) {
  if (classes == 0) throw ContractError("frame pool: classes not set");
  if (video_scores.size() < valid * classes || video_labels.size() < valid * classes) {
    throw DimensionError("frame pool: video shorter than its valid length");
  }
  video_offsets.push_back(frames());
  scores.insert(scores.end(), video_scores.begin(), video_scores.begin() + valid * classes);
  labels.insert(labels.end(), video_labels.begin(), video_labels.begin() + valid * classes);
}

void per_frame_map(const FramePool& pool, MetricsReport& report) {
  const std::size_t C = pool.classes, N = pool.frames();
  report.frames = N;
  report.per_class_ap.assign(C, std::nullopt);
  report.positives.assign(C, 0);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t c = 0; c < C; ++c) {
    std::vector<double> s(N);
    std::vector<std::uint8_t> l(N);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < N; ++f) {
      s[f] = pool.score(f, c);
      l[f] = pool.label(f, c);
      pos += l[f];
    }
    report.positives[c] = pos;
    report.per_class_ap[c] = average_precision(s, l);
  }

  double sum = 0.0;
  std::size_t evaluated = 0;
  for (const auto& ap : report.per_class_ap) {
    if (ap) {
      sum += *ap;
      ++evaluated;
    }
  }
  if (evaluated == 0) throw ContractError("per-frame mAP: no class has a positive frame");
  report.evaluated_classes = evaluated;
  report.per_frame_map = sum / static_cast<double>(evaluated);
}

namespace {

struct PairStats {
  bool valid = false;
  double precision = 0.0, recall = 0.0, ap = 0.0;
};

// Frames where class j is positive within tau steps, per video.
std::vector<std::uint8_t> condition_mask(const FramePool& pool, std::size_t j, std::size_t tau) {
  const std::size_t N = pool.frames();
  std::vector<std::uint8_t> mask(N, 0);
  std::vector<std::size_t> bounds = pool.video_offsets;
  if (bounds.empty()) bounds.push_back(0);
  bounds.push_back(N);
  for (std::size_t v = 0; v + 1 < bounds.size(); ++v) {
    const std::size_t lo = bounds[v], hi = bounds[v + 1];
    // Prefix counts of class-j positives inside this video.
    std::vector<std::size_t> prefix(hi - lo + 1, 0);
    for (std::size_t f = lo; f < hi; ++f) prefix[f - lo + 1] = prefix[f - lo] + pool.label(f, j);
    for (std::size_t f = lo; f < hi; ++f) {
      const std::size_t a = f - lo >= tau ? f - lo - tau : 0;
      const std::size_t b = std::min(hi - lo, f - lo + tau + 1);
      mask[f] = prefix[b] > prefix[a] ? 1 : 0;
    }
  }
  return mask;
}

PairStats pair_stats(const FramePool& pool, std::size_t i, const std::vector<std::uint8_t>& mask,
                     double threshold) {
  std::vector<double> s;
  std::vector<std::uint8_t> l;
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask[f]) continue;
    const double score = pool.score(f, i);
    const std::uint8_t g = pool.label(f, i);
    s.push_back(score);
    l.push_back(g);
    const bool pred = score >= threshold;
    tp += pred && g;
    fp += pred && !g;
    fn += !pred && g;
  }
  PairStats out;
  if (s.empty() || tp + fn == 0) return out;
  out.valid = true;
  out.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  out.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  out.ap = *average_precision(s, l);
  return out;
}

}  // namespace

ActionConditional action_conditional_metrics(const FramePool& pool, std::size_t tau,
                                             double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ContractError("action-conditional: threshold must lie in (0, 1)");
  const std::size_t C = pool.classes;
  std::vector<PairStats> stats(C * C);
  std::vector<std::vector<std::uint8_t>> masks(C);
  for (std::size_t j = 0; j < C; ++j) masks[j] = condition_mask(pool, j, tau);

#pragma omp parallel for schedule(dynamic)
  for (std::size_t p = 0; p < C * C; ++p) {
    const std::size_t i = p / C, j = p % C;
    if (i != j) stats[p] = pair_stats(pool, i, masks[j], threshold);
  }

  ActionConditional out;
  out.tau = tau;
  for (const auto& s : stats) {
    if (!s.valid) continue;
    out.precision += s.precision;
    out.recall += s.recall;
    out.map += s.ap;
    ++out.pairs;
  }
  if (out.pairs == 0) throw ContractError("action-conditional: no class pair has a usable condition set");
  const double n = static_cast<double>(out.pairs);
  out.precision /= n;
  out.recall /= n;
  out.map /= n;
  out.f1 = out.precision + out.recall > 0.0
               ? 2.0 * out.precision * out.recall / (out.precision + out.recall)
               : 0.0;
  return out;
}

MetricsReport evaluate(const FramePool& pool, std::span<const std::size_t> taus, double threshold) {
  MetricsReport report;
  report.threshold = threshold;
  per_frame_map(pool, report);
  for (std::size_t tau : taus) {
    report.action_conditional.push_back(action_conditional_metrics(pool, tau, threshold));
  }
  return report;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os << "per-frame mAP: " << fmt(per_frame_map) << "  (" << evaluated_classes << " of "
     << per_class_ap.size() << " classes evaluated, " << frames << " frames)\n\n";
  os << "class  positives  AP\n";
  for (std::size_t c = 0; c < per_class_ap.size(); ++c) {
    char line[96];
    std::snprintf(line, sizeof line, "%5zu  %9zu  %s\n", c, positives[c],
                  per_class_ap[c] ? fmt(*per_class_ap[c]).c_str() : "n/a (no positives)");
    os << line;
  }
  if (!action_conditional.empty()) {
    os << "\naction-conditional (threshold " << fmt(threshold) << ")\n";
    os << "  tau  P_AC      R_AC      F1_AC     mAP_AC    pairs\n";
    for (const auto& ac : action_conditional) {
      char line[128];
      std::snprintf(line, sizeof line, "%5zu  %s  %s  %s  %s  %zu\n", ac.tau,
                    fmt(ac.precision).c_str(), fmt(ac.recall).c_str(), fmt(ac.f1).c_str(),
                    fmt(ac.map).c_str(), ac.pairs);
      os << line;
    }
  }
  return os.str();
}

std::string MetricsReport::to_key_values() const {
  std::ostringstream os;
  os << "per_frame_map=" << fmt(per_frame_map) << "\n";
  os << "frames=" << frames << "\n";
  os << "evaluated_classes=" << evaluated_classes << "\n";
  for (std::size_t c = 0; c < per_class_ap.size(); ++c) {
    os << "class." << c << ".positives=" << positives[c] << "\n";
    os << "class." << c << ".ap=" << (per_class_ap[c] ? fmt(*per_class_ap[c]) : "nan") << "\n";
  }
  os << "threshold=" << fmt(threshold) << "\n";
  for (const auto& ac : action_conditional) {
    const std::string p = "ac.tau" + std::to_string(ac.tau) + ".";
    os << p << "precision=" << fmt(ac.precision) << "\n";
    os << p << "recall=" << fmt(ac.recall) << "\n";
    os << p << "f1=" << fmt(ac.f1) << "\n";
    os << p << "map=" << fmt(ac.map) << "\n";
    os << p << "pairs=" << ac.pairs << "\n";
  }
  return os.str();
}

}  // namespace dad
