#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchbench/benchmark.hpp"
#include "matchbench/matching.hpp"

namespace matchbench {

enum class Metric { NGram, JaroWinkler, Levenshtein, MongeElkan };

inline constexpr Metric kAllMetrics[] = {Metric::NGram, Metric::JaroWinkler, Metric::Levenshtein,
                                         Metric::MongeElkan};

std::string_view metric_name(Metric m) noexcept;
// Accepts "ngram", "jaro_winkler", "levenshtein", "monge_elkan" (hyphens allowed).
// Throws Error{UnknownMetric}.
Metric parse_metric(std::string_view name);

// Sorted, duplicate-free.
using GramSet = std::vector<std::string>;

// Width-3 windows over "##" + name + "%%". Case is preserved.
GramSet trigrams(std::string_view name);

// 2|A∩B| / (|A|+|B|). Throws Error{DegenerateInput} when both are empty.
double dice(const GramSet& a, const GramSet& b);

double jaro(std::string_view a, std::string_view b);
// Prefix scale 0.1 over at most 4 characters, applied when jaro > 0.7.
double jaro_winkler(std::string_view a, std::string_view b);
std::size_t levenshtein_distance(std::string_view a, std::string_view b);
// 1 - dist / max(|a|, |b|).
double levenshtein_similarity(std::string_view a, std::string_view b);
// Tokens split on non-alphanumerics, Jaro-Winkler inner metric, averaged over
// both directions.
double monge_elkan(std::string_view a, std::string_view b);

// Case-folds both names, then applies the metric.
double sim(Metric metric, std::string_view a, std::string_view b);
double sim(std::string_view metric, std::string_view a, std::string_view b);

struct SimilarityScore {
  AttributePair pair;
  double value = 0.0;
  Metric metric = Metric::NGram;
};

// One score per pair of pair_space(d), in the same order. Runs in parallel
// when built with OpenMP.
std::vector<SimilarityScore> score_dataset(Metric metric, const Dataset& d);
// Reference implementation: calls sim() pair by pair.
std::vector<SimilarityScore> score_dataset_serial(Metric metric, const Dataset& d);

struct LabeledScore {
  double value = 0.0;
  bool is_match = false;
};

std::vector<LabeledScore> label_scores(std::span<const SimilarityScore> scores,
                                       const GroundTruth& truth);

// All datasets of the benchmark in one ranking.
std::vector<LabeledScore> pooled_scores(Metric metric, const Benchmark& b);

struct ThresholdResult {
  double theta = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t true_positives = 0;
  std::size_t candidates = 0;
};

// Picks theta among the observed values maximizing F1 of {value >= theta};
// ties go to the smallest theta. Throws Error{EmptyTruth}.
ThresholdResult best_threshold(std::span<const LabeledScore> scores);
ThresholdResult best_threshold(std::span<const SimilarityScore> scores, const GroundTruth& truth);

struct PrPoint {
  double threshold = 0.0;
  double recall = 0.0;
  double precision = 0.0;
};

struct PrCurve {
  std::vector<PrPoint> points;  // descending threshold
  double auc = 0.0;
};

// Trapezoidal area over recall, extended to recall 0 at the precision of the
// highest threshold. Throws Error{EmptyTruth}.
PrCurve pr_curve(std::span<const LabeledScore> scores);
PrCurve pr_curve(std::span<const SimilarityScore> scores, const GroundTruth& truth);

// Yes for every pair scoring >= theta, No for the rest.
Matching threshold_matching(const Dataset& d, std::span<const SimilarityScore> scores, double theta);

struct BaselineResult {
  std::string dataset_id;
  ThresholdResult threshold;
  Matching matching;
};

// Per dataset: score every pair, pick the best-F1 threshold, threshold.
std::vector<BaselineResult> run_baseline(Metric metric, const Benchmark& b);

}  // namespace matchbench
