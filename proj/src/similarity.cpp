#include "matchbench/similarity.hpp"

#include <algorithm>
#include <cctype>
#include <iterator>
#include <numeric>
#include <set>

#include "matchbench/error.hpp"

namespace matchbench {

std::string_view metric_name(Metric m) noexcept {
  switch (m) {
    case Metric::NGram: return "ngram";
    case Metric::JaroWinkler: return "jaro_winkler";
    case Metric::Levenshtein: return "levenshtein";
    case Metric::MongeElkan: return "monge_elkan";
  }
  return "?";
}

Metric parse_metric(std::string_view name) {
  std::string key = fold_case(name);
  std::replace(key.begin(), key.end(), '-', '_');
  for (auto m : kAllMetrics)
    if (metric_name(m) == key) return m;
  if (key == "n_gram" || key == "trigram" || key == "sim_ng") return Metric::NGram;
  throw Error(ErrorKind::UnknownMetric, "unknown metric '" + std::string(name) + "'");
}

GramSet trigrams(std::string_view name) {
  std::string padded = "##";
  padded.append(name);
  padded.append("%%");
  GramSet grams;
  grams.reserve(padded.size() - 2);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) grams.emplace_back(padded.substr(i, 3));
  std::sort(grams.begin(), grams.end());
  grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
  return grams;
}

double dice(const GramSet& a, const GramSet& b) {
  if (a.empty() && b.empty())
    throw Error(ErrorKind::DegenerateInput, "dice of two empty sets");
  std::size_t common = 0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return 2.0 * static_cast<double>(common) / static_cast<double>(a.size() + b.size());
}

double jaro(std::string_view a, std::string_view b) {
  if (a.empty() && b.empty()) return 1.0;
  if (a.empty() || b.empty()) return 0.0;
  const std::size_t longer = std::max(a.size(), b.size());
  const std::size_t window = longer / 2 > 0 ? longer / 2 - 1 : 0;

  std::vector<bool> a_hit(a.size(), false);
  std::vector<bool> b_hit(b.size(), false);
  std::size_t matches = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::size_t lo = i > window ? i - window : 0;
    const std::size_t hi = std::min(i + window + 1, b.size());
    for (std::size_t j = lo; j < hi; ++j) {
      if (b_hit[j] || a[i] != b[j]) continue;
      a_hit[i] = b_hit[j] = true;
      ++matches;
      break;
    }
  }
  if (matches == 0) return 0.0;

  std::size_t transpositions = 0;
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a_hit[i]) continue;
    while (!b_hit[k]) ++k;
    if (a[i] != b[k]) ++transpositions;
    ++k;
  }
  const double m = static_cast<double>(matches);
  return (m / static_cast<double>(a.size()) + m / static_cast<double>(b.size()) +
          (m - static_cast<double>(transpositions) / 2.0) / m) /
         3.0;
}

double jaro_winkler(std::string_view a, std::string_view b) {
  constexpr double kPrefixScale = 0.1;
  constexpr std::size_t kMaxPrefix = 4;
  constexpr double kBoostThreshold = 0.7;

  const double j = jaro(a, b);
  if (j <= kBoostThreshold) return j;
  const std::size_t limit = std::min({a.size(), b.size(), kMaxPrefix});
  std::size_t prefix = 0;
  while (prefix < limit && a[prefix] == b[prefix]) ++prefix;
  return j + static_cast<double>(prefix) * kPrefixScale * (1.0 - j);
}

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

double levenshtein_similarity(std::string_view a, std::string_view b) {
  const std::size_t longer = std::max(a.size(), b.size());
  if (longer == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein_distance(a, b)) / static_cast<double>(longer);
}

namespace {

std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    const bool boundary = i == s.size() || !std::isalnum(static_cast<unsigned char>(s[i]));
    if (!boundary) continue;
    if (i > start) out.push_back(s.substr(start, i - start));
    start = i + 1;
  }
  if (out.empty()) out.push_back(s);
  return out;
}

double monge_elkan_directed(const std::vector<std::string_view>& from,
                            const std::vector<std::string_view>& to) {
  double total = 0.0;
  for (auto f : from) {
    double best = 0.0;
    for (auto t : to) best = std::max(best, jaro_winkler(f, t));
    total += best;
  }
  return total / static_cast<double>(from.size());
}

}  // namespace

double monge_elkan(std::string_view a, std::string_view b) {
  const auto ta = tokens(a);
  const auto tb = tokens(b);
  return 0.5 * (monge_elkan_directed(ta, tb) + monge_elkan_directed(tb, ta));
}

double sim(Metric metric, std::string_view a, std::string_view b) {
  const auto fa = fold_case(a);
  const auto fb = fold_case(b);
  switch (metric) {
    case Metric::NGram: return dice(trigrams(fa), trigrams(fb));
    case Metric::JaroWinkler: return jaro_winkler(fa, fb);
    case Metric::Levenshtein: return levenshtein_similarity(fa, fb);
    case Metric::MongeElkan: return monge_elkan(fa, fb);
  }
  throw Error(ErrorKind::UnknownMetric, "unhandled metric");
}

double sim(std::string_view metric, std::string_view a, std::string_view b) {
  return sim(parse_metric(metric), a, b);
}

std::vector<SimilarityScore> score_dataset_serial(Metric metric, const Dataset& d) {
  std::vector<SimilarityScore> out;
  out.reserve(d.pair_count());
  for (const auto& s : d.source.attributes)
    for (const auto& t : d.target.attributes)
      out.push_back({{s.name, t.name}, sim(metric, s.name, t.name), metric});
  return out;
}

std::vector<LabeledScore> label_scores(std::span<const SimilarityScore> scores,
                                       const GroundTruth& truth) {
  std::set<std::pair<std::string, std::string>> positives;
  for (const auto& m : truth.matches) positives.emplace(fold_case(m.source), fold_case(m.target));
  std::vector<LabeledScore> out;
  out.reserve(scores.size());
  for (const auto& s : scores)
    out.push_back({s.value, positives.count({fold_case(s.pair.source), fold_case(s.pair.target)}) > 0});
  return out;
}

namespace {

// Scores grouped by distinct value, highest first, with cumulative counts.
struct Step {
  double threshold;
  std::size_t candidates;
  std::size_t true_positives;
};

std::vector<Step> sweep(std::span<const LabeledScore> scores, std::size_t& positives) {
  std::vector<LabeledScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& x, const LabeledScore& y) { return x.value > y.value; });
  positives = static_cast<std::size_t>(
      std::count_if(sorted.begin(), sorted.end(), [](const LabeledScore& s) { return s.is_match; }));
  if (positives == 0) throw Error(ErrorKind::EmptyTruth, "no true matches among the scored pairs");

  std::vector<Step> steps;
  std::size_t candidates = 0;
  std::size_t tp = 0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    ++candidates;
    if (sorted[i].is_match) ++tp;
    if (i + 1 == sorted.size() || sorted[i + 1].value != sorted[i].value)
      steps.push_back({sorted[i].value, candidates, tp});
  }
  return steps;
}

double f1_of(std::size_t tp, std::size_t candidates, std::size_t positives) {
  if (tp == 0) return 0.0;
  // Same value as 2pr/(p+r), but a single rounding keeps equal F1s equal.
  return 2.0 * static_cast<double>(tp) / static_cast<double>(candidates + positives);
}

}  // namespace

ThresholdResult best_threshold(std::span<const LabeledScore> scores) {
  std::size_t positives = 0;
  const auto steps = sweep(scores, positives);
  ThresholdResult best;
  bool have = false;
  // Steps run from high to low theta, so `>=` hands ties to the smaller theta.
  for (const auto& s : steps) {
    const double f1 = f1_of(s.true_positives, s.candidates, positives);
    if (!have || f1 >= best.f1) {
      have = true;
      best.theta = s.threshold;
      best.f1 = f1;
      best.true_positives = s.true_positives;
      best.candidates = s.candidates;
      best.precision = static_cast<double>(s.true_positives) / static_cast<double>(s.candidates);
      best.recall = static_cast<double>(s.true_positives) / static_cast<double>(positives);
    }
  }
  return best;
}

ThresholdResult best_threshold(std::span<const SimilarityScore> scores, const GroundTruth& truth) {
  const auto labeled = label_scores(scores, truth);
  return best_threshold(std::span<const LabeledScore>(labeled));
}

PrCurve pr_curve(std::span<const LabeledScore> scores) {
  std::size_t positives = 0;
  const auto steps = sweep(scores, positives);
  PrCurve curve;
  for (const auto& s : steps) {
    curve.points.push_back({s.threshold,
                            static_cast<double>(s.true_positives) / static_cast<double>(positives),
                            static_cast<double>(s.true_positives) / static_cast<double>(s.candidates)});
  }
  double prev_recall = 0.0;
  double prev_precision = curve.points.front().precision;
  for (const auto& p : curve.points) {
    curve.auc += (p.recall - prev_recall) * (p.precision + prev_precision) / 2.0;
    prev_recall = p.recall;
    prev_precision = p.precision;
  }
  return curve;
}

PrCurve pr_curve(std::span<const SimilarityScore> scores, const GroundTruth& truth) {
  const auto labeled = label_scores(scores, truth);
  return pr_curve(std::span<const LabeledScore>(labeled));
}

Matching threshold_matching(const Dataset& d, std::span<const SimilarityScore> scores, double theta) {
  Matching m(d);
  for (const auto& s : scores) {
    const auto idx = d.pair_index(s.pair);
    if (!idx) throw Error(ErrorKind::DatasetMismatch, "score for a pair outside dataset " + d.id);
    m.votes[*idx] = s.value >= theta ? VoteValue::Yes : VoteValue::No;
  }
  return m;
}

}  // namespace matchbench
