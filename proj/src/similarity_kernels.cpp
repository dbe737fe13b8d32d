// Parallel scoring over the pair space. score_dataset_serial in
// similarity.cpp is the reference these kernels are tested against.

#include <cstdint>

#include "matchbench/similarity.hpp"

namespace matchbench {

namespace {

struct Prepared {
  std::vector<std::string> folded;
  std::vector<GramSet> grams;
};

Prepared prepare(Metric metric, const Schema& schema) {
  Prepared p;
  p.folded.reserve(schema.size());
  for (const auto& a : schema.attributes) p.folded.push_back(fold_case(a.name));
  if (metric == Metric::NGram) {
    p.grams.reserve(schema.size());
    for (const auto& f : p.folded) p.grams.push_back(trigrams(f));
  }
  return p;
}

double kernel(Metric metric, const Prepared& src, std::size_t s, const Prepared& tgt, std::size_t t) {
  switch (metric) {
    case Metric::NGram: return dice(src.grams[s], tgt.grams[t]);
    case Metric::JaroWinkler: return jaro_winkler(src.folded[s], tgt.folded[t]);
    case Metric::Levenshtein: return levenshtein_similarity(src.folded[s], tgt.folded[t]);
    case Metric::MongeElkan: return monge_elkan(src.folded[s], tgt.folded[t]);
  }
  return 0.0;
}

}  // namespace

std::vector<SimilarityScore> score_dataset(Metric metric, const Dataset& d) {
  const auto src = prepare(metric, d.source);
  const auto tgt = prepare(metric, d.target);
  const auto n_target = d.target.size();
  const auto n = static_cast<std::int64_t>(d.pair_count());

  std::vector<double> values(d.pair_count());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    values[idx] = kernel(metric, src, idx / n_target, tgt, idx % n_target);
  }

  std::vector<SimilarityScore> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out.push_back({d.pair_at(i), values[i], metric});
  return out;
}

std::vector<LabeledScore> pooled_scores(Metric metric, const Benchmark& b) {
  std::vector<LabeledScore> out;
  out.reserve(b.total_pairs());
  for (const auto& d : b.datasets) {
    const auto scores = score_dataset(metric, d);
    const auto labeled = label_scores(scores, b.truth(d.id));
    out.insert(out.end(), labeled.begin(), labeled.end());
  }
  return out;
}

std::vector<BaselineResult> run_baseline(Metric metric, const Benchmark& b) {
  std::vector<BaselineResult> out;
  for (const auto& d : b.datasets) {
    const auto scores = score_dataset(metric, d);
    const auto threshold = best_threshold(scores, b.truth(d.id));
    out.push_back({d.id, threshold, threshold_matching(d, scores, threshold.theta)});
  }
  return out;
}

}  // namespace matchbench
