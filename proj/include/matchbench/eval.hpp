#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "matchbench/benchmark.hpp"
#include "matchbench/matching.hpp"

namespace matchbench {

struct ExperimentRecord;

struct MetricRow {
  std::string dataset_id;
  std::string method;
  std::size_t run = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double decisiveness = 0.0;
  std::size_t true_positives = 0;
  std::size_t false_positives = 0;
  std::size_t false_negatives = 0;
  std::size_t candidates = 0;  // |yes-set|
  std::size_t decided = 0;     // |yes-set| + |no-set|
  std::size_t pair_count = 0;
  bool precision_undefined = false;  // empty yes-set; precision reported as 0
};

// Throws Error{DatasetMismatch} when the matching, truth and dataset disagree.
MetricRow evaluate(const Matching& m, const GroundTruth& t, const Dataset& d, std::string method = {},
                   std::size_t run = 0);

double f1_score(double precision, double recall) noexcept;
// Mean of the two central order statistics for even counts.
double median(std::vector<double> values);
// n - 1 denominator; 0 for fewer than two values.
double sample_sd(std::span<const double> values);

struct MedianCell {
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double decisiveness = 0.0;
  std::size_t runs = 0;
};

// Rows are datasets, columns methods. f1, precision, recall and decisiveness
// are each the median over runs on their own, so a cell's (p, r) need not
// reproduce its f1. The mean row averages the medians over datasets.
struct MedianTable {
  std::vector<std::string> datasets;
  std::vector<std::string> methods;
  std::map<std::pair<std::string, std::string>, MedianCell> cells;  // (dataset, method)
  std::map<std::string, MedianCell> mean_row;

  const MedianCell* cell(const std::string& dataset, const std::string& method) const;
};

MedianTable median_table(std::span<const MetricRow> rows);

struct ConsistencyRow {
  std::string method;
  double sd_f1 = 0.0;
  double sd_precision = 0.0;
  double sd_recall = 0.0;
  std::size_t datasets = 0;
};

// Per dataset the sample sd over runs, then the mean over datasets. All rows
// must share one method. Throws Error{InsufficientRuns} below two runs.
ConsistencyRow consistency(std::span<const MetricRow> rows);
std::vector<ConsistencyRow> consistency_table(std::span<const MetricRow> rows);

// Union of the yes-sets; the no-set keeps what neither side said yes to.
// Throws Error{DatasetMismatch}.
Matching combine(const Matching& a, const Matching& b);
Matching combine(const ExperimentRecord& a, const ExperimentRecord& b);

// method -> dataset -> runs
using MethodRuns = std::map<std::string, std::map<std::string, std::vector<Matching>>>;

struct CombinationCell {
  double true_positives = 0.0;
  double candidates = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t averaged_over = 0;  // run pairs (or runs on the diagonal)
};

struct CombinationTables {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
  // [i][j][dataset index]
  std::vector<std::vector<std::vector<CombinationCell>>> per_dataset;
  // [i][j]; counts summed over datasets, rates averaged.
  std::vector<std::vector<CombinationCell>> aggregate;

  std::size_t method_index(const std::string& method) const;
};

// Off-diagonal cells average over all runs_i × runs_j pairs, diagonal cells
// over the method's own runs. Throws Error{RunCountMismatch} when methods
// differ in run count on a dataset.
CombinationTables combination_tables(const MethodRuns& runs, const Benchmark& b);

// `copies` identical runs of a deterministic matching per dataset.
std::map<std::string, std::vector<Matching>> replicate_runs(const std::map<std::string, Matching>& by_dataset,
                                                            std::size_t copies);

}  // namespace matchbench
