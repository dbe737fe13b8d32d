#include "matchbench/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "matchbench/error.hpp"
#include "matchbench/experiment.hpp"

namespace matchbench {

double f1_score(double precision, double recall) noexcept {
  if (precision + recall <= 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

MetricRow evaluate(const Matching& m, const GroundTruth& t, const Dataset& d, std::string method, std::size_t run) {
  if (m.dataset_id != d.id || t.dataset_id != d.id || m.pair_count() != d.pair_count())
    throw Error(ErrorKind::DatasetMismatch, "matching '" + m.dataset_id + "' / truth '" + t.dataset_id +
                                                "' do not belong to dataset '" + d.id + "'");
  std::vector<bool> positive(d.pair_count(), false);
  std::size_t truth_size = 0;
  for (const auto& pair : t.matches) {
    const auto idx = d.pair_index(pair);
    if (!idx) throw Error(ErrorKind::DatasetMismatch, "truth pair outside dataset " + d.id);
    if (!positive[*idx]) ++truth_size;
    positive[*idx] = true;
  }

  MetricRow row;
  row.dataset_id = d.id;
  row.method = std::move(method);
  row.run = run;
  row.pair_count = d.pair_count();
  for (std::size_t i = 0; i < m.votes.size(); ++i) {
    const auto v = m.votes[i];
    if (v != VoteValue::Unknown) ++row.decided;
    if (v != VoteValue::Yes) continue;
    ++row.candidates;
    if (positive[i]) ++row.true_positives;
  }
  row.false_positives = row.candidates - row.true_positives;
  row.false_negatives = truth_size - row.true_positives;
  row.precision_undefined = row.candidates == 0;
  row.precision = row.candidates ? static_cast<double>(row.true_positives) / static_cast<double>(row.candidates) : 0.0;
  row.recall = truth_size ? static_cast<double>(row.true_positives) / static_cast<double>(truth_size) : 0.0;
  row.f1 = f1_score(row.precision, row.recall);
  row.decisiveness =
      row.pair_count ? static_cast<double>(row.decided) / static_cast<double>(row.pair_count) : 0.0;
  return row;
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

double sample_sd(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

const MedianCell* MedianTable::cell(const std::string& dataset, const std::string& method) const {
  const auto it = cells.find({dataset, method});
  return it == cells.end() ? nullptr : &it->second;
}

namespace {

// Keeps first-seen order.
void remember(std::vector<std::string>& seen, const std::string& value) {
  if (std::find(seen.begin(), seen.end(), value) == seen.end()) seen.push_back(value);
}

}  // namespace

MedianTable median_table(std::span<const MetricRow> rows) {
  MedianTable table;
  std::map<std::pair<std::string, std::string>, std::vector<const MetricRow*>> groups;
  for (const auto& r : rows) {
    remember(table.datasets, r.dataset_id);
    remember(table.methods, r.method);
    groups[{r.dataset_id, r.method}].push_back(&r);
  }
  for (const auto& [key, group] : groups) {
    std::vector<double> f1, p, r, c;
    for (const auto* row : group) {
      f1.push_back(row->f1);
      p.push_back(row->precision);
      r.push_back(row->recall);
      c.push_back(row->decisiveness);
    }
    table.cells[key] = {median(f1), median(p), median(r), median(c), group.size()};
  }
  for (const auto& method : table.methods) {
    MedianCell mean;
    std::size_t n = 0;
    for (const auto& dataset : table.datasets) {
      const auto* cell = table.cell(dataset, method);
      if (!cell) continue;
      mean.f1 += cell->f1;
      mean.precision += cell->precision;
      mean.recall += cell->recall;
      mean.decisiveness += cell->decisiveness;
      mean.runs += cell->runs;
      ++n;
    }
    if (n) {
      mean.f1 /= static_cast<double>(n);
      mean.precision /= static_cast<double>(n);
      mean.recall /= static_cast<double>(n);
      mean.decisiveness /= static_cast<double>(n);
    }
    table.mean_row[method] = mean;
  }
  return table;
}

ConsistencyRow consistency(std::span<const MetricRow> rows) {
  ConsistencyRow out;
  if (rows.empty()) throw Error(ErrorKind::InsufficientRuns, "no runs to measure consistency over");
  out.method = rows.front().method;
  std::map<std::string, std::vector<const MetricRow*>> by_dataset;
  for (const auto& r : rows) {
    if (r.method != out.method)
      throw Error(ErrorKind::InvalidArgument, "consistency rows mix methods '" + out.method + "' and '" + r.method + "'");
    by_dataset[r.dataset_id].push_back(&r);
  }
  for (const auto& [dataset, group] : by_dataset) {
    if (group.size() < 2)
      throw Error(ErrorKind::InsufficientRuns,
                  out.method + " on " + dataset + " has " + std::to_string(group.size()) + " run(s); need 2");
    std::vector<double> f1, p, r;
    for (const auto* row : group) {
      f1.push_back(row->f1);
      p.push_back(row->precision);
      r.push_back(row->recall);
    }
    out.sd_f1 += sample_sd(f1);
    out.sd_precision += sample_sd(p);
    out.sd_recall += sample_sd(r);
  }
  out.datasets = by_dataset.size();
  const auto n = static_cast<double>(out.datasets);
  out.sd_f1 /= n;
  out.sd_precision /= n;
  out.sd_recall /= n;
  return out;
}

std::vector<ConsistencyRow> consistency_table(std::span<const MetricRow> rows) {
  std::vector<std::string> methods;
  for (const auto& r : rows) remember(methods, r.method);
  std::vector<ConsistencyRow> out;
  for (const auto& method : methods) {
    std::vector<MetricRow> subset;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(subset),
                 [&](const MetricRow& r) { return r.method == method; });
    out.push_back(consistency(subset));
  }
  return out;
}

Matching combine(const Matching& a, const Matching& b) {
  if (!a.same_shape(b))
    throw Error(ErrorKind::DatasetMismatch, "cannot combine '" + a.dataset_id + "' with '" + b.dataset_id + "'");
  Matching out = a;
  for (std::size_t i = 0; i < out.votes.size(); ++i) {
    const auto x = a.votes[i];
    const auto y = b.votes[i];
    if (x == VoteValue::Yes || y == VoteValue::Yes)
      out.votes[i] = VoteValue::Yes;
    else if (x == VoteValue::No || y == VoteValue::No)
      out.votes[i] = VoteValue::No;
    else
      out.votes[i] = VoteValue::Unknown;
  }
  return out;
}

Matching combine(const ExperimentRecord& a, const ExperimentRecord& b) { return combine(a.matching, b.matching); }

std::size_t CombinationTables::method_index(const std::string& method) const {
  const auto it = std::find(methods.begin(), methods.end(), method);
  if (it == methods.end()) throw Error(ErrorKind::InvalidArgument, "unknown method '" + method + "'");
  return static_cast<std::size_t>(it - methods.begin());
}

namespace {

void accumulate(CombinationCell& cell, const MetricRow& row) {
  cell.true_positives += static_cast<double>(row.true_positives);
  cell.candidates += static_cast<double>(row.candidates);
  cell.precision += row.precision;
  cell.recall += row.recall;
  cell.f1 += row.f1;
  ++cell.averaged_over;
}

void finish(CombinationCell& cell) {
  if (cell.averaged_over == 0) return;
  const auto n = static_cast<double>(cell.averaged_over);
  cell.true_positives /= n;
  cell.candidates /= n;
  cell.precision /= n;
  cell.recall /= n;
  cell.f1 /= n;
}

}  // namespace

CombinationTables combination_tables(const MethodRuns& runs, const Benchmark& b) {
  CombinationTables out;
  for (const auto& [method, _] : runs) out.methods.push_back(method);
  std::set<std::string> covered;
  for (const auto& [method, by_dataset] : runs)
    for (const auto& [dataset, _] : by_dataset) covered.insert(dataset);
  for (const auto& d : b.datasets)
    if (covered.count(d.id)) out.datasets.push_back(d.id);

  for (const auto& dataset : out.datasets) {
    std::size_t expected = 0;
    for (const auto& [method, by_dataset] : runs) {
      const auto it = by_dataset.find(dataset);
      const std::size_t n = it == by_dataset.end() ? 0 : it->second.size();
      if (expected == 0) expected = n;
      if (n == 0 || n != expected)
        throw Error(ErrorKind::RunCountMismatch, "method '" + method + "' has " + std::to_string(n) +
                                                     " run(s) on " + dataset + ", expected " +
                                                     std::to_string(expected));
    }
  }

  const auto m = out.methods.size();
  const auto k = out.datasets.size();
  out.per_dataset.assign(m, std::vector<std::vector<CombinationCell>>(m, std::vector<CombinationCell>(k)));
  out.aggregate.assign(m, std::vector<CombinationCell>(m));

  for (std::size_t di = 0; di < k; ++di) {
    const auto& d = b.dataset(out.datasets[di]);
    const auto& truth = b.truth(d.id);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& runs_i = runs.at(out.methods[i]).at(d.id);
      for (std::size_t j = i; j < m; ++j) {
        CombinationCell cell;
        if (i == j) {
          for (const auto& r : runs_i) accumulate(cell, evaluate(r, truth, d));
        } else {
          const auto& runs_j = runs.at(out.methods[j]).at(d.id);
          for (const auto& x : runs_i)
            for (const auto& y : runs_j) accumulate(cell, evaluate(combine(x, y), truth, d));
        }
        finish(cell);
        out.per_dataset[i][j][di] = cell;
        out.per_dataset[j][i][di] = cell;
      }
    }
  }

  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      CombinationCell agg;
      for (std::size_t di = 0; di < k; ++di) {
        const auto& c = out.per_dataset[i][j][di];
        agg.true_positives += c.true_positives;
        agg.candidates += c.candidates;
        agg.precision += c.precision;
        agg.recall += c.recall;
        agg.f1 += c.f1;
        agg.averaged_over += c.averaged_over;
      }
      if (k) {
        agg.precision /= static_cast<double>(k);
        agg.recall /= static_cast<double>(k);
        agg.f1 /= static_cast<double>(k);
      }
      out.aggregate[i][j] = agg;
    }
  }
  return out;
}

std::map<std::string, std::vector<Matching>> replicate_runs(const std::map<std::string, Matching>& by_dataset,
                                                            std::size_t copies) {
  std::map<std::string, std::vector<Matching>> out;
  for (const auto& [dataset, m] : by_dataset) out[dataset] = std::vector<Matching>(copies, m);
  return out;
}

}  // namespace matchbench
