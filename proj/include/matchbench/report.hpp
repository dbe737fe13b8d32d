#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "matchbench/eval.hpp"
#include "matchbench/similarity.hpp"

namespace matchbench {

// CSV: dataset,metric,theta,f1,precision,recall,tp,candidates
std::string baseline_csv(Metric metric, std::span<const BaselineResult> rows);
// CSV: threshold,precision,recall
std::string pr_curve_csv(const PrCurve& curve);

// CSV: dataset,method,run,precision,recall,f1,decisiveness,tp,fp,fn,candidates
std::string metric_rows_csv(std::span<const MetricRow> rows);

// "f1 (p, r)" per dataset and method plus the mean row.
std::string f1_table_markdown(const MedianTable& t);
std::string f1_table_csv(const MedianTable& t);
std::string decisiveness_table_markdown(const MedianTable& t);
std::string consistency_markdown(std::span<const ConsistencyRow> rows);
std::string consistency_csv(std::span<const ConsistencyRow> rows);

enum class CombinationMeasure { TruePositives, Candidates, F1 };

// Method × method matrix of the aggregate cells.
std::string combination_markdown(const CombinationTables& t, CombinationMeasure measure);
// Long form: method_a,method_b,dataset,tp,candidates,precision,recall,f1,averaged_over
// with dataset "ALL" for the aggregate.
std::string combination_csv(const CombinationTables& t);

void write_text_file(const std::filesystem::path& file, const std::string& content);

}  // namespace matchbench
