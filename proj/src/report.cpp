#include "matchbench/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "matchbench/error.hpp"

namespace matchbench {

namespace {

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string full(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string baseline_csv(Metric metric, std::span<const BaselineResult> rows) {
  std::ostringstream out;
  out << "dataset,metric,theta,f1,precision,recall,tp,candidates\n";
  for (const auto& r : rows) {
    const auto& t = r.threshold;
    out << csv_field(r.dataset_id) << ',' << metric_name(metric) << ',' << full(t.theta) << ',' << full(t.f1) << ','
        << full(t.precision) << ',' << full(t.recall) << ',' << t.true_positives << ',' << t.candidates << '\n';
  }
  return out.str();
}

std::string pr_curve_csv(const PrCurve& curve) {
  std::ostringstream out;
  out << "threshold,precision,recall\n";
  for (const auto& p : curve.points) out << full(p.threshold) << ',' << full(p.precision) << ',' << full(p.recall) << '\n';
  return out.str();
}

std::string metric_rows_csv(std::span<const MetricRow> rows) {
  std::ostringstream out;
  out << "dataset,method,run,precision,recall,f1,decisiveness,tp,fp,fn,candidates\n";
  for (const auto& r : rows) {
    out << csv_field(r.dataset_id) << ',' << csv_field(r.method) << ',' << r.run << ',' << full(r.precision) << ','
        << full(r.recall) << ',' << full(r.f1) << ',' << full(r.decisiveness) << ',' << r.true_positives << ','
        << r.false_positives << ',' << r.false_negatives << ',' << r.candidates << '\n';
  }
  return out.str();
}

std::string f1_table_markdown(const MedianTable& t) {
  std::ostringstream out;
  out << "| dataset |";
  for (const auto& m : t.methods) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < t.methods.size(); ++i) out << "---|";
  out << '\n';
  auto cell_text = [](const MedianCell& c) {
    return fmt(c.f1) + " (" + fmt(c.precision, 2) + ", " + fmt(c.recall, 2) + ")";
  };
  for (const auto& d : t.datasets) {
    out << "| " << d << " |";
    for (const auto& m : t.methods) {
      const auto* c = t.cell(d, m);
      out << ' ' << (c ? cell_text(*c) : std::string("-")) << " |";
    }
    out << '\n';
  }
  out << "| mean |";
  for (const auto& m : t.methods) out << ' ' << cell_text(t.mean_row.at(m)) << " |";
  out << '\n';
  return out.str();
}

std::string f1_table_csv(const MedianTable& t) {
  std::ostringstream out;
  out << "dataset,method,runs,median_f1,median_precision,median_recall,median_decisiveness\n";
  auto line = [&](const std::string& d, const std::string& m, const MedianCell& c) {
    out << csv_field(d) << ',' << csv_field(m) << ',' << c.runs << ',' << full(c.f1) << ',' << full(c.precision) << ','
        << full(c.recall) << ',' << full(c.decisiveness) << '\n';
  };
  for (const auto& d : t.datasets)
    for (const auto& m : t.methods)
      if (const auto* c = t.cell(d, m)) line(d, m, *c);
  for (const auto& m : t.methods) line("mean", m, t.mean_row.at(m));
  return out.str();
}

std::string decisiveness_table_markdown(const MedianTable& t) {
  std::ostringstream out;
  out << "| dataset |";
  for (const auto& m : t.methods) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < t.methods.size(); ++i) out << "---|";
  out << '\n';
  for (const auto& d : t.datasets) {
    out << "| " << d << " |";
    for (const auto& m : t.methods) {
      const auto* c = t.cell(d, m);
      out << ' ' << (c ? fmt(c->decisiveness, 2) : std::string("-")) << " |";
    }
    out << '\n';
  }
  out << "| mean |";
  for (const auto& m : t.methods) out << ' ' << fmt(t.mean_row.at(m).decisiveness, 2) << " |";
  out << '\n';
  return out.str();
}

std::string consistency_markdown(std::span<const ConsistencyRow> rows) {
  std::ostringstream out;
  out << "| method | sd f1 (p, r) |\n|---|---|\n";
  for (const auto& r : rows)
    out << "| " << r.method << " | " << fmt(r.sd_f1) << " (" << fmt(r.sd_precision) << ", " << fmt(r.sd_recall)
        << ") |\n";
  return out.str();
}

std::string consistency_csv(std::span<const ConsistencyRow> rows) {
  std::ostringstream out;
  out << "method,datasets,sd_f1,sd_precision,sd_recall\n";
  for (const auto& r : rows)
    out << csv_field(r.method) << ',' << r.datasets << ',' << full(r.sd_f1) << ',' << full(r.sd_precision) << ','
        << full(r.sd_recall) << '\n';
  return out.str();
}

std::string combination_markdown(const CombinationTables& t, CombinationMeasure measure) {
  std::ostringstream out;
  out << "| |";
  for (const auto& m : t.methods) out << ' ' << m << " |";
  out << "\n|---|";
  for (std::size_t i = 0; i < t.methods.size(); ++i) out << "---|";
  out << '\n';
  for (std::size_t i = 0; i < t.methods.size(); ++i) {
    out << "| " << t.methods[i] << " |";
    for (std::size_t j = 0; j < t.methods.size(); ++j) {
      const auto& c = t.aggregate[i][j];
      switch (measure) {
        case CombinationMeasure::TruePositives: out << ' ' << fmt(c.true_positives, 1); break;
        case CombinationMeasure::Candidates: out << ' ' << fmt(c.candidates, 1); break;
        case CombinationMeasure::F1:
          out << ' ' << fmt(c.f1) << " (" << fmt(c.precision, 2) << ", " << fmt(c.recall, 2) << ')';
          break;
      }
      out << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string combination_csv(const CombinationTables& t) {
  std::ostringstream out;
  out << "method_a,method_b,dataset,tp,candidates,precision,recall,f1,averaged_over\n";
  auto line = [&](std::size_t i, std::size_t j, const std::string& d, const CombinationCell& c) {
    out << csv_field(t.methods[i]) << ',' << csv_field(t.methods[j]) << ',' << csv_field(d) << ','
        << full(c.true_positives) << ',' << full(c.candidates) << ',' << full(c.precision) << ',' << full(c.recall)
        << ',' << full(c.f1) << ',' << c.averaged_over << '\n';
  };
  for (std::size_t i = 0; i < t.methods.size(); ++i) {
    for (std::size_t j = 0; j < t.methods.size(); ++j) {
      for (std::size_t d = 0; d < t.datasets.size(); ++d) line(i, j, t.datasets[d], t.per_dataset[i][j][d]);
      line(i, j, "ALL", t.aggregate[i][j]);
    }
  }
  return out.str();
}

void write_text_file(const std::filesystem::path& file, const std::string& content) {
  if (file.has_parent_path()) std::filesystem::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  out << content;
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + file.string());
}

}  // namespace matchbench
