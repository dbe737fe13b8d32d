#include <fstream>
#include <map>
#include <sstream>

#include "matchbench/benchmark.hpp"
#include "matchbench/error.hpp"

namespace matchbench {

namespace fs = std::filesystem;

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);

  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    if (!(row.size() == 1 && row.front().empty())) rows.push_back(std::move(row));
    row.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      continue;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw Error(ErrorKind::SchemaError, "unterminated quoted CSV field");
  if (field_started || !row.empty()) end_row();
  return rows;
}

namespace {

struct Table {
  std::map<std::string, std::size_t> columns;
  std::vector<std::vector<std::string>> rows;

  const std::string& at(const std::vector<std::string>& row, const std::string& column) const {
    static const std::string empty;
    const auto idx = columns.at(column);
    return idx < row.size() ? row[idx] : empty;
  }
};

Table read_table(const fs::path& file, std::initializer_list<const char*> required) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorKind::ManifestNotFound, "missing " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto records = parse_csv(ss.str());
  if (records.empty()) throw Error(ErrorKind::SchemaError, file.string() + " is empty");
  Table t;
  for (std::size_t i = 0; i < records.front().size(); ++i) t.columns[fold_case(records.front()[i])] = i;
  for (const char* col : required)
    if (!t.columns.count(col))
      throw Error(ErrorKind::SchemaError, file.string() + " lacks column '" + col + "'");
  t.rows.assign(records.begin() + 1, records.end());
  return t;
}

}  // namespace

Benchmark import_benchmark_csv(const fs::path& dir) {
  const auto datasets = read_table(dir / "datasets.csv", {"id", "source_table", "target_table"});
  const auto tables = read_table(dir / "tables.csv", {"table", "description"});
  const auto attributes = read_table(dir / "attributes.csv", {"table", "name", "description"});
  const auto matches = read_table(dir / "matches.csv", {"dataset", "source", "target"});

  std::map<std::string, Schema> schemas;
  for (const auto& row : tables.rows) {
    Schema s;
    s.table_name = tables.at(row, "table");
    s.table_description = tables.at(row, "description");
    schemas[fold_case(s.table_name)] = s;
  }
  for (const auto& row : attributes.rows) {
    const auto key = fold_case(attributes.at(row, "table"));
    auto it = schemas.find(key);
    if (it == schemas.end()) {
      Schema s;
      s.table_name = attributes.at(row, "table");
      it = schemas.emplace(key, s).first;
    }
    it->second.attributes.push_back({attributes.at(row, "name"), attributes.at(row, "description")});
  }

  Benchmark b;
  for (const auto& row : datasets.rows) {
    Dataset d;
    d.id = datasets.at(row, "id");
    const auto src = schemas.find(fold_case(datasets.at(row, "source_table")));
    const auto tgt = schemas.find(fold_case(datasets.at(row, "target_table")));
    if (src == schemas.end() || tgt == schemas.end())
      throw Error(ErrorKind::SchemaError, "dataset '" + d.id + "' references an undescribed table");
    d.source = src->second;
    d.target = tgt->second;
    b.datasets.push_back(std::move(d));
    b.truths.push_back({b.datasets.back().id, {}});
  }
  for (const auto& row : matches.rows) {
    const auto& id = matches.at(row, "dataset");
    GroundTruth* truth = nullptr;
    for (auto& t : b.truths)
      if (t.dataset_id == id) truth = &t;
    if (!truth) throw Error(ErrorKind::TruthError, "match for unknown dataset '" + id + "'");
    truth->matches.push_back({matches.at(row, "source"), matches.at(row, "target")});
  }

  return validated(std::move(b));
}

}  // namespace matchbench
