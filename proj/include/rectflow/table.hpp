#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <unordered_set>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/csv.hpp"
#include "rectflow/error.hpp"
#include "rectflow/rng.hpp"

namespace rectflow {

enum class Task { classification, regression };
enum class ColKind { numerical, categorical };

inline const char* task_name(Task t) {
  return t == Task::classification ? "classification" : "regression";
}
inline const char* col_kind_name(ColKind k) {
  return k == ColKind::numerical ? "numerical" : "categorical";
}

struct ColumnSpec {
  std::string name;
  ColKind kind;
};

// Ordered column list with exactly one target column; loaded from a sidecar
// JSON file rather than inferred from the data.
struct TableSchema {
  Task task = Task::classification;
  std::string target;
  std::vector<ColumnSpec> columns;

  size_t target_index() const {
    for (size_t i = 0; i < columns.size(); ++i)
      if (columns[i].name == target) return i;
    fail(ErrorKind::schema, "schema: target column \"" + target + "\" not in columns");
  }

  void validate() const {
    require(!columns.empty(), ErrorKind::schema, "schema: no columns");
    std::unordered_set<std::string> seen;
    for (const auto& c : columns) {
      require(!c.name.empty(), ErrorKind::schema, "schema: empty column name");
      require(seen.insert(c.name).second, ErrorKind::schema,
              "schema: duplicate column \"" + c.name + "\"");
    }
    require(seen.count(target) == 1, ErrorKind::schema,
            "schema: target column \"" + target + "\" not in columns");
    require(columns.size() >= 2, ErrorKind::schema,
            "schema: need at least one non-target column");
  }

  static TableSchema from_json(const nlohmann::json& j) {
    TableSchema s;
    require(j.is_object(), ErrorKind::schema, "schema: JSON root must be an object");
    const std::string task = j.value("task", std::string());
    if (task == "classification") s.task = Task::classification;
    else if (task == "regression") s.task = Task::regression;
    else fail(ErrorKind::schema, "schema: task must be classification or regression");
    require(j.contains("target") && j["target"].is_string(), ErrorKind::schema,
            "schema: missing string field \"target\"");
    s.target = j["target"].get<std::string>();
    require(j.contains("columns") && j["columns"].is_array(), ErrorKind::schema,
            "schema: missing array field \"columns\"");
    for (const auto& jc : j["columns"]) {
      ColumnSpec c;
      require(jc.contains("name") && jc["name"].is_string(), ErrorKind::schema,
              "schema: column missing string field \"name\"");
      c.name = jc["name"].get<std::string>();
      const std::string kind = jc.value("kind", std::string());
      if (kind == "numerical") c.kind = ColKind::numerical;
      else if (kind == "categorical") c.kind = ColKind::categorical;
      else fail(ErrorKind::schema,
                "schema: column \"" + c.name + "\" kind must be numerical or categorical");
      s.columns.push_back(std::move(c));
    }
    s.validate();
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : columns)
      cols.push_back({{"name", c.name}, {"kind", col_kind_name(c.kind)}});
    return {{"task", task_name(task)}, {"target", target}, {"columns", cols}};
  }

  static TableSchema load(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::io, "schema: cannot open " + path);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::parse, "schema: invalid JSON in " + path + ": " + e.what());
    }
    return from_json(j);
  }
};

// Columnar table: one vector per column, numeric or string by kind. Immutable
// by convention after load; cheap row subsetting for splits.
struct TableData {
  TableSchema schema;
  std::vector<std::vector<double>> num;       // per column; empty unless numerical
  std::vector<std::vector<std::string>> cat;  // per column; empty unless categorical
  size_t n_rows = 0;

  size_t n_cols() const { return schema.columns.size(); }

  TableData take_rows(const std::vector<size_t>& idx) const {
    TableData out;
    out.schema = schema;
    out.num.resize(n_cols());
    out.cat.resize(n_cols());
    out.n_rows = idx.size();
    for (size_t c = 0; c < n_cols(); ++c) {
      if (schema.columns[c].kind == ColKind::numerical) {
        out.num[c].reserve(idx.size());
        for (size_t r : idx) out.num[c].push_back(num[c][r]);
      } else {
        out.cat[c].reserve(idx.size());
        for (size_t r : idx) out.cat[c].push_back(cat[c][r]);
      }
    }
    return out;
  }
};

inline TableData table_from_records(const TableSchema& schema,
                                    const std::vector<std::vector<std::string>>& records,
                                    const std::vector<size_t>& col_of_schema) {
  TableData t;
  t.schema = schema;
  t.num.resize(schema.columns.size());
  t.cat.resize(schema.columns.size());
  t.n_rows = records.size();
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    const size_t src = col_of_schema[c];
    if (schema.columns[c].kind == ColKind::numerical) {
      t.num[c].reserve(records.size());
      for (size_t r = 0; r < records.size(); ++r) {
        require(records[r].size() > src, ErrorKind::parse,
                "csv: row " + std::to_string(r + 1) + " has too few cells");
        t.num[c].push_back(parse_double(
            records[r][src], "in column \"" + schema.columns[c].name + "\", row " +
                                 std::to_string(r + 1)));
      }
    } else {
      t.cat[c].reserve(records.size());
      for (size_t r = 0; r < records.size(); ++r) {
        require(records[r].size() > src, ErrorKind::parse,
                "csv: row " + std::to_string(r + 1) + " has too few cells");
        require(!records[r][src].empty(), ErrorKind::parse,
                "csv: empty cell in column \"" + schema.columns[c].name + "\", row " +
                    std::to_string(r + 1));
        t.cat[c].push_back(records[r][src]);
      }
    }
  }
  return t;
}

// Loads a header-mandatory CSV against a schema. Header order is free; every
// schema column must be present and extras are rejected.
inline TableData load_csv(const std::string& path, const TableSchema& schema) {
  schema.validate();
  auto records = read_csv_file(path);
  require(!records.empty(), ErrorKind::empty_input, "csv: " + path + " is empty");
  const std::vector<std::string> header = records.front();
  records.erase(records.begin());
  require(!records.empty(), ErrorKind::empty_input,
          "csv: " + path + " has no data rows");

  std::vector<size_t> col_of_schema(schema.columns.size());
  std::vector<bool> used(header.size(), false);
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    auto it = std::find(header.begin(), header.end(), schema.columns[c].name);
    require(it != header.end(), ErrorKind::schema,
            "csv: header of " + path + " lacks column \"" + schema.columns[c].name + "\"");
    col_of_schema[c] = static_cast<size_t>(it - header.begin());
    used[col_of_schema[c]] = true;
  }
  for (size_t i = 0; i < header.size(); ++i)
    require(used[i], ErrorKind::schema,
            "csv: header of " + path + " has unknown column \"" + header[i] + "\"");

  return table_from_records(schema, records, col_of_schema);
}

inline void save_csv(const TableData& table, const std::string& path) {
  std::vector<std::string> header;
  for (const auto& c : table.schema.columns) header.push_back(c.name);
  std::vector<std::vector<std::string>> rows(table.n_rows);
  for (size_t r = 0; r < table.n_rows; ++r) {
    rows[r].reserve(table.n_cols());
    for (size_t c = 0; c < table.n_cols(); ++c) {
      if (table.schema.columns[c].kind == ColKind::numerical)
        rows[r].push_back(format_double(table.num[c][r]));
      else
        rows[r].push_back(table.cat[c][r]);
    }
  }
  write_csv_file(path, header, rows);
}

struct SplitSpec {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
  uint64_t seed = 0;

  void validate() const {
    require(train > 0.0 && val > 0.0 && test > 0.0, ErrorKind::config,
            "split: fractions must be positive");
    require(std::abs(train + val + test - 1.0) <= 1e-9, ErrorKind::config,
            "split: fractions must sum to 1");
  }
};

// Deterministic disjoint partition: Fisher-Yates shuffle driven by the fixed
// seeded generator, then floor(train*n) / floor(val*n) / remainder.
inline std::array<TableData, 3> split(const TableData& table, const SplitSpec& spec) {
  spec.validate();
  require(table.n_rows >= 3, ErrorKind::empty_input, "split: need at least 3 rows");

  std::vector<size_t> perm(table.n_rows);
  std::iota(perm.begin(), perm.end(), size_t{0});
  Rng rng(spec.seed);
  for (size_t i = table.n_rows - 1; i > 0; --i) {
    const size_t j = static_cast<size_t>(rng.below(i + 1));
    std::swap(perm[i], perm[j]);
  }

  const size_t n = table.n_rows;
  const size_t n_train = static_cast<size_t>(std::floor(spec.train * static_cast<double>(n)));
  const size_t n_val = static_cast<size_t>(std::floor(spec.val * static_cast<double>(n)));

  std::vector<size_t> tr(perm.begin(), perm.begin() + n_train);
  std::vector<size_t> va(perm.begin() + n_train, perm.begin() + n_train + n_val);
  std::vector<size_t> te(perm.begin() + n_train + n_val, perm.end());
  return {table.take_rows(tr), table.take_rows(va), table.take_rows(te)};
}

}  // namespace rectflow
