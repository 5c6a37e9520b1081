#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/quantile.hpp"
#include "rectflow/table.hpp"

namespace rectflow {

struct CategoryVocab {
  std::vector<std::string> cats;  // unique, lexicographically sorted at fit time

  size_t size() const { return cats.size(); }
  bool constant() const { return cats.size() == 1; }

  int index_of(const std::string& s) const {
    auto it = std::lower_bound(cats.begin(), cats.end(), s);
    if (it == cats.end() || *it != s) return -1;
    return static_cast<int>(it - cats.begin());
  }
};

// Sorted-unique fit keeps the vocabulary independent of row order.
inline CategoryVocab fit_vocab(const std::vector<std::string>& values) {
  require(!values.empty(), ErrorKind::fit, "fit_vocab: empty input");
  CategoryVocab v;
  v.cats = values;
  std::sort(v.cats.begin(), v.cats.end());
  v.cats.erase(std::unique(v.cats.begin(), v.cats.end()), v.cats.end());
  return v;
}

struct ColumnLayout {
  size_t offset = 0;
  size_t width = 0;
};

// Invertible table <-> matrix codec: numerical columns map through their
// quantile transforms into the leading coordinates, categorical columns
// become one-hot blocks after them (schema order within each group).
struct PreprocessState {
  TableSchema schema;
  std::vector<QuantileMap> qmaps;      // per schema column, numerical only
  std::vector<CategoryVocab> vocabs;   // per schema column, categorical only
  std::vector<ColumnLayout> layout;    // per schema column, into the encoded matrix
  size_t dim = 0;

  void check_table(const TableData& table, const char* op) const {
    require(table.schema.columns.size() == schema.columns.size(), ErrorKind::schema,
            std::string(op) + ": column count mismatch");
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      require(table.schema.columns[c].name == schema.columns[c].name &&
                  table.schema.columns[c].kind == schema.columns[c].kind,
              ErrorKind::schema,
              std::string(op) + ": column " + std::to_string(c) +
                  " does not match the fitted schema");
    }
  }

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      nlohmann::json jc = {{"offset", layout[c].offset}, {"width", layout[c].width}};
      if (schema.columns[c].kind == ColKind::numerical) {
        jc["refs"] = qmaps[c].refs;
        jc["eps"] = qmaps[c].eps;
        jc["constant"] = qmaps[c].constant;
      } else {
        jc["cats"] = vocabs[c].cats;
      }
      cols.push_back(std::move(jc));
    }
    return {{"schema", schema.to_json()}, {"dim", dim}, {"columns", cols}};
  }

  static PreprocessState from_json(const nlohmann::json& j) {
    PreprocessState st;
    require(j.contains("schema") && j.contains("dim") && j.contains("columns"),
            ErrorKind::corrupt_file, "preprocess state: missing fields");
    st.schema = TableSchema::from_json(j["schema"]);
    st.dim = j["dim"].get<size_t>();
    const auto& cols = j["columns"];
    require(cols.is_array() && cols.size() == st.schema.columns.size(),
            ErrorKind::corrupt_file, "preprocess state: column list mismatch");
    st.qmaps.resize(cols.size());
    st.vocabs.resize(cols.size());
    st.layout.resize(cols.size());
    for (size_t c = 0; c < cols.size(); ++c) {
      st.layout[c] = {cols[c].at("offset").get<size_t>(),
                      cols[c].at("width").get<size_t>()};
      if (st.schema.columns[c].kind == ColKind::numerical) {
        st.qmaps[c].refs = cols[c].at("refs").get<std::vector<double>>();
        st.qmaps[c].eps = cols[c].at("eps").get<double>();
        st.qmaps[c].constant = cols[c].at("constant").get<bool>();
      } else {
        st.vocabs[c].cats = cols[c].at("cats").get<std::vector<std::string>>();
      }
    }
    return st;
  }
};

inline PreprocessState fit_preprocess(const TableData& table, int n_q = 1000) {
  require(table.n_rows > 0, ErrorKind::empty_input, "fit_preprocess: empty table");
  PreprocessState st;
  st.schema = table.schema;
  const size_t nc = table.n_cols();
  st.qmaps.resize(nc);
  st.vocabs.resize(nc);
  st.layout.resize(nc);

  size_t offset = 0;
  for (size_t c = 0; c < nc; ++c) {
    if (table.schema.columns[c].kind != ColKind::numerical) continue;
    st.qmaps[c] = fit_quantile(table.num[c], n_q);
    st.layout[c] = {offset, 1};
    offset += 1;
  }
  for (size_t c = 0; c < nc; ++c) {
    if (table.schema.columns[c].kind != ColKind::categorical) continue;
    st.vocabs[c] = fit_vocab(table.cat[c]);
    st.layout[c] = {offset, st.vocabs[c].size()};
    offset += st.vocabs[c].size();
  }
  st.dim = offset;
  return st;
}

inline Matrix encode(const TableData& table, const PreprocessState& st) {
  st.check_table(table, "encode");
  Matrix m(static_cast<int>(table.n_rows), static_cast<int>(st.dim));
  for (size_t c = 0; c < table.n_cols(); ++c) {
    const ColumnLayout& lay = st.layout[c];
    if (st.schema.columns[c].kind == ColKind::numerical) {
      for (size_t r = 0; r < table.n_rows; ++r)
        m(static_cast<int>(r), static_cast<int>(lay.offset)) =
            st.qmaps[c].forward(table.num[c][r]);
    } else {
      for (size_t r = 0; r < table.n_rows; ++r) {
        const int k = st.vocabs[c].index_of(table.cat[c][r]);
        require(k >= 0, ErrorKind::encode,
                "encode: unseen category \"" + table.cat[c][r] + "\" in column \"" +
                    st.schema.columns[c].name + "\"");
        m(static_cast<int>(r), static_cast<int>(lay.offset + static_cast<size_t>(k))) = 1.0;
      }
    }
  }
  return m;
}

inline TableData decode(const Matrix& m, const PreprocessState& st) {
  require(static_cast<size_t>(m.cols()) == st.dim, ErrorKind::dimension,
          "decode: matrix width " + std::to_string(m.cols()) + " != encoded dim " +
              std::to_string(st.dim));
  require(m.all_finite(), ErrorKind::decode, "decode: non-finite entries");

  TableData t;
  t.schema = st.schema;
  t.num.resize(st.schema.columns.size());
  t.cat.resize(st.schema.columns.size());
  t.n_rows = static_cast<size_t>(m.rows());
  for (size_t c = 0; c < st.schema.columns.size(); ++c) {
    const ColumnLayout& lay = st.layout[c];
    if (st.schema.columns[c].kind == ColKind::numerical) {
      t.num[c].resize(t.n_rows);
      for (int r = 0; r < m.rows(); ++r)
        t.num[c][static_cast<size_t>(r)] =
            st.qmaps[c].inverse(m(r, static_cast<int>(lay.offset)));
    } else {
      t.cat[c].resize(t.n_rows);
      for (int r = 0; r < m.rows(); ++r) {
        // argmax over the one-hot block; strict > keeps ties at the lowest index
        size_t best = 0;
        double best_v = m(r, static_cast<int>(lay.offset));
        for (size_t k = 1; k < lay.width; ++k) {
          const double v = m(r, static_cast<int>(lay.offset + k));
          if (v > best_v) {
            best_v = v;
            best = k;
          }
        }
        t.cat[c][static_cast<size_t>(r)] = st.vocabs[c].cats[best];
      }
    }
  }
  return t;
}

}  // namespace rectflow
