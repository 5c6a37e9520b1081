#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/error.hpp"
#include "rectflow/linear.hpp"
#include "rectflow/preprocess.hpp"
#include "rectflow/rng.hpp"
#include "rectflow/table.hpp"

namespace rectflow {

// ---------------------------------------------------------------------------
// Column-level statistics
// ---------------------------------------------------------------------------

// Two-sample Kolmogorov-Smirnov statistic: sup |F_r - F_s| over the merged
// sample points, both CDFs right-continuous step functions.
inline double kst(std::vector<double> real, std::vector<double> synth) {
  require(!real.empty() && !synth.empty(), ErrorKind::metric, "kst: empty input");
  std::sort(real.begin(), real.end());
  std::sort(synth.begin(), synth.end());
  const double nr = static_cast<double>(real.size());
  const double ns = static_cast<double>(synth.size());
  size_t i = 0, j = 0;
  double sup = 0.0;
  while (i < real.size() || j < synth.size()) {
    double x;
    if (i == real.size()) x = synth[j];
    else if (j == synth.size()) x = real[i];
    else x = std::min(real[i], synth[j]);
    while (i < real.size() && real[i] == x) ++i;
    while (j < synth.size() && synth[j] == x) ++j;
    sup = std::max(sup, std::abs(static_cast<double>(i) / nr -
                                 static_cast<double>(j) / ns));
  }
  return sup;
}

namespace detail {

inline std::map<std::string, double> freq_table(const std::vector<std::string>& v) {
  std::map<std::string, double> f;
  for (const auto& s : v) f[s] += 1.0;
  for (auto& [_, c] : f) c /= static_cast<double>(v.size());
  return f;
}

}  // namespace detail

// Total variation distance between category frequency tables:
// (1/2) sum over the category union of |R(w) - S(w)|.
inline double tvd(const std::vector<std::string>& real,
                  const std::vector<std::string>& synth) {
  require(!real.empty() && !synth.empty(), ErrorKind::metric, "tvd: empty input");
  const auto fr = detail::freq_table(real);
  const auto fs = detail::freq_table(synth);
  double sum = 0.0;
  for (const auto& [k, p] : fr) {
    auto it = fs.find(k);
    sum += std::abs(p - (it == fs.end() ? 0.0 : it->second));
  }
  for (const auto& [k, p] : fs)
    if (!fr.count(k)) sum += p;
  return 0.5 * sum;
}

inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  require(x.size() == y.size() && x.size() >= 2, ErrorKind::metric,
          "pearson: need equal lengths >= 2");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  require(sxx > 0.0 && syy > 0.0, ErrorKind::metric,
          "pearson: correlation undefined for a constant input");
  return sxy / std::sqrt(sxx * syy);
}

// (1/2) sum over the joint category union of |R(a,b) - S(a,b)|.
inline double contingency_similarity(const std::vector<std::string>& real_a,
                                     const std::vector<std::string>& real_b,
                                     const std::vector<std::string>& synth_a,
                                     const std::vector<std::string>& synth_b) {
  require(!real_a.empty() && !synth_a.empty(), ErrorKind::metric,
          "contingency: empty input");
  require(real_a.size() == real_b.size() && synth_a.size() == synth_b.size(),
          ErrorKind::metric, "contingency: column length mismatch");

  const auto joint = [](const std::vector<std::string>& a,
                        const std::vector<std::string>& b) {
    std::map<std::pair<std::string, std::string>, double> f;
    for (size_t i = 0; i < a.size(); ++i) f[{a[i], b[i]}] += 1.0;
    for (auto& [_, c] : f) c /= static_cast<double>(a.size());
    return f;
  };
  const auto fr = joint(real_a, real_b);
  const auto fs = joint(synth_a, synth_b);
  double sum = 0.0;
  for (const auto& [k, p] : fr) {
    auto it = fs.find(k);
    sum += std::abs(p - (it == fs.end() ? 0.0 : it->second));
  }
  for (const auto& [k, p] : fs)
    if (!fr.count(k)) sum += p;
  return 0.5 * sum;
}

// ---------------------------------------------------------------------------
// Table-level scores
// ---------------------------------------------------------------------------

namespace detail {

inline void check_same_schema(const TableData& a, const TableData& b, const char* op) {
  require(a.schema.columns.size() == b.schema.columns.size(), ErrorKind::metric,
          std::string(op) + ": column count mismatch");
  for (size_t c = 0; c < a.schema.columns.size(); ++c)
    require(a.schema.columns[c].name == b.schema.columns[c].name &&
                a.schema.columns[c].kind == b.schema.columns[c].kind,
            ErrorKind::metric,
            std::string(op) + ": schema mismatch at column \"" +
                a.schema.columns[c].name + "\"");
}

// Linear-interpolated sample quantile of a sorted vector.
inline double sorted_quantile(const std::vector<double>& s, double p) {
  const double pos = p * static_cast<double>(s.size() - 1);
  const size_t lo = std::min(static_cast<size_t>(pos), s.size() - 2);
  const double t = pos - static_cast<double>(lo);
  return s[lo] + t * (s[lo + 1] - s[lo]);
}

// Quartile bin labels with edges fitted on the real column.
inline std::vector<std::string> quartile_bins(const std::vector<double>& values,
                                              const std::array<double, 3>& edges) {
  std::vector<std::string> out;
  out.reserve(values.size());
  for (double v : values) {
    int bin = 0;
    for (double e : edges)
      if (v > e) ++bin;
    out.push_back("q" + std::to_string(bin));
  }
  return out;
}

inline std::array<double, 3> quartile_edges(std::vector<double> values) {
  require(values.size() >= 2, ErrorKind::metric, "quartiles: need >= 2 values");
  std::sort(values.begin(), values.end());
  return {sorted_quantile(values, 0.25), sorted_quantile(values, 0.5),
          sorted_quantile(values, 0.75)};
}

inline bool is_constant(const std::vector<double>& v) {
  for (double x : v)
    if (x != v.front()) return false;
  return true;
}

}  // namespace detail

struct ColumnShape {
  std::string name;
  std::string kind;  // "kst" or "tvd"
  double score = 0.0;
};

struct ShapeResult {
  double percent = 0.0;
  std::vector<ColumnShape> columns;
};

// 100 x mean over columns of KST (numerical) / TVD (categorical).
inline ShapeResult shape_score(const TableData& real, const TableData& synth) {
  detail::check_same_schema(real, synth, "shape");
  ShapeResult res;
  double sum = 0.0;
  for (size_t c = 0; c < real.n_cols(); ++c) {
    ColumnShape col;
    col.name = real.schema.columns[c].name;
    if (real.schema.columns[c].kind == ColKind::numerical) {
      col.kind = "kst";
      col.score = kst(real.num[c], synth.num[c]);
    } else {
      col.kind = "tvd";
      col.score = tvd(real.cat[c], synth.cat[c]);
    }
    sum += col.score;
    res.columns.push_back(std::move(col));
  }
  res.percent = 100.0 * sum / static_cast<double>(real.n_cols());
  return res;
}

struct PairTrend {
  std::string a, b;
  std::string kind;  // "pearson", "contingency", "binned_contingency"
  double score = 0.0;
};

struct TrendResult {
  double percent = 0.0;
  std::vector<PairTrend> pairs;
  std::vector<std::string> skipped;  // "a|b: reason"
};

// Mean over unordered column pairs: num/num -> half the absolute Pearson
// gap, cat/cat -> contingency TVD, num/cat -> contingency on real-fitted
// quartile bins. Constant numerical columns skip their Pearson pairs.
inline TrendResult trend_score(const TableData& real, const TableData& synth) {
  detail::check_same_schema(real, synth, "trend");
  const size_t nc = real.n_cols();
  require(nc >= 2, ErrorKind::metric, "trend: need at least 2 columns");

  // Bin numerical columns once, on edges fitted from the real table.
  std::vector<std::vector<std::string>> real_bins(nc), synth_bins(nc);
  std::vector<bool> constant(nc, false);
  for (size_t c = 0; c < nc; ++c) {
    if (real.schema.columns[c].kind != ColKind::numerical) continue;
    constant[c] = detail::is_constant(real.num[c]) || detail::is_constant(synth.num[c]);
    const auto edges = detail::quartile_edges(real.num[c]);
    real_bins[c] = detail::quartile_bins(real.num[c], edges);
    synth_bins[c] = detail::quartile_bins(synth.num[c], edges);
  }

  TrendResult res;
  double sum = 0.0;
  for (size_t i = 0; i < nc; ++i) {
    for (size_t j = i + 1; j < nc; ++j) {
      const bool ni = real.schema.columns[i].kind == ColKind::numerical;
      const bool nj = real.schema.columns[j].kind == ColKind::numerical;
      PairTrend pair;
      pair.a = real.schema.columns[i].name;
      pair.b = real.schema.columns[j].name;
      if (ni && nj) {
        if (constant[i] || constant[j]) {
          res.skipped.push_back(pair.a + "|" + pair.b + ": constant column");
          continue;
        }
        pair.kind = "pearson";
        pair.score = 0.5 * std::abs(pearson(real.num[i], real.num[j]) -
                                    pearson(synth.num[i], synth.num[j]));
      } else if (!ni && !nj) {
        pair.kind = "contingency";
        pair.score = contingency_similarity(real.cat[i], real.cat[j],
                                            synth.cat[i], synth.cat[j]);
      } else {
        const auto& ra = ni ? real_bins[i] : real.cat[i];
        const auto& rb = nj ? real_bins[j] : real.cat[j];
        const auto& sa = ni ? synth_bins[i] : synth.cat[i];
        const auto& sb = nj ? synth_bins[j] : synth.cat[j];
        pair.kind = "binned_contingency";
        pair.score = contingency_similarity(ra, rb, sa, sb);
      }
      sum += pair.score;
      res.pairs.push_back(std::move(pair));
    }
  }
  require(!res.pairs.empty(), ErrorKind::metric, "trend: no scorable column pairs");
  res.percent = 100.0 * sum / static_cast<double>(res.pairs.size());
  return res;
}

// ---------------------------------------------------------------------------
// C2ST detection score
// ---------------------------------------------------------------------------

inline constexpr double kC2stL2 = 1e-3;
inline constexpr int kC2stFolds = 5;

inline TableData concat_tables(const TableData& a, const TableData& b) {
  detail::check_same_schema(a, b, "concat");
  TableData out = a;
  out.n_rows = a.n_rows + b.n_rows;
  for (size_t c = 0; c < a.n_cols(); ++c) {
    if (a.schema.columns[c].kind == ColKind::numerical)
      out.num[c].insert(out.num[c].end(), b.num[c].begin(), b.num[c].end());
    else
      out.cat[c].insert(out.cat[c].end(), b.cat[c].begin(), b.cat[c].end());
  }
  return out;
}

// Real-vs-synthetic detectability: label rows real=0 / synth=1, encode with
// a preprocess state fitted on the union, and score a 5-fold cross-validated
// logistic regression by pooled out-of-fold ROC-AUC A. Returns
// clamp(2(1 - A), 0, 1): 1 = indistinguishable, 0 = perfectly detectable.
inline double c2st(const TableData& real, const TableData& synth, uint64_t seed) {
  detail::check_same_schema(real, synth, "c2st");
  require(real.n_rows >= 20 && synth.n_rows >= 20, ErrorKind::metric,
          "c2st: need at least 20 rows per table");

  const TableData united = concat_tables(real, synth);
  const PreprocessState st = fit_preprocess(united);
  const Matrix x_all = Standardizer::fit(encode(united, st)).apply(encode(united, st));
  std::vector<int> y(united.n_rows, 0);
  for (size_t r = real.n_rows; r < united.n_rows; ++r) y[r] = 1;

  // Shuffled fold assignment from the derived stream.
  std::vector<size_t> perm(united.n_rows);
  std::iota(perm.begin(), perm.end(), size_t{0});
  Rng rng(derive_seed(seed, "c2st-folds"));
  for (size_t i = perm.size() - 1; i > 0; --i)
    std::swap(perm[i], perm[static_cast<size_t>(rng.below(i + 1))]);
  std::vector<int> fold(united.n_rows);
  for (size_t k = 0; k < perm.size(); ++k)
    fold[perm[k]] = static_cast<int>(k % kC2stFolds);

  std::vector<double> pooled_scores;
  std::vector<int> pooled_labels;
  pooled_scores.reserve(united.n_rows);
  pooled_labels.reserve(united.n_rows);
  for (int f = 0; f < kC2stFolds; ++f) {
    std::vector<size_t> train_rows, test_rows;
    for (size_t r = 0; r < united.n_rows; ++r)
      (fold[r] == f ? test_rows : train_rows).push_back(r);
    require(!test_rows.empty(), ErrorKind::metric, "c2st: empty fold");

    Matrix xt(static_cast<int>(train_rows.size()), x_all.cols());
    std::vector<int> yt(train_rows.size());
    bool has0 = false, has1 = false;
    for (size_t k = 0; k < train_rows.size(); ++k) {
      const double* src = x_all.row(static_cast<int>(train_rows[k]));
      double* dst = xt.row(static_cast<int>(k));
      for (int c = 0; c < x_all.cols(); ++c) dst[c] = src[c];
      yt[k] = y[train_rows[k]];
      (yt[k] == 0 ? has0 : has1) = true;
    }
    require(has0 && has1, ErrorKind::metric, "c2st: fold with a single class");

    const LinearModel model = fit_logistic(xt, yt, kC2stL2);
    for (size_t r : test_rows) {
      pooled_scores.push_back(model.raw(x_all.row(static_cast<int>(r))));
      pooled_labels.push_back(y[r]);
    }
  }
  const double auc = auc_score(pooled_scores, pooled_labels);
  return std::clamp(2.0 * (1.0 - auc), 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Machine-learning efficiency
// ---------------------------------------------------------------------------

struct MleResult {
  std::string metric;  // "auc" or "rmse"
  double mean = 0.0;
  double std_dev = 0.0;
  std::vector<double> scores;  // one per repeat
};

inline constexpr std::array<double, 5> kMleL2Grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};

namespace detail {

// Feature codec for the downstream model: raw numericals plus one-hot
// categoricals, vocabularies over all three tables so evaluation rows
// always encode.
struct MleFeatures {
  const TableSchema* schema = nullptr;
  size_t target = 0;
  std::vector<CategoryVocab> vocabs;  // per column, categorical non-target only
  size_t dim = 0;

  static MleFeatures fit(const TableData& a, const TableData& b, const TableData& c) {
    MleFeatures f;
    f.schema = &a.schema;
    f.target = a.schema.target_index();
    f.vocabs.resize(a.schema.columns.size());
    for (size_t col = 0; col < a.schema.columns.size(); ++col) {
      if (col == f.target) continue;
      if (a.schema.columns[col].kind == ColKind::numerical) {
        f.dim += 1;
        continue;
      }
      std::vector<std::string> all = a.cat[col];
      all.insert(all.end(), b.cat[col].begin(), b.cat[col].end());
      all.insert(all.end(), c.cat[col].begin(), c.cat[col].end());
      f.vocabs[col] = fit_vocab(all);
      f.dim += f.vocabs[col].size();
    }
    return f;
  }

  Matrix encode(const TableData& t) const {
    Matrix x(static_cast<int>(t.n_rows), static_cast<int>(dim));
    for (size_t r = 0; r < t.n_rows; ++r) {
      size_t off = 0;
      double* row = x.row(static_cast<int>(r));
      for (size_t col = 0; col < t.schema.columns.size(); ++col) {
        if (col == target) continue;
        if (t.schema.columns[col].kind == ColKind::numerical) {
          row[off++] = t.num[col][r];
        } else {
          const int k = vocabs[col].index_of(t.cat[col][r]);
          require(k >= 0, ErrorKind::metric,
                  "mle: category \"" + t.cat[col][r] + "\" outside the fitted union");
          row[off + static_cast<size_t>(k)] = 1.0;
          off += vocabs[col].size();
        }
      }
    }
    return x;
  }
};

inline TableData bootstrap_rows(const TableData& t, Rng& rng) {
  std::vector<size_t> idx(t.n_rows);
  for (size_t i = 0; i < t.n_rows; ++i)
    idx[i] = static_cast<size_t>(rng.below(t.n_rows));
  return t.take_rows(idx);
}

}  // namespace detail

// Downstream-task transfer: train on (a bootstrap of) the synthetic table,
// pick the ridge/logistic regularization on the real validation split, and
// report AUC (classification) or RMSE (regression) on the real test split,
// repeated over derived seeds.
inline MleResult mle(const TableData& synth_train, const TableData& real_val,
                     const TableData& real_test, int repeats, uint64_t seed) {
  detail::check_same_schema(synth_train, real_val, "mle");
  detail::check_same_schema(synth_train, real_test, "mle");
  require(repeats >= 1, ErrorKind::config, "mle: repeats must be >= 1");
  require(synth_train.n_rows >= 2, ErrorKind::metric, "mle: synthetic table too small");

  const auto feats =
      detail::MleFeatures::fit(synth_train, real_val, real_test);
  const size_t target = feats.target;
  const bool classify = synth_train.schema.task == Task::classification;

  MleResult res;
  res.metric = classify ? "auc" : "rmse";

  // Classification targets become 0/1 against a vocabulary over all tables;
  // the lexicographically larger category is the positive class.
  CategoryVocab target_vocab;
  if (classify) {
    std::vector<std::string> all = synth_train.cat[target];
    all.insert(all.end(), real_val.cat[target].begin(), real_val.cat[target].end());
    all.insert(all.end(), real_test.cat[target].begin(), real_test.cat[target].end());
    target_vocab = fit_vocab(all);
    require(target_vocab.size() == 2, ErrorKind::metric,
            "mle: classification needs a binary target, got " +
                std::to_string(target_vocab.size()) + " classes");
    bool has0 = false, has1 = false;
    for (const auto& s : synth_train.cat[target])
      (s == target_vocab.cats[0] ? has0 : has1) = true;
    require(has0 && has1, ErrorKind::metric,
            "mle: synthetic target column has a single class");
  }

  const auto labels_of = [&](const TableData& t) {
    std::vector<int> y(t.n_rows);
    for (size_t r = 0; r < t.n_rows; ++r)
      y[r] = t.cat[target][r] == target_vocab.cats[1] ? 1 : 0;
    return y;
  };
  const auto targets_of = [&](const TableData& t) { return t.num[target]; };

  const Matrix x_val_raw = feats.encode(real_val);
  const Matrix x_test_raw = feats.encode(real_test);

  for (int rep = 0; rep < repeats; ++rep) {
    Rng rng(derive_seed(seed, "mle-repeat", static_cast<uint64_t>(rep)));
    TableData boot = detail::bootstrap_rows(synth_train, rng);
    if (classify) {
      // Redraw if the bootstrap lost a class; bounded and deterministic.
      for (int attempt = 0; attempt < 100; ++attempt) {
        const auto y = labels_of(boot);
        if (std::count(y.begin(), y.end(), 1) > 0 &&
            std::count(y.begin(), y.end(), 0) > 0)
          break;
        boot = detail::bootstrap_rows(synth_train, rng);
      }
    }

    const Matrix x_boot_raw = feats.encode(boot);
    const Standardizer sc = Standardizer::fit(x_boot_raw);
    const Matrix x_boot = sc.apply(x_boot_raw);
    const Matrix x_val = sc.apply(x_val_raw);
    const Matrix x_test = sc.apply(x_test_raw);

    double best_val = classify ? -1.0 : std::numeric_limits<double>::infinity();
    double test_score = 0.0;
    for (double l2 : kMleL2Grid) {
      if (classify) {
        const LinearModel model = fit_logistic(x_boot, labels_of(boot), l2);
        const double val = auc_score(model.decision(x_val), labels_of(real_val));
        if (val > best_val) {
          best_val = val;
          test_score = auc_score(model.decision(x_test), labels_of(real_test));
        }
      } else {
        const LinearModel model = fit_ridge(x_boot, targets_of(boot), l2);
        const double val = rmse(model.decision(x_val), targets_of(real_val));
        if (val < best_val) {
          best_val = val;
          test_score = rmse(model.decision(x_test), targets_of(real_test));
        }
      }
    }
    res.scores.push_back(test_score);
  }

  const double n = static_cast<double>(res.scores.size());
  res.mean = std::accumulate(res.scores.begin(), res.scores.end(), 0.0) / n;
  if (res.scores.size() > 1) {
    double ss = 0.0;
    for (double s : res.scores) ss += (s - res.mean) * (s - res.mean);
    res.std_dev = std::sqrt(ss / (n - 1.0));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

inline constexpr int kReportVersion = 1;

struct MetricsReport {
  int version = kReportVersion;
  ShapeResult shape;
  TrendResult trend;
  double c2st_score = 0.0;
  bool has_mle = false;
  MleResult mle;

  nlohmann::json to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : shape.columns)
      cols.push_back({{"name", c.name}, {"kind", c.kind}, {"score", c.score}});
    nlohmann::json pairs = nlohmann::json::array();
    for (const auto& p : trend.pairs)
      pairs.push_back({{"a", p.a}, {"b", p.b}, {"kind", p.kind}, {"score", p.score}});
    nlohmann::json j = {
        {"version", version},
        {"shape", {{"percent", shape.percent}, {"columns", cols}}},
        {"trend",
         {{"percent", trend.percent}, {"pairs", pairs}, {"skipped", trend.skipped}}},
        {"c2st", c2st_score},
    };
    if (has_mle)
      j["mle"] = {{"metric", mle.metric},
                  {"mean", mle.mean},
                  {"std", mle.std_dev},
                  {"repeats", mle.scores.size()},
                  {"scores", mle.scores}};
    return j;
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.version = j.at("version").get<int>();
    require(r.version <= kReportVersion, ErrorKind::format,
            "report: version " + std::to_string(r.version) +
                " newer than supported " + std::to_string(kReportVersion));
    r.shape.percent = j.at("shape").at("percent").get<double>();
    for (const auto& jc : j.at("shape").at("columns"))
      r.shape.columns.push_back({jc.at("name").get<std::string>(),
                                 jc.at("kind").get<std::string>(),
                                 jc.at("score").get<double>()});
    r.trend.percent = j.at("trend").at("percent").get<double>();
    for (const auto& jp : j.at("trend").at("pairs"))
      r.trend.pairs.push_back({jp.at("a").get<std::string>(),
                               jp.at("b").get<std::string>(),
                               jp.at("kind").get<std::string>(),
                               jp.at("score").get<double>()});
    r.trend.skipped = j.at("trend").at("skipped").get<std::vector<std::string>>();
    r.c2st_score = j.at("c2st").get<double>();
    if (j.contains("mle")) {
      r.has_mle = true;
      r.mle.metric = j.at("mle").at("metric").get<std::string>();
      r.mle.mean = j.at("mle").at("mean").get<double>();
      r.mle.std_dev = j.at("mle").at("std").get<double>();
      r.mle.scores = j.at("mle").at("scores").get<std::vector<double>>();
    }
    return r;
  }
};

// Shape/Trend/C2ST against `real`; MLE trains on synth and scores against
// the provided real validation/test splits when given.
inline MetricsReport compute_report(const TableData& real, const TableData& synth,
                                    uint64_t seed, const TableData* mle_val = nullptr,
                                    const TableData* mle_test = nullptr,
                                    int mle_repeats = 20) {
  MetricsReport report;
  report.shape = shape_score(real, synth);
  report.trend = trend_score(real, synth);
  report.c2st_score = c2st(real, synth, seed);
  if (mle_val && mle_test) {
    report.has_mle = true;
    report.mle = mle(synth, *mle_val, *mle_test, mle_repeats, derive_seed(seed, "mle"));
  }
  return report;
}

}  // namespace rectflow
