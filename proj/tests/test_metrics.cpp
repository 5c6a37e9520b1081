#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/error.hpp"
#include "rectflow/metrics.hpp"
#include "rectflow/rng.hpp"
#include "rectflow/table.hpp"

using namespace rectflow;
using Catch::Matchers::WithinAbs;

namespace {

// Naive KS: evaluate both ECDFs at every sample point of either side.
double kst_brute(const std::vector<double>& real, const std::vector<double>& synth) {
  const auto cdf = [](const std::vector<double>& v, double x) {
    double c = 0.0;
    for (double u : v) c += u <= x ? 1.0 : 0.0;
    return c / static_cast<double>(v.size());
  };
  double sup = 0.0;
  for (const auto* side : {&real, &synth})
    for (double x : *side)
      sup = std::max(sup, std::abs(cdf(real, x) - cdf(synth, x)));
  return sup;
}

TableData two_col_table(std::vector<double> nums, std::vector<std::string> cats) {
  TableData t;
  t.schema.task = Task::classification;
  t.schema.target = "c";
  t.schema.columns = {{"x", ColKind::numerical}, {"c", ColKind::categorical}};
  t.n_rows = nums.size();
  t.num = {std::move(nums), {}};
  t.cat = {{}, std::move(cats)};
  return t;
}

// x, y numericals; c, label categoricals; label depends on x + y.
TableData sample_table(size_t n, uint64_t seed, double x_shift = 0.0) {
  TableData t;
  t.schema.task = Task::classification;
  t.schema.target = "label";
  t.schema.columns = {{"x", ColKind::numerical},
                      {"y", ColKind::numerical},
                      {"c", ColKind::categorical},
                      {"label", ColKind::categorical}};
  t.num.resize(4);
  t.cat.resize(4);
  t.n_rows = n;
  Rng rng(seed);
  const char* cs[] = {"u", "v", "w"};
  for (size_t i = 0; i < n; ++i) {
    const double x = rng.normal() + x_shift;
    const double y = 0.6 * x + 0.8 * rng.normal();
    t.num[0].push_back(x);
    t.num[1].push_back(y);
    t.cat[2].push_back(cs[rng.below(3)]);
    t.cat[3].push_back(x + y > 0.0 ? "pos" : "neg");
  }
  return t;
}

}  // namespace

// ---------------------------------------------------------------------------
// Column statistics
// ---------------------------------------------------------------------------

TEST_CASE("kst matches hand values") {
  REQUIRE(kst({1, 2, 3}, {1, 2, 3}) == 0.0);
  REQUIRE(kst({0, 1}, {5, 6}) == 1.0);
  REQUIRE(kst({0, 1, 2, 3}, {2, 3, 4, 5}) == 0.5);
  REQUIRE_THAT(kst({0, 0, 1}, {0, 1}), WithinAbs(1.0 / 6.0, 1e-12));
  REQUIRE_THROWS_AS(kst({}, {1.0}), Error);
}

TEST_CASE("kst agrees with the brute-force definition on random multisets") {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(1 + rng.below(8)), b(1 + rng.below(8));
    for (double& v : a) v = static_cast<double>(rng.below(4));
    for (double& v : b) v = static_cast<double>(rng.below(4));
    REQUIRE_THAT(kst(a, b), WithinAbs(kst_brute(a, b), 1e-12));
  }
}

TEST_CASE("tvd matches hand values") {
  REQUIRE(tvd({"a", "b"}, {"a", "b"}) == 0.0);
  REQUIRE(tvd({"a", "a"}, {"b", "b"}) == 1.0);
  REQUIRE_THAT(tvd({"a", "a"}, {"a", "b"}), WithinAbs(0.5, 1e-12));
  REQUIRE_THAT(tvd({"a", "a", "b", "b"}, {"a", "b", "b", "b"}), WithinAbs(0.25, 1e-12));
  REQUIRE_THROWS_AS(tvd({}, {"a"}), Error);
}

TEST_CASE("tvd is symmetric and bounded") {
  Rng rng(2);
  const char* words[] = {"p", "q", "r", "s"};
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> a(1 + rng.below(8)), b(1 + rng.below(8));
    for (auto& v : a) v = words[rng.below(4)];
    for (auto& v : b) v = words[rng.below(4)];
    const double d = tvd(a, b);
    REQUIRE(d >= 0.0);
    REQUIRE(d <= 1.0);
    REQUIRE_THAT(d, WithinAbs(tvd(b, a), 1e-12));
  }
}

TEST_CASE("pearson matches hand values and rejects constants") {
  REQUIRE_THAT(pearson({1, 2, 3}, {2, 4, 6}), WithinAbs(1.0, 1e-12));
  REQUIRE_THAT(pearson({1, 2, 3}, {3, 2, 1}), WithinAbs(-1.0, 1e-12));
  REQUIRE_THAT(pearson({1, 2, 3}, {1, 3, 2}), WithinAbs(0.5, 1e-12));
  REQUIRE_THROWS_AS(pearson({1, 1, 1}, {1, 2, 3}), Error);
  REQUIRE_THROWS_AS(pearson({1, 2}, {1}), Error);
}

TEST_CASE("contingency similarity matches hand values") {
  REQUIRE(contingency_similarity({"a", "a"}, {"x", "x"}, {"a", "a"}, {"x", "x"}) == 0.0);
  REQUIRE_THAT(contingency_similarity({"a", "a"}, {"x", "x"}, {"a", "b"}, {"x", "y"}),
               WithinAbs(0.5, 1e-12));
  // same marginals, opposite pairing -> fully different joints
  REQUIRE_THAT(contingency_similarity({"a", "a", "b", "b"}, {"x", "x", "y", "y"},
                                      {"a", "a", "b", "b"}, {"y", "y", "x", "x"}),
               WithinAbs(1.0, 1e-12));
}

TEST_CASE("contingency with a shared constant side reduces to tvd") {
  Rng rng(3);
  const char* words[] = {"p", "q", "r"};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::string> a(2 + rng.below(6)), b(2 + rng.below(6));
    for (auto& v : a) v = words[rng.below(3)];
    for (auto& v : b) v = words[rng.below(3)];
    const std::vector<std::string> const_a(a.size(), "k");
    const std::vector<std::string> const_b(b.size(), "k");
    REQUIRE_THAT(contingency_similarity(a, const_a, b, const_b),
                 WithinAbs(tvd(a, b), 1e-12));
  }
}

TEST_CASE("contingency is symmetric in the real/synthetic roles") {
  const std::vector<std::string> a1 = {"a", "b", "a", "c"}, b1 = {"x", "x", "y", "y"};
  const std::vector<std::string> a2 = {"a", "a", "c", "c"}, b2 = {"y", "x", "y", "x"};
  REQUIRE_THAT(contingency_similarity(a1, b1, a2, b2),
               WithinAbs(contingency_similarity(a2, b2, a1, b1), 1e-12));
}

// ---------------------------------------------------------------------------
// Shape
// ---------------------------------------------------------------------------

TEST_CASE("shape score averages per-column divergences into a percentage") {
  const TableData real = two_col_table({1, 2, 3, 4, 5}, {"a", "a", "a", "a", "a"});
  const TableData synth = two_col_table({1, 2, 3, 4, 10}, {"a", "a", "b", "b", "b"});
  const ShapeResult res = shape_score(real, synth);
  // kst = 0.2 (one of five points moved), tvd = 0.6 -> mean 0.4 -> 40%
  REQUIRE_THAT(res.percent, WithinAbs(40.0, 1e-9));
  REQUIRE(res.columns.size() == 2);
  REQUIRE(res.columns[0].name == "x");
  REQUIRE(res.columns[0].kind == "kst");
  REQUIRE_THAT(res.columns[0].score, WithinAbs(0.2, 1e-12));
  REQUIRE(res.columns[1].kind == "tvd");
  REQUIRE_THAT(res.columns[1].score, WithinAbs(0.6, 1e-12));
}

TEST_CASE("shape score of a table against itself is zero") {
  const TableData t = sample_table(300, 4);
  REQUIRE(shape_score(t, t).percent == 0.0);
}

TEST_CASE("shape score rejects mismatched schemas") {
  const TableData a = two_col_table({1}, {"a"});
  TableData b = a;
  b.schema.columns[0].name = "renamed";
  REQUIRE_THROWS_AS(shape_score(a, b), Error);
}

// ---------------------------------------------------------------------------
// Trend
// ---------------------------------------------------------------------------

namespace {

TableData three_col_table(std::vector<double> x, std::vector<double> y,
                          std::vector<std::string> label) {
  TableData t;
  t.schema.task = Task::classification;
  t.schema.target = "label";
  t.schema.columns = {{"x", ColKind::numerical},
                      {"y", ColKind::numerical},
                      {"label", ColKind::categorical}};
  t.n_rows = x.size();
  t.num = {std::move(x), std::move(y), {}};
  t.cat = {{}, {}, std::move(label)};
  return t;
}

}  // namespace

TEST_CASE("opposite correlations give a pair score of one") {
  const auto make = [](std::vector<double> y) {
    TableData t;
    t.schema.task = Task::regression;
    t.schema.target = "y";
    t.schema.columns = {{"x", ColKind::numerical}, {"y", ColKind::numerical}};
    t.n_rows = y.size();
    t.num = {{1, 2, 3, 4}, std::move(y)};
    t.cat.resize(2);
    return t;
  };
  const TableData real = make({1, 2, 3, 4});
  const TableData synth = make({4, 3, 2, 1});
  const TrendResult res = trend_score(real, synth);
  REQUIRE(res.pairs.size() == 1);
  REQUIRE(res.pairs[0].kind == "pearson");
  // |corr(real) - corr(synth)| / 2 = |1 - (-1)| / 2 = 1
  REQUIRE_THAT(res.percent, WithinAbs(100.0, 1e-9));
}

TEST_CASE("trend of a table against itself is zero and covers every pair") {
  const TableData t = sample_table(200, 5);
  const TrendResult res = trend_score(t, t);
  REQUIRE_THAT(res.percent, WithinAbs(0.0, 1e-9));
  // 4 columns -> 6 unordered pairs, target included
  REQUIRE(res.pairs.size() == 6);
  bool has_target_pair = false;
  for (const auto& p : res.pairs)
    has_target_pair |= p.a == "label" || p.b == "label";
  REQUIRE(has_target_pair);
}

TEST_CASE("trend pairs numerical with categorical through real-fitted quartiles") {
  const TableData real = three_col_table({1, 2, 3, 4}, {0, 0, 0, 0}, {"a", "a", "b", "b"});
  TableData synth = real;
  synth.num[0] = {4, 3, 2, 1};  // reverses the bin-label pairing
  // y is constant in both: its numerical pairs are skipped
  const TrendResult res = trend_score(real, synth);
  REQUIRE(res.skipped.size() == 1);  // x|y
  REQUIRE(res.pairs.size() == 2);    // x|label binned, y|label binned
  for (const auto& p : res.pairs) {
    if (p.a == "x" && p.b == "label") {
      REQUIRE(p.kind == "binned_contingency");
      REQUIRE_THAT(p.score, WithinAbs(1.0, 1e-12));  // joints fully swapped
    }
    if (p.a == "y" && p.b == "label") {
      REQUIRE_THAT(p.score, WithinAbs(0.0, 1e-12));  // constant bins match
    }
  }
}

TEST_CASE("trend skips constant numerical pairs and reports them") {
  const TableData real = three_col_table({1, 1, 1, 1}, {1, 2, 3, 4}, {"a", "a", "b", "b"});
  const TrendResult res = trend_score(real, real);
  REQUIRE(res.skipped == std::vector<std::string>{"x|y: constant column"});
  REQUIRE(res.pairs.size() == 2);
}

TEST_CASE("trend with no scorable pair is an error") {
  TableData real = two_col_table({1, 1, 1}, {"a", "a", "a"});
  real.schema.columns[1].kind = ColKind::numerical;
  real.num[1] = {2, 2, 2};
  real.cat[1] = {};
  REQUIRE_THROWS_AS(trend_score(real, real), Error);
}

TEST_CASE("trend is invariant to row order") {
  const TableData real = sample_table(150, 6);
  TableData synth = sample_table(150, 7);
  const TrendResult a = trend_score(real, synth);

  std::vector<size_t> idx(synth.n_rows);
  std::iota(idx.begin(), idx.end(), size_t{0});
  Rng rng(8);
  for (size_t i = idx.size() - 1; i > 0; --i)
    std::swap(idx[i], idx[static_cast<size_t>(rng.below(i + 1))]);
  const TrendResult b = trend_score(real, synth.take_rows(idx));
  REQUIRE_THAT(a.percent, WithinAbs(b.percent, 1e-9));
}

// ---------------------------------------------------------------------------
// C2ST
// ---------------------------------------------------------------------------

TEST_CASE("two halves of one distribution are near-indistinguishable") {
  const TableData real = sample_table(2000, 10);
  const TableData synth = sample_table(2000, 11);
  REQUIRE(c2st(real, synth, 1) >= 0.9);
}

TEST_CASE("a shifted numerical column is fully detectable") {
  const TableData real = sample_table(400, 12);
  const TableData synth = sample_table(400, 13, 8.0);
  REQUIRE(c2st(real, synth, 2) <= 0.05);
}

TEST_CASE("a swapped constant category is fully detectable") {
  std::vector<double> nums(100);
  Rng rng(14);
  for (double& v : nums) v = rng.normal();
  const TableData real = two_col_table(nums, std::vector<std::string>(100, "a"));
  for (double& v : nums) v = rng.normal();
  const TableData synth = two_col_table(nums, std::vector<std::string>(100, "b"));
  REQUIRE(c2st(real, synth, 3) <= 0.05);
}

TEST_CASE("c2st does not care about affine feature scaling") {
  const TableData real = sample_table(300, 15);
  const TableData synth = sample_table(300, 16);
  TableData real_scaled = real, synth_scaled = synth;
  for (auto* t : {&real_scaled, &synth_scaled})
    for (double& v : t->num[0]) v = 1000.0 * v + 500.0;
  const double a = c2st(real, synth, 4);
  const double b = c2st(real_scaled, synth_scaled, 4);
  REQUIRE_THAT(a, WithinAbs(b, 0.02));
}

TEST_CASE("c2st is deterministic in the seed and needs enough rows") {
  const TableData real = sample_table(60, 17);
  const TableData synth = sample_table(60, 18);
  REQUIRE(c2st(real, synth, 5) == c2st(real, synth, 5));
  REQUIRE_THROWS_AS(c2st(sample_table(10, 19), synth, 5), Error);
}

// ---------------------------------------------------------------------------
// Machine-learning efficiency
// ---------------------------------------------------------------------------

TEST_CASE("a faithful synthetic table transfers its classifier") {
  const TableData synth_train = sample_table(600, 20);
  const TableData real_val = sample_table(200, 21);
  const TableData real_test = sample_table(200, 22);
  const MleResult res = mle(synth_train, real_val, real_test, 5, 1);
  REQUIRE(res.metric == "auc");
  REQUIRE(res.scores.size() == 5);
  REQUIRE(res.mean > 0.95);
  REQUIRE(res.std_dev >= 0.0);
}

TEST_CASE("regression tasks report RMSE on the real test split") {
  const auto make = [](size_t n, uint64_t seed) {
    TableData t;
    t.schema.task = Task::regression;
    t.schema.target = "y";
    t.schema.columns = {{"x", ColKind::numerical}, {"y", ColKind::numerical}};
    t.num.resize(2);
    t.cat.resize(2);
    t.n_rows = n;
    Rng rng(seed);
    for (size_t i = 0; i < n; ++i) {
      const double x = rng.normal();
      t.num[0].push_back(x);
      t.num[1].push_back(3.0 * x + 1.0);  // exactly linear
    }
    return t;
  };
  const MleResult res = mle(make(400, 23), make(100, 24), make(100, 25), 3, 2);
  REQUIRE(res.metric == "rmse");
  REQUIRE(res.scores.size() == 3);
  REQUIRE(res.mean < 0.05);
}

TEST_CASE("mle is deterministic in the seed") {
  const TableData synth_train = sample_table(200, 26);
  const TableData real_val = sample_table(80, 27);
  const TableData real_test = sample_table(80, 28);
  const MleResult a = mle(synth_train, real_val, real_test, 4, 3);
  const MleResult b = mle(synth_train, real_val, real_test, 4, 3);
  REQUIRE(a.scores == b.scores);
}

TEST_CASE("mle rejects degenerate targets") {
  TableData synth = sample_table(100, 29);
  const TableData val = sample_table(50, 30);
  const TableData test = sample_table(50, 31);
  for (auto& s : synth.cat[3]) s = "pos";  // single-class synthetic target
  REQUIRE_THROWS_AS(mle(synth, val, test, 2, 4), Error);

  TableData three = sample_table(100, 32);
  three.cat[3][0] = "third-class";
  REQUIRE_THROWS_AS(mle(three, val, test, 2, 5), Error);
}

TEST_CASE("evaluation categories missing from the synthetic table still encode") {
  TableData synth = sample_table(200, 33);
  const TableData val = sample_table(80, 34);
  const TableData test = sample_table(80, 35);
  for (auto& s : synth.cat[2]) s = "u";  // synthetic side lost categories v, w
  const MleResult res = mle(synth, val, test, 2, 6);
  REQUIRE(res.scores.size() == 2);
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

TEST_CASE("the metrics report survives a JSON round trip") {
  const TableData real = sample_table(150, 36);
  const TableData synth = sample_table(150, 37);
  const TableData val = sample_table(60, 38);
  const TableData test = sample_table(60, 39);
  const MetricsReport rep = compute_report(real, synth, 7, &val, &test, 3);
  REQUIRE(rep.has_mle);
  REQUIRE(rep.mle.scores.size() == 3);

  const MetricsReport back = MetricsReport::from_json(rep.to_json());
  REQUIRE(back.version == rep.version);
  REQUIRE(back.shape.percent == rep.shape.percent);
  REQUIRE(back.shape.columns.size() == rep.shape.columns.size());
  REQUIRE(back.trend.percent == rep.trend.percent);
  REQUIRE(back.trend.pairs.size() == rep.trend.pairs.size());
  REQUIRE(back.trend.pairs[0].kind == rep.trend.pairs[0].kind);
  REQUIRE(back.c2st_score == rep.c2st_score);
  REQUIRE(back.has_mle);
  REQUIRE(back.mle.metric == rep.mle.metric);
  REQUIRE(back.mle.scores == rep.mle.scores);

  MetricsReport no_mle = rep;
  no_mle.has_mle = false;
  const MetricsReport back2 = MetricsReport::from_json(no_mle.to_json());
  REQUIRE_FALSE(back2.has_mle);
}

TEST_CASE("a report from a newer format version is refused") {
  const TableData real = sample_table(60, 40);
  const TableData synth = sample_table(60, 41);
  nlohmann::json j = compute_report(real, synth, 8).to_json();
  j["version"] = kReportVersion + 1;
  try {
    MetricsReport::from_json(j);
    FAIL("expected an error");
  } catch (const Error& e) {
    REQUIRE(e.kind() == ErrorKind::format);
  }
}
