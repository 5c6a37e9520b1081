#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rectflow/error.hpp"
#include "rectflow/linear.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/rng.hpp"

#include "fd_check.hpp"

using namespace rectflow;
using Catch::Matchers::WithinAbs;
using testutil::random_matrix;

// ---------------------------------------------------------------------------
// Standardizer
// ---------------------------------------------------------------------------

TEST_CASE("standardization centers and scales each feature") {
  Matrix x{{1.0, 10.0}, {3.0, 10.0}, {5.0, 10.0}};
  const Standardizer s = Standardizer::fit(x);
  REQUIRE_THAT(s.mean[0], WithinAbs(3.0, 1e-12));
  REQUIRE(s.mean[1] == 10.0);
  REQUIRE(s.scale[1] == 1.0);  // constant feature keeps scale one

  const Matrix z = s.apply(x);
  double m0 = 0.0, v0 = 0.0;
  for (int r = 0; r < 3; ++r) m0 += z(r, 0);
  REQUIRE_THAT(m0, WithinAbs(0.0, 1e-12));
  for (int r = 0; r < 3; ++r) v0 += z(r, 0) * z(r, 0);
  REQUIRE_THAT(v0 / 3.0, WithinAbs(1.0, 1e-12));
  for (int r = 0; r < 3; ++r) REQUIRE(z(r, 1) == 0.0);
}

TEST_CASE("standardization validates shapes") {
  const Standardizer s = Standardizer::fit(Matrix(3, 2));
  REQUIRE_THROWS_AS(s.apply(Matrix(3, 4)), Error);
  REQUIRE_THROWS_AS(Standardizer::fit(Matrix(0, 2)), Error);
}

// ---------------------------------------------------------------------------
// Logistic regression
// ---------------------------------------------------------------------------

TEST_CASE("logistic fit separates linearly separable data") {
  Rng rng(1);
  const int n = 200;
  Matrix x(n, 2);
  std::vector<int> y(n);
  for (int r = 0; r < n; ++r) {
    const int label = r % 2;
    // margin of at least 2 around zero, so the classes are separable for sure
    x(r, 0) = (label ? 1.0 : -1.0) * (1.0 + std::abs(rng.normal()));
    x(r, 1) = rng.normal();
    y[static_cast<size_t>(r)] = label;
  }
  const LinearModel model = fit_logistic(x, y, 1e-3);
  REQUIRE(auc_score(model.decision(x), y) == 1.0);
  REQUIRE(model.w[0] > 0.0);
}

TEST_CASE("logistic fit lands on a stationary point of the regularized loss") {
  Rng rng(2);
  const int n = 150;
  Matrix x(n, 3);
  std::vector<int> y(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 3; ++c) x(r, c) = rng.normal();
    const double z = 0.8 * x(r, 0) - 0.5 * x(r, 1);
    y[static_cast<size_t>(r)] = rng.uniform() < 1.0 / (1.0 + std::exp(-z)) ? 1 : 0;
  }
  const double l2 = 1e-2;
  const LinearModel model = fit_logistic(x, y, l2);
  std::vector<double> gw;
  double gb = 0.0;
  detail::logistic_loss_grad(x, y, model, l2, gw, gb);
  double gsq = gb * gb;
  for (double g : gw) gsq += g * g;
  REQUIRE(std::sqrt(gsq) < 1e-6);
}

TEST_CASE("labels independent of the features score a chance-level AUC") {
  Rng rng(3);
  const int n = 2000;
  Matrix x(n, 4);
  std::vector<int> y(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < 4; ++c) x(r, c) = rng.normal();
    y[static_cast<size_t>(r)] = rng.uniform() < 0.5 ? 1 : 0;
  }
  // score held-out rows so memorization cannot help
  const int half = n / 2;
  Matrix xa(half, 4), xb(half, 4);
  std::vector<int> ya(half), yb(half);
  for (int r = 0; r < half; ++r) {
    for (int c = 0; c < 4; ++c) {
      xa(r, c) = x(r, c);
      xb(r, c) = x(half + r, c);
    }
    ya[static_cast<size_t>(r)] = y[static_cast<size_t>(r)];
    yb[static_cast<size_t>(r)] = y[static_cast<size_t>(half + r)];
  }
  const LinearModel model = fit_logistic(xa, ya, 1e-3);
  const double auc = auc_score(model.decision(xb), yb);
  REQUIRE(auc > 0.4);
  REQUIRE(auc < 0.6);
}

TEST_CASE("logistic fit requires both classes and valid labels") {
  Matrix x{{1.0}, {2.0}, {3.0}};
  REQUIRE_THROWS_AS(fit_logistic(x, {1, 1, 1}, 1e-3), Error);
  REQUIRE_THROWS_AS(fit_logistic(x, {0, 1, 2}, 1e-3), Error);
  REQUIRE_THROWS_AS(fit_logistic(x, {0, 1}, 1e-3), Error);
  REQUIRE_THROWS_AS(fit_logistic(Matrix{{1.0}}, {1}, 1e-3), Error);
}

// ---------------------------------------------------------------------------
// Ridge regression
// ---------------------------------------------------------------------------

TEST_CASE("ridge with small l2 recovers a noiseless linear relation") {
  Rng rng(4);
  const int n = 100;
  Matrix x(n, 2);
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) {
    x(r, 0) = rng.normal();
    x(r, 1) = rng.normal();
    y[static_cast<size_t>(r)] = 2.0 * x(r, 0) - 0.7 * x(r, 1) + 0.25;
  }
  const LinearModel model = fit_ridge(x, y, 1e-10);
  REQUIRE_THAT(model.w[0], WithinAbs(2.0, 1e-6));
  REQUIRE_THAT(model.w[1], WithinAbs(-0.7, 1e-6));
  REQUIRE_THAT(model.b, WithinAbs(0.25, 1e-6));

  std::vector<double> pred = model.decision(x);
  REQUIRE(rmse(pred, y) < 1e-6);
}

TEST_CASE("huge l2 shrinks ridge weights to zero, leaving the mean") {
  Rng rng(5);
  const int n = 60;
  Matrix x(n, 2);
  std::vector<double> y(n);
  double mean = 0.0;
  for (int r = 0; r < n; ++r) {
    x(r, 0) = rng.normal();
    x(r, 1) = rng.normal();
    y[static_cast<size_t>(r)] = 3.0 * x(r, 0) + 1.0;
    mean += y[static_cast<size_t>(r)];
  }
  mean /= n;
  const LinearModel model = fit_ridge(x, y, 1e9);
  REQUIRE_THAT(model.w[0], WithinAbs(0.0, 1e-6));
  REQUIRE_THAT(model.w[1], WithinAbs(0.0, 1e-6));
  REQUIRE_THAT(model.b, WithinAbs(mean, 1e-4));  // intercept stays unpenalized
}

TEST_CASE("ridge handles duplicated columns thanks to the penalty") {
  Rng rng(6);
  const int n = 50;
  Matrix x(n, 2);
  std::vector<double> y(n);
  for (int r = 0; r < n; ++r) {
    x(r, 0) = rng.normal();
    x(r, 1) = x(r, 0);  // exactly collinear
    y[static_cast<size_t>(r)] = x(r, 0);
  }
  const LinearModel model = fit_ridge(x, y, 1e-4);
  REQUIRE(std::isfinite(model.w[0]));
  REQUIRE(std::isfinite(model.w[1]));
  REQUIRE_THAT(model.w[0], WithinAbs(model.w[1], 1e-8));  // symmetric split
  REQUIRE_THAT(model.w[0] + model.w[1], WithinAbs(1.0, 1e-2));
}

TEST_CASE("ridge validates its inputs") {
  Matrix x{{1.0}, {2.0}};
  REQUIRE_THROWS_AS(fit_ridge(x, {1.0, 2.0}, 0.0), Error);
  REQUIRE_THROWS_AS(fit_ridge(x, {1.0}, 1e-3), Error);
  REQUIRE_THROWS_AS(fit_ridge(Matrix{{1.0}}, {1.0}, 1e-3), Error);
}

// ---------------------------------------------------------------------------
// Ranking metrics
// ---------------------------------------------------------------------------

TEST_CASE("auc matches hand-computed values") {
  // perfect ranking
  REQUIRE(auc_score({0.1, 0.2, 0.8, 0.9}, {0, 0, 1, 1}) == 1.0);
  // perfectly wrong
  REQUIRE(auc_score({0.9, 0.8, 0.2, 0.1}, {0, 0, 1, 1}) == 0.0);
  // one inversion in four pairs: 3/4
  REQUIRE(auc_score({0.1, 0.6, 0.4, 0.9}, {0, 0, 1, 1}) == 0.75);
  // all scores tied: exactly 1/2 by average ranks
  REQUIRE(auc_score({0.5, 0.5, 0.5, 0.5}, {0, 1, 0, 1}) == 0.5);
  // tie across the class boundary counts half
  REQUIRE(auc_score({0.2, 0.5, 0.5}, {0, 0, 1}) == 0.75);
}

TEST_CASE("auc requires both classes") {
  REQUIRE_THROWS_AS(auc_score({0.1, 0.2}, {1, 1}), Error);
  REQUIRE_THROWS_AS(auc_score({}, {}), Error);
}

TEST_CASE("rmse matches a hand value and validates sizes") {
  REQUIRE_THAT(rmse({1.0, 2.0, 3.0}, {1.0, 2.0, 5.0}),
               WithinAbs(std::sqrt(4.0 / 3.0), 1e-12));
  REQUIRE(rmse({1.0}, {1.0}) == 0.0);
  REQUIRE_THROWS_AS(rmse({1.0}, {1.0, 2.0}), Error);
}
