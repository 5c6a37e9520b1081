#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "rectflow/autodiff.hpp"  // sigmoid_stable
#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"

namespace rectflow {

// Per-feature mean/scale fitted on training rows; near-constant features
// get scale 1 so standardization stays a bijection.
struct Standardizer {
  std::vector<double> mean, scale;

  static Standardizer fit(const Matrix& x) {
    require(x.rows() >= 1, ErrorKind::empty_input, "standardize: empty matrix");
    Standardizer s;
    s.mean.assign(static_cast<size_t>(x.cols()), 0.0);
    s.scale.assign(static_cast<size_t>(x.cols()), 1.0);
    const double n = static_cast<double>(x.rows());
    for (int c = 0; c < x.cols(); ++c) {
      double m = 0.0;
      for (int r = 0; r < x.rows(); ++r) m += x(r, c);
      m /= n;
      double var = 0.0;
      for (int r = 0; r < x.rows(); ++r) {
        const double d = x(r, c) - m;
        var += d * d;
      }
      var /= n;
      s.mean[static_cast<size_t>(c)] = m;
      if (var > 1e-24) s.scale[static_cast<size_t>(c)] = std::sqrt(var);
    }
    return s;
  }

  Matrix apply(const Matrix& x) const {
    require(static_cast<size_t>(x.cols()) == mean.size(), ErrorKind::dimension,
            "standardize: feature count mismatch");
    Matrix out = x;
    for (int r = 0; r < out.rows(); ++r) {
      double* row = out.row(r);
      for (int c = 0; c < out.cols(); ++c)
        row[c] = (row[c] - mean[static_cast<size_t>(c)]) / scale[static_cast<size_t>(c)];
    }
    return out;
  }
};

struct LinearModel {
  std::vector<double> w;
  double b = 0.0;

  double raw(const double* row) const {
    double s = b;
    for (size_t j = 0; j < w.size(); ++j) s += w[j] * row[j];
    return s;
  }

  std::vector<double> decision(const Matrix& x) const {
    require(static_cast<size_t>(x.cols()) == w.size(), ErrorKind::dimension,
            "linear: feature count mismatch");
    std::vector<double> out(static_cast<size_t>(x.rows()));
    for (int r = 0; r < x.rows(); ++r) out[static_cast<size_t>(r)] = raw(x.row(r));
    return out;
  }
};

namespace detail {

// Mean logistic loss + (l2/2)||w||^2 with its gradient (bias unpenalized).
inline double logistic_loss_grad(const Matrix& x, const std::vector<int>& y,
                                 const LinearModel& model, double l2,
                                 std::vector<double>& gw, double& gb) {
  const int n = x.rows(), p = x.cols();
  const double inv_n = 1.0 / static_cast<double>(n);
  gw.assign(static_cast<size_t>(p), 0.0);
  gb = 0.0;
  double loss = 0.0;
  for (int r = 0; r < n; ++r) {
    const double* row = x.row(r);
    const double z = model.raw(row);
    const double yr = static_cast<double>(y[static_cast<size_t>(r)]);
    // log(1 + exp(z)) - y z, computed in the stable branch
    loss += (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z))) - yr * z;
    const double resid = ad::detail::sigmoid_stable(z) - yr;
    for (int c = 0; c < p; ++c) gw[static_cast<size_t>(c)] += resid * row[c];
    gb += resid;
  }
  loss *= inv_n;
  gb *= inv_n;
  for (int c = 0; c < p; ++c) {
    gw[static_cast<size_t>(c)] *= inv_n;
    gw[static_cast<size_t>(c)] += l2 * model.w[static_cast<size_t>(c)];
    loss += 0.5 * l2 * model.w[static_cast<size_t>(c)] * model.w[static_cast<size_t>(c)];
  }
  return loss;
}

// Gaussian elimination with partial pivoting; a is destroyed.
inline std::vector<double> solve_dense(std::vector<std::vector<double>> a,
                                       std::vector<double> rhs) {
  const size_t n = rhs.size();
  for (size_t col = 0; col < n; ++col) {
    size_t piv = col;
    for (size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    std::swap(rhs[col], rhs[piv]);
    require(a[col][col] != 0.0, ErrorKind::fit, "linear solve: singular system");
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r][col] / a[col][col];
      if (f == 0.0) continue;
      for (size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (size_t ri = n; ri-- > 0;) {
    double s = rhs[ri];
    for (size_t c = ri + 1; c < n; ++c) s -= a[ri][c] * x[c];
    x[ri] = s / a[ri][ri];
  }
  return x;
}

}  // namespace detail

// Full-batch gradient descent with Armijo backtracking on the regularized
// logistic loss; stops at gradient norm < 1e-6 or 10k iterations.
inline LinearModel fit_logistic(const Matrix& x, const std::vector<int>& y,
                                double l2) {
  require(x.rows() >= 2, ErrorKind::fit, "fit_logistic: need at least 2 rows");
  require(static_cast<size_t>(x.rows()) == y.size(), ErrorKind::dimension,
          "fit_logistic: label count mismatch");
  require(l2 >= 0.0, ErrorKind::config, "fit_logistic: l2 must be >= 0");
  bool has0 = false, has1 = false;
  for (int v : y) {
    require(v == 0 || v == 1, ErrorKind::fit, "fit_logistic: labels must be 0/1");
    (v == 0 ? has0 : has1) = true;
  }
  require(has0 && has1, ErrorKind::fit, "fit_logistic: both classes required");

  LinearModel model;
  model.w.assign(static_cast<size_t>(x.cols()), 0.0);
  std::vector<double> gw;
  double gb = 0.0;
  double loss = detail::logistic_loss_grad(x, y, model, l2, gw, gb);

  const double tol = 1e-6;
  for (int iter = 0; iter < 10000; ++iter) {
    double gsq = gb * gb;
    for (double g : gw) gsq += g * g;
    if (std::sqrt(gsq) < tol) break;

    double step = 4.0;
    LinearModel trial = model;
    std::vector<double> tgw;
    double tgb = 0.0, trial_loss = loss;
    for (int bt = 0; bt < 60; ++bt) {
      for (size_t j = 0; j < model.w.size(); ++j)
        trial.w[j] = model.w[j] - step * gw[j];
      trial.b = model.b - step * gb;
      trial_loss = detail::logistic_loss_grad(x, y, trial, l2, tgw, tgb);
      if (trial_loss <= loss - 1e-4 * step * gsq) break;
      step *= 0.5;
    }
    model = trial;
    loss = trial_loss;
    gw = tgw;
    gb = tgb;
  }
  return model;
}

// Closed-form ridge regression via the normal equations with l2 on the
// weights only; any l2 > 0 guarantees solvability.
inline LinearModel fit_ridge(const Matrix& x, const std::vector<double>& y,
                             double l2) {
  require(x.rows() >= 2, ErrorKind::fit, "fit_ridge: need at least 2 rows");
  require(static_cast<size_t>(x.rows()) == y.size(), ErrorKind::dimension,
          "fit_ridge: target count mismatch");
  require(l2 > 0.0, ErrorKind::config, "fit_ridge: l2 must be > 0");

  const size_t p = static_cast<size_t>(x.cols());
  std::vector<std::vector<double>> a(p + 1, std::vector<double>(p + 1, 0.0));
  std::vector<double> rhs(p + 1, 0.0);
  for (int r = 0; r < x.rows(); ++r) {
    const double* row = x.row(r);
    const double yr = y[static_cast<size_t>(r)];
    for (size_t i = 0; i < p; ++i) {
      for (size_t j = i; j < p; ++j) a[i][j] += row[i] * row[j];
      a[i][p] += row[i];
      rhs[i] += row[i] * yr;
    }
    a[p][p] += 1.0;
    rhs[p] += yr;
  }
  for (size_t i = 0; i < p; ++i) {
    a[i][i] += l2 * static_cast<double>(x.rows());
    for (size_t j = 0; j < i; ++j) a[i][j] = a[j][i];
    a[p][i] = a[i][p];
  }

  const std::vector<double> sol = detail::solve_dense(std::move(a), std::move(rhs));
  LinearModel model;
  model.w.assign(sol.begin(), sol.begin() + static_cast<long>(p));
  model.b = sol[p];
  return model;
}

// Mann-Whitney ROC-AUC with average ranks on ties.
inline double auc_score(const std::vector<double>& scores,
                        const std::vector<int>& labels) {
  require(scores.size() == labels.size() && !scores.empty(), ErrorKind::metric,
          "auc: size mismatch or empty");
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });

  double rank_sum_pos = 0.0;
  size_t n_pos = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        rank_sum_pos += avg_rank;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const size_t n_neg = scores.size() - n_pos;
  require(n_pos > 0 && n_neg > 0, ErrorKind::metric, "auc: both classes required");
  return (rank_sum_pos - 0.5 * static_cast<double>(n_pos) *
                             static_cast<double>(n_pos + 1)) /
         (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

inline double rmse(const std::vector<double>& pred, const std::vector<double>& truth) {
  require(pred.size() == truth.size() && !pred.empty(), ErrorKind::metric,
          "rmse: size mismatch or empty");
  double s = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - truth[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(pred.size()));
}

}  // namespace rectflow
