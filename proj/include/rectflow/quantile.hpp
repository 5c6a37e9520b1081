#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "rectflow/error.hpp"
#include "rectflow/gauss.hpp"

namespace rectflow {

// Monotone map from a column's empirical distribution to N(0,1): linear-
// interpolated ECDF over stored reference quantiles, clamped away from
// {0,1}, then the inverse normal CDF. Exactly invertible for values inside
// the fitted range.
struct QuantileMap {
  std::vector<double> refs;  // non-decreasing reference quantiles
  double eps = 1e-7;         // CDF clamp keeping the normal quantile finite
  bool constant = false;     // degenerate fit (all values identical)

  // ECDF position in [0,1]. Values tied with references map to the midpoint
  // of the tied position range so plateaus stay symmetric; between
  // references the position interpolates linearly.
  double ecdf(double x) const {
    const size_t nq = refs.size();
    const double denom = static_cast<double>(nq - 1);
    if (x < refs.front()) return 0.0;
    if (x > refs.back()) return 1.0;
    auto lo = std::lower_bound(refs.begin(), refs.end(), x);
    auto hi = std::upper_bound(refs.begin(), refs.end(), x);
    if (lo != hi) {
      const double first = static_cast<double>(lo - refs.begin());
      const double last = static_cast<double>(hi - refs.begin() - 1);
      return 0.5 * (first + last) / denom;
    }
    const size_t j = static_cast<size_t>(lo - refs.begin());
    const double t = (x - refs[j - 1]) / (refs[j] - refs[j - 1]);
    return (static_cast<double>(j - 1) + t) / denom;
  }

  double forward(double x) const {
    if (constant) return 0.0;
    return norm_ppf(std::clamp(ecdf(x), eps, 1.0 - eps));
  }

  double inverse(double z) const {
    if (constant) return refs.front();
    const double p = std::clamp(norm_cdf(z), 0.0, 1.0);
    const double pos = p * static_cast<double>(refs.size() - 1);
    const size_t j = std::min(static_cast<size_t>(pos), refs.size() - 2);
    const double t = pos - static_cast<double>(j);
    return refs[j] + t * (refs[j + 1] - refs[j]);
  }
};

// Stores min(n_q, #values) empirical quantiles at evenly spaced positions
// i/(n_q-1), each computed by linear interpolation of the sorted sample.
inline QuantileMap fit_quantile(const std::vector<double>& values, int n_q = 1000) {
  require(!values.empty(), ErrorKind::fit, "fit_quantile: empty input");
  require(n_q >= 2, ErrorKind::config, "fit_quantile: n_q must be >= 2");
  for (double v : values)
    require(std::isfinite(v), ErrorKind::fit, "fit_quantile: non-finite value");

  std::vector<double> s = values;
  std::sort(s.begin(), s.end());
  const size_t n = s.size();

  QuantileMap map;
  if (n == 1 || s.front() == s.back()) {
    map.refs = {s.front(), s.front()};
    map.constant = true;
    return map;
  }

  const size_t nq = std::min<size_t>(static_cast<size_t>(n_q), n);
  map.refs.resize(nq);
  for (size_t i = 0; i < nq; ++i) {
    const double pos = static_cast<double>(i) / static_cast<double>(nq - 1) *
                       static_cast<double>(n - 1);
    const size_t lo = std::min(static_cast<size_t>(pos), n - 2);
    const double t = pos - static_cast<double>(lo);
    map.refs[i] = s[lo] + t * (s[lo + 1] - s[lo]);
  }
  return map;
}

}  // namespace rectflow
