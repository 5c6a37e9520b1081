#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"

namespace rectflow {

struct TrainConfig {
  double lr = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long iterations = 30000;
  long batch_size = 4096;
  uint64_t seed = 0;
  long log_interval = 100;

  void validate() const {
    require(lr > 0.0, ErrorKind::config, "train: lr must be > 0");
    require(beta1 >= 0.0 && beta1 < 1.0, ErrorKind::config, "train: beta1 must be in [0,1)");
    require(beta2 >= 0.0 && beta2 < 1.0, ErrorKind::config, "train: beta2 must be in [0,1)");
    require(eps > 0.0, ErrorKind::config, "train: eps must be > 0");
    require(iterations >= 1, ErrorKind::config, "train: iterations must be >= 1");
    require(batch_size >= 1, ErrorKind::config, "train: batch size must be >= 1");
    require(log_interval >= 1, ErrorKind::config, "train: log interval must be >= 1");
  }
};

// First/second moment accumulators mirroring the parameter tensors.
struct AdamState {
  std::vector<Matrix> m, v;
  long step = 0;

  static AdamState like(const std::vector<Matrix*>& tensors) {
    AdamState s;
    s.m.reserve(tensors.size());
    s.v.reserve(tensors.size());
    for (const Matrix* t : tensors) {
      s.m.emplace_back(t->rows(), t->cols());
      s.v.emplace_back(t->rows(), t->cols());
    }
    return s;
  }
};

// Bias-corrected Adam: p -= lr * m_hat / (sqrt(v_hat) + eps).
inline void adam_step(const std::vector<Matrix*>& params,
                      const std::vector<const Matrix*>& grads, AdamState& state,
                      const TrainConfig& config) {
  require(params.size() == grads.size() && params.size() == state.m.size(),
          ErrorKind::dimension, "adam: tensor list mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (size_t i = 0; i < params.size(); ++i) {
    Matrix& p = *params[i];
    const Matrix& g = *grads[i];
    check_same_shape(p, g, "adam");
    Matrix& m = state.m[i];
    Matrix& v = state.v[i];
    for (size_t k = 0; k < p.size(); ++k) {
      const double gk = g.data()[k];
      m.data()[k] = config.beta1 * m.data()[k] + (1.0 - config.beta1) * gk;
      v.data()[k] = config.beta2 * v.data()[k] + (1.0 - config.beta2) * gk * gk;
      const double m_hat = m.data()[k] / bc1;
      const double v_hat = v.data()[k] / bc2;
      p.data()[k] -= config.lr * m_hat / (std::sqrt(v_hat) + config.eps);
    }
  }
}

}  // namespace rectflow
