#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "rectflow/autodiff.hpp"
#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/model.hpp"
#include "rectflow/preprocess.hpp"
#include "rectflow/rng.hpp"

namespace rectflow {

enum class TimestepMode { logit_normal, uniform };

// hybrid: numerical coords N(0,1), one-hot blocks per-coordinate U(0,1).
// gaussian: everything N(0,1) (the pure-gaussian ablation).
// hybrid_onehot: one-hot blocks start at a uniformly chosen vertex instead
// of the continuous cube (alternative reading of the block distribution).
enum class NoiseMode { hybrid, gaussian, hybrid_onehot };

inline const char* timestep_mode_name(TimestepMode m) {
  return m == TimestepMode::logit_normal ? "logit_normal" : "uniform";
}
inline const char* noise_mode_name(NoiseMode m) {
  switch (m) {
    case NoiseMode::hybrid: return "hybrid";
    case NoiseMode::gaussian: return "gaussian";
    default: return "hybrid_onehot";
  }
}

struct FlowConfig {
  double m = 0.0;  // logit-normal location
  double s = 1.0;  // logit-normal scale
  TimestepMode timestep_mode = TimestepMode::logit_normal;
  NoiseMode noise_mode = NoiseMode::hybrid;

  void validate() const {
    require(s > 0.0, ErrorKind::config, "flow: s must be > 0");
  }
};

// Widths of the noise vector blocks: numerical coordinates first, then the
// one-hot block of each categorical column.
struct NoiseLayout {
  size_t n_num = 0;
  std::vector<size_t> cat_widths;

  size_t dim() const {
    size_t d = n_num;
    for (size_t w : cat_widths) d += w;
    return d;
  }

  static NoiseLayout from_state(const PreprocessState& st) {
    NoiseLayout lay;
    for (size_t c = 0; c < st.schema.columns.size(); ++c) {
      if (st.schema.columns[c].kind == ColKind::numerical) ++lay.n_num;
      else lay.cat_widths.push_back(st.vocabs[c].size());
    }
    require(lay.dim() == st.dim, ErrorKind::dimension,
            "noise layout does not match encoded dim");
    return lay;
  }
};

inline std::vector<double> interpolate(const std::vector<double>& z0,
                                       const std::vector<double>& z1, double t) {
  require(z0.size() == z1.size(), ErrorKind::dimension,
          "interpolate: length mismatch");
  require(t >= 0.0 && t <= 1.0, ErrorKind::domain, "interpolate: t must be in [0,1]");
  std::vector<double> out(z0.size());
  for (size_t i = 0; i < z0.size(); ++i) out[i] = t * z1[i] + (1.0 - t) * z0[i];
  return out;
}

// Density of t = sigmoid(m + s*eta), eta ~ N(0,1):
// 1/(s*sqrt(2*pi)) * 1/(t(1-t)) * exp(-(logit(t) - m)^2 / (2 s^2)).
inline double logit_normal_pdf(double t, double m, double s) {
  require(t > 0.0 && t < 1.0, ErrorKind::domain,
          "logit_normal_pdf: t must be in (0,1), got " + std::to_string(t));
  require(s > 0.0, ErrorKind::config, "logit_normal_pdf: s must be > 0");
  const double logit = std::log(t / (1.0 - t));
  const double z = (logit - m) / s;
  static const double inv_sqrt_2pi = 0.3989422804014327;
  return inv_sqrt_2pi / s / (t * (1.0 - t)) * std::exp(-0.5 * z * z);
}

inline double sample_timestep(const FlowConfig& config, Rng& rng) {
  config.validate();
  if (config.timestep_mode == TimestepMode::logit_normal)
    return ad::detail::sigmoid_stable(config.m + config.s * rng.normal());
  double t;
  do {
    t = rng.uniform();
  } while (t <= 0.0);  // keep the draw strictly inside (0,1)
  return t;
}

inline void sample_noise_into(double* row, const NoiseLayout& layout,
                              const FlowConfig& config, Rng& rng) {
  const size_t d = layout.dim();
  if (config.noise_mode == NoiseMode::gaussian) {
    for (size_t i = 0; i < d; ++i) row[i] = rng.normal();
    return;
  }
  for (size_t i = 0; i < layout.n_num; ++i) row[i] = rng.normal();
  size_t off = layout.n_num;
  for (size_t w : layout.cat_widths) {
    if (config.noise_mode == NoiseMode::hybrid) {
      for (size_t k = 0; k < w; ++k) row[off + k] = rng.uniform();
    } else {
      const size_t hot = static_cast<size_t>(rng.below(static_cast<uint64_t>(w)));
      for (size_t k = 0; k < w; ++k) row[off + k] = (k == hot) ? 1.0 : 0.0;
    }
    off += w;
  }
}

inline std::vector<double> sample_noise(const NoiseLayout& layout,
                                        const FlowConfig& config, Rng& rng) {
  std::vector<double> z(layout.dim());
  sample_noise_into(z.data(), layout, config, rng);
  return z;
}

// Mean over rows of the squared L2 residual norm; equals the elementwise
// MSE scaled by the column count.
inline ad::Node rf_loss_from(ad::Node pred, const Matrix& target) {
  return ad::scale(ad::mse_loss(pred, target),
                   static_cast<double>(target.cols()));
}

// Draws per-row (t, z0), interpolates to z_t, and scores the velocity
// prediction against the straight-line target z1 - z0.
inline ad::Node rf_loss_graph(ad::Tape& tape, const ModelNodes& nodes,
                              const ModelParams& params, const Matrix& batch,
                              const NoiseLayout& layout, const FlowConfig& config,
                              Rng& rng, bool training = true) {
  require(batch.rows() > 0, ErrorKind::empty_input, "rf_loss: empty batch");
  config.validate();
  require(static_cast<size_t>(batch.cols()) == layout.dim(), ErrorKind::dimension,
          "rf_loss: batch width does not match noise layout");

  const int n = batch.rows(), d = batch.cols();
  std::vector<double> t(static_cast<size_t>(n));
  Matrix zt(n, d), target(n, d);
  std::vector<double> z0(static_cast<size_t>(d));
  for (int r = 0; r < n; ++r) {
    t[static_cast<size_t>(r)] = sample_timestep(config, rng);
    sample_noise_into(z0.data(), layout, config, rng);
    const double tr = t[static_cast<size_t>(r)];
    const double* z1 = batch.row(r);
    double* ztr = zt.row(r);
    double* tgt = target.row(r);
    for (int c = 0; c < d; ++c) {
      ztr[c] = tr * z1[c] + (1.0 - tr) * z0[static_cast<size_t>(c)];
      tgt[c] = z1[c] - z0[static_cast<size_t>(c)];
    }
  }

  ad::Node pred = forward_graph(tape, nodes, params, zt, t, training, &rng);
  return rf_loss_from(pred, target);
}

}  // namespace rectflow
