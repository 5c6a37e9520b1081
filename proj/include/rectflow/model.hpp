#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rectflow/autodiff.hpp"
#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/rng.hpp"

namespace rectflow {

// Sinusoidal embedding of a continuous timestep. t is scaled by 1000 so
// t in [0,1] sweeps the frequency range the embedding was designed for
// with integer steps.
inline std::vector<double> sin_time_embed(double t, int dim) {
  require(dim >= 4 && dim % 2 == 0, ErrorKind::config,
          "sin_time_embed: dim must be even and >= 4, got " + std::to_string(dim));
  const int half = dim / 2;
  std::vector<double> out(static_cast<size_t>(dim));
  for (int j = 0; j < half; ++j) {
    const double freq = std::exp(-std::log(10000.0) * static_cast<double>(j) /
                                 static_cast<double>(half - 1));
    const double arg = 1000.0 * t * freq;
    out[static_cast<size_t>(j)] = std::sin(arg);
    out[static_cast<size_t>(half + j)] = std::cos(arg);
  }
  return out;
}

struct GluBlockParams {
  Matrix w1, b1, w2, b2;  // biases stored as 1 x hidden rows
};

struct ModelConfig {
  double width_factor = 1.0;
  double dropout_p = 0.0;
  int temb_dim = 128;
  uint64_t init_seed = 0;

  void validate() const {
    require(width_factor > 0.0, ErrorKind::config, "model: width factor must be > 0");
    require(dropout_p >= 0.0 && dropout_p < 1.0, ErrorKind::config,
            "model: dropout must be in [0,1)");
    require(temb_dim >= 4 && temb_dim % 2 == 0, ErrorKind::config,
            "model: time-embed dim must be even and >= 4");
  }
};

// Hidden sizes of the four GLU blocks before width scaling.
inline constexpr std::array<int, 4> kGluBaseWidths = {1024, 2048, 1024, 1024};

inline std::array<int, 4> glu_widths(double width_factor) {
  std::array<int, 4> w{};
  for (size_t i = 0; i < 4; ++i)
    w[i] = std::max(1, static_cast<int>(std::llround(kGluBaseWidths[i] * width_factor)));
  return w;
}

// Velocity network v(z, t): time embedding -> two-layer time MLP, the
// embedding concatenated to z, a linear input projection, four GLU blocks,
// and a linear head back to the data dimension.
struct ModelParams {
  Matrix temb_w1, temb_b1, temb_w2, temb_b2;
  Matrix proj_w, proj_b;
  std::array<GluBlockParams, 4> blocks;
  Matrix head_w, head_b;
  double dropout_p = 0.0;
  int temb_dim = 128;
  int data_dim = 0;

  // Declaration order; used by the optimizer, serialization, and checks.
  std::vector<Matrix*> tensors() {
    std::vector<Matrix*> out = {&temb_w1, &temb_b1, &temb_w2, &temb_b2,
                                &proj_w,  &proj_b};
    for (auto& b : blocks) {
      out.push_back(&b.w1);
      out.push_back(&b.b1);
      out.push_back(&b.w2);
      out.push_back(&b.b2);
    }
    out.push_back(&head_w);
    out.push_back(&head_b);
    return out;
  }
  std::vector<const Matrix*> tensors() const {
    auto list = const_cast<ModelParams*>(this)->tensors();
    return {list.begin(), list.end()};
  }

  static std::vector<std::string> tensor_names() {
    std::vector<std::string> out = {"temb_w1", "temb_b1", "temb_w2", "temb_b2",
                                    "proj_w",  "proj_b"};
    for (int i = 0; i < 4; ++i) {
      const std::string p = "block" + std::to_string(i + 1) + "_";
      out.push_back(p + "w1");
      out.push_back(p + "b1");
      out.push_back(p + "w2");
      out.push_back(p + "b2");
    }
    out.push_back("head_w");
    out.push_back("head_b");
    return out;
  }
};

// Uniform(-sqrt(1/fan_in), +sqrt(1/fan_in)) weights, zero biases, all drawn
// from one seeded generator in declaration order.
inline ModelParams init_params(const ModelConfig& config, int d) {
  config.validate();
  require(d >= 1, ErrorKind::config, "init_params: data dim must be >= 1");

  Rng rng(config.init_seed);
  const auto init_linear = [&rng](int in, int out, Matrix& w, Matrix& b) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    w = Matrix(in, out);
    for (size_t i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-bound, bound);
    b = Matrix(1, out);
  };

  ModelParams p;
  p.dropout_p = config.dropout_p;
  p.temb_dim = config.temb_dim;
  p.data_dim = d;
  const auto widths = glu_widths(config.width_factor);

  init_linear(config.temb_dim, config.temb_dim, p.temb_w1, p.temb_b1);
  init_linear(config.temb_dim, config.temb_dim, p.temb_w2, p.temb_b2);
  init_linear(d + config.temb_dim, widths[0], p.proj_w, p.proj_b);
  int in = widths[0];
  for (size_t i = 0; i < 4; ++i) {
    init_linear(in, widths[i], p.blocks[i].w1, p.blocks[i].b1);
    init_linear(in, widths[i], p.blocks[i].w2, p.blocks[i].b2);
    in = widths[i];
  }
  init_linear(in, d, p.head_w, p.head_b);
  return p;
}

// Eq-style gated linear unit: Dropout((xW1 + b1) ⊗ σ(xW2 + b2)).
inline ad::Node glu_block(ad::Node x, ad::Node w1, ad::Node b1, ad::Node w2,
                          ad::Node b2, double p, bool training, Rng* rng) {
  ad::Node a = ad::linear(x, w1, b1);
  ad::Node gate = ad::sigmoid(ad::linear(x, w2, b2));
  return ad::dropout(ad::hadamard(a, gate), p, training, rng);
}

// Parameter leaves registered on a tape, in declaration order.
struct ModelNodes {
  std::vector<ad::Node> leaves;

  static ModelNodes on_tape(ad::Tape& tape, const ModelParams& params, bool needs_grad) {
    ModelNodes n;
    for (const Matrix* m : params.tensors())
      n.leaves.push_back(tape.leaf(*m, needs_grad));
    return n;
  }

  ad::Node operator[](size_t i) const { return leaves[i]; }
};

// Builds the forward graph for a batch; t is one timestep per row.
inline ad::Node forward_graph(ad::Tape& tape, const ModelNodes& n,
                              const ModelParams& params, const Matrix& z,
                              const std::vector<double>& t, bool training,
                              Rng* rng) {
  require(z.cols() == params.data_dim, ErrorKind::dimension,
          "forward: z width " + std::to_string(z.cols()) + " != data dim " +
              std::to_string(params.data_dim));
  require(static_cast<int>(t.size()) == z.rows(), ErrorKind::dimension,
          "forward: need one timestep per row");
  for (double ti : t)
    require(ti >= 0.0 && ti <= 1.0, ErrorKind::domain,
            "forward: t must be in [0,1], got " + std::to_string(ti));

  Matrix emb(z.rows(), params.temb_dim);
  for (int r = 0; r < z.rows(); ++r) {
    const auto e = sin_time_embed(t[static_cast<size_t>(r)], params.temb_dim);
    double* row = emb.row(r);
    for (int c = 0; c < params.temb_dim; ++c) row[c] = e[static_cast<size_t>(c)];
  }

  ad::Node znode = tape.leaf(z);
  ad::Node tnode = tape.leaf(std::move(emb));
  ad::Node temb = ad::linear(ad::silu(ad::linear(tnode, n[0], n[1])), n[2], n[3]);
  ad::Node h = ad::linear(ad::concat_cols(znode, temb), n[4], n[5]);
  for (size_t i = 0; i < 4; ++i) {
    const size_t base = 6 + 4 * i;
    h = glu_block(h, n[base], n[base + 1], n[base + 2], n[base + 3],
                  params.dropout_p, training, rng);
  }
  return ad::linear(h, n[22], n[23]);
}

// Dropout-free forward pass on a throwaway tape.
inline Matrix forward_eval(const ModelParams& params, const Matrix& z,
                           const std::vector<double>& t) {
  ad::Tape tape;
  ModelNodes n = ModelNodes::on_tape(tape, params, false);
  return forward_graph(tape, n, params, z, t, false, nullptr).value();
}

}  // namespace rectflow
