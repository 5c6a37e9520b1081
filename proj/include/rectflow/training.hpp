#pragma once

#include <chrono>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rectflow/adam.hpp"
#include "rectflow/autodiff.hpp"
#include "rectflow/checkpoint.hpp"
#include "rectflow/flow.hpp"
#include "rectflow/model.hpp"
#include "rectflow/preprocess.hpp"
#include "rectflow/table.hpp"

namespace rectflow {

// One optimization loop: sample a with-replacement row batch, build the
// flow-matching loss graph, backprop, Adam step. Telemetry goes out as one
// JSON object per line when a sink is given.
inline Checkpoint train(const TableData& data, const ModelConfig& model_config,
                        const FlowConfig& flow_config, const TrainConfig& train_config,
                        std::ostream* telemetry = nullptr, int n_q = 1000) {
  model_config.validate();
  flow_config.validate();
  train_config.validate();
  require(data.n_rows > 0, ErrorKind::empty_input, "train: empty table");

  PreprocessState state = fit_preprocess(data, n_q);
  const Matrix x = encode(data, state);
  const NoiseLayout layout = NoiseLayout::from_state(state);

  ModelParams params = init_params(model_config, static_cast<int>(state.dim));
  auto tensors = params.tensors();
  AdamState adam = AdamState::like(tensors);

  Rng batch_rng(derive_seed(train_config.seed, "train-batch"));
  Rng loss_rng(derive_seed(train_config.seed, "train-loss"));

  const auto t0 = std::chrono::steady_clock::now();
  const int n = x.rows();
  const int bs = static_cast<int>(std::min<long>(train_config.batch_size, n));
  Matrix batch(bs, x.cols());
  double loss_value = 0.0;

  for (long iter = 1; iter <= train_config.iterations; ++iter) {
    for (int r = 0; r < bs; ++r) {
      const int src = static_cast<int>(batch_rng.below(static_cast<uint64_t>(n)));
      const double* from = x.row(src);
      double* to = batch.row(r);
      for (int c = 0; c < x.cols(); ++c) to[c] = from[c];
    }

    ad::Tape tape;
    ModelNodes nodes = ModelNodes::on_tape(tape, params, true);
    ad::Node loss = rf_loss_graph(tape, nodes, params, batch, layout, flow_config,
                                  loss_rng, true);
    loss_value = loss.value()(0, 0);
    require(std::isfinite(loss_value), ErrorKind::diverged,
            "train: non-finite loss at iteration " + std::to_string(iter));
    tape.backward(loss);

    std::vector<const Matrix*> grads;
    grads.reserve(tensors.size());
    double grad_norm_sq = 0.0;
    for (const ad::Node& leaf : nodes.leaves) {
      const Matrix& g = leaf.grad();
      grad_norm_sq += frobenius_norm_sq(g);
      grads.push_back(&g);
    }
    adam_step(tensors, grads, adam, train_config);

    if (telemetry &&
        (iter % train_config.log_interval == 0 || iter == train_config.iterations)) {
      const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
      nlohmann::json rec = {{"iter", iter},
                            {"loss", loss_value},
                            {"grad_norm", std::sqrt(grad_norm_sq)},
                            {"wall_ms", ms}};
      *telemetry << rec.dump() << '\n';
    }
  }

  Checkpoint cp;
  cp.params = std::move(params);
  cp.model_config = model_config;
  cp.flow_config = flow_config;
  cp.preprocess = std::move(state);
  cp.iterations_run = train_config.iterations;
  cp.final_loss = loss_value;
  return cp;
}

}  // namespace rectflow
