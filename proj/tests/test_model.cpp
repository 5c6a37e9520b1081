#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "rectflow/autodiff.hpp"
#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/model.hpp"
#include "rectflow/rng.hpp"

#include "fd_check.hpp"

using namespace rectflow;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using testutil::max_fd_rel_err;
using testutil::random_matrix;

// ---------------------------------------------------------------------------
// Time embedding
// ---------------------------------------------------------------------------

TEST_CASE("time embedding at t = 0 is zeros then ones") {
  const auto e = sin_time_embed(0.0, 8);
  for (int j = 0; j < 4; ++j) REQUIRE(e[static_cast<size_t>(j)] == 0.0);
  for (int j = 4; j < 8; ++j) REQUIRE(e[static_cast<size_t>(j)] == 1.0);
}

TEST_CASE("time embedding matches the frequency formula") {
  // dim 4: frequencies 1 and 1e-4, arguments 1000 t freq.
  const auto e = sin_time_embed(0.001, 4);
  REQUIRE_THAT(e[0], WithinRel(std::sin(1.0), 1e-15));
  REQUIRE_THAT(e[1], WithinRel(std::sin(1e-4), 1e-15));
  REQUIRE_THAT(e[2], WithinRel(std::cos(1.0), 1e-15));
  REQUIRE_THAT(e[3], WithinRel(std::cos(1e-4), 1e-15));
}

TEST_CASE("time embedding stays in [-1,1] and rejects bad dims") {
  for (double t : {0.0, 0.013, 0.5, 0.99, 1.0}) {
    for (double v : sin_time_embed(t, 128)) {
      REQUIRE(v >= -1.0);
      REQUIRE(v <= 1.0);
    }
  }
  REQUIRE_THROWS_AS(sin_time_embed(0.5, 7), Error);
  REQUIRE_THROWS_AS(sin_time_embed(0.5, 2), Error);
  REQUIRE_THROWS_AS(sin_time_embed(0.5, 0), Error);
}

// ---------------------------------------------------------------------------
// GLU block
// ---------------------------------------------------------------------------

TEST_CASE("glu block gates the linear path by a sigmoid") {
  ad::Tape t;
  const Matrix x{{1.0}};
  ad::Node xn = t.leaf(x);

  // value path 2, gate sigma(0) = 1/2 -> exactly 1
  ad::Node out = glu_block(xn, t.leaf(Matrix{{2.0}}), t.leaf(Matrix{{0.0}}),
                           t.leaf(Matrix{{0.0}}), t.leaf(Matrix{{0.0}}), 0.0,
                           false, nullptr);
  REQUIRE(out.value()(0, 0) == 1.0);

  // zero value path -> zero regardless of the gate
  ad::Node zero = glu_block(xn, t.leaf(Matrix{{0.0}}), t.leaf(Matrix{{0.0}}),
                            t.leaf(Matrix{{3.0}}), t.leaf(Matrix{{1.0}}), 0.0,
                            false, nullptr);
  REQUIRE(zero.value()(0, 0) == 0.0);

  // saturated gate passes the value path through
  ad::Node open = glu_block(xn, t.leaf(Matrix{{1.5}}), t.leaf(Matrix{{0.25}}),
                            t.leaf(Matrix{{0.0}}), t.leaf(Matrix{{40.0}}), 0.0,
                            false, nullptr);
  REQUIRE_THAT(open.value()(0, 0), WithinRel(1.75, 1e-12));
}

// ---------------------------------------------------------------------------
// Parameter shapes and initialization
// ---------------------------------------------------------------------------

TEST_CASE("width scaling rounds and never collapses to zero") {
  REQUIRE(glu_widths(1.0) == std::array<int, 4>{1024, 2048, 1024, 1024});
  REQUIRE(glu_widths(1.0 / 16.0) == std::array<int, 4>{64, 128, 64, 64});
  REQUIRE(glu_widths(1e-6) == std::array<int, 4>{1, 1, 1, 1});
}

TEST_CASE("init_params lays out every tensor with the documented shapes") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 8.0;  // widths 128, 256, 128, 128
  cfg.temb_dim = 16;
  ModelParams p = init_params(cfg, 5);

  REQUIRE(p.temb_w1.rows() == 16);
  REQUIRE(p.temb_w1.cols() == 16);
  REQUIRE(p.proj_w.rows() == 5 + 16);
  REQUIRE(p.proj_w.cols() == 128);
  REQUIRE(p.blocks[0].w1.rows() == 128);
  REQUIRE(p.blocks[0].w1.cols() == 128);
  REQUIRE(p.blocks[1].w1.rows() == 128);
  REQUIRE(p.blocks[1].w1.cols() == 256);
  REQUIRE(p.blocks[2].w1.rows() == 256);
  REQUIRE(p.blocks[2].w1.cols() == 128);
  REQUIRE(p.blocks[3].w2.rows() == 128);
  REQUIRE(p.blocks[3].w2.cols() == 128);
  REQUIRE(p.head_w.rows() == 128);
  REQUIRE(p.head_w.cols() == 5);
  REQUIRE(p.head_b.cols() == 5);

  REQUIRE(p.tensors().size() == 24);
  REQUIRE(ModelParams::tensor_names().size() == 24);
  REQUIRE(ModelParams::tensor_names()[6] == "block1_w1");
  REQUIRE(ModelParams::tensor_names()[23] == "head_b");
}

TEST_CASE("init_params zeroes biases and bounds weights by fan-in") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 32.0;
  cfg.temb_dim = 8;
  ModelParams p = init_params(cfg, 3);

  for (const Matrix* b : {&p.temb_b1, &p.temb_b2, &p.proj_b, &p.blocks[0].b1,
                          &p.blocks[2].b2, &p.head_b})
    for (size_t i = 0; i < b->size(); ++i) REQUIRE(b->data()[i] == 0.0);

  const auto check_bound = [](const Matrix& w) {
    const double bound = std::sqrt(1.0 / static_cast<double>(w.rows()));
    for (size_t i = 0; i < w.size(); ++i) {
      REQUIRE(w.data()[i] >= -bound);
      REQUIRE(w.data()[i] <= bound);
    }
  };
  check_bound(p.temb_w1);
  check_bound(p.proj_w);
  check_bound(p.blocks[1].w1);
  check_bound(p.head_w);
}

TEST_CASE("init_params is deterministic in the seed") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 64.0;
  cfg.temb_dim = 8;
  cfg.init_seed = 11;
  ModelParams a = init_params(cfg, 4);
  ModelParams b = init_params(cfg, 4);
  cfg.init_seed = 12;
  ModelParams c = init_params(cfg, 4);

  const auto ta = a.tensors(), tb = b.tensors(), tc = c.tensors();
  bool any_diff = false;
  for (size_t i = 0; i < ta.size(); ++i) {
    REQUIRE(ta[i]->size() == tb[i]->size());
    for (size_t k = 0; k < ta[i]->size(); ++k) {
      REQUIRE(ta[i]->data()[k] == tb[i]->data()[k]);
      any_diff |= ta[i]->data()[k] != tc[i]->data()[k];
    }
  }
  REQUIRE(any_diff);
}

// ---------------------------------------------------------------------------
// Forward pass
// ---------------------------------------------------------------------------

TEST_CASE("forward produces one velocity row per input row") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 128.0;
  cfg.temb_dim = 8;
  ModelParams p = init_params(cfg, 4);
  Rng rng(3);
  const Matrix z = random_matrix(rng, 7, 4);
  const Matrix v = forward_eval(p, z, std::vector<double>(7, 0.3));
  REQUIRE(v.rows() == 7);
  REQUIRE(v.cols() == 4);
  REQUIRE(v.all_finite());
}

TEST_CASE("forward with a zero head is identically zero") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 128.0;
  cfg.temb_dim = 8;
  ModelParams p = init_params(cfg, 3);
  p.head_w.fill(0.0);
  p.head_b.fill(0.0);
  Rng rng(4);
  const Matrix v = forward_eval(p, random_matrix(rng, 5, 3), {0.0, 0.25, 0.5, 0.75, 1.0});
  for (size_t i = 0; i < v.size(); ++i) REQUIRE(v.data()[i] == 0.0);
}

TEST_CASE("forward evaluation is deterministic") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 64.0;
  cfg.temb_dim = 8;
  cfg.init_seed = 5;
  ModelParams p = init_params(cfg, 2);
  Rng rng(6);
  const Matrix z = random_matrix(rng, 4, 2);
  const std::vector<double> t = {0.1, 0.4, 0.6, 0.9};
  const Matrix a = forward_eval(p, z, t);
  const Matrix b = forward_eval(p, z, t);
  for (size_t i = 0; i < a.size(); ++i) REQUIRE(a.data()[i] == b.data()[i]);
}

TEST_CASE("forward validates timesteps and shapes") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 128.0;
  cfg.temb_dim = 8;
  ModelParams p = init_params(cfg, 2);
  const Matrix z(3, 2);
  REQUIRE_THROWS_AS(forward_eval(p, z, {0.1, 0.2}), Error);             // t count
  REQUIRE_THROWS_AS(forward_eval(p, z, {0.1, 0.2, 1.5}), Error);        // t range
  REQUIRE_THROWS_AS(forward_eval(p, z, {0.1, -0.2, 0.5}), Error);       // t range
  REQUIRE_THROWS_AS(forward_eval(p, Matrix(3, 5), {0.1, 0.2, 0.3}), Error);  // width
}

TEST_CASE("network gradients match finite differences on a small model") {
  ModelConfig cfg;
  cfg.width_factor = 1.0 / 512.0;  // widths 2, 4, 2, 2
  cfg.temb_dim = 4;
  cfg.init_seed = 9;
  ModelParams p = init_params(cfg, 3);
  Rng rng(10);
  const Matrix z = random_matrix(rng, 4, 3, -1.0, 1.0);
  const Matrix target = random_matrix(rng, 4, 3, -1.0, 1.0);
  const std::vector<double> ts = {0.05, 0.35, 0.65, 0.95};

  const auto loss = [&] {
    ad::Tape tape;
    ModelNodes n = ModelNodes::on_tape(tape, p, false);
    return ad::mse_loss(forward_graph(tape, n, p, z, ts, false, nullptr), target)
        .value()(0, 0);
  };

  ad::Tape tape;
  ModelNodes n = ModelNodes::on_tape(tape, p, true);
  ad::Node l = ad::mse_loss(forward_graph(tape, n, p, z, ts, false, nullptr), target);
  tape.backward(l);

  const auto t_list = p.tensors();
  for (size_t i = 0; i < t_list.size(); ++i) {
    REQUIRE(max_fd_rel_err(loss, *t_list[i], n[i].grad()) < 1e-5);
  }
}
