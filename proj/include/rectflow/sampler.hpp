#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "rectflow/checkpoint.hpp"
#include "rectflow/error.hpp"
#include "rectflow/flow.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/model.hpp"
#include "rectflow/ode.hpp"
#include "rectflow/parallel.hpp"
#include "rectflow/preprocess.hpp"

namespace rectflow {

// Rows are generated in fixed 512-row chunks, each with its own derived
// noise stream, so output is identical for any worker count.
inline constexpr int kSampleChunkRows = 512;

inline Matrix sample_latents(const Checkpoint& cp, long n, const SolverConfig& solver,
                             uint64_t seed, int threads = 1) {
  require(n >= 1, ErrorKind::config, "sample: n must be >= 1");
  solver.validate();
  const NoiseLayout layout = NoiseLayout::from_state(cp.preprocess);
  const int d = static_cast<int>(layout.dim());
  const uint64_t noise_root = derive_seed(seed, "sample-noise");

  Matrix out(static_cast<int>(n), d);
  const int n_chunks =
      static_cast<int>((n + kSampleChunkRows - 1) / kSampleChunkRows);

  parallel_for(n_chunks, threads, [&](int chunk) {
    const long lo = static_cast<long>(chunk) * kSampleChunkRows;
    const long hi = std::min(n, lo + kSampleChunkRows);
    const int rows = static_cast<int>(hi - lo);

    Rng rng(derive_seed(noise_root, "chunk", static_cast<uint64_t>(chunk)));
    Matrix z0(rows, d);
    for (int r = 0; r < rows; ++r)
      sample_noise_into(z0.row(r), layout, cp.flow_config, rng);

    const VelocityFn velocity = [&cp](const Matrix& z, double t) {
      return forward_eval(cp.params, z,
                          std::vector<double>(static_cast<size_t>(z.rows()), t));
    };
    Matrix z1;
    try {
      z1 = integrate(velocity, std::move(z0), solver);
    } catch (const Error& e) {
      fail(e.kind(), std::string(e.what()) + " (rows " + std::to_string(lo) +
                         ".." + std::to_string(hi - 1) + ")");
    }
    for (int r = 0; r < rows; ++r) {
      const double* src = z1.row(r);
      double* dst = out.row(static_cast<int>(lo) + r);
      for (int c = 0; c < d; ++c) dst[c] = src[c];
    }
  });
  return out;
}

// Noise -> ODE integration to t = 1 -> decode. Deterministic per seed.
inline TableData generate(const Checkpoint& cp, long n, const SolverConfig& solver,
                          uint64_t seed, int threads = 1) {
  return decode(sample_latents(cp, n, solver, seed, threads), cp.preprocess);
}

}  // namespace rectflow
