#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"

namespace rectflow {

enum class SolverMethod { euler, rk4, dopri54 };

inline const char* solver_method_name(SolverMethod m) {
  switch (m) {
    case SolverMethod::euler: return "euler";
    case SolverMethod::rk4: return "rk4";
    default: return "dopri54";
  }
}

inline SolverMethod solver_method_from_name(const std::string& name) {
  if (name == "euler") return SolverMethod::euler;
  if (name == "rk4") return SolverMethod::rk4;
  if (name == "dopri54") return SolverMethod::dopri54;
  fail(ErrorKind::config, "solver: unknown method \"" + name + "\"");
}

struct SolverConfig {
  SolverMethod method = SolverMethod::dopri54;
  long steps = 100;        // fixed-step methods
  double rtol = 1e-5;      // adaptive method
  double atol = 1e-6;
  long max_steps = 100000;

  void validate() const {
    require(steps >= 1, ErrorKind::config, "solver: steps must be >= 1");
    require(rtol > 0.0 && atol > 0.0, ErrorKind::config,
            "solver: tolerances must be > 0");
    require(max_steps >= 1, ErrorKind::config, "solver: max steps must be >= 1");
  }
};

// Accepted solver states for diagnostics; t runs from 0 to 1.
struct Trajectory {
  std::vector<double> ts;
  std::vector<Matrix> states;
  long accepted = 0;
  long rejected = 0;
  bool record_states = true;

  void record(double t, const Matrix& z) {
    ts.push_back(t);
    if (record_states) states.push_back(z);
  }
};

// Velocity field over a whole batch: rows advance together, one shared t.
using VelocityFn = std::function<Matrix(const Matrix&, double)>;

namespace detail {

inline void axpy(Matrix& y, double a, const Matrix& x) {
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] += a * x.data()[i];
}

inline void check_state_finite(const Matrix& z, double t) {
  require(z.all_finite(), ErrorKind::diverged,
          "solver: non-finite state at t = " + std::to_string(t));
}

inline double row_norm(const Matrix& m, int r) {
  double s = 0.0;
  const double* p = m.row(r);
  for (int c = 0; c < m.cols(); ++c) s += p[c] * p[c];
  return std::sqrt(s);
}

inline Matrix fixed_step_integrate(const VelocityFn& velocity, Matrix z,
                                   const SolverConfig& config, Trajectory* traj) {
  const long n = config.steps;
  const double h = 1.0 / static_cast<double>(n);
  const bool rk4 = config.method == SolverMethod::rk4;
  if (traj) traj->record(0.0, z);
  for (long k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * h;
    if (rk4) {
      const Matrix k1 = velocity(z, t);
      Matrix z2 = z;
      axpy(z2, 0.5 * h, k1);
      const Matrix k2 = velocity(z2, t + 0.5 * h);
      Matrix z3 = z;
      axpy(z3, 0.5 * h, k2);
      const Matrix k3 = velocity(z3, t + 0.5 * h);
      Matrix z4 = z;
      axpy(z4, h, k3);
      const Matrix k4 = velocity(z4, t + h);
      axpy(z, h / 6.0, k1);
      axpy(z, h / 3.0, k2);
      axpy(z, h / 3.0, k3);
      axpy(z, h / 6.0, k4);
    } else {
      axpy(z, h, velocity(z, t));
    }
    check_state_finite(z, t + h);
    if (traj) {
      traj->accepted += 1;
      traj->record(static_cast<double>(k + 1) * h, z);
    }
  }
  return z;
}

// Dormand-Prince 5(4): 7 stages, FSAL, 5th-order propagation with an
// embedded 4th-order error estimate.
inline Matrix dopri54_integrate(const VelocityFn& velocity, Matrix z,
                                const SolverConfig& config, Trajectory* traj) {
  static const double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static const double a21 = 1.0 / 5;
  static const double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static const double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static const double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187,
                      a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  static const double a61 = 9017.0 / 3168, a62 = -355.0 / 33,
                      a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                      a65 = -5103.0 / 18656;
  static const double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                      b5 = -2187.0 / 6784, b6 = 11.0 / 84;
  // 5th-order weights minus the embedded 4th-order weights
  static const double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                      e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

  double t = 0.0;
  double h = std::min(0.05, 1.0);
  Matrix k1 = velocity(z, t);  // FSAL: reused from the previous accepted step
  if (traj) traj->record(0.0, z);

  for (long step = 0; step < config.max_steps; ++step) {
    if (t >= 1.0) return z;
    h = std::min(h, 1.0 - t);

    Matrix y = z;
    axpy(y, h * a21, k1);
    const Matrix k2 = velocity(y, t + c2 * h);

    y = z;
    axpy(y, h * a31, k1);
    axpy(y, h * a32, k2);
    const Matrix k3 = velocity(y, t + c3 * h);

    y = z;
    axpy(y, h * a41, k1);
    axpy(y, h * a42, k2);
    axpy(y, h * a43, k3);
    const Matrix k4 = velocity(y, t + c4 * h);

    y = z;
    axpy(y, h * a51, k1);
    axpy(y, h * a52, k2);
    axpy(y, h * a53, k3);
    axpy(y, h * a54, k4);
    const Matrix k5 = velocity(y, t + c5 * h);

    y = z;
    axpy(y, h * a61, k1);
    axpy(y, h * a62, k2);
    axpy(y, h * a63, k3);
    axpy(y, h * a64, k4);
    axpy(y, h * a65, k5);
    const Matrix k6 = velocity(y, t + h);

    Matrix z_new = z;
    axpy(z_new, h * b1, k1);
    axpy(z_new, h * b3, k3);
    axpy(z_new, h * b4, k4);
    axpy(z_new, h * b5, k5);
    axpy(z_new, h * b6, k6);
    check_state_finite(z_new, t + h);
    const Matrix k7 = velocity(z_new, t + h);

    // Error estimate, scaled per row: ||delta|| / (atol + rtol * ||z||).
    double err = 0.0;
    for (int r = 0; r < z.rows(); ++r) {
      double dsq = 0.0;
      for (int c = 0; c < z.cols(); ++c) {
        const double d = h * (e1 * k1(r, c) + e3 * k3(r, c) + e4 * k4(r, c) +
                              e5 * k5(r, c) + e6 * k6(r, c) + e7 * k7(r, c));
        dsq += d * d;
      }
      const double scale =
          config.atol +
          config.rtol * std::max(row_norm(z, r), row_norm(z_new, r));
      err = std::max(err, std::sqrt(dsq) / scale);
    }

    double factor = err > 0.0 ? 0.9 * std::pow(err, -0.2) : 5.0;
    factor = std::clamp(factor, 0.2, 5.0);
    if (err <= 1.0) {
      t += h;
      z = std::move(z_new);
      k1 = k7;
      if (traj) {
        traj->accepted += 1;
        traj->record(t, z);
      }
    } else if (traj) {
      traj->rejected += 1;
    }
    h *= factor;
  }
  fail(ErrorKind::solver,
       "solver: exceeded " + std::to_string(config.max_steps) +
           " steps before reaching t = 1 (stiff or tolerances too tight)");
}

}  // namespace detail

// Integrates dz/dt = velocity(z, t) from t = 0 to t = 1 for a whole batch;
// dopri54 applies one shared adaptive step sized by the worst row.
inline Matrix integrate(const VelocityFn& velocity, Matrix z0,
                        const SolverConfig& config, Trajectory* traj = nullptr) {
  config.validate();
  require(z0.all_finite(), ErrorKind::domain, "solver: non-finite initial state");
  if (config.method == SolverMethod::dopri54)
    return detail::dopri54_integrate(velocity, std::move(z0), config, traj);
  return detail::fixed_step_integrate(velocity, std::move(z0), config, traj);
}

// Scalar convenience for single-trajectory diagnostics.
inline double integrate_scalar(const std::function<double(double, double)>& velocity,
                               double z0, const SolverConfig& config,
                               Trajectory* traj = nullptr) {
  Matrix z(1, 1);
  z(0, 0) = z0;
  const VelocityFn wrap = [&velocity](const Matrix& m, double t) {
    Matrix out(1, 1);
    out(0, 0) = velocity(m(0, 0), t);
    return out;
  };
  return integrate(wrap, std::move(z), config, traj)(0, 0);
}

}  // namespace rectflow
