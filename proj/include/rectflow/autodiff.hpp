#pragma once

#include <cmath>
#include <deque>
#include <functional>
#include <utility>

#include "rectflow/error.hpp"
#include "rectflow/matrix.hpp"
#include "rectflow/rng.hpp"

namespace rectflow::ad {

class Tape;

// Handle into a tape. Cheap to copy; valid for the tape's lifetime.
struct Node {
  Tape* tape = nullptr;
  int id = -1;

  const Matrix& value() const;
  const Matrix& grad() const;
};

// Define-by-run tape. Nodes are appended in execution order, so reverse
// creation order is a valid topological order and backward() visits each
// node exactly once. Gradients accumulate into lazily-zeroed buffers; a
// fresh tape is built per training step.
class Tape {
 public:
  Node leaf(Matrix value, bool needs_grad = false) {
    return push(std::move(value), needs_grad, nullptr);
  }

  int size() const { return static_cast<int>(slots_.size()); }

  const Matrix& value(int id) const { return slots_[id].value; }

  // Lazily allocated and zeroed at the value's shape.
  Matrix& grad(int id) {
    Slot& s = slots_[id];
    if (s.grad.empty() && !s.value.empty())
      s.grad = Matrix(s.value.rows(), s.value.cols());
    return s.grad;
  }

  bool needs_grad(int id) const { return slots_[id].needs_grad; }

  // Seeds the root gradient with ones and sweeps the tape in reverse.
  // Nodes whose gradient was never reached are skipped.
  void backward(Node root) {
    require(root.tape == this && root.id >= 0 && root.id < size(),
            ErrorKind::domain, "backward: node not on this tape");
    Matrix& g = grad(root.id);
    for (size_t i = 0; i < g.size(); ++i) g.data()[i] += 1.0;
    for (int id = root.id; id >= 0; --id) {
      Slot& s = slots_[id];
      if (s.back && s.needs_grad && !s.grad.empty()) s.back(*this);
    }
  }

  Node push(Matrix value, bool needs_grad, std::function<void(Tape&)> back) {
    slots_.push_back(Slot{std::move(value), Matrix(), needs_grad, std::move(back)});
    return Node{this, static_cast<int>(slots_.size()) - 1};
  }

 private:
  struct Slot {
    Matrix value;
    Matrix grad;
    bool needs_grad;
    std::function<void(Tape&)> back;
  };
  std::deque<Slot> slots_;
};

inline const Matrix& Node::value() const { return tape->value(id); }
inline const Matrix& Node::grad() const { return const_cast<Tape*>(tape)->grad(id); }

namespace detail {

inline double sigmoid_stable(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

inline Tape& same_tape(Node a, Node b, const char* op) {
  require(a.tape != nullptr && a.tape == b.tape, ErrorKind::domain,
          std::string(op) + ": nodes on different tapes");
  return *a.tape;
}

}  // namespace detail

inline Node matmul(Node a, Node b) {
  Tape& t = detail::same_tape(a, b, "matmul");
  Matrix y = rectflow::matmul(a.value(), b.value());
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const int ai = a.id, bi = b.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [ai, bi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      if (tp.needs_grad(ai)) matmul_nt_acc(go, tp.value(bi), tp.grad(ai));
      if (tp.needs_grad(bi)) matmul_tn_acc(tp.value(ai), go, tp.grad(bi));
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node add(Node a, Node b) {
  Tape& t = detail::same_tape(a, b, "add");
  check_same_shape(a.value(), b.value(), "add");
  Matrix y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] += b.value().data()[i];
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const int ai = a.id, bi = b.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [ai, bi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      for (int id : {ai, bi}) {
        if (!tp.needs_grad(id)) continue;
        Matrix& g = tp.grad(id);
        for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i];
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

// Broadcasts a 1 x cols bias over every row.
inline Node add_rowvec(Node a, Node b) {
  Tape& t = detail::same_tape(a, b, "add_rowvec");
  require(b.value().rows() == 1 && b.value().cols() == a.value().cols(),
          ErrorKind::dimension, "add_rowvec: bias must be 1x" + std::to_string(a.value().cols()));
  Matrix y = a.value();
  const double* bias = b.value().row(0);
  for (int r = 0; r < y.rows(); ++r) {
    double* yr = y.row(r);
    for (int c = 0; c < y.cols(); ++c) yr[c] += bias[c];
  }
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const int ai = a.id, bi = b.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [ai, bi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      if (tp.needs_grad(ai)) {
        Matrix& g = tp.grad(ai);
        for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i];
      }
      if (tp.needs_grad(bi)) {
        Matrix& g = tp.grad(bi);
        for (int r = 0; r < go.rows(); ++r) {
          const double* gr = go.row(r);
          for (int c = 0; c < go.cols(); ++c) g(0, c) += gr[c];
        }
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node sigmoid(Node x) {
  Tape& t = *x.tape;
  Matrix y = x.value();
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] = detail::sigmoid_stable(y.data()[i]);
  const bool ng = t.needs_grad(x.id);
  const int xi = x.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [xi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      const Matrix& y = tp.value(out);
      Matrix& g = tp.grad(xi);
      for (size_t i = 0; i < g.size(); ++i) {
        const double s = y.data()[i];
        g.data()[i] += go.data()[i] * s * (1.0 - s);
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node silu(Node x) {
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  Matrix y(xv.rows(), xv.cols());
  for (size_t i = 0; i < y.size(); ++i) {
    const double v = xv.data()[i];
    y.data()[i] = v * detail::sigmoid_stable(v);
  }
  const bool ng = t.needs_grad(x.id);
  const int xi = x.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [xi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      const Matrix& xv = tp.value(xi);
      Matrix& g = tp.grad(xi);
      for (size_t i = 0; i < g.size(); ++i) {
        const double s = detail::sigmoid_stable(xv.data()[i]);
        g.data()[i] += go.data()[i] * s * (1.0 + xv.data()[i] * (1.0 - s));
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node hadamard(Node a, Node b) {
  Tape& t = detail::same_tape(a, b, "hadamard");
  check_same_shape(a.value(), b.value(), "hadamard");
  Matrix y = a.value();
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] *= b.value().data()[i];
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const int ai = a.id, bi = b.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [ai, bi, out](Tape& tp) {
      const Matrix& go = tp.grad(out);
      if (tp.needs_grad(ai)) {
        const Matrix& bv = tp.value(bi);
        Matrix& g = tp.grad(ai);
        for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i] * bv.data()[i];
      }
      if (tp.needs_grad(bi)) {
        const Matrix& av = tp.value(ai);
        Matrix& g = tp.grad(bi);
        for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i] * av.data()[i];
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

// Inverted dropout: survivors are scaled by 1/(1-p) at train time so that
// evaluation is a pure identity. Eval mode or p == 0 return the input node.
inline Node dropout(Node x, double p, bool training, Rng* rng) {
  require(p >= 0.0 && p < 1.0, ErrorKind::config,
          "dropout: p must be in [0,1), got " + std::to_string(p));
  if (!training || p == 0.0) return x;
  require(rng != nullptr, ErrorKind::config, "dropout: rng required in training mode");
  Tape& t = *x.tape;
  const Matrix& xv = x.value();
  Matrix mask(xv.rows(), xv.cols());
  const double keep_scale = 1.0 / (1.0 - p);
  for (size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng->uniform() >= p ? keep_scale : 0.0;
  Matrix y = xv;
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] *= mask.data()[i];
  const bool ng = t.needs_grad(x.id);
  const int xi = x.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [xi, out, mask](Tape& tp) {
      const Matrix& go = tp.grad(out);
      Matrix& g = tp.grad(xi);
      for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i] * mask.data()[i];
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node concat_cols(Node a, Node b) {
  Tape& t = detail::same_tape(a, b, "concat_cols");
  const Matrix& av = a.value();
  const Matrix& bv = b.value();
  require(av.rows() == bv.rows(), ErrorKind::dimension, "concat_cols: row mismatch");
  Matrix y(av.rows(), av.cols() + bv.cols());
  for (int r = 0; r < y.rows(); ++r) {
    double* yr = y.row(r);
    const double* ar = av.row(r);
    const double* br = bv.row(r);
    for (int c = 0; c < av.cols(); ++c) yr[c] = ar[c];
    for (int c = 0; c < bv.cols(); ++c) yr[av.cols() + c] = br[c];
  }
  const bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  const int ai = a.id, bi = b.id, out = t.size(), acols = av.cols();
  std::function<void(Tape&)> back;
  if (ng)
    back = [ai, bi, out, acols](Tape& tp) {
      const Matrix& go = tp.grad(out);
      if (tp.needs_grad(ai)) {
        Matrix& g = tp.grad(ai);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) g(r, c) += go(r, c);
      }
      if (tp.needs_grad(bi)) {
        Matrix& g = tp.grad(bi);
        for (int r = 0; r < g.rows(); ++r)
          for (int c = 0; c < g.cols(); ++c) g(r, c) += go(r, acols + c);
      }
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node scale(Node x, double c) {
  Tape& t = *x.tape;
  Matrix y = x.value();
  for (size_t i = 0; i < y.size(); ++i) y.data()[i] *= c;
  const bool ng = t.needs_grad(x.id);
  const int xi = x.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [xi, out, c](Tape& tp) {
      const Matrix& go = tp.grad(out);
      Matrix& g = tp.grad(xi);
      for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go.data()[i] * c;
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node sum_all(Node x) {
  Tape& t = *x.tape;
  double s = 0.0;
  for (size_t i = 0; i < x.value().size(); ++i) s += x.value().data()[i];
  Matrix y(1, 1);
  y(0, 0) = s;
  const bool ng = t.needs_grad(x.id);
  const int xi = x.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [xi, out](Tape& tp) {
      const double go = tp.grad(out)(0, 0);
      Matrix& g = tp.grad(xi);
      for (size_t i = 0; i < g.size(); ++i) g.data()[i] += go;
    };
  return t.push(std::move(y), ng, std::move(back));
}

inline Node mean_all(Node x) {
  require(!x.value().empty(), ErrorKind::empty_input, "mean_all: empty matrix");
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

// Scalar mean of squared elementwise differences against a constant target.
inline Node mse_loss(Node pred, const Matrix& target) {
  Tape& t = *pred.tape;
  check_same_shape(pred.value(), target, "mse_loss");
  require(!target.empty(), ErrorKind::empty_input, "mse_loss: empty target");
  const size_t n = target.size();
  double s = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pred.value().data()[i] - target.data()[i];
    s += d * d;
  }
  Matrix y(1, 1);
  y(0, 0) = s / static_cast<double>(n);
  const bool ng = t.needs_grad(pred.id);
  const int pi = pred.id, out = t.size();
  std::function<void(Tape&)> back;
  if (ng)
    back = [pi, out, target](Tape& tp) {
      const double go = tp.grad(out)(0, 0);
      const Matrix& pv = tp.value(pi);
      Matrix& g = tp.grad(pi);
      const double inv_n = 1.0 / static_cast<double>(target.size());
      for (size_t i = 0; i < g.size(); ++i)
        g.data()[i] += go * 2.0 * (pv.data()[i] - target.data()[i]) * inv_n;
    };
  return t.push(std::move(y), ng, std::move(back));
}

// x @ w + b with the bias broadcast per row.
inline Node linear(Node x, Node w, Node b) { return add_rowvec(matmul(x, w), b); }

}  // namespace rectflow::ad
