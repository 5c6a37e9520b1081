#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "rectflow/error.hpp"

namespace rectflow {

// Dense row-major matrix of doubles. Value type: copies are deep and cheap
// to reason about; everything in the pipeline is small enough for that.
class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, fill) {
    require(rows >= 0 && cols >= 0, ErrorKind::dimension, "negative matrix shape");
  }

  Matrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = static_cast<int>(rows.size());
    cols_ = rows_ > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    data_.reserve(static_cast<size_t>(rows_) * cols_);
    for (const auto& r : rows) {
      require(static_cast<int>(r.size()) == cols_, ErrorKind::dimension,
              "ragged initializer");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(int r, int c) { return data_[static_cast<size_t>(r) * cols_ + c]; }
  double operator()(int r, int c) const { return data_[static_cast<size_t>(r) * cols_ + c]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double* row(int r) { return data_.data() + static_cast<size_t>(r) * cols_; }
  const double* row(int r) const { return data_.data() + static_cast<size_t>(r) * cols_; }

  bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  void fill(double v) { data_.assign(data_.size(), v); }

  bool all_finite() const {
    for (double v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

inline void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  require(a.same_shape(b), ErrorKind::dimension,
          std::string(op) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// C += A * B, blocked i-k-j so the inner loop streams rows of B.
inline void matmul_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols() == b.rows(), ErrorKind::dimension,
          "matmul: " + a.shape_str() + " * " + b.shape_str());
  require(c.rows() == a.rows() && c.cols() == b.cols(), ErrorKind::dimension,
          "matmul: bad output shape");
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row(p);
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  matmul_acc(a, b, c);
  return c;
}

// C += A^T * B
inline void matmul_tn_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.rows() == b.rows(), ErrorKind::dimension, "matmul_tn: shape mismatch");
  require(c.rows() == a.cols() && c.cols() == b.cols(), ErrorKind::dimension,
          "matmul_tn: bad output shape");
  const int n = a.rows(), k = a.cols(), m = b.cols();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    const double* brow = b.row(i);
    for (int p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c.row(p);
      for (int j = 0; j < m; ++j) crow[j] += av * brow[j];
    }
  }
}

// C += A * B^T
inline void matmul_nt_acc(const Matrix& a, const Matrix& b, Matrix& c) {
  require(a.cols() == b.cols(), ErrorKind::dimension, "matmul_nt: shape mismatch");
  require(c.rows() == a.rows() && c.cols() == b.rows(), ErrorKind::dimension,
          "matmul_nt: bad output shape");
  const int n = a.rows(), k = a.cols(), m = b.rows();
  for (int i = 0; i < n; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (int j = 0; j < m; ++j) {
      const double* brow = b.row(j);
      double acc = 0.0;
      for (int p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] += acc;
    }
  }
}

inline Matrix identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

inline double frobenius_norm_sq(const Matrix& m) {
  double s = 0.0;
  for (size_t i = 0; i < m.size(); ++i) s += m.data()[i] * m.data()[i];
  return s;
}

}  // namespace rectflow
