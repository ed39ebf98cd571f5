#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "hsideconv/errors.hpp"

namespace hsideconv {

// Dense 3D image cube: `bands` spectral planes of `rows` x `cols` pixels.
// Storage is band-major, row-major within a band. Intensities are
// dimensionless, nominally in [0, 1].
class HsiCube {
 public:
  HsiCube() = default;

  HsiCube(int bands, int rows, int cols, double fill = 0.0)
      : bands_(bands), rows_(rows), cols_(cols) {
    if (bands < 1 || rows < 1 || cols < 1) {
      throw dimension_error("cube dimensions must all be >= 1");
    }
    data_.assign(static_cast<std::size_t>(bands) * rows * cols, fill);
  }

  int bands() const { return bands_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(int b, int i, int j) { return data_[index(b, i, j)]; }
  double operator()(int b, int i, int j) const { return data_[index(b, i, j)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::size_t index(int b, int i, int j) const {
    return (static_cast<std::size_t>(b) * rows_ + i) * cols_ + j;
  }

  bool same_shape(const HsiCube& o) const {
    return bands_ == o.bands_ && rows_ == o.rows_ && cols_ == o.cols_;
  }

  bool all_finite() const {
    for (double v : data_) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

 private:
  int bands_ = 0, rows_ = 0, cols_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const HsiCube& a, const HsiCube& b) {
  if (!a.same_shape(b)) throw dimension_error("cube shapes differ");
}

inline HsiCube operator+(const HsiCube& a, const HsiCube& b) {
  require_same_shape(a, b);
  HsiCube out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

inline HsiCube operator-(const HsiCube& a, const HsiCube& b) {
  require_same_shape(a, b);
  HsiCube out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] -= b.data()[i];
  return out;
}

inline HsiCube operator*(double s, const HsiCube& a) {
  HsiCube out = a;
  for (double& v : out.data()) v *= s;
  return out;
}

inline HsiCube& operator+=(HsiCube& a, const HsiCube& b) {
  require_same_shape(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] += b.data()[i];
  return a;
}

inline HsiCube& operator-=(HsiCube& a, const HsiCube& b) {
  require_same_shape(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] -= b.data()[i];
  return a;
}

inline double dot(const HsiCube& a, const HsiCube& b) {
  require_same_shape(a, b);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

}  // namespace hsideconv
