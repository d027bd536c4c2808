// Copyright 2026 The RECTor Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rector/common.hpp"

namespace rector {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// y += M x
inline void gemv_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols; ++c) s += row[c] * x[c];
    y[r] += s;
  }
}

// y += M^T x
inline void gemv_t_add(const Matrix& m, std::span<const double> x, std::span<double> y) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + r * m.cols;
    const double xr = x[r];
    if (xr == 0.0) continue;
    for (std::size_t c = 0; c < m.cols; ++c) y[c] += row[c] * xr;
  }
}

// M += a b^T
inline void ger_add(Matrix& m, std::span<const double> a, std::span<const double> b) {
  for (std::size_t r = 0; r < m.rows; ++r) {
    const double ar = a[r];
    if (ar == 0.0) continue;
    double* row = m.data.data() + r * m.cols;
    for (std::size_t c = 0; c < m.cols; ++c) row[c] += ar * b[c];
  }
}

inline void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace rector
