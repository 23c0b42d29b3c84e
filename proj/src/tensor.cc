// tensor.cc

// Copyright 2026  The shiftctx Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "shiftctx/tensor.h"

#include <cmath>

namespace shiftctx {

Matrix WeightRng::glorot(int64_t rows, int64_t cols) {
  const float bound = std::sqrt(6.0f / static_cast<float>(rows + cols));
  return uniform_matrix(rows, cols, bound);
}

Matrix WeightRng::uniform_matrix(int64_t rows, int64_t cols, float bound) {
  Matrix m(rows, cols);
  for (int64_t i = 0; i < rows; ++i)
    for (int64_t j = 0; j < cols; ++j) m(i, j) = uniform(bound);
  return m;
}

Matrix layer_norm(const Matrix &x, float eps) {
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const float mean = x.row(i).mean();
    const float var = (x.row(i).array() - mean).square().mean();
    out.row(i) = (x.row(i).array() - mean) / std::sqrt(var + eps);
  }
  return out;
}

void softmax_rows(Matrix *x) {
  for (Eigen::Index i = 0; i < x->rows(); ++i) {
    auto row = x->row(i);
    const float peak = row.maxCoeff();
    row = (row.array() - peak).exp();
    row /= row.sum();
  }
}

double relative_deviation(const Matrix &a, const Matrix &b) {
  const double ref = b.cast<double>().norm();
  const double diff = (a.cast<double>() - b.cast<double>()).norm();
  if (ref == 0.0) return diff;
  return diff / ref;
}

}  // namespace shiftctx
