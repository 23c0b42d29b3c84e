// shiftctx/tensor.h

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

#ifndef SHIFTCTX_TENSOR_H_
#define SHIFTCTX_TENSOR_H_

#include <cstdint>
#include <random>

#include <Eigen/Core>

namespace shiftctx {

using Matrix =
    Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<float, 1, Eigen::Dynamic>;

/// Seeded generator whose output does not depend on the standard library's
/// distribution implementations.
class WeightRng {
 public:
  explicit WeightRng(uint64_t seed) : engine_(seed) {}

  /// Uniform in [-bound, bound].
  float uniform(float bound) {
    const double u = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return static_cast<float>((2.0 * u - 1.0) * bound);
  }

  /// rows x cols, Glorot-uniform scaled by fan_in + fan_out.
  Matrix glorot(int64_t rows, int64_t cols);
  Matrix uniform_matrix(int64_t rows, int64_t cols, float bound);

 private:
  std::mt19937_64 engine_;
};

/// Parameter-free layer normalization of every row.
Matrix layer_norm(const Matrix &x, float eps = 1e-5f);

/// In-place numerically stable softmax of every row.
void softmax_rows(Matrix *x);

/// ||a - b||_F / ||b||_F (0 when both are empty).
double relative_deviation(const Matrix &a, const Matrix &b);

}  // namespace shiftctx

#endif  // SHIFTCTX_TENSOR_H_
