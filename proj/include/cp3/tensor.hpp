// Copyright 2026 cp3 contributors
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

#include "cp3/geometry.hpp"

#include <initializer_list>

namespace cp3 {

/// Dense row-major storage shared by all tensor values.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Dense 64-bit float array of rank 1 or 2, stored row-major. Rank-1
/// tensors are kept as a single row; shape() reports the declared rank.
struct Tensor {
  Mat values;
  int rank = 2;

  Tensor() = default;
  explicit Tensor(Mat m, int r = 2) : values(std::move(m)), rank(r) {}

  static Tensor scalar(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return Tensor(std::move(m), 2);
  }
  static Tensor row(std::initializer_list<double> vals) {
    Mat m(1, static_cast<Index>(vals.size()));
    Index j = 0;
    for (double v : vals) m(0, j++) = v;
    return Tensor(std::move(m), 1);
  }
  static Tensor zeros(Index r, Index c) { return Tensor(Mat::Zero(r, c), 2); }

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  Index count() const { return values.size(); }
  std::vector<Index> shape() const {
    if (rank == 1) return {values.cols()};
    return {values.rows(), values.cols()};
  }
  bool is_scalar() const { return values.rows() == 1 && values.cols() == 1; }
  double scalar_value() const { return values(0, 0); }
  bool all_finite() const { return values.allFinite(); }
  bool same_shape(const Tensor& o) const {
    return values.rows() == o.values.rows() && values.cols() == o.values.cols();
  }
};

}  // namespace cp3
