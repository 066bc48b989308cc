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

#include "cp3/tensor.hpp"

#include <cmath>
#include <map>
#include <string>
#include <vector>

namespace cp3 {

/// Thrown at record time when an op's input shapes do not line up.
class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeRef {
  int id = -1;
};

/// A recorded, acyclic sequence of primitive tensor ops.
///
/// Node values are evaluated eagerly while the graph is built, so builders
/// can inspect intermediate values (neighborhood selection reads predicted
/// coordinates). Re-running `forward` with new input values replays the
/// same tape: gather indices recorded at build time stay fixed, while
/// data-dependent choices inside ops (argmax of a max-reduce) are
/// recomputed. Every op validates shapes at record time and traps
/// non-finite results.
class Graph {
 public:
  enum class Op {
    kInput,
    kConstant,
    kMatMul,
    kTranspose,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kScale,      // y = c * x
    kAddScalar,  // y = x + c
    kRelu,
    kSqrt,
    kSoftmaxRows,    // per row over columns
    kSoftmaxGroups,  // per column within consecutive row groups
    kConcatCols,
    kConcatRows,
    kGatherRows,
    kSliceCols,
    kBroadcastRows,  // 1 x C -> n x C
    kBroadcastCols,  // N x 1 -> N x m
    kReshape,
    kSumAll,
    kSumRows,  // N x C -> 1 x C
    kSumCols,  // N x C -> N x 1
    kSumGroups,
    kMaxRows,  // N x C -> 1 x C, ties -> lowest row index
    kMaxCols,  // N x C -> N x 1, ties -> lowest column index
  };

  NodeRef input(const std::string& name, Tensor initial);
  NodeRef constant(Tensor value);

  NodeRef matmul(NodeRef a, NodeRef b);
  NodeRef transpose(NodeRef a);
  NodeRef add(NodeRef a, NodeRef b);
  NodeRef sub(NodeRef a, NodeRef b);
  NodeRef mul(NodeRef a, NodeRef b);
  NodeRef div(NodeRef a, NodeRef b);
  NodeRef scale(NodeRef a, double c);
  NodeRef add_scalar(NodeRef a, double c);
  NodeRef relu(NodeRef a);
  NodeRef sqrt(NodeRef a);
  NodeRef softmax_rows(NodeRef a);
  NodeRef softmax_groups(NodeRef a, Index group);
  NodeRef concat_cols(NodeRef a, NodeRef b);
  NodeRef concat_rows(NodeRef a, NodeRef b);
  NodeRef gather_rows(NodeRef a, std::vector<Index> indices);
  NodeRef slice_cols(NodeRef a, Index begin, Index len);
  NodeRef broadcast_rows(NodeRef a, Index n);
  NodeRef broadcast_cols(NodeRef a, Index m);
  NodeRef reshape(NodeRef a, Index r, Index c);
  NodeRef sum_all(NodeRef a);
  NodeRef sum_rows(NodeRef a);
  NodeRef sum_cols(NodeRef a);
  NodeRef sum_groups(NodeRef a, Index group);
  NodeRef max_rows(NodeRef a);
  NodeRef max_cols(NodeRef a);

  /// Register a named output.
  void mark_output(const std::string& name, NodeRef r);

  /// Current value of any node.
  const Tensor& value(NodeRef r) const;

  /// Rebind the given inputs (missing names keep their current values) and
  /// re-evaluate the whole tape. Returns all named outputs.
  std::map<std::string, Tensor> forward(
      const std::map<std::string, Tensor>& inputs);

  /// Reverse-mode gradients of the named scalar output with respect to
  /// every input, after re-binding `inputs` and running forward.
  std::map<std::string, Tensor> gradients(
      const std::map<std::string, Tensor>& inputs,
      const std::string& seed_output);

  /// Gradients with the currently bound input values.
  std::map<std::string, Tensor> gradients(const std::string& seed_output);

  /// Smallest distance to a relu/max kink seen during the last evaluation:
  /// min over relu inputs of |x| and over max-reduces of the top-two gap.
  double last_kink_margin() const { return last_kink_margin_; }

  // Remember the margin whose magnitude is smallest; the signed value (or
  // the top-two gap for max reductions) is what gradcheck compares across
  // perturbed passes.
  void note_kink_margin(double m) {
    if (std::abs(m) < std::abs(last_kink_margin_)) last_kink_margin_ = m;
  }

  const std::map<std::string, int>& input_ids() const { return inputs_; }
  bool has_input(const std::string& name) const { return inputs_.count(name) > 0; }
  const Tensor& input_value(const std::string& name) const;

 private:
  struct Node {
    Op op;
    int a = -1;
    int b = -1;
    double c = 0.0;               // scale / add_scalar constant
    Index i0 = 0, i1 = 0;         // op-specific sizes (group, slice, target dims)
    std::vector<Index> indices;   // gather indices
    Tensor value;
    Mat grad;
    std::vector<Index> argmax;    // per output element, recomputed each forward
  };

  NodeRef push(Node n, const char* opname);
  void eval(Node& n);
  void backprop(Node& n);
  void check_ref(NodeRef r, const char* opname) const;

  std::vector<Node> nodes_;
  std::map<std::string, int> inputs_;
  std::map<std::string, int> outputs_;
  double last_kink_margin_ = std::numeric_limits<double>::infinity();
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  long checked = 0;
  long skipped = 0;           // coordinates excluded by the kink policy
  std::string worst;          // "name[i,j]" of the worst coordinate
};

/// Central-difference check of every coordinate of the listed inputs (all
/// inputs when `names` is empty) against the reverse-mode gradients.
/// Per-coordinate step is h * max(1, |x|); coordinates whose perturbed
/// evaluations come within 10*h of a relu/max kink are excluded and counted
/// in `skipped`. Relative error is |a - n| / max(1e-12, |a|, |n|).
GradCheckResult gradcheck(Graph& g, const std::string& seed_output,
                          double h = 1e-6,
                          const std::vector<std::string>& names = {});

}  // namespace cp3
