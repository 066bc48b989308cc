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

#ifndef CP3_BLOCKS_HPP_
#define CP3_BLOCKS_HPP_

#include <functional>
#include <string>
#include <vector>

#include "cp3/geometry.hpp"
#include "cp3/graph.hpp"

namespace cp3 {

// Reusable network sub-blocks. Every block exists in two forms: a plain
// evaluator on Tensors (no tape, for oracles and frozen passes) and a graph
// builder (suffix _node) that registers the block's parameters as named graph
// inputs so gradients can reach them. Builder input names are exactly the
// names produced by visit_params for the same prefix; training relies on
// that correspondence.

struct MlpLayer {
  Mat W;        // fan_in x fan_out
  Mat b;        // 1 x fan_out
  bool relu = false;
};

struct MlpParams {
  std::vector<MlpLayer> layers;

  Index in_width() const;
  Index out_width() const;
  // Consecutive layer dimensions must chain; throws ValidationError naming
  // `what` otherwise.
  void validate(const char* what) const;
};

// Widths = {in, hidden..., out}. Weights uniform in +-1/sqrt(fan_in), zero
// bias; relu on every layer but the last when relu_hidden.
MlpParams make_mlp(const std::vector<Index>& widths, Rng& rng,
                   bool relu_hidden = true);

Tensor mlp_forward(const MlpParams& p, const Tensor& X);
NodeRef mlp_node(Graph& g, const MlpParams& p, const std::string& prefix,
                 NodeRef X);

// Per-point MLP then channel-wise max over rows: permutation-invariant
// 1 x out_width summary of a feature matrix.
Tensor pointnet_global(const MlpParams& p, const Tensor& feats);
NodeRef pointnet_global_node(Graph& g, const MlpParams& p,
                             const std::string& prefix, NodeRef X);

struct AttentionParams {
  Mat Wq;               // c_q x c
  Mat Wk;               // c_kv x c
  Mat Wv;               // c_kv x c
  MlpParams pos_mlp;    // 3 -> c, encodes coordinate offsets
  MlpParams logits_mlp; // c -> c, produces per-channel attention logits
  MlpParams out_mlp;    // c -> c_q so the residual add types
  Index k = 12;

  void validate() const;
};

AttentionParams make_attention(Index c_q, Index c_kv, Index c, Index k,
                               Rng& rng);

// Neighborhood vector attention. For each point j over its k nearest
// neighbors n (self included, knn ties by index):
//   logits = logits_mlp(q_j - k_n + pos(P_j - P_n))
//   w      = per-channel softmax over the k neighbors
//   out_j  = out_mlp(sum_n w * (v_n + pos(P_j - P_n))) + Q_j
// Neighborhoods are found on the concrete coordinates bound to P at build
// time and stay frozen in the tape; coordinates remain differentiable
// through the pos branch.
NodeRef vector_attention(Graph& g, const AttentionParams& p,
                         const std::string& prefix, NodeRef P, NodeRef Q,
                         NodeRef Kfeat);
Tensor vector_attention(const AttentionParams& p, const PointCloud& coords,
                        const Tensor& Q, const Tensor& Kfeat);

// Differentiable symmetric chamfer (squared-distance form): mean over rows of
// X of the min squared distance into Y, plus the same with roles swapped.
// Pairwise distances expand as |x|^2 + |y|^2 - 2 x.y; mins run through the
// max reduction so the tape stays piecewise linear.
NodeRef cd_l2_node(Graph& g, NodeRef X, NodeRef Y);

// Deterministic traversal of every trainable tensor under a stable name.
using ParamVisitor = std::function<void(const std::string&, Mat&)>;
void visit_params(MlpParams& p, const std::string& prefix,
                  const ParamVisitor& fn);
void visit_params(AttentionParams& p, const std::string& prefix,
                  const ParamVisitor& fn);

// Graph input for a parameter tensor; reuses the existing input when the
// name is already registered (shared parameters applied twice).
NodeRef param_input(Graph& g, const std::string& name, const Mat& value);

}  // namespace cp3

#endif  // CP3_BLOCKS_HPP_
