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

#ifndef CP3_SGM_HPP_
#define CP3_SGM_HPP_

#include <string>

#include "cp3/blocks.hpp"

namespace cp3 {

// Semantic-guided modulation: a dynamic per-category filter applied to
// point-wise features, plus the two simpler conditioning variants used for
// ablations (feature affination, plain concatenation).

struct CategoryLabel {
  Mat one_hot;  // 1 x c_cate, exactly one entry 1, rest 0

  static CategoryLabel of(Index category, Index c_cate);
  Index index() const;
  Index size() const { return one_hot.cols(); }
  void validate() const;
};

struct SgmParams {
  Mat A;                // c_in x c_out, trainable mixing matrix
  MlpParams scale_mlp;  // conditioning vector -> c_in scale vector
  double eps = 1e-8;

  void validate() const;
};

// scale_mlp gets one hidden layer of width c_in with relu; A is zero-mean
// uniform scaled by 1/sqrt(c_in) so unnormalized filter columns stay O(1).
SgmParams make_sgm(Index cond_width, Index c_in, Index c_out, Rng& rng);

// theta(S): the category-relevant scale vector, 1 x c_in.
Tensor scale_vector(const SgmParams& p, const Tensor& cond);

// The normalized filter W, c_in x c_out:
//   B(p,q) = theta_p * A(p,q)
//   W(p,q) = B(p,q) / sqrt(sum_p B(p,q)^2 + eps)
// Column sums of squares land in [0, 1); eps keeps zero columns at zero
// instead of NaN.
Tensor build_filter(const SgmParams& p, const Tensor& cond);

// K_hat = K * W.
Tensor sgm_apply(const Tensor& K, const Tensor& W);

NodeRef scale_vector_node(Graph& g, const SgmParams& p,
                          const std::string& prefix, NodeRef cond);
NodeRef build_filter_node(Graph& g, const SgmParams& p,
                          const std::string& prefix, NodeRef cond);
NodeRef sgm_apply_node(Graph& g, NodeRef K, NodeRef W);

// Feature affination variant: K_hat = sigma(K) .* alpha + beta with alpha
// and beta produced from the conditioning vector, broadcast across rows.
struct AffinationParams {
  MlpParams sigma;      // c -> c pointwise transform of K
  MlpParams alpha_mlp;  // cond -> c
  MlpParams beta_mlp;   // cond -> c

  void validate() const;
};

AffinationParams make_affination(Index cond_width, Index c, Rng& rng);

Tensor affination_apply(const AffinationParams& p, const Tensor& K,
                        const Tensor& cond);
NodeRef affination_node(Graph& g, const AffinationParams& p,
                        const std::string& prefix, NodeRef K, NodeRef cond);

// Concatenation variant: every row of K extended by the conditioning row.
Tensor concat_condition(const Tensor& K, const Tensor& cond);
NodeRef concat_condition_node(Graph& g, NodeRef K, NodeRef cond);

void visit_params(SgmParams& p, const std::string& prefix,
                  const ParamVisitor& fn);
void visit_params(AffinationParams& p, const std::string& prefix,
                  const ParamVisitor& fn);

}  // namespace cp3

#endif  // CP3_SGM_HPP_
