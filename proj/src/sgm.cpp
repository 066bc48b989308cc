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

#include "cp3/sgm.hpp"

#include <cmath>

namespace cp3 {

CategoryLabel CategoryLabel::of(Index category, Index c_cate) {
  if (c_cate < 1 || category < 0 || category >= c_cate)
    throw ValidationError("CategoryLabel: category " +
                          std::to_string(category) + " outside vocabulary " +
                          std::to_string(c_cate));
  CategoryLabel s;
  s.one_hot = Mat::Zero(1, c_cate);
  s.one_hot(0, category) = 1.0;
  return s;
}

Index CategoryLabel::index() const {
  validate();
  for (Index c = 0; c < one_hot.cols(); ++c)
    if (one_hot(0, c) == 1.0) return c;
  return -1;  // unreachable after validate
}

void CategoryLabel::validate() const {
  if (one_hot.rows() != 1 || one_hot.cols() < 1)
    throw ValidationError("CategoryLabel: must be a nonempty row");
  Index ones = 0;
  for (Index c = 0; c < one_hot.cols(); ++c) {
    const double v = one_hot(0, c);
    if (v == 1.0)
      ++ones;
    else if (v != 0.0)
      throw ValidationError("CategoryLabel: entries must be 0 or 1");
  }
  if (ones != 1)
    throw ValidationError("CategoryLabel: exactly one entry must be 1");
}

void SgmParams::validate() const {
  if (!(eps > 0.0)) throw ValidationError("sgm: eps must be positive");
  if (!A.allFinite()) throw ValidationError("sgm: A must be finite");
  scale_mlp.validate("sgm scale_mlp");
  if (scale_mlp.out_width() != A.rows())
    throw ValidationError("sgm: scale vector width " +
                          std::to_string(scale_mlp.out_width()) +
                          " must match A rows " + std::to_string(A.rows()));
}

SgmParams make_sgm(Index cond_width, Index c_in, Index c_out, Rng& rng) {
  SgmParams p;
  p.scale_mlp = make_mlp({cond_width, c_in, c_in}, rng);
  p.A.resize(c_in, c_out);
  const double s = 1.0 / std::sqrt(static_cast<double>(c_in));
  for (Index r = 0; r < c_in; ++r)
    for (Index c = 0; c < c_out; ++c) p.A(r, c) = rng.uniform(-s, s);
  return p;
}

Tensor scale_vector(const SgmParams& p, const Tensor& cond) {
  p.validate();
  if (cond.rows() != 1)
    throw ValidationError("scale_vector: conditioning must be a single row");
  return mlp_forward(p.scale_mlp, cond);
}

Tensor build_filter(const SgmParams& p, const Tensor& cond) {
  const Tensor theta = scale_vector(p, cond);
  Mat b = p.A;
  for (Index r = 0; r < b.rows(); ++r) b.row(r) *= theta.values(0, r);
  Mat w(b.rows(), b.cols());
  for (Index q = 0; q < b.cols(); ++q) {
    const double denom = std::sqrt(b.col(q).squaredNorm() + p.eps);
    w.col(q) = b.col(q) / denom;
  }
  return Tensor{std::move(w)};
}

Tensor sgm_apply(const Tensor& K, const Tensor& W) {
  if (K.cols() != W.rows())
    throw ValidationError("sgm_apply: K width " + std::to_string(K.cols()) +
                          " vs filter rows " + std::to_string(W.rows()));
  return Tensor{K.values * W.values};
}

NodeRef scale_vector_node(Graph& g, const SgmParams& p,
                          const std::string& prefix, NodeRef cond) {
  p.validate();
  return mlp_node(g, p.scale_mlp, prefix + ".scale", cond);
}

NodeRef build_filter_node(Graph& g, const SgmParams& p,
                          const std::string& prefix, NodeRef cond) {
  NodeRef theta = scale_vector_node(g, p, prefix, cond);          // 1 x c_in
  NodeRef a = param_input(g, prefix + ".A", p.A);                 // c_in x c_out
  NodeRef theta_col = g.broadcast_cols(g.transpose(theta), p.A.cols());
  NodeRef b = g.mul(theta_col, a);
  NodeRef col_sq = g.sum_rows(g.mul(b, b));                       // 1 x c_out
  NodeRef denom = g.sqrt(g.add_scalar(col_sq, p.eps));
  return g.div(b, g.broadcast_rows(denom, p.A.rows()));
}

NodeRef sgm_apply_node(Graph& g, NodeRef K, NodeRef W) {
  return g.matmul(K, W);
}

void AffinationParams::validate() const {
  sigma.validate("affination sigma");
  alpha_mlp.validate("affination alpha");
  beta_mlp.validate("affination beta");
  if (sigma.in_width() != sigma.out_width())
    throw ValidationError("affination: sigma must preserve width");
  if (alpha_mlp.out_width() != sigma.out_width() ||
      beta_mlp.out_width() != sigma.out_width())
    throw ValidationError("affination: alpha/beta width must match features");
}

AffinationParams make_affination(Index cond_width, Index c, Rng& rng) {
  AffinationParams p;
  p.sigma = make_mlp({c, c}, rng);
  p.alpha_mlp = make_mlp({cond_width, c}, rng);
  p.beta_mlp = make_mlp({cond_width, c}, rng);
  return p;
}

Tensor affination_apply(const AffinationParams& p, const Tensor& K,
                        const Tensor& cond) {
  p.validate();
  const Tensor s = mlp_forward(p.sigma, K);
  const Tensor alpha = mlp_forward(p.alpha_mlp, cond);
  const Tensor beta = mlp_forward(p.beta_mlp, cond);
  Mat out = s.values;
  for (Index r = 0; r < out.rows(); ++r)
    out.row(r) = out.row(r).cwiseProduct(alpha.values.row(0)) +
                 beta.values.row(0);
  return Tensor{std::move(out)};
}

NodeRef affination_node(Graph& g, const AffinationParams& p,
                        const std::string& prefix, NodeRef K, NodeRef cond) {
  p.validate();
  const Index n = g.value(K).rows();
  NodeRef s = mlp_node(g, p.sigma, prefix + ".sigma", K);
  NodeRef alpha = mlp_node(g, p.alpha_mlp, prefix + ".alpha", cond);
  NodeRef beta = mlp_node(g, p.beta_mlp, prefix + ".beta", cond);
  return g.add(g.mul(s, g.broadcast_rows(alpha, n)),
               g.broadcast_rows(beta, n));
}

Tensor concat_condition(const Tensor& K, const Tensor& cond) {
  if (cond.rows() != 1)
    throw ValidationError("concat_condition: conditioning must be one row");
  Mat out(K.rows(), K.cols() + cond.cols());
  out.leftCols(K.cols()) = K.values;
  out.rightCols(cond.cols()) = cond.values.replicate(K.rows(), 1);
  return Tensor{std::move(out)};
}

NodeRef concat_condition_node(Graph& g, NodeRef K, NodeRef cond) {
  return g.concat_cols(K, g.broadcast_rows(cond, g.value(K).rows()));
}

void visit_params(SgmParams& p, const std::string& prefix,
                  const ParamVisitor& fn) {
  fn(prefix + ".A", p.A);
  visit_params(p.scale_mlp, prefix + ".scale", fn);
}

void visit_params(AffinationParams& p, const std::string& prefix,
                  const ParamVisitor& fn) {
  visit_params(p.sigma, prefix + ".sigma", fn);
  visit_params(p.alpha_mlp, prefix + ".alpha", fn);
  visit_params(p.beta_mlp, prefix + ".beta", fn);
}

}  // namespace cp3
