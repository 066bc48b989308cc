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

#include "cp3/blocks.hpp"

#include <cmath>

namespace cp3 {

Index MlpParams::in_width() const {
  return layers.empty() ? 0 : layers.front().W.rows();
}

Index MlpParams::out_width() const {
  return layers.empty() ? 0 : layers.back().W.cols();
}

void MlpParams::validate(const char* what) const {
  if (layers.empty())
    throw ValidationError(std::string(what) + ": empty MLP");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const MlpLayer& l = layers[i];
    if (l.b.rows() != 1 || l.b.cols() != l.W.cols())
      throw ValidationError(std::string(what) + ": layer " +
                            std::to_string(i) + " bias shape");
    if (i > 0 && layers[i - 1].W.cols() != l.W.rows())
      throw ValidationError(std::string(what) + ": layer " +
                            std::to_string(i) + " width chain broken");
  }
}

MlpParams make_mlp(const std::vector<Index>& widths, Rng& rng,
                   bool relu_hidden) {
  if (widths.size() < 2) throw ValidationError("make_mlp: need >= 2 widths");
  MlpParams p;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    MlpLayer l;
    const Index fan_in = widths[i];
    const Index fan_out = widths[i + 1];
    if (fan_in < 1 || fan_out < 1)
      throw ValidationError("make_mlp: nonpositive width");
    const double s = 1.0 / std::sqrt(static_cast<double>(fan_in));
    l.W.resize(fan_in, fan_out);
    for (Index r = 0; r < fan_in; ++r)
      for (Index c = 0; c < fan_out; ++c) l.W(r, c) = rng.uniform(-s, s);
    l.b = Mat::Zero(1, fan_out);
    l.relu = relu_hidden && (i + 2 < widths.size());
    p.layers.push_back(std::move(l));
  }
  return p;
}

Tensor mlp_forward(const MlpParams& p, const Tensor& X) {
  p.validate("mlp_forward");
  if (X.cols() != p.in_width())
    throw ValidationError("mlp_forward: input width " +
                          std::to_string(X.cols()) + ", expected " +
                          std::to_string(p.in_width()));
  Mat h = X.values;
  for (const MlpLayer& l : p.layers) {
    // Product first, bias second: keeps this path bitwise-equal to the
    // recorded graph, which adds the broadcast bias as a separate op.
    Mat z;
    z.noalias() = h * l.W;
    z.rowwise() += l.b.row(0);
    if (l.relu) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return Tensor{std::move(h)};
}

NodeRef param_input(Graph& g, const std::string& name, const Mat& value) {
  if (g.has_input(name)) return NodeRef{g.input_ids().at(name)};
  return g.input(name, Tensor{value});
}

NodeRef mlp_node(Graph& g, const MlpParams& p, const std::string& prefix,
                 NodeRef X) {
  p.validate(prefix.c_str());
  NodeRef h = X;
  const Index n = g.value(X).rows();
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    const MlpLayer& l = p.layers[i];
    NodeRef w = param_input(g, prefix + ".w" + std::to_string(i), l.W);
    NodeRef b = param_input(g, prefix + ".b" + std::to_string(i), l.b);
    h = g.add(g.matmul(h, w), g.broadcast_rows(b, n));
    if (l.relu) h = g.relu(h);
  }
  return h;
}

Tensor pointnet_global(const MlpParams& p, const Tensor& feats) {
  Tensor h = mlp_forward(p, feats);
  Mat out(1, h.cols());
  out.row(0) = h.values.colwise().maxCoeff();
  return Tensor{std::move(out)};
}

NodeRef pointnet_global_node(Graph& g, const MlpParams& p,
                             const std::string& prefix, NodeRef X) {
  return g.max_rows(mlp_node(g, p, prefix, X));
}

void AttentionParams::validate() const {
  if (k < 1) throw ValidationError("attention: k must be >= 1");
  if (Wq.cols() != Wk.cols() || Wk.cols() != Wv.cols())
    throw ValidationError("attention: projection widths differ");
  pos_mlp.validate("attention pos_mlp");
  logits_mlp.validate("attention logits_mlp");
  out_mlp.validate("attention out_mlp");
  if (pos_mlp.in_width() != 3)
    throw ValidationError("attention: pos_mlp must take 3 coordinates");
  if (pos_mlp.out_width() != Wq.cols() ||
      logits_mlp.in_width() != Wq.cols() ||
      logits_mlp.out_width() != Wq.cols() ||
      out_mlp.in_width() != Wq.cols())
    throw ValidationError("attention: internal widths must all equal the "
                          "projection width");
  if (out_mlp.out_width() != Wq.rows())
    throw ValidationError("attention: out_mlp must map back to the query "
                          "width for the residual");
}

AttentionParams make_attention(Index c_q, Index c_kv, Index c, Index k,
                               Rng& rng) {
  AttentionParams p;
  p.k = k;
  auto init = [&rng](Index r, Index cc) {
    Mat w(r, cc);
    const double s = 1.0 / std::sqrt(static_cast<double>(r));
    for (Index i = 0; i < r; ++i)
      for (Index j = 0; j < cc; ++j) w(i, j) = rng.uniform(-s, s);
    return w;
  };
  p.Wq = init(c_q, c);
  p.Wk = init(c_kv, c);
  p.Wv = init(c_kv, c);
  p.pos_mlp = make_mlp({3, c}, rng);
  p.logits_mlp = make_mlp({c, c, c}, rng);
  p.out_mlp = make_mlp({c, c_q}, rng);
  return p;
}

NodeRef vector_attention(Graph& g, const AttentionParams& p,
                         const std::string& prefix, NodeRef P, NodeRef Q,
                         NodeRef Kfeat) {
  p.validate();
  const Mat& coords = g.value(P).values;
  const Index n = coords.rows();
  if (coords.cols() != 3)
    throw ValidationError("vector_attention: P must be N x 3");
  if (g.value(Q).rows() != n || g.value(Kfeat).rows() != n)
    throw ValidationError("vector_attention: row counts differ");
  if (g.value(Q).cols() != p.Wq.rows() || g.value(Kfeat).cols() != p.Wk.rows())
    throw ValidationError("vector_attention: feature widths do not match "
                          "projections");
  if (p.k > n)
    throw ValidationError("vector_attention: k=" + std::to_string(p.k) +
                          " exceeds N=" + std::to_string(n));

  PointCloud pc;
  pc.points = coords;
  SpatialIndex index(pc);
  std::vector<Index> nbr(static_cast<std::size_t>(n * p.k));
  std::vector<Index> rep(static_cast<std::size_t>(n * p.k));
  for (Index j = 0; j < n; ++j) {
    const std::vector<Index> kn = index.knn(coords.row(j), p.k);
    for (Index t = 0; t < p.k; ++t) {
      nbr[static_cast<std::size_t>(j * p.k + t)] = kn[static_cast<std::size_t>(t)];
      rep[static_cast<std::size_t>(j * p.k + t)] = j;
    }
  }

  NodeRef wq = param_input(g, prefix + ".wq", p.Wq);
  NodeRef wk = param_input(g, prefix + ".wk", p.Wk);
  NodeRef wv = param_input(g, prefix + ".wv", p.Wv);
  NodeRef q = g.matmul(Q, wq);
  NodeRef kf = g.matmul(Kfeat, wk);
  NodeRef v = g.matmul(Kfeat, wv);

  NodeRef rel = g.sub(g.gather_rows(P, rep), g.gather_rows(P, nbr));
  NodeRef pos = mlp_node(g, p.pos_mlp, prefix + ".pos", rel);
  NodeRef pre = g.add(g.sub(g.gather_rows(q, rep), g.gather_rows(kf, nbr)), pos);
  NodeRef w = g.softmax_groups(mlp_node(g, p.logits_mlp, prefix + ".att", pre),
                               p.k);
  NodeRef agg = g.sum_groups(g.mul(w, g.add(g.gather_rows(v, nbr), pos)), p.k);
  return g.add(mlp_node(g, p.out_mlp, prefix + ".out", agg), Q);
}

Tensor vector_attention(const AttentionParams& p, const PointCloud& coords,
                        const Tensor& Q, const Tensor& Kfeat) {
  Graph g;
  NodeRef pr = g.constant(Tensor{Mat(coords.points)});
  NodeRef qr = g.constant(Q);
  NodeRef kr = g.constant(Kfeat);
  NodeRef out = vector_attention(g, p, "attn", pr, qr, kr);
  return g.value(out);
}

NodeRef cd_l2_node(Graph& g, NodeRef X, NodeRef Y) {
  const Index n = g.value(X).rows();
  const Index m = g.value(Y).rows();
  if (g.value(X).cols() != g.value(Y).cols())
    throw ValidationError("cd_l2_node: dimensionality differs");
  if (n < 1 || m < 1) throw ValidationError("cd_l2_node: empty operand");
  NodeRef xs = g.sum_cols(g.mul(X, X));              // N x 1
  NodeRef ys = g.sum_cols(g.mul(Y, Y));              // M x 1
  NodeRef cross = g.matmul(X, g.transpose(Y));       // N x M
  NodeRef d = g.sub(g.add(g.broadcast_cols(xs, m),
                          g.transpose(g.broadcast_cols(ys, n))),
                    g.scale(cross, 2.0));
  NodeRef row_min = g.scale(g.max_cols(g.scale(d, -1.0)), -1.0);  // N x 1
  NodeRef col_min = g.scale(g.max_rows(g.scale(d, -1.0)), -1.0);  // 1 x M
  return g.add(g.scale(g.sum_all(row_min), 1.0 / static_cast<double>(n)),
               g.scale(g.sum_all(col_min), 1.0 / static_cast<double>(m)));
}

void visit_params(MlpParams& p, const std::string& prefix,
                  const ParamVisitor& fn) {
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    fn(prefix + ".w" + std::to_string(i), p.layers[i].W);
    fn(prefix + ".b" + std::to_string(i), p.layers[i].b);
  }
}

void visit_params(AttentionParams& p, const std::string& prefix,
                  const ParamVisitor& fn) {
  fn(prefix + ".wq", p.Wq);
  fn(prefix + ".wk", p.Wk);
  fn(prefix + ".wv", p.Wv);
  visit_params(p.pos_mlp, prefix + ".pos", fn);
  visit_params(p.logits_mlp, prefix + ".att", fn);
  visit_params(p.out_mlp, prefix + ".out", fn);
}

}  // namespace cp3
