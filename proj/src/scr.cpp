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

#include "cp3/scr.hpp"

#include <algorithm>

namespace cp3 {

Modulation modulation_from_string(const std::string& s) {
  if (s == "sgm") return Modulation::kSgm;
  if (s == "affination") return Modulation::kAffination;
  if (s == "concat") return Modulation::kConcat;
  if (s == "none") return Modulation::kNone;
  throw ValidationError("unknown modulation '" + s + "'");
}

Semantics semantics_from_string(const std::string& s) {
  if (s == "category") return Semantics::kCategory;
  if (s == "global") return Semantics::kGlobal;
  if (s == "category+global") return Semantics::kCategoryGlobal;
  throw ValidationError("unknown semantics '" + s + "'");
}

std::string to_string(Modulation m) {
  switch (m) {
    case Modulation::kSgm: return "sgm";
    case Modulation::kAffination: return "affination";
    case Modulation::kConcat: return "concat";
    case Modulation::kNone: return "none";
  }
  return "?";
}

std::string to_string(Semantics s) {
  switch (s) {
    case Semantics::kCategory: return "category";
    case Semantics::kGlobal: return "global";
    case Semantics::kCategoryGlobal: return "category+global";
  }
  return "?";
}

void RefinementUnit::validate() const {
  if (u < 1) throw ValidationError("refinement unit: u must be >= 1");
  if (k_list.empty())
    throw ValidationError("refinement unit: k_list must be nonempty");
  for (std::size_t i = 1; i < k_list.size(); ++i)
    if (k_list[i] <= k_list[i - 1])
      throw ValidationError("refinement unit: k_list must be strictly "
                            "increasing");
  if (attn.size() != k_list.size())
    throw ValidationError("refinement unit: one attention block per scale");
  q_mlp.validate("unit q_mlp");
  split_mlp.validate("unit split_mlp");
  fuse_mlp.validate("unit fuse_mlp");
  delta_head.validate("unit delta_head");
  if (delta_head.out_width() != 3)
    throw ValidationError("refinement unit: delta head must emit xyz");
}

Index ScrNet::upsample_factor() const {
  Index f = 1;
  for (const auto& unit : units) f *= unit.u;
  return f;
}

void ScrNet::validate() const {
  if (units.empty()) throw ValidationError("scr: no units");
  k1_proj.validate("scr k1_proj");
  for (const auto& unit : units) unit.validate();
}

ScrNet make_scr(const ScrConfig& cfg, Rng& rng) {
  if (cfg.c < 1 || cfg.global_width < 1 || cfg.pointwise_width < 1)
    throw ValidationError("make_scr: widths must be positive");
  if (cfg.multipliers.empty())
    throw ValidationError("make_scr: no multipliers");
  if (cfg.c_cate < 1) throw ValidationError("make_scr: empty vocabulary");

  Index cond_width = 0;
  switch (cfg.semantics) {
    case Semantics::kCategory: cond_width = cfg.c_cate; break;
    case Semantics::kGlobal: cond_width = cfg.global_width; break;
    case Semantics::kCategoryGlobal:
      cond_width = cfg.c_cate + cfg.global_width;
      break;
  }

  ScrNet net;
  net.c_cate = cfg.c_cate;
  net.modulation = cfg.modulation;
  net.semantics = cfg.semantics;
  net.k1_proj = make_mlp({cfg.pointwise_width, cfg.c}, rng);

  for (std::size_t i = 0; i < cfg.multipliers.size(); ++i) {
    RefinementUnit unit;
    unit.u = cfg.multipliers[i];
    unit.k_list = cfg.k_list;
    unit.use_sgm = cfg.modulation != Modulation::kNone &&
                   (!cfg.sgm_first_only || i == 0);
    Index kv_width = cfg.c;
    if (unit.use_sgm) {
      switch (cfg.modulation) {
        case Modulation::kSgm:
          unit.sgm = make_sgm(cond_width, cfg.c, cfg.c, rng);
          break;
        case Modulation::kAffination:
          unit.affination = make_affination(cond_width, cfg.c, rng);
          break;
        case Modulation::kConcat:
          kv_width = cfg.c + cond_width;
          break;
        case Modulation::kNone:
          break;
      }
    }
    unit.q_mlp = make_mlp({3 + cfg.global_width, cfg.c, cfg.c}, rng);
    for (Index k : cfg.k_list)
      unit.attn.push_back(make_attention(cfg.c, kv_width, cfg.c, k, rng));
    const Index fused = cfg.c * static_cast<Index>(cfg.k_list.size());
    unit.split_mlp = make_mlp({fused, unit.u * fused}, rng);
    unit.fuse_mlp = make_mlp({fused, cfg.c, cfg.c}, rng);
    unit.delta_head.layers.push_back(
        MlpLayer{Mat::Zero(cfg.c, 3), Mat::Zero(1, 3), false});
    net.units.push_back(std::move(unit));
  }
  net.validate();
  return net;
}

NodeRef pointwise_split_node(Graph& g, const MlpParams& p,
                             const std::string& prefix, NodeRef H, Index u) {
  if (u < 1) throw ValidationError("pointwise_split: u must be >= 1");
  const Index n = g.value(H).rows();
  const Index w = g.value(H).cols();
  if (p.out_width() != u * w)
    throw ValidationError("pointwise_split: MLP must emit u*width values");
  NodeRef y = mlp_node(g, p, prefix, H);  // n x (u*w)
  return g.reshape(y, u * n, w);          // row j*u+t from input row j
}

Tensor pointwise_split(const MlpParams& p, const Tensor& H, Index u) {
  if (u < 1) throw ValidationError("pointwise_split: u must be >= 1");
  if (p.out_width() != u * H.cols())
    throw ValidationError("pointwise_split: MLP must emit u*width values");
  const Tensor y = mlp_forward(p, H);
  Tensor out;
  out.values = Eigen::Map<const Mat>(y.values.data(), u * H.rows(), H.cols());
  return out;
}

MpdNodes mpd_node(Graph& g, const RefinementUnit& unit,
                  const std::string& prefix, NodeRef P, NodeRef K_hat,
                  NodeRef global) {
  unit.validate();
  const Index n = g.value(P).rows();
  NodeRef q = mlp_node(g, unit.q_mlp, prefix + ".q",
                       g.concat_cols(P, g.broadcast_rows(global, n)));
  NodeRef fused{-1};
  for (std::size_t s = 0; s < unit.attn.size(); ++s) {
    NodeRef h = vector_attention(g, unit.attn[s],
                                 prefix + ".attn" + std::to_string(s), P, q,
                                 K_hat);
    fused = (s == 0) ? h : g.concat_cols(fused, h);
  }
  NodeRef split = pointwise_split_node(g, unit.split_mlp, prefix + ".split",
                                       fused, unit.u);
  NodeRef k_next = mlp_node(g, unit.fuse_mlp, prefix + ".fuse", split);
  NodeRef delta = mlp_node(g, unit.delta_head, prefix + ".delta", k_next);
  std::vector<Index> rep(static_cast<std::size_t>(n * unit.u));
  for (Index j = 0; j < n; ++j)
    for (Index t = 0; t < unit.u; ++t)
      rep[static_cast<std::size_t>(j * unit.u + t)] = j;
  MpdNodes out;
  out.p_next = g.add(g.gather_rows(P, rep), delta);
  out.k_next = k_next;
  return out;
}

ScrBuild scr_node(Graph& g, const ScrNet& net, const std::string& prefix,
                  const PointCloud& coarse, const Tensor& pointwise,
                  const Tensor& global, const Tensor& cond) {
  net.validate();
  if (coarse.size() != pointwise.rows())
    throw ValidationError("scr: coarse size and point-wise feature rows "
                          "differ");
  if (pointwise.cols() != net.k1_proj.in_width())
    throw ValidationError("scr: point-wise feature width " +
                          std::to_string(pointwise.cols()) + ", expected " +
                          std::to_string(net.k1_proj.in_width()));
  NodeRef p = g.constant(Tensor{Mat(coarse.points)});
  NodeRef pw = g.constant(pointwise);
  NodeRef glob = g.constant(global);
  NodeRef cnd = g.constant(cond);
  NodeRef k = mlp_node(g, net.k1_proj, prefix + ".k1", pw);

  ScrBuild build;
  for (std::size_t i = 0; i < net.units.size(); ++i) {
    const RefinementUnit& unit = net.units[i];
    const std::string uprefix = prefix + ".u" + std::to_string(i);
    NodeRef k_hat = k;
    if (unit.use_sgm) {
      switch (net.modulation) {
        case Modulation::kSgm: {
          NodeRef w = build_filter_node(g, unit.sgm, uprefix + ".sgm", cnd);
          k_hat = sgm_apply_node(g, k, w);
          break;
        }
        case Modulation::kAffination:
          k_hat = affination_node(g, unit.affination, uprefix + ".aff", k,
                                  cnd);
          break;
        case Modulation::kConcat:
          k_hat = concat_condition_node(g, k, cnd);
          break;
        case Modulation::kNone:
          break;
      }
    }
    MpdNodes step = mpd_node(g, unit, uprefix, p, k_hat, glob);
    p = step.p_next;
    k = step.k_next;
    build.clouds.push_back(p);
  }
  return build;
}

Tensor resolve_condition(const ScrNet& net, const CategoryLabel& label,
                         const Tensor& global, LabelMode mode, Rng* rng) {
  label.validate();
  if (label.size() != net.c_cate)
    throw ValidationError("scr: label width " + std::to_string(label.size()) +
                          " vs vocabulary " + std::to_string(net.c_cate));
  CategoryLabel used = label;
  if (mode == LabelMode::kRandom && net.c_cate > 1) {
    if (rng == nullptr)
      throw ValidationError("scr: random label mode needs an rng");
    Index other = static_cast<Index>(rng->uniform_int(
        static_cast<std::uint64_t>(net.c_cate - 1)));
    if (other >= label.index()) ++other;
    used = CategoryLabel::of(other, net.c_cate);
  }
  switch (net.semantics) {
    case Semantics::kCategory:
      return Tensor{used.one_hot};
    case Semantics::kGlobal:
      return global;
    case Semantics::kCategoryGlobal: {
      Mat row(1, used.one_hot.cols() + global.cols());
      row.leftCols(used.one_hot.cols()) = used.one_hot;
      row.rightCols(global.cols()) = global.values;
      return Tensor{std::move(row)};
    }
  }
  throw ValidationError("scr: bad semantics");
}

std::vector<PointCloud> scr_forward(const ScrNet& net, const PointCloud& coarse,
                                    const Tensor& pointwise,
                                    const Tensor& global,
                                    const CategoryLabel& label, LabelMode mode,
                                    Rng* rng) {
  const Tensor cond = resolve_condition(net, label, global, mode, rng);
  Graph g;
  ScrBuild build = scr_node(g, net, "scr", coarse, pointwise, global, cond);
  std::vector<PointCloud> out;
  for (NodeRef ref : build.clouds) {
    PointCloud pc;
    pc.points = g.value(ref).values;
    pc.category = coarse.category;
    out.push_back(std::move(pc));
  }
  return out;
}

void visit_params(RefinementUnit& unit, const std::string& prefix,
                  Modulation modulation, const ParamVisitor& fn) {
  if (unit.use_sgm) {
    if (modulation == Modulation::kSgm)
      visit_params(unit.sgm, prefix + ".sgm", fn);
    else if (modulation == Modulation::kAffination)
      visit_params(unit.affination, prefix + ".aff", fn);
  }
  visit_params(unit.q_mlp, prefix + ".q", fn);
  for (std::size_t s = 0; s < unit.attn.size(); ++s)
    visit_params(unit.attn[s], prefix + ".attn" + std::to_string(s), fn);
  visit_params(unit.split_mlp, prefix + ".split", fn);
  visit_params(unit.fuse_mlp, prefix + ".fuse", fn);
  visit_params(unit.delta_head, prefix + ".delta", fn);
}

void visit_params(ScrNet& net, const std::string& prefix,
                  const ParamVisitor& fn) {
  visit_params(net.k1_proj, prefix + ".k1", fn);
  for (std::size_t i = 0; i < net.units.size(); ++i)
    visit_params(net.units[i], prefix + ".u" + std::to_string(i),
                 net.modulation, fn);
}

}  // namespace cp3
