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

#ifndef CP3_SCR_HPP_
#define CP3_SCR_HPP_

#include <string>
#include <vector>

#include "cp3/generation.hpp"
#include "cp3/sgm.hpp"

namespace cp3 {

// Semantic conditional refinement: a stack of units, each modulating the
// point-wise feature by category (or other conditioning) and then running a
// multi-scale point deconvolution that upsamples by an integer multiplier
// and predicts coordinate deltas.

enum class Modulation { kSgm, kAffination, kConcat, kNone };
enum class Semantics { kCategory, kGlobal, kCategoryGlobal };
enum class LabelMode { kCorrect, kRandom };

Modulation modulation_from_string(const std::string& s);
Semantics semantics_from_string(const std::string& s);
std::string to_string(Modulation m);
std::string to_string(Semantics s);

struct RefinementUnit {
  Index u = 1;                        // upsample multiplier
  std::vector<Index> k_list;          // strictly increasing neighborhood sizes
  bool use_sgm = true;                // modulate this unit's features
  SgmParams sgm;                      // used when modulation == kSgm
  AffinationParams affination;        // used when modulation == kAffination
  MlpParams q_mlp;                    // (3 + g) -> c query features
  std::vector<AttentionParams> attn;  // one per entry of k_list
  MlpParams split_mlp;                // w -> u*w point-wise splitting
  MlpParams fuse_mlp;                 // w -> c fusion, w = c * |k_list|
  MlpParams delta_head;               // c -> 3 linear, zero-initialized

  void validate() const;
};

struct ScrNet {
  std::vector<RefinementUnit> units;
  MlpParams k1_proj;  // generator point-wise width -> c entry projection
  Index c_cate = 0;
  Modulation modulation = Modulation::kSgm;
  Semantics semantics = Semantics::kCategory;

  Index upsample_factor() const;  // product of unit multipliers
  void validate() const;
};

struct ScrConfig {
  Index c = 32;                        // feature width inside units
  Index global_width = 32;             // must match the generator
  Index pointwise_width = 32;          // must match the generator
  Index c_cate = 4;
  std::vector<Index> multipliers = {1, 2};
  std::vector<Index> k_list = {12, 24};
  Modulation modulation = Modulation::kSgm;
  Semantics semantics = Semantics::kCategory;
  bool sgm_first_only = true;          // modulate only the first unit
};

ScrNet make_scr(const ScrConfig& cfg, Rng& rng);

// Expand each feature row into u rows through an MLP emitting u*width
// values; output row j*u+t comes only from input row j.
NodeRef pointwise_split_node(Graph& g, const MlpParams& p,
                             const std::string& prefix, NodeRef H, Index u);
Tensor pointwise_split(const MlpParams& p, const Tensor& H, Index u);

struct MpdNodes {
  NodeRef p_next;  // (u*n) x 3
  NodeRef k_next;  // (u*n) x c
};

// One deconvolution step: query features from coordinates plus the global
// feature, neighborhood attention at every scale in k_list, point-wise
// splitting of the fused context, and a zero-initialized delta head added
// onto each point repeated u times consecutively.
MpdNodes mpd_node(Graph& g, const RefinementUnit& unit,
                  const std::string& prefix, NodeRef P, NodeRef K_hat,
                  NodeRef global);

struct ScrBuild {
  std::vector<NodeRef> clouds;  // one per unit, last is the prediction
  NodeRef loss;                 // unset unless a loss builder fills it
};

// Build the full refinement stack on a graph. `cond` is the conditioning row
// fed to the modulation (already resolved: one-hot, global feature, or their
// concatenation). Coordinates, features and conditioning enter as constants;
// trainable tensors enter as named inputs under `prefix`.
ScrBuild scr_node(Graph& g, const ScrNet& net, const std::string& prefix,
                  const PointCloud& coarse, const Tensor& pointwise,
                  const Tensor& global, const Tensor& cond);

// Resolve the conditioning row for a sample: the category one-hot, the
// global feature, or their concatenation, with label_mode=kRandom replacing
// the category by a uniformly drawn different one (no-op when c_cate == 1).
Tensor resolve_condition(const ScrNet& net, const CategoryLabel& label,
                         const Tensor& global, LabelMode mode, Rng* rng);

// Convenience forward pass: runs the graph and extracts the per-unit clouds.
std::vector<PointCloud> scr_forward(const ScrNet& net, const PointCloud& coarse,
                                    const Tensor& pointwise,
                                    const Tensor& global,
                                    const CategoryLabel& label,
                                    LabelMode mode = LabelMode::kCorrect,
                                    Rng* rng = nullptr);

void visit_params(RefinementUnit& unit, const std::string& prefix,
                  Modulation modulation, const ParamVisitor& fn);
void visit_params(ScrNet& net, const std::string& prefix,
                  const ParamVisitor& fn);

}  // namespace cp3

#endif  // CP3_SCR_HPP_
