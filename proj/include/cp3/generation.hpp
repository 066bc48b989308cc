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

#ifndef CP3_GENERATION_HPP_
#define CP3_GENERATION_HPP_

#include <string>
#include <utility>

#include "cp3/blocks.hpp"

namespace cp3 {

// Minimal coarse completer: a per-point encoder whose channel-wise max is
// the global shape feature, and a decoder mapping that global feature to a
// fixed-size coarse cloud. Deliberately small; the training protocol, not
// the backbone, is the point.

struct GenParams {
  MlpParams encoder;  // 3 -> ... -> c_pw per-point features
  MlpParams decoder;  // c_pw -> ... -> 3*m coordinates
  Index m = 256;      // coarse output size

  Index pointwise_width() const { return encoder.out_width(); }
  Index global_width() const { return encoder.out_width(); }
  void validate() const;
};

// Encoder widths {3, c_pw, c_pw}; decoder widths {c_pw, hidden, 3m}.
GenParams make_generator(Index c_pw, Index hidden, Index m, Rng& rng);

struct EncodeResult {
  Tensor global;     // 1 x g
  Tensor pointwise;  // n x c_pw
};

// Per-point MLP features plus their channel-wise max. The global part is
// permutation-invariant, the pointwise part permutation-equivariant.
EncodeResult encode(const GenParams& p, const PointCloud& partial);

PointCloud decode_coarse(const GenParams& p, const Tensor& global);

// Graph builders; parameters register under prefix ".enc" / ".dec".
struct EncodeNodes {
  NodeRef global;
  NodeRef pointwise;
};
EncodeNodes encode_node(Graph& g, const GenParams& p,
                        const std::string& prefix, NodeRef coords);
NodeRef decode_coarse_node(Graph& g, const GenParams& p,
                           const std::string& prefix, NodeRef global);

void visit_params(GenParams& p, const std::string& prefix,
                  const ParamVisitor& fn);

}  // namespace cp3

#endif  // CP3_GENERATION_HPP_
