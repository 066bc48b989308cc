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

#include "cp3/generation.hpp"

namespace cp3 {

void GenParams::validate() const {
  encoder.validate("generator encoder");
  decoder.validate("generator decoder");
  if (encoder.in_width() != 3)
    throw ValidationError("generator: encoder must take xyz rows");
  if (m < 1) throw ValidationError("generator: m must be positive");
  if (decoder.in_width() != global_width())
    throw ValidationError("generator: decoder input width " +
                          std::to_string(decoder.in_width()) +
                          " must match global width " +
                          std::to_string(global_width()));
  if (decoder.out_width() != 3 * m)
    throw ValidationError("generator: decoder must emit 3*m values, got " +
                          std::to_string(decoder.out_width()));
}

GenParams make_generator(Index c_pw, Index hidden, Index m, Rng& rng) {
  GenParams p;
  p.m = m;
  p.encoder = make_mlp({3, c_pw, c_pw}, rng);
  p.decoder = make_mlp({c_pw, hidden, 3 * m}, rng);
  p.validate();
  return p;
}

EncodeResult encode(const GenParams& p, const PointCloud& partial) {
  p.validate();
  if (partial.size() < 1) throw ValidationError("encode: empty cloud");
  EncodeResult r;
  r.pointwise = mlp_forward(p.encoder, Tensor{Mat(partial.points)});
  Mat global(1, r.pointwise.cols());
  global.row(0) = r.pointwise.values.colwise().maxCoeff();
  r.global = Tensor{std::move(global)};
  return r;
}

PointCloud decode_coarse(const GenParams& p, const Tensor& global) {
  p.validate();
  if (global.rows() != 1 || global.cols() != p.global_width())
    throw ValidationError("decode_coarse: global feature must be 1 x " +
                          std::to_string(p.global_width()));
  const Tensor flat = mlp_forward(p.decoder, global);
  PointCloud out;
  out.points = Eigen::Map<const PointMatrix>(flat.values.data(), p.m, 3);
  return out;
}

EncodeNodes encode_node(Graph& g, const GenParams& p,
                        const std::string& prefix, NodeRef coords) {
  p.validate();
  EncodeNodes r;
  r.pointwise = mlp_node(g, p.encoder, prefix + ".enc", coords);
  r.global = g.max_rows(r.pointwise);
  return r;
}

NodeRef decode_coarse_node(Graph& g, const GenParams& p,
                           const std::string& prefix, NodeRef global) {
  NodeRef flat = mlp_node(g, p.decoder, prefix + ".dec", global);
  return g.reshape(flat, p.m, 3);
}

void visit_params(GenParams& p, const std::string& prefix,
                  const ParamVisitor& fn) {
  visit_params(p.encoder, prefix + ".enc", fn);
  visit_params(p.decoder, prefix + ".dec", fn);
}

}  // namespace cp3
