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

#ifndef CP3_SYNTHDATA_HPP_
#define CP3_SYNTHDATA_HPP_

#include <filesystem>
#include <string>
#include <vector>

#include "cp3/geometry.hpp"

namespace cp3 {

// Deterministic parametric shapes with complete/partial pairs. The chair-like
// and table-like composites share the slab and leg sub-parts by construction,
// so telling them apart genuinely requires the semantic label when the
// distinguishing part is cropped away.

enum class ShapeKind { kSphere, kBox, kCylinder, kChair, kTable };

ShapeKind shape_kind_from_string(const std::string& s);
std::string to_string(ShapeKind k);

struct ShapeSpec {
  int category = 0;
  ShapeKind kind = ShapeKind::kSphere;
  // Kind-specific sizes: sphere radius (a); box half-extents (a, b, c);
  // cylinder radius (a) and half-height (b); composites use a as an overall
  // scale factor.
  double size_a = 1.0;
  double size_b = 1.0;
  double size_c = 1.0;
  Index n_full = 256;
  double crop_rate = 0.5;
  Seed seed;

  void validate() const;
};

// Surface samples before unit-sphere normalization: every point lies exactly
// on the shape's surface, faces weighted by area.
PointCloud generate_shape_surface(const ShapeSpec& spec);

// generate_shape_surface followed by normalize_unit_sphere; labeled with the
// spec's category.
PointCloud generate_shape(const ShapeSpec& spec);

// One-sided crop of the complete cloud at the spec's crop rate with a plane
// drawn from the spec's seed. Label preserved.
PointCloud make_partial(const PointCloud& complete, const ShapeSpec& spec);

struct DatasetEntry {
  std::string split;  // "train" or "val"
  int category = 0;
  std::string partial_path;   // relative to the manifest directory
  std::string complete_path;
};

struct Dataset {
  std::filesystem::path root;
  std::vector<DatasetEntry> entries;

  std::vector<DatasetEntry> split(const std::string& name) const;
};

// Writes every pair as XYZ files plus a manifest with lines
//   <split> <category> <partial-path> <complete-path>
// stratified per category by the given train fraction. Returns the manifest
// path (root/manifest.txt).
std::filesystem::path build_dataset(const std::vector<ShapeSpec>& specs,
                                    double train_fraction, Seed seed,
                                    const std::filesystem::path& root);

Dataset load_manifest(const std::filesystem::path& manifest);

// The default desk corpus: categories sphere, box, chair-like, table-like
// with per-shape size variation drawn from `seed`.
std::vector<ShapeSpec> default_dataset_specs(Index n_full, Index per_category,
                                             Seed seed);

}  // namespace cp3

#endif  // CP3_SYNTHDATA_HPP_
