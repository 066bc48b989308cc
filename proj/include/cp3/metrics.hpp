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

#include "cp3/geometry.hpp"

#include <map>
#include <string>
#include <vector>

namespace cp3 {

// Completion-quality measures. All of them are exact reductions over
// nearest-neighbor distances found through a SpatialIndex; the arithmetic
// is ordered so results match a brute-force O(N^2) scan bitwise.

/// Sum of the two directional means of squared nearest-neighbor distances:
/// (1/|X|) sum_x min_y |x-y|^2 + (1/|Y|) sum_y min_x |y-x|^2.
double chamfer_l2(const PointCloud& x, const PointCloud& y);

/// Half the sum of the two directional means of nearest-neighbor distances.
double chamfer_l1(const PointCloud& x, const PointCloud& y);

/// Harmonic mean of precision and recall at distance threshold tau.
/// Defined as 0 when both precision and recall vanish.
double fscore(const PointCloud& pred, const PointCloud& gt, double tau);

/// Mean distance from each partial input point to its nearest output point.
double fidelity(const PointCloud& partial, const PointCloud& output);

/// Mean chamfer_l2 over consecutive frame pairs.
double consistency(const std::vector<PointCloud>& frames);

/// Per-category and overall aggregate of the reported metrics. Raw values
/// are unscaled; display scaling (x10^3 for CD-L1, x10^4 for CD-L2) is
/// applied only when rendering.
struct MetricReport {
  struct Row {
    Index count = 0;
    double cd_l1 = 0.0;
    double cd_l2 = 0.0;
    double fscore = 0.0;
    bool has_fidelity = false;
    double fidelity = 0.0;
    bool has_consistency = false;
    double consistency = 0.0;
  };

  std::map<int, Row> per_category;
  Row overall;

  /// Accumulate one evaluated pair into a category bucket.
  void add(int category, double cd_l1, double cd_l2, double fscore);
  void add_fidelity(int category, double value);
  /// Recompute per-category means and the size-weighted overall row.
  void finalize();

  /// Aligned text table: category, count, cd_l1(x10^3), cd_l2(x10^4),
  /// fscore@1%.
  std::string to_table() const;
  /// Same columns as comma-separated values with a header line.
  std::string to_csv() const;

 private:
  struct Accum {
    Index count = 0;
    double cd_l1 = 0.0;
    double cd_l2 = 0.0;
    double fscore = 0.0;
    Index fid_count = 0;
    double fidelity = 0.0;
  };
  std::map<int, Accum> accum_;
};

}  // namespace cp3
