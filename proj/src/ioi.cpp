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

#include "cp3/ioi.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cp3 {

CropPlane sample_crop_plane(Rng& rng) {
  CropPlane plane;
  // cos(theta) uniform in [-1, 1] gives sin(theta) density for theta.
  const double cos_t = 1.0 - 2.0 * rng.uniform();
  plane.theta = std::acos(cos_t);
  plane.phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
  plane.v = Eigen::RowVector3d(std::sin(plane.theta) * std::cos(plane.phi),
                               std::sin(plane.theta) * std::sin(plane.phi),
                               std::cos(plane.theta));
  return plane;
}

CropPlane sample_crop_plane(Seed seed) {
  Rng rng(seed);
  return sample_crop_plane(rng);
}

Eigen::VectorXd projection_distances(const PointCloud& cloud,
                                     const CropPlane& plane) {
  if (cloud.size() < 1) throw ValidationError("projection_distances: empty cloud");
  const Eigen::RowVector3d c = cloud.centroid();
  return (cloud.points.rowwise() - c) * plane.v.transpose();
}

CropResult ioi_crop(const PointCloud& cloud, double r, const CropPlane& plane) {
  if (!(r >= 0.0 && r < 1.0))
    throw ValidationError("ioi_crop: crop rate must be in [0, 1)");
  const Index n = cloud.size();
  const Index drop_count = static_cast<Index>(
      std::floor(r * static_cast<double>(n)));

  CropResult result;
  result.kept.category = cloud.category;
  result.dropped.category = cloud.category;
  if (drop_count == 0) {
    result.kept = cloud;
    result.dropped.category = cloud.category;
    result.dropped.points.resize(0, 3);
    return result;
  }

  const Eigen::VectorXd d = projection_distances(cloud, plane);
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  // Drop priority: larger signed distance first; on ties the higher index
  // is dropped first, so lower indices stay in `kept`.
  auto drops_before = [&](Index a, Index b) {
    return d[a] > d[b] || (d[a] == d[b] && a > b);
  };
  std::nth_element(order.begin(), order.begin() + drop_count, order.end(),
                   drops_before);

  std::vector<char> is_dropped(static_cast<std::size_t>(n), 0);
  for (Index i = 0; i < drop_count; ++i)
    is_dropped[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] = 1;

  result.kept.points.resize(n - drop_count, 3);
  result.dropped.points.resize(drop_count, 3);
  Index ik = 0, id = 0;
  for (Index i = 0; i < n; ++i) {
    if (is_dropped[static_cast<std::size_t>(i)])
      result.dropped.points.row(id++) = cloud.points.row(i);
    else
      result.kept.points.row(ik++) = cloud.points.row(i);
  }
  return result;
}

PretrainPair make_pretrain_pair(const PointCloud& incomplete, double gamma,
                                Rng& rng) {
  if (incomplete.size() < 2)
    throw ValidationError("make_pretrain_pair: need at least 2 points");
  if (!(gamma >= 0.0 && gamma < 1.0))
    throw ValidationError("make_pretrain_pair: gamma must be in [0, 1)");
  const CropPlane plane = sample_crop_plane(rng);
  const double r = rng.uniform(0.0, gamma);
  PretrainPair pair;
  pair.input = ioi_crop(incomplete, r, plane).kept;
  pair.target = incomplete;
  return pair;
}

PretrainPair make_pretrain_pair(const PointCloud& incomplete,
                                const IoiConfig& cfg) {
  Rng rng(cfg.seed);
  return make_pretrain_pair(incomplete, cfg.gamma, rng);
}

}  // namespace cp3
