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

namespace cp3 {

/// Random crop plane through the cloud centroid, perpendicular to the unit
/// vector v = (sin t cos p, sin t sin p, cos t).
struct CropPlane {
  double theta = 0.0;  // [0, pi]
  double phi = 0.0;    // [0, 2*pi)
  Eigen::RowVector3d v = Eigen::RowVector3d(0, 0, 1);
};

struct IoiConfig {
  double gamma = 0.9;  // max crop rate, in [0, 1)
  Seed seed;
};

/// Draw a plane normal uniformly on the unit sphere (cos(theta) uniform,
/// phi uniform).
CropPlane sample_crop_plane(Seed seed);
CropPlane sample_crop_plane(Rng& rng);

/// Signed distance of each point to the plane: d_i = (p_i - centroid) . v.
/// The distances sum to zero by construction.
Eigen::VectorXd projection_distances(const PointCloud& cloud,
                                     const CropPlane& plane);

struct CropResult {
  PointCloud kept;
  PointCloud dropped;
};

/// Drop the floor(r*N) points farthest along the plane normal (largest
/// signed distance). On ties at the cut, lower indices stay in `kept`.
/// Both halves preserve the input order; the label is carried on both.
CropResult ioi_crop(const PointCloud& cloud, double r, const CropPlane& plane);

struct PretrainPair {
  PointCloud input;   // further-cropped cloud
  PointCloud target;  // the original incomplete cloud
};

/// Build one self-supervised training pair: crop the incomplete cloud once
/// more at a rate drawn uniformly from [0, gamma], keep the original as the
/// reconstruction target.
PretrainPair make_pretrain_pair(const PointCloud& incomplete,
                                const IoiConfig& cfg);
PretrainPair make_pretrain_pair(const PointCloud& incomplete, double gamma,
                                Rng& rng);

}  // namespace cp3
