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

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cp3 {

using Index = Eigen::Index;

/// Row-major N x 3 coordinate storage; one point per row.
using PointMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

/// Thrown for malformed user input (bad files, bad arguments).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Ordered point cloud with an optional category label.
/// Point order is significant and preserved by all I/O.
struct PointCloud {
  PointMatrix points;
  std::optional<int> category;

  Index size() const { return points.rows(); }
  Eigen::RowVector3d centroid() const { return points.colwise().mean(); }
};

/// 64-bit seed for deterministic replay. Identical seed + identical call
/// sequence gives identical outputs across processes.
struct Seed {
  std::uint64_t value = 0;
};

/// Deterministic splitmix64-based generator. Self-contained so streams do
/// not depend on the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(Seed seed) : state_(seed.value) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1).
  double uniform();
  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_int(std::uint64_t n);
  /// Standard normal via Marsaglia's polar method.
  double normal();

  /// Derive an independent child stream.
  Rng split();

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Parse an XYZ text file: one `x y z` triple per nonempty line, optional
/// `#category <int>` header line. Malformed lines report their line number.
PointCloud load_xyz(const std::string& path);

/// Write a cloud in the XYZ text format. Coordinates use shortest
/// round-trip-exact decimal formatting, so reload reproduces them bitwise.
void save_xyz(const PointCloud& cloud, const std::string& path);

/// Center on the centroid and scale so the farthest point has norm 1.
/// Fails on a degenerate cloud (all points identical).
PointCloud normalize_unit_sphere(const PointCloud& cloud);

/// The transform normalize_unit_sphere would apply: p -> (p - center) * scale.
struct UnitSphereTransform {
  Eigen::RowVector3d center;
  double scale;

  PointCloud apply(const PointCloud& cloud) const;
};

UnitSphereTransform unit_sphere_transform(const PointCloud& cloud);

/// Immutable kd-tree over a cloud. Query results are identical to an
/// exhaustive scan, including the tie rule (equal distance -> lower index).
class SpatialIndex {
 public:
  explicit SpatialIndex(const PointCloud& cloud);

  /// Indices of the k nearest points to `query`, sorted by ascending
  /// Euclidean distance, ties broken by ascending index.
  std::vector<Index> knn(const Eigen::RowVector3d& query, Index k) const;

  /// Squared distance from `query` to its nearest point.
  double nearest_sq(const Eigen::RowVector3d& query) const;

  Index size() const { return points_.rows(); }

 private:
  struct KnnEntry {
    double d2;
    Index idx;
  };

  void build(std::vector<Index>& idx, Index lo, Index hi, Index node);
  void search(Index node, const Eigen::RowVector3d& query, Index k,
              std::vector<KnnEntry>& heap) const;

  struct Node {
    Index point = -1;   // median point stored at this node
    int axis = -1;
    Index left = -1;
    Index right = -1;
  };

  PointMatrix points_;
  std::vector<Node> nodes_;
  Index root_ = -1;
};

inline std::vector<Index> knn(const SpatialIndex& index,
                              const Eigen::RowVector3d& query, Index k) {
  return index.knn(query, k);
}

/// Greedy farthest-point subset of size m. The first point is drawn from
/// `seed`; each next point maximizes the min distance to the chosen set,
/// ties resolved toward the lowest index.
std::vector<Index> farthest_point_sample_indices(const PointCloud& cloud,
                                                 Index m, Seed seed);
PointCloud farthest_point_sample(const PointCloud& cloud, Index m, Seed seed);

}  // namespace cp3
