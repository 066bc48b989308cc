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
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

using namespace cp3;
using cp3::test::random_cloud;
using cp3::test::same_point_multiset;

namespace {

// Selection oracle: order indices by (distance asc, index asc) and drop the
// trailing floor(r*N); ties at the cut keep lower indices.
std::pair<std::vector<Index>, std::vector<Index>> crop_oracle(
    const PointCloud& cloud, double r, const CropPlane& plane) {
  const Eigen::VectorXd d = projection_distances(cloud, plane);
  std::vector<Index> order(cloud.size());
  for (Index i = 0; i < cloud.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (d[a] != d[b]) return d[a] < d[b];
    return a < b;
  });
  const Index drop =
      static_cast<Index>(std::floor(r * static_cast<double>(cloud.size())));
  std::vector<Index> kept(order.begin(), order.end() - drop);
  std::vector<Index> dropped(order.end() - drop, order.end());
  std::sort(kept.begin(), kept.end());
  std::sort(dropped.begin(), dropped.end());
  return {kept, dropped};
}

std::vector<Index> match_rows(const PointCloud& subset,
                              const PointCloud& full) {
  std::vector<Index> out;
  for (Index i = 0; i < subset.size(); ++i) {
    for (Index j = 0; j < full.size(); ++j) {
      if (subset.points.row(i) == full.points.row(j)) {
        out.push_back(j);
        break;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("sample_crop_plane is deterministic and self-consistent") {
  const CropPlane a = sample_crop_plane(Seed{123});
  const CropPlane b = sample_crop_plane(Seed{123});
  CHECK(a.theta == b.theta);
  CHECK(a.phi == b.phi);
  CHECK(a.v == b.v);
  CHECK(std::abs(a.v.norm() - 1.0) <= 1e-12);
  const Eigen::RowVector3d expect(std::sin(a.theta) * std::cos(a.phi),
                                  std::sin(a.theta) * std::sin(a.phi),
                                  std::cos(a.theta));
  CHECK((a.v - expect).norm() <= 1e-12);
}

TEST_CASE("sample_crop_plane angles stay in range") {
  Rng rng(Seed{77});
  for (int i = 0; i < 1000; ++i) {
    const CropPlane p = sample_crop_plane(rng);
    CHECK(p.theta >= 0.0);
    CHECK(p.theta <= M_PI);
    CHECK(p.phi >= 0.0);
    CHECK(p.phi < 2.0 * M_PI);
  }
}

TEST_CASE("sample_crop_plane normals are uniform on the sphere") {
  Rng rng(Seed{99});
  Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
  double mean_cos = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const CropPlane p = sample_crop_plane(rng);
    mean += p.v;
    mean_cos += std::cos(p.theta);
  }
  mean /= 10000.0;
  for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j]) < 0.05);
  CHECK(std::abs(mean_cos / 10000.0) < 0.05);  // cos(theta) uniform in [-1,1]
}

TEST_CASE("projection_distances fixture and zero sum") {
  PointCloud c;
  c.points.resize(3, 3);
  c.points << 0, 0, 1, 0, 0, -1, 0, 0, 3;
  CropPlane p;
  p.theta = 0.0;
  p.phi = 0.0;
  p.v = Eigen::RowVector3d(0, 0, 1);
  const Eigen::VectorXd d = projection_distances(c, p);
  CHECK(d[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(d[1] == doctest::Approx(-2.0).epsilon(1e-15));
  CHECK(d[2] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(std::abs(d.sum()) <= 1e-9 * 3);
}

TEST_CASE("projection_distances matches per-point dot products") {
  Rng rng(Seed{101});
  const PointCloud c = random_cloud(200, rng);
  const CropPlane p = sample_crop_plane(Seed{5});
  const Eigen::VectorXd d = projection_distances(c, p);
  const Eigen::RowVector3d centroid = c.centroid();
  for (Index i = 0; i < c.size(); ++i) {
    const double expect = (c.points.row(i) - centroid).dot(p.v);
    CHECK(std::abs(d[i] - expect) <= 1e-12);
  }
  CHECK(std::abs(d.sum()) <= 1e-9 * static_cast<double>(c.size()));
}

TEST_CASE("ioi_crop with r = 0 keeps everything") {
  Rng rng(Seed{103});
  const PointCloud c = random_cloud(50, rng);
  const CropResult res = ioi_crop(c, 0.0, sample_crop_plane(Seed{1}));
  CHECK(res.kept.points == c.points);
  CHECK(res.dropped.size() == 0);
}

TEST_CASE("ioi_crop drops the single largest projection") {
  PointCloud c;
  c.points.resize(3, 3);
  c.points << 0, 0, 1, 0, 0, -1, 0, 0, 3;
  CropPlane p;
  p.v = Eigen::RowVector3d(0, 0, 1);
  const CropResult res = ioi_crop(c, 1.0 / 3.0, p);
  REQUIRE(res.dropped.size() == 1);
  CHECK(res.dropped.points(0, 2) == 3.0);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept.points(0, 2) == 1.0);
  CHECK(res.kept.points(1, 2) == -1.0);
}

TEST_CASE("ioi_crop keeps lower indices on ties") {
  PointCloud c;
  c.points.resize(4, 3);
  c.points << 1, 0, 0, 2, 0, 0, 3, 0, 0, 4, 0, 0;
  CropPlane p;
  p.v = Eigen::RowVector3d(0, 0, 1);  // all projections equal 0
  const CropResult res = ioi_crop(c, 0.5, p);
  REQUIRE(res.kept.size() == 2);
  CHECK(res.kept.points(0, 0) == 1.0);
  CHECK(res.kept.points(1, 0) == 2.0);
  CHECK(res.dropped.points(0, 0) == 3.0);
  CHECK(res.dropped.points(1, 0) == 4.0);
}

TEST_CASE("ioi_crop equals the full-sort oracle on a large cloud") {
  Rng rng(Seed{107});
  const PointCloud c = random_cloud(1000, rng);
  const CropPlane p = sample_crop_plane(Seed{7});
  const CropResult res = ioi_crop(c, 0.4, p);
  const auto [kept_idx, dropped_idx] = crop_oracle(c, 0.4, p);
  REQUIRE(res.kept.size() == static_cast<Index>(kept_idx.size()));
  REQUIRE(res.dropped.size() == static_cast<Index>(dropped_idx.size()));
  // kept preserves input order, so kept row t is the t-th smallest kept index
  for (std::size_t t = 0; t < kept_idx.size(); ++t)
    CHECK(res.kept.points.row(static_cast<Index>(t)) ==
          c.points.row(kept_idx[t]));
  for (std::size_t t = 0; t < dropped_idx.size(); ++t)
    CHECK(res.dropped.points.row(static_cast<Index>(t)) ==
          c.points.row(dropped_idx[t]));
}

TEST_CASE("ioi_crop partitions the input without loss") {
  Rng rng(Seed{109});
  const PointCloud c = random_cloud(257, rng);
  for (double r : {0.1, 0.33, 0.77}) {
    const CropResult res = ioi_crop(c, r, sample_crop_plane(Seed{11}));
    const Index drop = static_cast<Index>(std::floor(r * 257.0));
    CHECK(res.dropped.size() == drop);
    CHECK(res.kept.size() + res.dropped.size() == c.size());
    PointCloud merged;
    merged.points.resize(c.size(), 3);
    merged.points.topRows(res.kept.size()) = res.kept.points;
    merged.points.bottomRows(res.dropped.size()) = res.dropped.points;
    CHECK(same_point_multiset(merged, c));
  }
}

TEST_CASE("ioi_crop is monotone in the crop rate") {
  Rng rng(Seed{113});
  const PointCloud c = random_cloud(120, rng);
  const CropPlane p = sample_crop_plane(Seed{13});
  const auto d1 = ioi_crop(c, 0.2, p).dropped;
  const auto d2 = ioi_crop(c, 0.5, p).dropped;
  const auto i1 = match_rows(d1, c);
  const auto i2 = match_rows(d2, c);
  const std::set<Index> s2(i2.begin(), i2.end());
  for (Index i : i1) CHECK(s2.count(i) == 1);
}

TEST_CASE("every point of a sphere sample is droppable by some plane") {
  Rng rng(Seed{127});
  PointCloud c;
  c.points.resize(200, 3);
  for (Index i = 0; i < 200; ++i) {
    Eigen::RowVector3d v(rng.normal(), rng.normal(), rng.normal());
    c.points.row(i) = v / v.norm();
  }
  std::set<Index> seen;
  Rng planes(Seed{131});
  for (int t = 0; t < 300 && seen.size() < 200; ++t) {
    const CropResult res = ioi_crop(c, 0.3, sample_crop_plane(planes));
    for (Index i : match_rows(res.dropped, c)) seen.insert(i);
  }
  CHECK(seen.size() == 200);
}

TEST_CASE("ioi_crop carries the category label on both halves") {
  Rng rng(Seed{137});
  PointCloud c = random_cloud(20, rng);
  c.category = 3;
  const CropResult res = ioi_crop(c, 0.5, sample_crop_plane(Seed{1}));
  REQUIRE(res.kept.category.has_value());
  REQUIRE(res.dropped.category.has_value());
  CHECK(*res.kept.category == 3);
  CHECK(*res.dropped.category == 3);
}

TEST_CASE("make_pretrain_pair with gamma 0 reproduces the input") {
  Rng rng(Seed{139});
  const PointCloud c = random_cloud(64, rng);
  Rng draw(Seed{1});
  const PretrainPair pair = make_pretrain_pair(c, 0.0, draw);
  CHECK(pair.input.points == c.points);
  CHECK(pair.target.points == c.points);
}

TEST_CASE("make_pretrain_pair replays identically from one seed") {
  Rng rng(Seed{149});
  const PointCloud c = random_cloud(64, rng);
  Rng a(Seed{21}), b(Seed{21});
  const PretrainPair pa = make_pretrain_pair(c, 0.9, a);
  const PretrainPair pb = make_pretrain_pair(c, 0.9, b);
  CHECK(pa.input.points == pb.input.points);
  CHECK(pa.target.points == pb.target.points);
  CHECK(pa.target.points == c.points);  // target is the original, unchanged

  IoiConfig cfg;
  cfg.gamma = 0.9;
  cfg.seed = Seed{21};
  const PretrainPair pc = make_pretrain_pair(c, cfg);
  CHECK(pc.input.points == pa.input.points);
}

TEST_CASE("make_pretrain_pair mean crop fraction approaches gamma/2") {
  Rng rng(Seed{151});
  const PointCloud c = random_cloud(200, rng);
  Rng draw(Seed{3});
  double frac_sum = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const PretrainPair p = make_pretrain_pair(c, 0.9, draw);
    frac_sum +=
        static_cast<double>(c.size() - p.input.size()) / c.size();
  }
  CHECK(std::abs(frac_sum / 1000.0 - 0.45) < 0.03);
}
