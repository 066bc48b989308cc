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

#include "cp3/synthdata.hpp"

#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

using namespace cp3;

namespace {

ShapeSpec spec_of(ShapeKind kind, std::uint64_t seed, Index n = 256) {
  ShapeSpec s;
  s.kind = kind;
  s.n_full = n;
  s.seed = Seed{seed};
  return s;
}

bool row_in(const PointMatrix& hay, const Eigen::RowVector3d& needle) {
  for (Index i = 0; i < hay.rows(); ++i)
    if (hay.row(i) == needle) return true;
  return false;
}

}  // namespace

TEST_CASE("shape kind names round trip") {
  for (const auto* name : {"sphere", "box", "cylinder", "chair", "table"}) {
    CHECK(to_string(shape_kind_from_string(name)) == name);
  }
  CHECK_THROWS_AS(shape_kind_from_string("cone"), ValidationError);
}

TEST_CASE("shape specs reject degenerate parameters") {
  ShapeSpec s = spec_of(ShapeKind::kSphere, 1);
  s.n_full = 8;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = spec_of(ShapeKind::kSphere, 1);
  s.crop_rate = 0.9;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s.crop_rate = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = spec_of(ShapeKind::kBox, 1);
  s.size_b = 0.0;
  CHECK_THROWS_AS(s.validate(), ValidationError);
  s = spec_of(ShapeKind::kBox, 1);
  s.category = -1;
  CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("sphere samples sit on the sphere before normalization") {
  ShapeSpec s = spec_of(ShapeKind::kSphere, 41);
  s.size_a = 0.7;
  const PointCloud cloud = generate_shape_surface(s);
  REQUIRE(cloud.size() == 256);
  for (Index i = 0; i < cloud.size(); ++i)
    CHECK(std::abs(cloud.points.row(i).norm() - 0.7) <= 1e-9);
}

TEST_CASE("box samples land exactly on one of the six faces") {
  ShapeSpec s = spec_of(ShapeKind::kBox, 42);
  s.size_a = 0.5;
  s.size_b = 1.0;
  s.size_c = 2.0;
  const PointCloud cloud = generate_shape_surface(s);
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.points.row(i);
    const bool on_x = std::abs(p(0)) == 0.5 && std::abs(p(1)) <= 1.0 &&
                      std::abs(p(2)) <= 2.0;
    const bool on_y = std::abs(p(1)) == 1.0 && std::abs(p(0)) <= 0.5 &&
                      std::abs(p(2)) <= 2.0;
    const bool on_z = std::abs(p(2)) == 2.0 && std::abs(p(0)) <= 0.5 &&
                      std::abs(p(1)) <= 1.0;
    CHECK((on_x || on_y || on_z));
  }
}

TEST_CASE("box face frequencies follow the face areas") {
  ShapeSpec s = spec_of(ShapeKind::kBox, 43, 6000);
  s.size_a = 0.5;
  s.size_b = 1.0;
  s.size_c = 2.0;
  const PointCloud cloud = generate_shape_surface(s);
  // face areas: +-x 4bc=8, +-y 4ac=4, +-z 4ab=2, total 28
  const double total = 28.0;
  const double areas[3] = {8.0, 4.0, 2.0};
  const double sizes[3] = {0.5, 1.0, 2.0};
  std::map<std::pair<int, int>, Index> counts;
  for (Index i = 0; i < cloud.size(); ++i) {
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(cloud.points(i, axis)) == sizes[axis]) {
        counts[{axis, cloud.points(i, axis) > 0 ? 1 : -1}]++;
        break;
      }
    }
  }
  const auto n = static_cast<double>(cloud.size());
  for (int axis = 0; axis < 3; ++axis) {
    for (const int sign : {-1, 1}) {
      const double p = areas[axis] / total;
      const double mean = n * p;
      const double sigma = std::sqrt(n * p * (1.0 - p));
      const double got = static_cast<double>(counts[{axis, sign}]);
      CHECK(std::abs(got - mean) <= 3.0 * sigma);
    }
  }
}

TEST_CASE("cylinder samples lie on the side or the caps") {
  ShapeSpec s = spec_of(ShapeKind::kCylinder, 44);
  s.size_a = 0.6;  // radius
  s.size_b = 1.2;  // half-height
  const PointCloud cloud = generate_shape_surface(s);
  for (Index i = 0; i < cloud.size(); ++i) {
    const auto p = cloud.points.row(i);
    const double rho = std::hypot(p(0), p(1));
    const bool on_side = std::abs(rho - 0.6) <= 1e-9 && std::abs(p(2)) <= 1.2;
    const bool on_cap = std::abs(std::abs(p(2)) - 1.2) <= 1e-12 && rho <= 0.6 + 1e-9;
    CHECK((on_side || on_cap));
  }
}

TEST_CASE("chair grows a back the table never has") {
  ShapeSpec chair = spec_of(ShapeKind::kChair, 45);
  ShapeSpec table = spec_of(ShapeKind::kTable, 45);
  const PointCloud c = generate_shape_surface(chair);
  const PointCloud t = generate_shape_surface(table);
  // table parts stop at z = 0.1 * scale; the chair back reaches 0.9 * scale
  CHECK(t.points.col(2).maxCoeff() <= 0.1 + 1e-12);
  CHECK(c.points.col(2).maxCoeff() > 0.3);
}

TEST_CASE("generate_shape normalizes into the unit sphere with the label") {
  for (const ShapeKind kind : {ShapeKind::kSphere, ShapeKind::kBox,
                               ShapeKind::kCylinder, ShapeKind::kChair,
                               ShapeKind::kTable}) {
    ShapeSpec s = spec_of(kind, 46);
    s.category = 2;
    const PointCloud cloud = generate_shape(s);
    REQUIRE(cloud.category.has_value());
    CHECK(*cloud.category == 2);
    CHECK(cloud.centroid().norm() <= 1e-9);
    double max_norm = 0.0;
    for (Index i = 0; i < cloud.size(); ++i)
      max_norm = std::max(max_norm, cloud.points.row(i).norm());
    CHECK(max_norm == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("shape generation replays bitwise from the seed") {
  const ShapeSpec s = spec_of(ShapeKind::kChair, 47);
  const PointCloud a = generate_shape(s);
  const PointCloud b = generate_shape(s);
  CHECK(a.points == b.points);
  ShapeSpec other = s;
  other.seed = Seed{48};
  CHECK(generate_shape(other).points != a.points);
}

TEST_CASE("make_partial keeps a one-sided subset of the stated size") {
  ShapeSpec s = spec_of(ShapeKind::kBox, 49, 128);
  s.crop_rate = 0.5;
  const PointCloud complete = generate_shape(s);
  const PointCloud partial = make_partial(complete, s);
  CHECK(partial.size() == 64);
  REQUIRE(partial.category.has_value());
  CHECK(*partial.category == *complete.category);
  for (Index i = 0; i < partial.size(); ++i)
    CHECK(row_in(complete.points, partial.points.row(i)));
  const PointCloud again = make_partial(complete, s);
  CHECK(again.points == partial.points);

  ShapeSpec quarter = s;
  quarter.crop_rate = 0.25;
  CHECK(make_partial(complete, quarter).size() == 96);
}

TEST_CASE("default specs cover four categories with varied sizes") {
  const auto specs = default_dataset_specs(64, 5, Seed{50});
  REQUIRE(specs.size() == 20);
  std::set<std::uint64_t> seeds;
  std::map<int, int> per_category;
  for (const auto& s : specs) {
    per_category[s.category]++;
    seeds.insert(s.seed.value);
    CHECK(s.n_full == 64);
    s.validate();
  }
  CHECK(per_category == std::map<int, int>{{0, 5}, {1, 5}, {2, 5}, {3, 5}});
  CHECK(seeds.size() == 20);
  CHECK(specs[0].kind == ShapeKind::kSphere);
  CHECK(specs[5].kind == ShapeKind::kBox);
  CHECK(specs[10].kind == ShapeKind::kChair);
  CHECK(specs[15].kind == ShapeKind::kTable);
  CHECK_THROWS_AS(default_dataset_specs(64, 0, Seed{1}), ValidationError);
}

TEST_CASE("build_dataset writes a stratified manifest that reloads") {
  const auto dir = cp3::test::temp_dir("synth");
  const auto specs = default_dataset_specs(64, 10, Seed{51});
  const auto manifest = build_dataset(specs, 0.8, Seed{52}, dir);
  CHECK(manifest == dir / "manifest.txt");

  const Dataset ds = load_manifest(manifest);
  CHECK(ds.root == dir);
  REQUIRE(ds.entries.size() == 40);
  CHECK(ds.split("train").size() == 32);
  CHECK(ds.split("val").size() == 8);

  std::map<std::pair<std::string, int>, int> strata;
  for (const auto& e : ds.entries) strata[{e.split, e.category}]++;
  for (int cat = 0; cat < 4; ++cat) {
    CHECK(strata[{"train", cat}] == 8);
    CHECK(strata[{"val", cat}] == 2);
  }

  for (const auto& e : ds.entries) {
    const PointCloud partial = load_xyz((ds.root / e.partial_path).string());
    const PointCloud complete = load_xyz((ds.root / e.complete_path).string());
    CHECK(complete.size() == 64);
    CHECK(partial.size() == 32);
    REQUIRE(complete.category.has_value());
    CHECK(*complete.category == e.category);
    CHECK(*partial.category == e.category);
  }

  const Dataset again = load_manifest(manifest);
  REQUIRE(again.entries.size() == ds.entries.size());
  for (std::size_t i = 0; i < ds.entries.size(); ++i) {
    CHECK(again.entries[i].split == ds.entries[i].split);
    CHECK(again.entries[i].category == ds.entries[i].category);
    CHECK(again.entries[i].partial_path == ds.entries[i].partial_path);
    CHECK(again.entries[i].complete_path == ds.entries[i].complete_path);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("build_dataset and load_manifest reject bad inputs") {
  const auto dir = cp3::test::temp_dir("synthbad");
  CHECK_THROWS_AS(build_dataset({}, 0.8, Seed{1}, dir), ValidationError);
  const auto specs = default_dataset_specs(64, 2, Seed{1});
  CHECK_THROWS_AS(build_dataset(specs, 1.0, Seed{1}, dir), ValidationError);
  CHECK_THROWS_AS(build_dataset(specs, 0.0, Seed{1}, dir), ValidationError);

  CHECK_THROWS_AS(load_manifest(dir / "missing.txt"), ValidationError);
  cp3::test::write_text(dir, "short.txt", "train 0 a.xyz\n");
  CHECK_THROWS_AS(load_manifest(dir / "short.txt"), ValidationError);
  cp3::test::write_text(dir, "badsplit.txt", "test 0 a.xyz b.xyz\n");
  CHECK_THROWS_AS(load_manifest(dir / "badsplit.txt"), ValidationError);
  cp3::test::write_text(dir, "extra.txt", "train 0 a.xyz b.xyz c.xyz\n");
  CHECK_THROWS_AS(load_manifest(dir / "extra.txt"), ValidationError);
  cp3::test::write_text(dir, "empty.txt", "\n\n");
  CHECK_THROWS_AS(load_manifest(dir / "empty.txt"), ValidationError);
  std::filesystem::remove_all(dir);
}
