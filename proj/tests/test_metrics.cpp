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

#include "cp3/metrics.hpp"

#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "test_support.hpp"

using namespace cp3;
using cp3::test::random_cloud;

namespace {

// O(N^2) nearest squared distance, strict-< scan so the found minimum is
// the same double the fast path returns.
double brute_min_sq(const Eigen::RowVector3d& q, const PointCloud& to) {
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < to.size(); ++j) {
    const double d2 = (q - to.points.row(j)).squaredNorm();
    if (d2 < best) best = d2;
  }
  return best;
}

double brute_mean_min_sq(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (Index i = 0; i < from.size(); ++i)
    sum += brute_min_sq(from.points.row(i), to);
  return sum / static_cast<double>(from.size());
}

double brute_mean_min_dist(const PointCloud& from, const PointCloud& to) {
  double sum = 0.0;
  for (Index i = 0; i < from.size(); ++i)
    sum += std::sqrt(brute_min_sq(from.points.row(i), to));
  return sum / static_cast<double>(from.size());
}

double brute_chamfer_l2(const PointCloud& x, const PointCloud& y) {
  return brute_mean_min_sq(x, y) + brute_mean_min_sq(y, x);
}

double brute_chamfer_l1(const PointCloud& x, const PointCloud& y) {
  return 0.5 * (brute_mean_min_dist(x, y) + brute_mean_min_dist(y, x));
}

double brute_fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  const double t2 = tau * tau;
  Index ph = 0, gh = 0;
  for (Index i = 0; i < pred.size(); ++i)
    if (brute_min_sq(pred.points.row(i), gt) <= t2) ++ph;
  for (Index i = 0; i < gt.size(); ++i)
    if (brute_min_sq(gt.points.row(i), pred) <= t2) ++gh;
  const double p = static_cast<double>(ph) / pred.size();
  const double r = static_cast<double>(gh) / gt.size();
  if (p + r == 0.0) return 0.0;
  return 2.0 * p * r / (p + r);
}

PointCloud single_point(double x, double y, double z) {
  PointCloud c;
  c.points.resize(1, 3);
  c.points << x, y, z;
  return c;
}

}  // namespace

TEST_CASE("chamfer_l2 conventions") {
  Rng rng(Seed{3});
  const PointCloud c = random_cloud(40, rng);
  CHECK(chamfer_l2(c, c) == 0.0);
  CHECK(chamfer_l2(single_point(0, 0, 0), single_point(1, 0, 0)) == 2.0);
}

TEST_CASE("chamfer_l1 conventions") {
  Rng rng(Seed{5});
  const PointCloud c = random_cloud(40, rng);
  CHECK(chamfer_l1(c, c) == 0.0);
  CHECK(chamfer_l1(single_point(0, 0, 0), single_point(1, 0, 0)) == 1.0);
}

TEST_CASE("chamfer fast paths equal brute force bitwise") {
  Rng rng(Seed{7});
  for (int t = 0; t < 10; ++t) {
    const PointCloud x = random_cloud(300, rng);
    const PointCloud y = random_cloud(300, rng);
    CHECK(chamfer_l2(x, y) == brute_chamfer_l2(x, y));
    CHECK(chamfer_l1(x, y) == brute_chamfer_l1(x, y));
  }
}

TEST_CASE("chamfer is symmetric") {
  Rng rng(Seed{11});
  const PointCloud x = random_cloud(100, rng);
  const PointCloud y = random_cloud(80, rng);
  CHECK(chamfer_l2(x, y) == chamfer_l2(y, x));
  CHECK(chamfer_l1(x, y) == chamfer_l1(y, x));
}

TEST_CASE("metrics are translation invariant") {
  Rng rng(Seed{13});
  PointCloud x = random_cloud(60, rng);
  PointCloud y = random_cloud(60, rng);
  const double l2 = chamfer_l2(x, y);
  const double l1 = chamfer_l1(x, y);
  const double f = fscore(x, y, 0.5);
  const Eigen::RowVector3d shift(0.37, -1.2, 5.0);
  x.points.rowwise() += shift;
  y.points.rowwise() += shift;
  CHECK(std::abs(chamfer_l2(x, y) - l2) <= 1e-12);
  CHECK(std::abs(chamfer_l1(x, y) - l1) <= 1e-12);
  CHECK(std::abs(fscore(x, y, 0.5) - f) <= 1e-12);
}

TEST_CASE("directional Jensen bound holds per direction") {
  Rng rng(Seed{17});
  const PointCloud x = random_cloud(80, rng);
  const PointCloud y = random_cloud(70, rng);
  const double m1 = brute_mean_min_dist(x, y);
  const double m2 = brute_mean_min_sq(x, y);
  CHECK(m1 * m1 <= m2 + 1e-15);
  const double n1 = brute_mean_min_dist(y, x);
  const double n2 = brute_mean_min_sq(y, x);
  CHECK(n1 * n1 <= n2 + 1e-15);
}

TEST_CASE("fscore conventions and the 2/3 construction") {
  Rng rng(Seed{19});
  const PointCloud c = random_cloud(30, rng);
  CHECK(fscore(c, c, 0.01) == 1.0);
  CHECK(fscore(single_point(0, 0, 0), single_point(5, 5, 5), 0.01) == 0.0);

  // Half of pred within tau, all gt covered: P = 0.5, R = 1, F = 2/3.
  PointCloud pred;
  pred.points.resize(2, 3);
  pred.points << 0, 0, 0, 5, 5, 5;
  const PointCloud gt = single_point(0, 0, 0);
  CHECK(fscore(pred, gt, 0.01) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("fscore is symmetric under swapping pred and gt") {
  Rng rng(Seed{23});
  const PointCloud a = random_cloud(50, rng);
  const PointCloud b = random_cloud(60, rng);
  for (double tau : {0.05, 0.5, 1.5})
    CHECK(fscore(a, b, tau) == fscore(b, a, tau));
}

TEST_CASE("fscore equals brute force") {
  Rng rng(Seed{29});
  for (int t = 0; t < 5; ++t) {
    const PointCloud a = random_cloud(150, rng);
    const PointCloud b = random_cloud(140, rng);
    CHECK(fscore(a, b, 0.8) == brute_fscore(a, b, 0.8));
  }
}

TEST_CASE("fidelity conventions and oracle") {
  Rng rng(Seed{31});
  const PointCloud partial = random_cloud(40, rng);
  PointCloud output = partial;
  output.points.conservativeResize(50, 3);
  for (Index i = 40; i < 50; ++i)
    output.points.row(i) = Eigen::RowVector3d(rng.normal(), rng.normal(),
                                              rng.normal());
  CHECK(fidelity(partial, output) == 0.0);  // output contains the input
  CHECK(fidelity(single_point(0, 0, 0), single_point(0, 0, 2)) == 2.0);
  const PointCloud a = random_cloud(100, rng);
  const PointCloud b = random_cloud(90, rng);
  CHECK(fidelity(a, b) == brute_mean_min_dist(a, b));
}

TEST_CASE("consistency over frames") {
  Rng rng(Seed{37});
  const PointCloud f0 = random_cloud(40, rng);
  std::vector<PointCloud> same = {f0, f0, f0};
  CHECK(consistency(same) == 0.0);

  std::vector<PointCloud> two = {single_point(0, 0, 0), single_point(1, 0, 0)};
  CHECK(consistency(two) == 2.0);

  std::vector<PointCloud> frames;
  frames.push_back(f0);
  for (int t = 1; t < 5; ++t) {
    PointCloud f = frames.back();
    for (Index i = 0; i < f.size(); ++i)
      for (Index j = 0; j < 3; ++j) f.points(i, j) += 0.01 * rng.normal();
    frames.push_back(f);
  }
  double expect = 0.0;
  for (int t = 0; t < 4; ++t) expect += chamfer_l2(frames[t], frames[t + 1]);
  expect /= 4.0;
  CHECK(consistency(frames) == doctest::Approx(expect).epsilon(1e-15));

  std::vector<PointCloud> one = {f0};
  CHECK_THROWS_AS(consistency(one), ValidationError);
}

TEST_CASE("metrics reject empty inputs and bad tau") {
  PointCloud empty;
  empty.points.resize(0, 3);
  const PointCloud one = single_point(0, 0, 0);
  CHECK_THROWS_AS(chamfer_l2(empty, one), ValidationError);
  CHECK_THROWS_AS(chamfer_l1(one, empty), ValidationError);
  CHECK_THROWS_AS(fscore(empty, one, 0.01), ValidationError);
  CHECK_THROWS_AS(fscore(one, one, 0.0), ValidationError);
  CHECK_THROWS_AS(fidelity(empty, one), ValidationError);
}

TEST_CASE("report overall row is the size-weighted mean") {
  MetricReport rep;
  rep.add(0, 1.0, 2.0, 0.5);
  rep.add(0, 3.0, 4.0, 0.7);
  rep.add(1, 10.0, 20.0, 0.1);
  rep.add_fidelity(0, 0.5);
  rep.add_fidelity(0, 1.5);
  rep.finalize();
  REQUIRE(rep.per_category.size() == 2);
  CHECK(rep.per_category[0].count == 2);
  CHECK(rep.per_category[0].cd_l1 == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(rep.per_category[1].cd_l2 == doctest::Approx(20.0).epsilon(1e-15));
  const double w_l1 = (2.0 * 2.0 + 1.0 * 10.0) / 3.0;
  CHECK(std::abs(rep.overall.cd_l1 - w_l1) <= 1e-12);
  const double w_f = (2.0 * 0.6 + 1.0 * 0.1) / 3.0;
  CHECK(std::abs(rep.overall.fscore - w_f) <= 1e-12);
  CHECK(rep.per_category[0].has_fidelity);
  CHECK(rep.per_category[0].fidelity == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(!rep.per_category[1].has_fidelity);
}

TEST_CASE("report renders a table and csv with one line per category") {
  MetricReport rep;
  rep.add(0, 1e-3, 2e-4, 0.5);
  rep.add(2, 2e-3, 4e-4, 0.25);
  rep.finalize();
  const std::string table = rep.to_table();
  CHECK(table.find("overall") != std::string::npos);
  const std::string csv = rep.to_csv();
  int lines = 0;
  std::istringstream is(csv);
  for (std::string line; std::getline(is, line);) ++lines;
  CHECK(lines == 4);  // header + 2 categories + overall
  CHECK(csv.find("category,") == 0);
}
