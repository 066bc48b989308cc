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

#include "cp3/geometry.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

namespace cp3 {

// ---------------------------------------------------------------------------
// Rng

std::uint64_t Rng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw ValidationError("uniform_int: n must be positive");
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = uniform(-1.0, 1.0);
    v = uniform(-1.0, 1.0);
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

Rng Rng::split() { return Rng(Seed{next_u64()}); }

// ---------------------------------------------------------------------------
// XYZ text I/O

namespace {

bool parse_double(const std::string& tok, double& out) {
  const char* begin = tok.data();
  char* end = nullptr;
  errno = 0;
  out = std::strtod(begin, &end);
  return end == begin + tok.size() && errno == 0;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

PointCloud load_xyz(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path);

  PointCloud cloud;
  std::vector<Eigen::RowVector3d> rows;
  std::string line;
  int line_no = 0;
  bool first_content = true;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;  // blank line

    if (first_content && tok == "#category") {
      std::string cat_tok;
      if (!(ls >> cat_tok))
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": #category header missing value");
      int cat = 0;
      auto res =
          std::from_chars(cat_tok.data(), cat_tok.data() + cat_tok.size(), cat);
      if (res.ec != std::errc{} || res.ptr != cat_tok.data() + cat_tok.size())
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": bad #category value '" + cat_tok + "'");
      cloud.category = cat;
      first_content = false;
      continue;
    }
    first_content = false;

    Eigen::RowVector3d p;
    std::string toks[3] = {tok};
    if (!(ls >> toks[1] >> toks[2]))
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": expected 3 coordinates");
    std::string extra;
    if (ls >> extra)
      throw ValidationError(path + ": line " + std::to_string(line_no) +
                            ": trailing token '" + extra + "'");
    for (int c = 0; c < 3; ++c) {
      if (!parse_double(toks[c], p[c]) || !std::isfinite(p[c]))
        throw ValidationError(path + ": line " + std::to_string(line_no) +
                              ": bad coordinate '" + toks[c] + "'");
    }
    rows.push_back(p);
  }
  if (rows.empty()) throw ValidationError(path + ": empty point cloud file");

  cloud.points.resize(static_cast<Index>(rows.size()), 3);
  for (Index i = 0; i < cloud.points.rows(); ++i)
    cloud.points.row(i) = rows[static_cast<std::size_t>(i)];
  return cloud;
}

void save_xyz(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open file for writing: " + path);
  if (cloud.category)
    out << "#category " << *cloud.category << "\n";
  for (Index i = 0; i < cloud.points.rows(); ++i) {
    out << format_double(cloud.points(i, 0)) << ' '
        << format_double(cloud.points(i, 1)) << ' '
        << format_double(cloud.points(i, 2)) << "\n";
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Normalization

UnitSphereTransform unit_sphere_transform(const PointCloud& cloud) {
  if (cloud.size() < 1) throw ValidationError("empty cloud");
  const Eigen::RowVector3d c = cloud.centroid();
  const double max_norm = (cloud.points.rowwise() - c).rowwise().norm().maxCoeff();
  if (max_norm <= 0.0)
    throw ValidationError("degenerate cloud: all points identical");
  return UnitSphereTransform{c, 1.0 / max_norm};
}

PointCloud UnitSphereTransform::apply(const PointCloud& cloud) const {
  PointCloud out;
  out.category = cloud.category;
  out.points = (cloud.points.rowwise() - center) * scale;
  return out;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  return unit_sphere_transform(cloud).apply(cloud);
}

// ---------------------------------------------------------------------------
// SpatialIndex (kd-tree)

SpatialIndex::SpatialIndex(const PointCloud& cloud) : points_(cloud.points) {
  const Index n = points_.rows();
  if (n < 1) throw ValidationError("SpatialIndex: empty cloud");
  std::vector<Index> idx(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  nodes_.reserve(static_cast<std::size_t>(n));
  nodes_.resize(static_cast<std::size_t>(n));
  Index next_node = 0;
  // Iterative stack of (lo, hi, slot to fill, parent link).
  struct Range {
    Index lo, hi;
    Index* link;
  };
  std::vector<Range> stack;
  stack.push_back({0, n, &root_});
  while (!stack.empty()) {
    Range r = stack.back();
    stack.pop_back();
    if (r.lo >= r.hi) {
      *r.link = -1;
      continue;
    }
    // Split along the widest axis of this subset.
    Eigen::RowVector3d mn = points_.row(idx[static_cast<std::size_t>(r.lo)]);
    Eigen::RowVector3d mx = mn;
    for (Index i = r.lo + 1; i < r.hi; ++i) {
      const auto p = points_.row(idx[static_cast<std::size_t>(i)]);
      mn = mn.cwiseMin(p);
      mx = mx.cwiseMax(p);
    }
    int axis = 0;
    (mx - mn).maxCoeff(&axis);
    const Index mid = r.lo + (r.hi - r.lo) / 2;
    std::nth_element(
        idx.begin() + r.lo, idx.begin() + mid, idx.begin() + r.hi,
        [&](Index a, Index b) {
          const double pa = points_(a, axis), pb = points_(b, axis);
          return pa < pb || (pa == pb && a < b);
        });
    const Index node = next_node++;
    nodes_[static_cast<std::size_t>(node)].point =
        idx[static_cast<std::size_t>(mid)];
    nodes_[static_cast<std::size_t>(node)].axis = axis;
    *r.link = node;
    stack.push_back({r.lo, mid, &nodes_[static_cast<std::size_t>(node)].left});
    stack.push_back(
        {mid + 1, r.hi, &nodes_[static_cast<std::size_t>(node)].right});
  }
}

namespace {

// Max-heap order: the worst candidate (largest d2, then largest index) on top.
inline bool knn_worse(double d2a, Index ia, double d2b, Index ib) {
  return d2a > d2b || (d2a == d2b && ia > ib);
}

}  // namespace

void SpatialIndex::search(Index node, const Eigen::RowVector3d& query, Index k,
                          std::vector<KnnEntry>& heap) const {
  if (node < 0) return;
  const Node& nd = nodes_[static_cast<std::size_t>(node)];
  const Eigen::RowVector3d diff = points_.row(nd.point) - query;
  const double d2 = diff[0] * diff[0] + diff[1] * diff[1] + diff[2] * diff[2];

  auto cmp = [](const KnnEntry& a, const KnnEntry& b) {
    return !knn_worse(a.d2, a.idx, b.d2, b.idx);  // max-heap on "worse"
  };
  if (static_cast<Index>(heap.size()) < k) {
    heap.push_back({d2, nd.point});
    std::push_heap(heap.begin(), heap.end(), cmp);
  } else if (knn_worse(heap.front().d2, heap.front().idx, d2, nd.point)) {
    std::pop_heap(heap.begin(), heap.end(), cmp);
    heap.back() = {d2, nd.point};
    std::push_heap(heap.begin(), heap.end(), cmp);
  }

  const double delta = query[nd.axis] - points_(nd.point, nd.axis);
  const Index near = delta <= 0.0 ? nd.left : nd.right;
  const Index far = delta <= 0.0 ? nd.right : nd.left;
  search(near, query, k, heap);
  // Visit the far side unless it is strictly outside the current worst
  // radius; equality must recurse so index tie-breaks match a full scan.
  if (static_cast<Index>(heap.size()) < k || delta * delta <= heap.front().d2)
    search(far, query, k, heap);
}

std::vector<Index> SpatialIndex::knn(const Eigen::RowVector3d& query,
                                     Index k) const {
  const Index n = points_.rows();
  if (k < 1 || k > n)
    throw ValidationError("knn: k out of range (k=" + std::to_string(k) +
                          ", N=" + std::to_string(n) + ")");
  std::vector<KnnEntry> heap;
  heap.reserve(static_cast<std::size_t>(k));
  search(root_, query, k, heap);
  std::sort(heap.begin(), heap.end(), [](const KnnEntry& a, const KnnEntry& b) {
    return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx);
  });
  std::vector<Index> out(heap.size());
  for (std::size_t i = 0; i < heap.size(); ++i) out[i] = heap[i].idx;
  return out;
}

double SpatialIndex::nearest_sq(const Eigen::RowVector3d& query) const {
  std::vector<KnnEntry> heap;
  heap.reserve(1);
  search(root_, query, 1, heap);
  return heap.front().d2;
}

// ---------------------------------------------------------------------------
// Farthest point sampling

std::vector<Index> farthest_point_sample_indices(const PointCloud& cloud,
                                                 Index m, Seed seed) {
  const Index n = cloud.size();
  if (m < 1 || m > n)
    throw ValidationError("farthest_point_sample: m out of range (m=" +
                          std::to_string(m) + ", N=" + std::to_string(n) + ")");
  Rng rng(seed);
  std::vector<Index> chosen;
  chosen.reserve(static_cast<std::size_t>(m));
  std::vector<double> best_d2(static_cast<std::size_t>(n),
                              std::numeric_limits<double>::infinity());
  std::vector<char> taken(static_cast<std::size_t>(n), 0);
  Index cur = static_cast<Index>(rng.uniform_int(static_cast<std::uint64_t>(n)));
  chosen.push_back(cur);
  taken[static_cast<std::size_t>(cur)] = 1;
  for (Index step = 1; step < m; ++step) {
    Index arg = -1;
    double best = -1.0;
    for (Index i = 0; i < n; ++i) {
      const Eigen::RowVector3d diff = cloud.points.row(i) - cloud.points.row(cur);
      const double d2 = diff.squaredNorm();
      auto& slot = best_d2[static_cast<std::size_t>(i)];
      if (d2 < slot) slot = d2;
      if (!taken[static_cast<std::size_t>(i)] && slot > best) {
        // ties keep the lowest index
        best = slot;
        arg = i;
      }
    }
    cur = arg;
    chosen.push_back(cur);
    taken[static_cast<std::size_t>(cur)] = 1;
  }
  return chosen;
}

PointCloud farthest_point_sample(const PointCloud& cloud, Index m, Seed seed) {
  const auto idx = farthest_point_sample_indices(cloud, m, seed);
  PointCloud out;
  out.category = cloud.category;
  out.points.resize(m, 3);
  for (Index i = 0; i < m; ++i)
    out.points.row(i) = cloud.points.row(idx[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace cp3
