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
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "cp3/ioi.hpp"

namespace cp3 {

namespace {

struct BoxPart {
  Eigen::RowVector3d center;
  Eigen::RowVector3d half;
};

// One face per (part, axis, sign); weight = face area.
struct Face {
  const BoxPart* part;
  int axis;
  double sign;
  double area;
};

std::vector<Face> collect_faces(const std::vector<BoxPart>& parts) {
  std::vector<Face> faces;
  for (const BoxPart& p : parts) {
    for (int axis = 0; axis < 3; ++axis) {
      const int u = (axis + 1) % 3;
      const int v = (axis + 2) % 3;
      const double area = 4.0 * p.half[u] * p.half[v];
      faces.push_back(Face{&p, axis, 1.0, area});
      faces.push_back(Face{&p, axis, -1.0, area});
    }
  }
  return faces;
}

PointMatrix sample_box_union(const std::vector<BoxPart>& parts, Index n,
                             Rng& rng) {
  const std::vector<Face> faces = collect_faces(parts);
  double total = 0.0;
  for (const Face& f : faces) total += f.area;
  if (!(total > 0.0))
    throw ValidationError("shape: degenerate surface with zero area");

  PointMatrix pts(n, 3);
  for (Index i = 0; i < n; ++i) {
    double t = rng.uniform() * total;
    const Face* chosen = &faces.back();
    for (const Face& f : faces) {
      if (t < f.area) {
        chosen = &f;
        break;
      }
      t -= f.area;
    }
    const BoxPart& p = *chosen->part;
    const int axis = chosen->axis;
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    Eigen::RowVector3d q = p.center;
    q[axis] += chosen->sign * p.half[axis];
    q[u] += rng.uniform(-p.half[u], p.half[u]);
    q[v] += rng.uniform(-p.half[v], p.half[v]);
    pts.row(i) = q;
  }
  return pts;
}

std::vector<BoxPart> slab_and_legs(double s) {
  std::vector<BoxPart> parts;
  parts.push_back(BoxPart{{0.0, 0.0, 0.05 * s}, {0.5 * s, 0.5 * s, 0.05 * s}});
  for (double sx : {-1.0, 1.0})
    for (double sy : {-1.0, 1.0})
      parts.push_back(BoxPart{{0.4 * s * sx, 0.4 * s * sy, -0.25 * s},
                              {0.05 * s, 0.05 * s, 0.25 * s}});
  return parts;
}

}  // namespace

ShapeKind shape_kind_from_string(const std::string& s) {
  if (s == "sphere") return ShapeKind::kSphere;
  if (s == "box") return ShapeKind::kBox;
  if (s == "cylinder") return ShapeKind::kCylinder;
  if (s == "chair") return ShapeKind::kChair;
  if (s == "table") return ShapeKind::kTable;
  throw ValidationError("unknown shape kind '" + s + "'");
}

std::string to_string(ShapeKind k) {
  switch (k) {
    case ShapeKind::kSphere: return "sphere";
    case ShapeKind::kBox: return "box";
    case ShapeKind::kCylinder: return "cylinder";
    case ShapeKind::kChair: return "chair";
    case ShapeKind::kTable: return "table";
  }
  return "?";
}

void ShapeSpec::validate() const {
  if (n_full < 16) throw ValidationError("shape: n_full must be >= 16");
  if (!(crop_rate > 0.0) || crop_rate > 0.8)
    throw ValidationError("shape: crop rate must lie in (0, 0.8]");
  if (!(size_a > 0.0) || !(size_b > 0.0) || !(size_c > 0.0))
    throw ValidationError("shape: sizes must be positive");
  if (category < 0) throw ValidationError("shape: negative category");
}

PointCloud generate_shape_surface(const ShapeSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  PointCloud cloud;
  cloud.category = spec.category;
  cloud.points.resize(spec.n_full, 3);

  switch (spec.kind) {
    case ShapeKind::kSphere: {
      for (Index i = 0; i < spec.n_full; ++i) {
        Eigen::RowVector3d v;
        double norm = 0.0;
        do {
          v << rng.normal(), rng.normal(), rng.normal();
          norm = v.norm();
        } while (norm < 1e-12);
        cloud.points.row(i) = (spec.size_a / norm) * v;
      }
      break;
    }
    case ShapeKind::kBox: {
      std::vector<BoxPart> parts{
          BoxPart{{0.0, 0.0, 0.0}, {spec.size_a, spec.size_b, spec.size_c}}};
      cloud.points = sample_box_union(parts, spec.n_full, rng);
      break;
    }
    case ShapeKind::kCylinder: {
      const double r = spec.size_a;
      const double h = spec.size_b;  // half-height
      const double side = 2.0 * std::numbers::pi * r * 2.0 * h;
      const double cap = std::numbers::pi * r * r;
      const double total = side + 2.0 * cap;
      for (Index i = 0; i < spec.n_full; ++i) {
        const double t = rng.uniform() * total;
        const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
        if (t < side) {
          const double z = rng.uniform(-h, h);
          cloud.points.row(i) << r * std::cos(angle), r * std::sin(angle), z;
        } else {
          const double rho = r * std::sqrt(rng.uniform());
          const double z = (t - side < cap) ? h : -h;
          cloud.points.row(i) << rho * std::cos(angle), rho * std::sin(angle),
              z;
        }
      }
      break;
    }
    case ShapeKind::kChair: {
      std::vector<BoxPart> parts = slab_and_legs(spec.size_a);
      parts.push_back(BoxPart{{0.0, 0.45 * spec.size_a, 0.5 * spec.size_a},
                              {0.5 * spec.size_a, 0.05 * spec.size_a,
                               0.4 * spec.size_a}});
      cloud.points = sample_box_union(parts, spec.n_full, rng);
      break;
    }
    case ShapeKind::kTable: {
      cloud.points =
          sample_box_union(slab_and_legs(spec.size_a), spec.n_full, rng);
      break;
    }
  }
  return cloud;
}

PointCloud generate_shape(const ShapeSpec& spec) {
  return normalize_unit_sphere(generate_shape_surface(spec));
}

PointCloud make_partial(const PointCloud& complete, const ShapeSpec& spec) {
  spec.validate();
  // Salted so the crop plane is independent of the surface-sampling stream.
  Rng rng(Seed{spec.seed.value ^ 0xC90FDAA22168C234ull});
  const CropPlane plane = sample_crop_plane(rng);
  return ioi_crop(complete, spec.crop_rate, plane).kept;
}

std::vector<DatasetEntry> Dataset::split(const std::string& name) const {
  std::vector<DatasetEntry> out;
  for (const DatasetEntry& e : entries)
    if (e.split == name) out.push_back(e);
  return out;
}

std::filesystem::path build_dataset(const std::vector<ShapeSpec>& specs,
                                    double train_fraction, Seed seed,
                                    const std::filesystem::path& root) {
  if (specs.empty()) throw ValidationError("build_dataset: no specs");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw ValidationError("build_dataset: train fraction must lie in (0, 1)");
  std::filesystem::create_directories(root);

  std::map<int, std::vector<std::size_t>> by_category;
  for (std::size_t i = 0; i < specs.size(); ++i)
    by_category[specs[i].category].push_back(i);

  // Stratified assignment: shuffle within each category, first chunk trains.
  Rng rng(seed);
  std::vector<std::string> split_of(specs.size());
  for (auto& [category, idxs] : by_category) {
    for (std::size_t i = idxs.size(); i > 1; --i) {
      const std::size_t j =
          static_cast<std::size_t>(rng.uniform_int(static_cast<std::uint64_t>(i)));
      std::swap(idxs[i - 1], idxs[j]);
    }
    const auto n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(idxs.size())));
    for (std::size_t pos = 0; pos < idxs.size(); ++pos)
      split_of[idxs[pos]] = pos < n_train ? "train" : "val";
  }

  std::ofstream manifest(root / "manifest.txt");
  if (!manifest)
    throw std::runtime_error("cannot write manifest under " + root.string());
  std::map<int, int> counter;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const ShapeSpec& spec = specs[i];
    const int idx = counter[spec.category]++;
    const PointCloud complete = generate_shape(spec);
    const PointCloud partial = make_partial(complete, spec);
    const std::string stem =
        "c" + std::to_string(spec.category) + "_s" + std::to_string(idx);
    const std::string partial_name = stem + "_partial.xyz";
    const std::string complete_name = stem + "_complete.xyz";
    save_xyz(partial, (root / partial_name).string());
    save_xyz(complete, (root / complete_name).string());
    manifest << split_of[i] << ' ' << spec.category << ' ' << partial_name
             << ' ' << complete_name << "\n";
  }
  if (!manifest) throw std::runtime_error("manifest write failed");
  manifest.close();
  return root / "manifest.txt";
}

Dataset load_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in)
    throw ValidationError("cannot open manifest: " + manifest.string());
  Dataset ds;
  ds.root = manifest.parent_path();
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    DatasetEntry e;
    if (!(ls >> e.split)) continue;  // blank line
    if (!(ls >> e.category >> e.partial_path >> e.complete_path))
      throw ValidationError(manifest.string() + ": line " +
                            std::to_string(line_no) + ": expected 4 fields");
    std::string extra;
    if (ls >> extra)
      throw ValidationError(manifest.string() + ": line " +
                            std::to_string(line_no) + ": trailing tokens");
    if (e.split != "train" && e.split != "val")
      throw ValidationError(manifest.string() + ": line " +
                            std::to_string(line_no) + ": bad split '" +
                            e.split + "'");
    if (e.category < 0)
      throw ValidationError(manifest.string() + ": line " +
                            std::to_string(line_no) + ": negative category");
    ds.entries.push_back(std::move(e));
  }
  if (ds.entries.empty())
    throw ValidationError(manifest.string() + ": empty manifest");
  return ds;
}

std::vector<ShapeSpec> default_dataset_specs(Index n_full, Index per_category,
                                             Seed seed) {
  if (per_category < 1)
    throw ValidationError("default_dataset_specs: per_category must be >= 1");
  Rng rng(seed);
  std::vector<ShapeSpec> specs;
  const ShapeKind kinds[] = {ShapeKind::kSphere, ShapeKind::kBox,
                             ShapeKind::kChair, ShapeKind::kTable};
  for (int cat = 0; cat < 4; ++cat) {
    for (Index i = 0; i < per_category; ++i) {
      ShapeSpec s;
      s.category = cat;
      s.kind = kinds[cat];
      s.n_full = n_full;
      s.crop_rate = 0.5;
      switch (s.kind) {
        case ShapeKind::kSphere:
          s.size_a = rng.uniform(0.6, 1.0);
          break;
        case ShapeKind::kBox:
          s.size_a = rng.uniform(0.3, 0.9);
          s.size_b = rng.uniform(0.3, 0.9);
          s.size_c = rng.uniform(0.3, 0.9);
          break;
        case ShapeKind::kChair:
        case ShapeKind::kTable:
          s.size_a = rng.uniform(0.7, 1.1);
          break;
        case ShapeKind::kCylinder:
          break;  // not part of the default corpus
      }
      s.seed = Seed{rng.next_u64()};
      specs.push_back(s);
    }
  }
  return specs;
}

}  // namespace cp3
