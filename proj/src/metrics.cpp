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
#include <iomanip>
#include <sstream>

namespace cp3 {

namespace {

void require_nonempty(const PointCloud& c, const char* what) {
  if (c.size() < 1)
    throw ValidationError(std::string(what) + ": empty point cloud");
}

// Directional mean of squared NN distances, summed in index order.
double mean_min_sq(const PointCloud& from, const SpatialIndex& to_index) {
  double sum = 0.0;
  for (Index i = 0; i < from.size(); ++i)
    sum += to_index.nearest_sq(from.points.row(i));
  return sum / static_cast<double>(from.size());
}

double mean_min_dist(const PointCloud& from, const SpatialIndex& to_index) {
  double sum = 0.0;
  for (Index i = 0; i < from.size(); ++i)
    sum += std::sqrt(to_index.nearest_sq(from.points.row(i)));
  return sum / static_cast<double>(from.size());
}

double covered_fraction(const PointCloud& from, const SpatialIndex& to_index,
                        double tau_sq) {
  Index hits = 0;
  for (Index i = 0; i < from.size(); ++i)
    if (to_index.nearest_sq(from.points.row(i)) <= tau_sq) ++hits;
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

}  // namespace

double chamfer_l2(const PointCloud& x, const PointCloud& y) {
  require_nonempty(x, "chamfer_l2");
  require_nonempty(y, "chamfer_l2");
  const SpatialIndex ix(x), iy(y);
  return mean_min_sq(x, iy) + mean_min_sq(y, ix);
}

double chamfer_l1(const PointCloud& x, const PointCloud& y) {
  require_nonempty(x, "chamfer_l1");
  require_nonempty(y, "chamfer_l1");
  const SpatialIndex ix(x), iy(y);
  return 0.5 * (mean_min_dist(x, iy) + mean_min_dist(y, ix));
}

double fscore(const PointCloud& pred, const PointCloud& gt, double tau) {
  require_nonempty(pred, "fscore");
  require_nonempty(gt, "fscore");
  if (!(tau > 0.0)) throw ValidationError("fscore: tau must be positive");
  const double tau_sq = tau * tau;
  const SpatialIndex ipred(pred), igt(gt);
  const double precision = covered_fraction(pred, igt, tau_sq);
  const double recall = covered_fraction(gt, ipred, tau_sq);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double fidelity(const PointCloud& partial, const PointCloud& output) {
  require_nonempty(partial, "fidelity");
  require_nonempty(output, "fidelity");
  const SpatialIndex iout(output);
  return mean_min_dist(partial, iout);
}

double consistency(const std::vector<PointCloud>& frames) {
  if (frames.size() < 2)
    throw ValidationError("consistency: need at least 2 frames");
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < frames.size(); ++t)
    sum += chamfer_l2(frames[t], frames[t + 1]);
  return sum / static_cast<double>(frames.size() - 1);
}

// ---------------------------------------------------------------------------
// MetricReport

void MetricReport::add(int category, double cd_l1, double cd_l2,
                       double fscore) {
  auto& a = accum_[category];
  a.count += 1;
  a.cd_l1 += cd_l1;
  a.cd_l2 += cd_l2;
  a.fscore += fscore;
}

void MetricReport::add_fidelity(int category, double value) {
  auto& a = accum_[category];
  a.fid_count += 1;
  a.fidelity += value;
}

void MetricReport::finalize() {
  per_category.clear();
  overall = Row{};
  Index total = 0;
  double w_l1 = 0.0, w_l2 = 0.0, w_f = 0.0;
  Index fid_total = 0;
  double w_fid = 0.0;
  for (const auto& [cat, a] : accum_) {
    Row row;
    row.count = a.count;
    const double n = static_cast<double>(a.count);
    row.cd_l1 = a.cd_l1 / n;
    row.cd_l2 = a.cd_l2 / n;
    row.fscore = a.fscore / n;
    if (a.fid_count > 0) {
      row.has_fidelity = true;
      row.fidelity = a.fidelity / static_cast<double>(a.fid_count);
      fid_total += a.fid_count;
      w_fid += row.fidelity * static_cast<double>(a.fid_count);
    }
    per_category[cat] = row;
    total += a.count;
    w_l1 += row.cd_l1 * n;
    w_l2 += row.cd_l2 * n;
    w_f += row.fscore * n;
  }
  if (total > 0) {
    overall.count = total;
    overall.cd_l1 = w_l1 / static_cast<double>(total);
    overall.cd_l2 = w_l2 / static_cast<double>(total);
    overall.fscore = w_f / static_cast<double>(total);
    if (fid_total > 0) {
      overall.has_fidelity = true;
      overall.fidelity = w_fid / static_cast<double>(fid_total);
    }
  }
}

namespace {

std::string fmt_fixed(double v, int prec) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(prec) << v;
  return os.str();
}

}  // namespace

std::string MetricReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(10) << "category" << std::right << std::setw(8)
     << "count" << std::setw(14) << "cd_l1(x1e3)" << std::setw(14)
     << "cd_l2(x1e4)" << std::setw(12) << "fscore@1%" << "\n";
  auto line = [&](const std::string& name, const Row& r) {
    os << std::left << std::setw(10) << name << std::right << std::setw(8)
       << r.count << std::setw(14) << fmt_fixed(r.cd_l1 * 1e3, 4)
       << std::setw(14) << fmt_fixed(r.cd_l2 * 1e4, 4) << std::setw(12)
       << fmt_fixed(r.fscore, 4) << "\n";
  };
  for (const auto& [cat, row] : per_category) line(std::to_string(cat), row);
  line("overall", overall);
  return os.str();
}

std::string MetricReport::to_csv() const {
  std::ostringstream os;
  os << "category,count,cd_l1_x1e3,cd_l2_x1e4,fscore_at_1pct\n";
  auto line = [&](const std::string& name, const Row& r) {
    os << name << ',' << r.count << ',' << fmt_fixed(r.cd_l1 * 1e3, 6) << ','
       << fmt_fixed(r.cd_l2 * 1e4, 6) << ',' << fmt_fixed(r.fscore, 6) << "\n";
  };
  for (const auto& [cat, row] : per_category) line(std::to_string(cat), row);
  line("overall", overall);
  return os.str();
}

}  // namespace cp3
