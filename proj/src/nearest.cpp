#include "archfit/nearest.hpp"

#include <algorithm>
#include <cmath>

namespace archfit {

namespace {

inline bool better(double d2, int idx, const Match& best) {
  return best.index < 0 || d2 < best.dist2 || (d2 == best.dist2 && idx < best.index);
}

}  // namespace

Match nearest_brute(const Points& cloud, const Vec3& q) {
  Match best;
  for (Eigen::Index i = 0; i < cloud.rows(); ++i) {
    const double dx = cloud(i, 0) - q.x(), dy = cloud(i, 1) - q.y(), dz = cloud(i, 2) - q.z();
    const double d2 = dx * dx + dy * dy + dz * dz;
    if (better(d2, static_cast<int>(i), best)) best = {static_cast<int>(i), d2};
  }
  return best;
}

PointGrid::PointGrid(const Points& cloud, double cell) : cloud_(&cloud) {
  lo_ = cloud.colwise().minCoeff().transpose();
  const Vec3 hi = cloud.colwise().maxCoeff().transpose();
  const Vec3 extent = (hi - lo_).cwiseMax(1e-9);
  if (cell <= 0) {
    const double volume = extent.prod();
    cell = std::max(std::cbrt(volume / std::max<Eigen::Index>(1, cloud.rows())), 1e-3 * extent.maxCoeff());
  }
  cell_ = cell;
  for (int a = 0; a < 3; ++a) dims_[a] = std::max(1, static_cast<int>(std::floor(extent[a] / cell_)) + 1);
  const std::size_t n_cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
  std::vector<int> counts(n_cells + 1, 0);
  std::vector<long> keys(static_cast<std::size_t>(cloud.rows()));
  for (Eigen::Index p = 0; p < cloud.rows(); ++p) {
    int c[3];
    for (int a = 0; a < 3; ++a) c[a] = std::clamp(static_cast<int>(std::floor((cloud(p, a) - lo_[a]) / cell_)), 0, dims_[a] - 1);
    keys[static_cast<std::size_t>(p)] = cell_key(c[0], c[1], c[2]);
    ++counts[static_cast<std::size_t>(keys[static_cast<std::size_t>(p)]) + 1];
  }
  for (std::size_t i = 1; i < counts.size(); ++i) counts[i] += counts[i - 1];
  starts_ = counts;
  items_.assign(static_cast<std::size_t>(cloud.rows()), 0);
  std::vector<int> fill(counts.begin(), counts.end() - 1);
  for (Eigen::Index p = 0; p < cloud.rows(); ++p) {
    items_[static_cast<std::size_t>(fill[static_cast<std::size_t>(keys[static_cast<std::size_t>(p)])]++)] = static_cast<int>(p);
  }
}

long PointGrid::cell_key(int i, int j, int k) const {
  return (static_cast<long>(k) * dims_[1] + j) * dims_[0] + i;
}

Match PointGrid::nearest(const Vec3& q) const {
  const Points& cloud = *cloud_;
  int qc[3];
  for (int a = 0; a < 3; ++a) qc[a] = static_cast<int>(std::floor((q[a] - lo_[a]) / cell_));
  // Chebyshev distance (in cells) from the query cell to the grid box, and to its far corner.
  int r_start = 0, r_max = 0;
  for (int a = 0; a < 3; ++a) {
    const int below = qc[a] < 0 ? -qc[a] : 0;
    const int above = qc[a] >= dims_[a] ? qc[a] - dims_[a] + 1 : 0;
    r_start = std::max(r_start, std::max(below, above));
    r_max = std::max(r_max, std::max(std::abs(qc[a]), std::abs(qc[a] - dims_[a] + 1)));
  }
  Match best;
  auto scan_cell = [&](int i, int j, int k) {
    const long key = cell_key(i, j, k);
    for (int s = starts_[static_cast<std::size_t>(key)]; s < starts_[static_cast<std::size_t>(key) + 1]; ++s) {
      const int p = items_[static_cast<std::size_t>(s)];
      const double dx = cloud(p, 0) - q.x(), dy = cloud(p, 1) - q.y(), dz = cloud(p, 2) - q.z();
      const double d2 = dx * dx + dy * dy + dz * dz;
      if (better(d2, p, best)) best = {p, d2};
    }
  };
  for (int r = r_start; r <= r_max; ++r) {
    const int i0 = std::max(0, qc[0] - r), i1 = std::min(dims_[0] - 1, qc[0] + r);
    const int j0 = std::max(0, qc[1] - r), j1 = std::min(dims_[1] - 1, qc[1] + r);
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        const bool on_face = std::abs(i - qc[0]) == r || std::abs(j - qc[1]) == r;
        if (on_face) {
          const int k0 = std::max(0, qc[2] - r), k1 = std::min(dims_[2] - 1, qc[2] + r);
          for (int k = k0; k <= k1; ++k) scan_cell(i, j, k);
        } else {
          if (qc[2] - r >= 0 && qc[2] - r < dims_[2]) scan_cell(i, j, qc[2] - r);
          if (r > 0 && qc[2] + r >= 0 && qc[2] + r < dims_[2]) scan_cell(i, j, qc[2] + r);
        }
      }
    }
    // Unvisited cells are at least r full cells away.
    if (best.index >= 0) {
      const double bound = r * cell_;
      if (best.dist2 < bound * bound) break;
    }
  }
  return best;
}

std::vector<Match> nearest_all(const Points& cloud, const Points& queries, bool use_grid) {
  std::vector<Match> out(static_cast<std::size_t>(queries.rows()));
  if (use_grid && cloud.rows() > 64) {
    PointGrid grid(cloud);
    for (Eigen::Index i = 0; i < queries.rows(); ++i) out[static_cast<std::size_t>(i)] = grid.nearest(row(queries, i));
  } else {
    for (Eigen::Index i = 0; i < queries.rows(); ++i) out[static_cast<std::size_t>(i)] = nearest_brute(cloud, row(queries, i));
  }
  return out;
}

}  // namespace archfit
