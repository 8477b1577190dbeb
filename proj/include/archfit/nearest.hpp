#pragma once

#include <vector>

#include "archfit/geometry.hpp"

namespace archfit {

struct Match {
  int index = -1;
  double dist2 = 0.0;
};

// Exact nearest neighbour by brute force; ties resolve to the lowest index.
Match nearest_brute(const Points& cloud, const Vec3& q);

/// Uniform-grid bucket index over a point cloud. Queries are exact and return the same match
/// as nearest_brute (including tie-breaking), so it can replace brute force transparently.
class PointGrid {
 public:
  explicit PointGrid(const Points& cloud, double cell = 0.0);

  Match nearest(const Vec3& q) const;

 private:
  long cell_key(int i, int j, int k) const;

  const Points* cloud_;
  double cell_;
  Vec3 lo_;
  std::array<int, 3> dims_{};
  std::vector<int> starts_;  // CSR offsets per cell
  std::vector<int> items_;
};

// Matches for every query row.
std::vector<Match> nearest_all(const Points& cloud, const Points& queries, bool use_grid = true);

}  // namespace archfit
