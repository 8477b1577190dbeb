#pragma once

#include <array>
#include <vector>

#include "archfit/geometry.hpp"
#include "archfit/mesh.hpp"

namespace archfit {

inline constexpr double kDefaultVoxelSpacing = 1.0;

struct VoxelGrid {
  Vec3 origin = Vec3::Zero();  // corner of voxel (0,0,0); voxel centers sit at origin + (i + 0.5) * spacing
  Vec3 spacing = Vec3::Ones();
  std::array<int, 3> dims{0, 0, 0};

  std::size_t size() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  Vec3 center(int i, int j, int k) const {
    return origin + Vec3((i + 0.5) * spacing.x(), (j + 0.5) * spacing.y(), (k + 0.5) * spacing.z());
  }
  bool operator==(const VoxelGrid& o) const {
    return origin == o.origin && spacing == o.spacing && dims == o.dims;
  }

  // World-aligned lattice (origin snapped to multiples of spacing) covering the box plus one voxel.
  static VoxelGrid enclosing(const Vec3& lo, const Vec3& hi, double spacing);
};

struct VoxelMask {
  VoxelGrid grid;
  std::vector<char> occupancy;  // x fastest, then y, then z

  std::size_t count() const;
  double volume() const { return static_cast<double>(count()) * grid.spacing.prod(); }
};

// Grid covering every given mesh at the spacing.
VoxelGrid grid_enclosing(const std::vector<const TubeMesh*>& meshes, double spacing);

// Fan-capped closed surface: tube cells plus triangle fans about the end-ring centroids.
// Returns vertices (nodes followed by the two cap centers) and triangles.
std::pair<Points, std::vector<Triangle>> capped_surface(const TubeMesh& mesh);

// Ray parity along +x from each voxel center row; rows hitting an edge or vertex are re-cast
// with a 1e-7 mm jitter. Throws OpenSurface when an end ring is degenerate.
VoxelMask voxelize(const TubeMesh& mesh, const VoxelGrid& grid);
VoxelMask voxelize(const TubeMesh& mesh, double spacing = kDefaultVoxelSpacing);

}  // namespace archfit
