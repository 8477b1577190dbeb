#pragma once

#include <vector>

#include "archfit/geometry.hpp"

namespace archfit {

inline constexpr int kDefaultRings = 40;
inline constexpr int kDefaultPointsPerRing = 82;

// Quad-strip triangulation between consecutive rings, 2 * (n_rings - 1) * pts_per_ring triangles.
std::vector<Triangle> tube_cells(int n_rings, int pts_per_ring);

/// Fixed-topology ring-structured tube surface.
///
/// Nodes are stored ring-major from inlet to outlet: node (ring r, point j) lives at row
/// r * pts_per_ring + j. Rings wind counter-clockwise about the inlet-to-outlet direction.
/// The surface is open at both ends; caps only exist inside voxelization.
class TubeMesh {
 public:
  TubeMesh() = default;
  TubeMesh(int n_rings, int pts_per_ring, Points nodes);
  TubeMesh(int n_rings, int pts_per_ring, Points nodes, std::vector<Triangle> cells);

  int n_rings() const { return n_rings_; }
  int pts_per_ring() const { return pts_per_ring_; }
  int n_nodes() const { return n_rings_ * pts_per_ring_; }
  const Points& nodes() const { return nodes_; }
  const std::vector<Triangle>& cells() const { return cells_; }

  int node_index(int ring, int j) const { return ring * pts_per_ring_ + j; }
  Points ring(int r) const;
  Vec3 ring_centroid(int r) const;
  Points ring_centroids() const;

  // Same topology, new coordinates.
  TubeMesh with_nodes(Points nodes) const;

  bool same_topology(const TubeMesh& other) const;

  // Throws DegenerateMesh when an invariant is violated: index ranges, unreferenced nodes,
  // non-simple or zero-area rings, coincident consecutive ring centroids.
  void validate() const;

 private:
  int n_rings_ = 0;
  int pts_per_ring_ = 0;
  Points nodes_;
  std::vector<Triangle> cells_;
};

/// Arclength-parameterized polyline.
class CenterlineCurve {
 public:
  CenterlineCurve() = default;
  explicit CenterlineCurve(Points points);

  const Points& points() const { return points_; }
  const std::vector<double>& arclength() const { return arclength_; }
  double length() const { return arclength_.back(); }
  Eigen::Index size() const { return points_.rows(); }

  Vec3 point_at(double s) const;
  // Unit tangent of the polyline at arclength s (central difference over the enclosing samples).
  Vec3 tangent_at(double s) const;
  // Arclength of the curve point closest to p (projection onto segments).
  double project(const Vec3& p) const;

 private:
  Points points_;
  std::vector<double> arclength_;
};

// Cubic spline through the ring centroids resampled to n_points at equal arclength.
CenterlineCurve centerline_from_mesh(const TubeMesh& mesh, int n_points = 500);

// Mean distance from the ring's points to the ring centroid.
double ring_radius(const TubeMesh& mesh, int ring_index);
std::vector<double> ring_radii(const TubeMesh& mesh);

// The point set used by the mesh loss and the surface distances: node coordinates in storage order.
Points surface_points(const TubeMesh& mesh);

// Triangle centroids in cell order.
Points cell_centers(const TubeMesh& mesh);

// Rigid/similarity helpers used by tests and the generator.
TubeMesh transformed(const TubeMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation,
                     double scale = 1.0);

}  // namespace archfit
