#include "archfit/mesh.hpp"

#include <algorithm>
#include <cmath>

#include "archfit/error.hpp"
#include "archfit/spline.hpp"

namespace archfit {

namespace {

Vec3 newell_normal(const Points& loop) {
  Vec3 n = Vec3::Zero();
  const Eigen::Index m = loop.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    const Vec3 a = row(loop, i);
    const Vec3 b = row(loop, (i + 1) % m);
    n += a.cross(b);
  }
  return n * 0.5;
}

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) { return a.x() * b.y() - a.y() * b.x(); }

bool segments_cross(const Eigen::Vector2d& p1, const Eigen::Vector2d& p2, const Eigen::Vector2d& q1,
                    const Eigen::Vector2d& q2) {
  const double d1 = cross2(q2 - q1, p1 - q1);
  const double d2 = cross2(q2 - q1, p2 - q1);
  const double d3 = cross2(p2 - p1, q1 - p1);
  const double d4 = cross2(p2 - p1, q2 - p1);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 && d4 != 0;
}

bool ring_is_simple(const Points& ring, const Vec3& normal) {
  const Plane frame = Plane::make(Vec3::Zero(), normal);
  const auto [u, v] = frame.basis();
  const Eigen::Index m = ring.rows();
  std::vector<Eigen::Vector2d> p(static_cast<std::size_t>(m));
  for (Eigen::Index i = 0; i < m; ++i) p[static_cast<std::size_t>(i)] = {row(ring, i).dot(u), row(ring, i).dot(v)};
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 2; j < m; ++j) {
      if (i == 0 && j == m - 1) continue;
      if (segments_cross(p[i], p[(i + 1) % m], p[j], p[(j + 1) % m])) return false;
    }
  }
  return true;
}

}  // namespace

std::vector<Triangle> tube_cells(int n_rings, int pts_per_ring) {
  std::vector<Triangle> cells;
  cells.reserve(static_cast<std::size_t>(2 * (n_rings - 1) * pts_per_ring));
  for (int r = 0; r + 1 < n_rings; ++r) {
    for (int j = 0; j < pts_per_ring; ++j) {
      const int jn = (j + 1) % pts_per_ring;
      const int a = r * pts_per_ring + j;
      const int b = r * pts_per_ring + jn;
      const int c = (r + 1) * pts_per_ring + j;
      const int d = (r + 1) * pts_per_ring + jn;
      cells.push_back({a, b, c});
      cells.push_back({b, d, c});
    }
  }
  return cells;
}

TubeMesh::TubeMesh(int n_rings, int pts_per_ring, Points nodes)
    : TubeMesh(n_rings, pts_per_ring, std::move(nodes), tube_cells(n_rings, pts_per_ring)) {}

TubeMesh::TubeMesh(int n_rings, int pts_per_ring, Points nodes, std::vector<Triangle> cells)
    : n_rings_(n_rings), pts_per_ring_(pts_per_ring), nodes_(std::move(nodes)), cells_(std::move(cells)) {
  if (n_rings_ < 2 || pts_per_ring_ < 3) {
    throw Error(ErrorCode::DegenerateMesh, "tube needs >= 2 rings of >= 3 points");
  }
  if (nodes_.rows() != static_cast<Eigen::Index>(n_rings_) * pts_per_ring_) {
    throw Error(ErrorCode::DegenerateMesh, "node count " + std::to_string(nodes_.rows()) + " != n_rings * pts_per_ring");
  }
}

Points TubeMesh::ring(int r) const { return nodes_.middleRows(static_cast<Eigen::Index>(r) * pts_per_ring_, pts_per_ring_); }

Vec3 TubeMesh::ring_centroid(int r) const { return centroid(ring(r)); }

Points TubeMesh::ring_centroids() const {
  Points c(n_rings_, 3);
  for (int r = 0; r < n_rings_; ++r) c.row(r) = ring_centroid(r).transpose();
  return c;
}

TubeMesh TubeMesh::with_nodes(Points nodes) const {
  return TubeMesh(n_rings_, pts_per_ring_, std::move(nodes), cells_);
}

bool TubeMesh::same_topology(const TubeMesh& other) const {
  return n_rings_ == other.n_rings_ && pts_per_ring_ == other.pts_per_ring_ && cells_ == other.cells_;
}

void TubeMesh::validate() const {
  if (!nodes_.allFinite()) throw Error(ErrorCode::DegenerateMesh, "non-finite node coordinates");
  std::vector<char> used(static_cast<std::size_t>(n_nodes()), 0);
  for (const auto& tri : cells_) {
    for (int idx : tri) {
      if (idx < 0 || idx >= n_nodes()) throw Error(ErrorCode::DegenerateMesh, "cell index out of range");
      used[static_cast<std::size_t>(idx)] = 1;
    }
  }
  if (std::find(used.begin(), used.end(), 0) != used.end()) {
    throw Error(ErrorCode::DegenerateMesh, "node not referenced by any cell");
  }
  for (int r = 0; r < n_rings_; ++r) {
    const Points ring_pts = ring(r);
    const Vec3 n = newell_normal(ring_pts);
    if (!(n.norm() > 1e-12)) throw Error(ErrorCode::DegenerateMesh, "ring " + std::to_string(r) + " has zero area");
    if (!ring_is_simple(ring_pts, n)) throw Error(ErrorCode::DegenerateMesh, "ring " + std::to_string(r) + " self-intersects");
    if (r > 0 && (ring_centroid(r) - ring_centroid(r - 1)).norm() < 1e-12) {
      throw Error(ErrorCode::DegenerateMesh, "ring centroids " + std::to_string(r - 1) + " and " + std::to_string(r) + " coincide");
    }
  }
}

CenterlineCurve::CenterlineCurve(Points points) : points_(std::move(points)) {
  if (points_.rows() < 2) throw Error(ErrorCode::InvalidArgument, "centerline needs >= 2 points");
  arclength_.assign(static_cast<std::size_t>(points_.rows()), 0.0);
  for (Eigen::Index i = 1; i < points_.rows(); ++i) {
    const double d = (points_.row(i) - points_.row(i - 1)).norm();
    if (!(d > 0)) throw Error(ErrorCode::DegenerateMesh, "centerline samples must be distinct");
    arclength_[static_cast<std::size_t>(i)] = arclength_[static_cast<std::size_t>(i - 1)] + d;
  }
}

Vec3 CenterlineCurve::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(arclength_.begin(), arclength_.end(), s);
  std::size_t i = it == arclength_.begin() ? 0 : static_cast<std::size_t>(it - arclength_.begin()) - 1;
  i = std::min(i, arclength_.size() - 2);
  const double f = (s - arclength_[i]) / (arclength_[i + 1] - arclength_[i]);
  return (1.0 - f) * row(points_, static_cast<Eigen::Index>(i)) + f * row(points_, static_cast<Eigen::Index>(i + 1));
}

Vec3 CenterlineCurve::tangent_at(double s) const {
  s = std::clamp(s, 0.0, length());
  auto it = std::upper_bound(arclength_.begin(), arclength_.end(), s);
  std::size_t i = it == arclength_.begin() ? 0 : static_cast<std::size_t>(it - arclength_.begin()) - 1;
  i = std::min(i, arclength_.size() - 2);
  const std::size_t lo = i == 0 ? 0 : i - 1;
  const std::size_t hi = std::min(i + 2, arclength_.size() - 1);
  return (row(points_, static_cast<Eigen::Index>(hi)) - row(points_, static_cast<Eigen::Index>(lo))).normalized();
}

double CenterlineCurve::project(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  double best_s = 0.0;
  for (Eigen::Index i = 0; i + 1 < points_.rows(); ++i) {
    const Vec3 a = row(points_, i);
    const Vec3 ab = row(points_, i + 1) - a;
    const double f = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    const double d = (a + f * ab - p).squaredNorm();
    if (d < best) {
      best = d;
      best_s = arclength_[static_cast<std::size_t>(i)] + f * ab.norm();
    }
  }
  return best_s;
}

CenterlineCurve centerline_from_mesh(const TubeMesh& mesh, int n_points) {
  if (n_points < 5) throw Error(ErrorCode::InvalidArgument, "centerline needs n_points >= 5");
  const auto spline = CubicSpline3::chord_length(mesh.ring_centroids());
  return CenterlineCurve(resample_by_arclength(spline, n_points));
}

double ring_radius(const TubeMesh& mesh, int ring_index) {
  if (ring_index < 0 || ring_index >= mesh.n_rings()) throw Error(ErrorCode::InvalidArgument, "ring index out of range");
  const Points r = mesh.ring(ring_index);
  const Eigen::RowVector3d c = r.colwise().mean();
  return (r.rowwise() - c).rowwise().norm().mean();
}

std::vector<double> ring_radii(const TubeMesh& mesh) {
  std::vector<double> out(static_cast<std::size_t>(mesh.n_rings()));
  for (int r = 0; r < mesh.n_rings(); ++r) out[static_cast<std::size_t>(r)] = ring_radius(mesh, r);
  return out;
}

Points surface_points(const TubeMesh& mesh) { return mesh.nodes(); }

Points cell_centers(const TubeMesh& mesh) {
  const auto& cells = mesh.cells();
  Points c(static_cast<Eigen::Index>(cells.size()), 3);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto& t = cells[i];
    c.row(static_cast<Eigen::Index>(i)) = (mesh.nodes().row(t[0]) + mesh.nodes().row(t[1]) + mesh.nodes().row(t[2])) / 3.0;
  }
  return c;
}

TubeMesh transformed(const TubeMesh& mesh, const Eigen::Matrix3d& rotation, const Vec3& translation, double scale) {
  Points p = (scale * (mesh.nodes() * rotation.transpose())).rowwise() + translation.transpose();
  return mesh.with_nodes(std::move(p));
}

}  // namespace archfit
