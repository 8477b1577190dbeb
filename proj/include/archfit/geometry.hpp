#pragma once

#include <Eigen/Dense>
#include <array>
#include <vector>

namespace archfit {

using Vec3 = Eigen::Vector3d;

// N x 3 point array, one row per point. Column-major so each coordinate is contiguous.
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

using Triangle = std::array<int, 3>;

inline Vec3 row(const Points& p, Eigen::Index i) { return p.row(i).transpose(); }

inline Vec3 centroid(const Points& p) { return p.colwise().mean().transpose(); }

Points from_vector(const std::vector<Vec3>& v);
std::vector<Vec3> to_vector(const Points& p);

// Interleaved (x0, y0, z0, x1, ...) flattening used by the shape model and file formats.
Eigen::VectorXd flatten(const Points& p);
Points unflatten(const Eigen::VectorXd& flat);

struct Plane {
  Vec3 origin = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();

  // Normalizes `normal`; throws InvalidArgument for a zero normal.
  static Plane make(const Vec3& origin, const Vec3& normal);

  double signed_distance(const Vec3& p) const { return normal.dot(p - origin); }

  // Orthonormal in-plane axes (u, v) with u x v = normal.
  std::pair<Vec3, Vec3> basis() const;
};

}  // namespace archfit
