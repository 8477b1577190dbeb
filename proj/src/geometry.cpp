#include "archfit/geometry.hpp"

#include <cmath>

#include "archfit/error.hpp"

namespace archfit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DegenerateMesh: return "DegenerateMesh";
    case ErrorCode::NoIntersection: return "NoIntersection";
    case ErrorCode::MultipleLoops: return "MultipleLoops";
    case ErrorCode::DegenerateContour: return "DegenerateContour";
    case ErrorCode::OpenSurface: return "OpenSurface";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::TooFewSlices: return "TooFewSlices";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::NoApex: return "NoApex";
    case ErrorCode::EmptyRegion: return "EmptyRegion";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::CoincidentCenters: return "CoincidentCenters";
    case ErrorCode::SelfIntersection: return "SelfIntersection";
    case ErrorCode::SliceFailure: return "SliceFailure";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

Points from_vector(const std::vector<Vec3>& v) {
  Points p(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) p.row(static_cast<Eigen::Index>(i)) = v[i].transpose();
  return p;
}

std::vector<Vec3> to_vector(const Points& p) {
  std::vector<Vec3> v(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) v[static_cast<std::size_t>(i)] = row(p, i);
  return v;
}

Eigen::VectorXd flatten(const Points& p) {
  Eigen::VectorXd flat(p.rows() * 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    flat.segment<3>(3 * i) = p.row(i).transpose();
  }
  return flat;
}

Points unflatten(const Eigen::VectorXd& flat) {
  if (flat.size() % 3 != 0) throw Error(ErrorCode::InvalidArgument, "flat array length not divisible by 3");
  Points p(flat.size() / 3, 3);
  for (Eigen::Index i = 0; i < p.rows(); ++i) p.row(i) = flat.segment<3>(3 * i).transpose();
  return p;
}

Plane Plane::make(const Vec3& origin, const Vec3& normal) {
  const double n = normal.norm();
  if (!(n > 1e-300) || !std::isfinite(n)) throw Error(ErrorCode::InvalidArgument, "plane normal must be non-zero");
  return Plane{origin, normal / n};
}

std::pair<Vec3, Vec3> Plane::basis() const {
  const Vec3 helper = std::abs(normal.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
  Vec3 u = (helper - helper.dot(normal) * normal).normalized();
  Vec3 v = normal.cross(u);
  return {u, v};
}

}  // namespace archfit
