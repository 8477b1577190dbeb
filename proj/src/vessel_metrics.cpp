#include "archfit/vessel_metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "archfit/error.hpp"
#include "archfit/fitting.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/slicing.hpp"

namespace archfit {

namespace {

// Arclength where the height first reaches `level` walking from index `from` by `step`.
double crossing(const CenterlineCurve& cl, const std::vector<double>& h, Eigen::Index from, int step, double level) {
  const auto& s = cl.arclength();
  const Eigen::Index n = cl.size();
  for (Eigen::Index i = from; i + step >= 0 && i + step < n; i += step) {
    const double a = h[static_cast<std::size_t>(i)] - level, b = h[static_cast<std::size_t>(i + step)] - level;
    if (a == 0.0) return s[static_cast<std::size_t>(i)];
    if ((a > 0) != (b > 0) || b == 0.0) {
      const double t = a / (a - b);
      return s[static_cast<std::size_t>(i)] + t * (s[static_cast<std::size_t>(i + step)] - s[static_cast<std::size_t>(i)]);
    }
  }
  return step < 0 ? s.front() : s.back();
}

double effective_radius(const TubeMesh& mesh, const CenterlineCurve& cl, double s) {
  const double clamped = std::clamp(s, 1e-3, cl.length() - 1e-3);
  const Vec3 p = cl.point_at(clamped);
  try {
    return loop_perimeter(slice_nearest(mesh, Plane::make(p, cl.tangent_at(clamped)), p)) / (2.0 * std::numbers::pi);
  } catch (const Error& e) {
    spdlog::warn("radius at arclength {:.1f} mm unavailable: {}", s, e.what());
    return std::numeric_limits<double>::quiet_NaN();
  }
}

}  // namespace

ArchLandmarks landmarks_at(const CenterlineCurve& cl, double sB, double sT, double sC) {
  ArchLandmarks l;
  l.sA = 0.0;
  l.sD = cl.length();
  l.sB = sB;
  l.sT = sT;
  l.sC = sC;
  l.A = cl.point_at(l.sA);
  l.B = cl.point_at(sB);
  l.T = cl.point_at(sT);
  l.C = cl.point_at(sC);
  l.D = cl.point_at(l.sD);
  return l;
}

ArchLandmarks detect_landmarks(const CenterlineCurve& cl, const Vec3& up_in, double pa_arclength) {
  if (cl.size() < 3) throw Error(ErrorCode::InvalidArgument, "centerline too short for landmarks");
  const Vec3 up = up_in.normalized();
  const Eigen::Index n = cl.size();
  std::vector<double> h(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) h[static_cast<std::size_t>(i)] = row(cl.points(), i).dot(up);
  const double hmax = *std::max_element(h.begin(), h.end());
  const double tol = 1e-9 * std::max(1.0, cl.length());
  Eigen::Index first = -1, last = -1;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (h[static_cast<std::size_t>(i)] >= hmax - tol) {
      if (first < 0) first = i;
      last = i;
    }
  }
  if (first == 0 || last == n - 1) throw Error(ErrorCode::NoApex, "centerline height peaks at an end");
  const auto& s = cl.arclength();
  double sT = s[static_cast<std::size_t>(first)];
  Eigen::Index apex = first;
  if (last > first) {
    spdlog::warn("flat centerline apex over {:.2f} mm; using its midpoint", s[static_cast<std::size_t>(last)] - sT);
    sT = 0.5 * (sT + s[static_cast<std::size_t>(last)]);
    apex = (first + last) / 2;
  }
  const double level = cl.point_at(std::clamp(pa_arclength, 0.0, cl.length())).dot(up);
  const double sB = crossing(cl, h, apex, -1, level);
  const double sC = crossing(cl, h, apex, +1, level);
  return landmarks_at(cl, sB, sT, sC);
}

ArchLandmarks detect_landmarks(const TubeMesh& mesh, const Vec3& up) {
  const CenterlineCurve cl = centerline_from_mesh(mesh, kMeshCenterlinePoints);
  const double usable = cl.length() - kOutletMarginMm;
  return detect_landmarks(cl, up, kFirstStationMm + station_spacing(usable));
}

ArchDimensions arch_dimensions(const ArchLandmarks& l) {
  ArchDimensions d;
  const Vec3 bc = l.C - l.B;
  d.width = bc.norm();
  const double len2 = bc.squaredNorm();
  const double t = len2 > 0 ? std::clamp((l.T - l.B).dot(bc) / len2, 0.0, 1.0) : 0.0;
  d.height = (l.T - (l.B + t * bc)).norm();
  return d;
}

double tortuosity(const ArchLandmarks& l) {
  const double lad = l.sD - l.sA;
  if (!(lad > 0)) throw Error(ErrorCode::InvalidArgument, "zero A-D length");
  return 1.0 - arch_dimensions(l).width / lad;
}

std::vector<double> wall_motion(const TubeMesh& mesh_t, const TubeMesh& mesh_0) {
  if (!mesh_t.same_topology(mesh_0)) throw Error(ErrorCode::TopologyMismatch, "wall motion needs identical topology");
  const Points a = cell_centers(mesh_t), b = cell_centers(mesh_0);
  std::vector<double> out(static_cast<std::size_t>(a.rows()));
  for (Eigen::Index i = 0; i < a.rows(); ++i) out[static_cast<std::size_t>(i)] = (a.row(i) - b.row(i)).norm();
  return out;
}

double radial_strain(const TubeMesh& mesh_t, const TubeMesh& mesh_0, double s_begin, double s_end) {
  if (!mesh_t.same_topology(mesh_0)) throw Error(ErrorCode::TopologyMismatch, "strain needs identical topology");
  const CenterlineCurve cl = centerline_from_mesh(mesh_0, kMeshCenterlinePoints);
  double sum = 0.0;
  int n = 0;
  for (int r = 0; r < mesh_0.n_rings(); ++r) {
    const double s = cl.project(mesh_0.ring_centroid(r));
    if (s < s_begin || s > s_end) continue;
    const double r0 = ring_radius(mesh_0, r), rt = ring_radius(mesh_t, r);
    sum += std::abs(rt - r0) / r0;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyRegion, fmt::format("no ring in [{:.1f}, {:.1f}] mm", s_begin, s_end));
  return sum / n;
}

double ascending_radial_strain(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up) {
  const ArchLandmarks l = detect_landmarks(mesh_0, up);
  return radial_strain(mesh_t, mesh_0, l.sA, l.sB);
}

double centerline_length_change(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up) {
  const ArchLandmarks lt = detect_landmarks(mesh_t, up), l0 = detect_landmarks(mesh_0, up);
  const double a = lt.sD - lt.sA, b = l0.sD - l0.sA;
  return (a - b) / b;
}

std::vector<double> station_positions(double length, double interval) {
  if (!(interval > 0)) throw Error(ErrorCode::InvalidArgument, "station interval must be > 0");
  std::vector<double> s;
  const double tol = 1e-9 * std::max(1.0, length);
  for (int i = 0;; ++i) {
    const double v = i * interval;
    if (v > length + tol) break;
    s.push_back(std::min(v, length));
  }
  if (length - s.back() > tol) s.push_back(length);
  return s;
}

std::vector<StationSlice> station_slices(const TubeMesh& mesh, double interval) {
  const CenterlineCurve cl = centerline_from_mesh(mesh, kMeshCenterlinePoints);
  std::vector<StationSlice> out;
  for (double s : station_positions(cl.length(), interval)) {
    const double at = std::clamp(s, 1e-3, cl.length() - 1e-3);
    const Vec3 p = cl.point_at(at);
    try {
      out.push_back({s, slice_nearest(mesh, Plane::make(p, cl.tangent_at(at)), p)});
    } catch (const Error& e) {
      spdlog::warn("station at {:.1f} mm skipped: {}", s, e.what());
    }
  }
  return out;
}

VesselFeatures vessel_features(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up) {
  VesselFeatures f;
  const CenterlineCurve cl = centerline_from_mesh(mesh_t, kMeshCenterlinePoints);
  const double usable = cl.length() - kOutletMarginMm;
  const ArchLandmarks l = detect_landmarks(cl, up, kFirstStationMm + station_spacing(usable));
  f.radius_A = effective_radius(mesh_t, cl, l.sA);
  f.radius_B = effective_radius(mesh_t, cl, l.sB);
  f.radius_T = effective_radius(mesh_t, cl, l.sT);
  f.radius_C = effective_radius(mesh_t, cl, l.sC);
  f.ascending_length = l.sB - l.sA;
  f.total_length = l.sD - l.sA;
  const ArchDimensions d = arch_dimensions(l);
  f.width = d.width;
  f.height = d.height;
  f.tortuosity = tortuosity(l);
  f.ascending_strain = ascending_radial_strain(mesh_t, mesh_0, up);
  f.length_change = centerline_length_change(mesh_t, mesh_0, up);
  const std::vector<double> wm = wall_motion(mesh_t, mesh_0);
  double sum = 0.0;
  for (double v : wm) {
    sum += v;
    f.wall_motion_max = std::max(f.wall_motion_max, v);
  }
  f.wall_motion_mean = wm.empty() ? 0.0 : sum / static_cast<double>(wm.size());
  return f;
}

std::string feature_csv_header() {
  return "subject,frame,radius_A_mm,radius_B_mm,radius_T_mm,radius_C_mm,ascending_length_mm,total_length_mm,"
         "width_mm,height_mm,tortuosity,ascending_strain,length_change,wall_motion_mean_mm,wall_motion_max_mm\n";
}

std::string feature_csv_row(const std::string& subject, int frame, const VesselFeatures& f) {
  return fmt::format("{},{},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.4f},{:.6f},{:.6f},{:.6f},{:.4f},{:.4f}\n",
                     subject, frame, f.radius_A, f.radius_B, f.radius_T, f.radius_C, f.ascending_length, f.total_length,
                     f.width, f.height, f.tortuosity, f.ascending_strain, f.length_change, f.wall_motion_mean,
                     f.wall_motion_max);
}

}  // namespace archfit
