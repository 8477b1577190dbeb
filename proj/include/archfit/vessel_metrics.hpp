#pragma once

#include <string>
#include <utility>
#include <vector>

#include "archfit/geometry.hpp"
#include "archfit/mesh.hpp"

namespace archfit {

inline constexpr double kStationInterval = 7.5;  // mm

/// Inlet A, ascending end B, apex T, descending start C and outlet D on a centerline, with their
/// arclengths (mm).
struct ArchLandmarks {
  Vec3 A = Vec3::Zero(), B = Vec3::Zero(), T = Vec3::Zero(), C = Vec3::Zero(), D = Vec3::Zero();
  double sA = 0.0, sB = 0.0, sT = 0.0, sC = 0.0, sD = 0.0;
};

// B and C are where the centerline crosses the plane of normal `up` through the point at
// arclength `pa_arclength`, before and after the apex. Throws NoApex when the height along `up`
// peaks at an end of the curve; a flat top picks its midpoint with a warning.
ArchLandmarks detect_landmarks(const CenterlineCurve& centerline, const Vec3& up, double pa_arclength);
// Mesh variant: the reference plane passes through candidate station 2 of the mesh.
ArchLandmarks detect_landmarks(const TubeMesh& mesh, const Vec3& up = Vec3::UnitZ());

// Landmarks at explicit arclengths (A and D at the curve ends).
ArchLandmarks landmarks_at(const CenterlineCurve& centerline, double sB, double sT, double sC);

struct ArchDimensions {
  double height = 0.0;  // h: distance from T to segment B-C
  double width = 0.0;   // w: |B - C|
};
ArchDimensions arch_dimensions(const ArchLandmarks& landmarks);

// 1 - w / L_AD with L_AD the arclength from A to D.
double tortuosity(const ArchLandmarks& landmarks);

// Per-cell distance between triangle centroids (index correspondence, no alignment).
std::vector<double> wall_motion(const TubeMesh& mesh_t, const TubeMesh& mesh_0);

// Mean |r_t - r_0| / r_0 over rings whose mesh_0 centroid projects into [s_begin, s_end] on the
// mesh_0 centerline. Throws EmptyRegion when no ring falls inside.
double radial_strain(const TubeMesh& mesh_t, const TubeMesh& mesh_0, double s_begin, double s_end);
// Ascending region A-B of mesh_0.
double ascending_radial_strain(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up = Vec3::UnitZ());

// (L_AD(t) - L_AD(0)) / L_AD(0).
double centerline_length_change(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up = Vec3::UnitZ());

struct StationSlice {
  double arclength = 0.0;
  Points contour;
};
// Orthogonal slices every `interval` mm including both ends; failing stations are skipped.
std::vector<StationSlice> station_slices(const TubeMesh& mesh, double interval = kStationInterval);
// Station arclengths for a centerline of the given length.
std::vector<double> station_positions(double length, double interval = kStationInterval);

struct VesselFeatures {
  double radius_A = 0.0, radius_B = 0.0, radius_T = 0.0, radius_C = 0.0;  // effective radii, mm
  double ascending_length = 0.0;  // A-B arclength
  double total_length = 0.0;      // L_AD
  double width = 0.0;
  double height = 0.0;
  double tortuosity = 0.0;
  double ascending_strain = 0.0;  // vs. the reference frame
  double length_change = 0.0;
  double wall_motion_mean = 0.0;
  double wall_motion_max = 0.0;
};

VesselFeatures vessel_features(const TubeMesh& mesh_t, const TubeMesh& mesh_0, const Vec3& up = Vec3::UnitZ());

std::string feature_csv_header();
std::string feature_csv_row(const std::string& subject, int frame, const VesselFeatures& f);

}  // namespace archfit
