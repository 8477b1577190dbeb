#pragma once

#include <string>
#include <vector>

#include "archfit/geometry.hpp"
#include "archfit/mesh.hpp"
#include "archfit/voxel.hpp"

namespace archfit {

// Overlap scores; both masks must share the grid (GridMismatch otherwise). Two empty masks score 1.
double dice(const VoxelMask& a, const VoxelMask& b);
double iou(const VoxelMask& a, const VoxelMask& b);

// Symmetric point-set distances in mm; EmptySet when either set is empty.
double hausdorff(const Points& x, const Points& y);
double asd(const Points& x, const Points& y);
double chamfer(const Points& x, const Points& y);

struct RadiusStation {
  int station = 0;         // 1-based
  double arclength = 0.0;  // mm along the reference centerline
  double radius_ref = 0.0;
  double radius_fit = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;    // signed, (fit - ref) / ref
  bool valid = false;      // false when either mesh failed to slice
};

// Effective radius (perimeter / 2 pi) of both meshes on planes orthogonal to the reference
// centerline at the planner's 12 candidate stations.
std::vector<RadiusStation> radius_error_profile(const TubeMesh& fit, const TubeMesh& ref);
// Same on caller-provided stations of the reference.
std::vector<RadiusStation> radius_error_profile(const TubeMesh& fit, const TubeMesh& ref, const std::vector<Plane>& planes,
                                                const std::vector<double>& arclengths);

// Mean |rel_err| over valid stations; NaN if none is valid.
double mean_abs_relative_error(const std::vector<RadiusStation>& profile);

struct MetricReport {
  double dice = 0.0;
  double iou = 0.0;
  double hausdorff = 0.0;
  double chamfer = 0.0;
  double asd = 0.0;
  std::vector<RadiusStation> radius_profile;
};

struct CompareOptions {
  double voxel_spacing = kDefaultVoxelSpacing;
  bool radius_profile = true;
};

// Voxel overlap on a shared grid covering both meshes, surface distances over the node sets.
MetricReport compare_meshes(const TubeMesh& fit, const TubeMesh& ref, const CompareOptions& options = {});

std::string metric_csv_header();
std::string metric_csv_row(const std::string& subject, int frame, const MetricReport& report);
std::string radius_csv_header();
std::string radius_csv_rows(const std::string& subject, int frame, const std::vector<RadiusStation>& profile);

}  // namespace archfit
