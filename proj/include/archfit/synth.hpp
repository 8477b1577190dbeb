#pragma once

#include <cstdint>
#include <vector>

#include "archfit/contours.hpp"
#include "archfit/mesh.hpp"

namespace archfit {

/// Construction parameters of a synthetic arch: straight ascending segment, circular arc,
/// straight descending segment, with tapered elliptical sections.
struct ArchParams {
  double arch_radius = 35.0;        // mm, radius of the circular arc of the centerline
  double ascending_length = 45.0;   // mm, straight part before the arc (may be 0)
  double descending_length = 80.0;  // mm, straight part after the arc (may be 0)
  double inlet_radius = 13.0;       // mm
  double taper = 0.75;              // outlet / inlet radius
  double ellipticity = 1.0;         // ring axis ratio (in-plane axis / out-of-plane axis)
  double bend_out_of_plane = 0.0;   // rad, shear of the arch out of its plane
  double noise_amplitude = 0.0;     // mm, RMS of the smooth radial perturbation
  double noise_correlation_length = 40.0;  // mm
  std::uint64_t seed = 0;
  int n_rings = kDefaultRings;
  int pts_per_ring = kDefaultPointsPerRing;

  // Throws InvalidArgument naming the offending field.
  void validate() const;
};

// Throws SelfIntersection when arch_radius < 1.5 x the largest ring radius or a ring folds.
TubeMesh generate_arch(const ArchParams& params);

// Exact centerline arclength of the construction (before out-of-plane shear).
double construction_length(const ArchParams& params);

// Sampled arches shorter than this are redrawn (25 mm + 11 x 13 mm of stations, outlet margin, slack).
inline constexpr double kMinSampledLengthMm = 185.0;

// Parameters of cohort member `index`, spanning a young-to-elderly scale regime.
// Draws that violate the self-intersection bound are redrawn deterministically.
ArchParams sample_arch_params(std::uint64_t seed, int index);
std::vector<TubeMesh> generate_cohort(std::uint64_t seed, int count, std::vector<ArchParams>* params_out = nullptr);

/// Ground-truth motion: per-frame radial and axial scale factors, 1.0 at frame 0.
struct MotionProfile {
  std::vector<double> radial;
  std::vector<double> axial;
  int peak_frame = 0;

  int n_frames() const { return static_cast<int>(radial.size()); }
  void validate() const;

  // Smooth rise to the peak factors at peak_frame and decay back towards 1.
  static MotionProfile cardiac(int n_frames, double peak_radial, double peak_axial, int peak_frame);
  static MotionProfile still(int n_frames);
};

// Frame t: rings scaled about their centroids by radial[t]; ring centroids scaled about the inlet
// centroid by axial[t]. Frames with unit factors reproduce the input exactly.
std::vector<TubeMesh> animate(const TubeMesh& mesh, const MotionProfile& profile);

struct SliceExtraction {
  int points_per_contour = kContourPoints;
  double noise_sigma = 0.5;  // mm, per in-plane axis
  std::uint64_t seed = 0;
};

// Slices every frame with every plane (loop nearest the plane origin), resamples, adds in-plane
// Gaussian noise. `stations` (optional) labels the planes.
SliceSet extract_slice_set(const std::vector<TubeMesh>& sequence, const std::vector<Plane>& planes,
                           const SliceExtraction& options, const std::vector<int>& stations = {});

}  // namespace archfit
