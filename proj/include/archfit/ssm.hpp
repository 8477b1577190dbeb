#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "archfit/geometry.hpp"
#include "archfit/mesh.hpp"

namespace archfit {

inline constexpr int kDefaultModes = 10;
inline constexpr int kModelFormatVersion = 1;

/// PCA statistical shape model over topology-consistent tubes.
///
/// A shape is X = mean + delta * sum_m a_m * sigmas[m] * modes[m]. Modes are unit-norm and
/// mutually orthogonal as flattened 3N vectors; sigmas are the sample standard deviations
/// ((n - 1) denominator) of the training scores and are sorted descending.
struct ShapeModel {
  Points mean;
  std::vector<Points> modes;
  std::vector<double> sigmas;
  std::vector<double> explained_variance_ratio;
  int n_rings = kDefaultRings;
  int pts_per_ring = kDefaultPointsPerRing;
  std::vector<Triangle> cells;
  // Modes that were requested but dropped for lack of rank.
  int truncated_modes = 0;

  int n_modes() const { return static_cast<int>(modes.size()); }
  TubeMesh mean_mesh() const { return TubeMesh(n_rings, pts_per_ring, mean, cells); }
  TubeMesh mesh(Points nodes) const { return TubeMesh(n_rings, pts_per_ring, std::move(nodes), cells); }
};

struct BuildOptions {
  int n_modes = kDefaultModes;
  // Rigidly align every shape to the first one (Kabsch) before PCA. Off by default: the
  // synthetic cohort is generated in a canonical pose.
  bool rigid_align = false;
};

// Throws TopologyMismatch for mixed topologies, InvalidArgument for < 2 shapes and
// RankDeficient when no mode carries variance. Requests beyond the data rank are truncated and
// counted in truncated_modes.
ShapeModel build_model(const std::vector<TubeMesh>& dataset, const BuildOptions& options = {});

Points reconstruct(const ShapeModel& model, const Eigen::VectorXd& amplitudes, double delta = 1.0);

// Amplitudes (in units of sigma) of the orthogonal projection of nodes onto the modes.
Eigen::VectorXd project(const ShapeModel& model, const Points& nodes);

// a ~ Normal(0, sigma_scale^2) i.i.d. per mode, reconstructed with delta = 1.
TubeMesh sample_shape(const ShapeModel& model, std::uint64_t seed, double sigma_scale);

// Rotation/translation (Kabsch) that best maps `moving` onto `fixed` in the least-squares sense.
std::pair<Eigen::Matrix3d, Vec3> kabsch(const Points& moving, const Points& fixed);

}  // namespace archfit
