#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "archfit/contours.hpp"
#include "archfit/error.hpp"
#include "archfit/mesh.hpp"
#include "archfit/ssm.hpp"

namespace archfit {

inline constexpr int kMeshCenterlinePoints = 500;
inline constexpr int kSliceCenterlinePoints = 300;
inline constexpr int kMinSplineSlices = 5;

// ---------------------------------------------------------------------------------------------
// Forward model pieces

// Row-vector rotation: x_rotated = x * rotation_matrix(e), equal to (Rz(g) Ry(b) Rx(a) x^T)^T.
Eigen::Matrix3d rotation_matrix(const Vec3& euler);
// d rotation_matrix / d euler[i].
std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Vec3& euler);

// psi * x * R(euler) + offset (offset broadcast to all rows).
Points similarity_transform(const Points& x, double psi, const Vec3& euler, const Vec3& offset);

// sum_k w_k |x - (c_k + dc_k)| + v^T [x; 1] for each row x. `linear` rows 0..2 multiply x, row 3 is the bias.
Points rbf_deform(const Points& x, const Points& centers, const Points& center_offsets, const Points& weights,
                  const Eigen::Matrix<double, 4, 3>& linear);

/// Polyharmonic (phi(r) = r) interpolation system over fixed control points.
///
/// Solves for weights w (K x 3) and the affine part v (4 x 3) so that the field
/// sum_k w_k |x - c_k| + v^T [x; 1] takes the value dc_j at every control point c_j, with the
/// usual side conditions sum_k w_k = 0, sum_k c_k w_k^T = 0.
class WarpSystem {
 public:
  explicit WarpSystem(Points controls);

  const Points& controls() const { return controls_; }
  int size() const { return static_cast<int>(controls_.rows()); }

  // [w; v] for the given control displacements.
  Eigen::MatrixXd solve(const Points& displacements) const;
  // Adjoint of solve: maps d loss / d [w; v] to d loss / d displacements.
  Points solve_adjoint(const Eigen::MatrixXd& grad_coefficients) const;

 private:
  Points controls_;
  Eigen::MatrixXd inverse_;  // (K + 4)^2, symmetric
};

// Regular lattice over the bounding box of `nodes` scaled by (1 + inflate) about its center.
// Counts are assigned to axes by descending extent when sort_by_extent is set.
struct ControlGridConfig {
  std::array<int, 3> counts{10, 9, 8};
  double inflate = 0.2;
  bool sort_by_extent = true;
};
Points control_lattice(const Points& nodes, const ControlGridConfig& config);

// ---------------------------------------------------------------------------------------------
// Losses

// (1/Q) sum_j min_x |s_j - x|^2 over contour points s and mesh points x.
double loss_mesh(const Points& contour_points, const Points& mesh_points);
// (1/Ps) sum_i min_j |cl_slices_i - cl_mesh_j|^2.
double loss_centerline(const Points& cl_slices, const Points& cl_mesh);

struct LossWeights {
  double mesh = 1.0;
  double centerline = 1.0;
  double modal = 1.0;
  double rot = 1.0;
  double warp = 1.0;
};

struct LossTerms {
  double mesh = 0.0;
  double centerline = 0.0;
  double modal = 0.0;
  double rot = 0.0;
  double warp = 0.0;
  double total = 0.0;
};

// Centerline through the contour centroids (in the given order), n_points samples. Throws
// TooFewSlices for fewer than 5 contours; route those through surrogate_centerline.
CenterlineCurve centerline_from_slices(const std::vector<SliceContour>& contours, int n_points = kSliceCenterlinePoints);
// Spline path for >= 5 contours, surrogate semicircle below that.
CenterlineCurve data_centerline(const std::vector<SliceContour>& contours, int n_points = kSliceCenterlinePoints);

// ---------------------------------------------------------------------------------------------
// State and schedule

struct FitState {
  Eigen::VectorXd a;
  double delta = 1.0;
  double psi = 1.0;
  Vec3 euler = Vec3::Zero();
  Vec3 offset = Vec3::Zero();
  Points control_points;             // fixed after initialization
  Points delta_c;                    // K x 3
  Points rbf_weights;                // K x 3, solved from delta_c
  Eigen::Matrix<double, 4, 3> rbf_linear = Eigen::Matrix<double, 4, 3>::Zero();
  LossWeights loss_weights;
  int epoch = 0;

  static FitState initial(int n_modes, const Points& control_points);
};

// (L_modal, L_rot, L_warp) with L_rot the mean squared Euler angle.
std::array<double, 3> regularization_losses(const FitState& state);

struct ActiveSet {
  bool a = false;
  bool delta = false;
  bool psi = false;
  bool euler = false;
  bool offset = false;
  bool warp = false;

  static ActiveSet all() { return {true, true, true, true, true, true}; }
};

/// Epoch boundaries of the staged parameter activation for the first frame, plus the number of
/// warp-only epochs for each later frame.
struct Schedule {
  int shape_end = 10;    // [0, shape_end): a, delta
  int pose_end = 200;    // [shape_end, pose_end): a, delta, psi, R, o
  int warp_end = 250;    // [pose_end, warp_end): a, delta, R, warp
  int total = 300;       // [warp_end, total): warp
  int sequence_epochs = 50;

  ActiveSet active(int epoch) const;
  int stage(int epoch) const;  // 0..3
  void validate() const;
};

struct AdamConfig {
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct FitConfig {
  Schedule schedule;
  AdamConfig adam;
  LossWeights weights;
  ControlGridConfig grid;
  int mesh_centerline_points = kMeshCenterlinePoints;
  int slice_centerline_points = kSliceCenterlinePoints;
  bool center_data = true;
  bool grid_search = true;  // exact bucket-grid nearest neighbour instead of brute force
  // Points per ring gap on the axial mesh edges used as mesh-loss targets; 1 means nodes only.
  int mesh_loss_subdivision = 8;
  // Start the offset where the mean's own cross-sections at the data planes share the data centroid,
  // instead of matching whole-mesh and data centroids.
  bool align_initial_offset = false;
  std::uint64_t seed = 0;   // recorded; the fit itself has no stochastic step
};

// ---------------------------------------------------------------------------------------------
// Optimization

/// Read-only data shared by every fit against one shape model: the centered mean, the control
/// lattice, the factorized warp system and the mesh-centerline operator.
class FitContext {
 public:
  FitContext(const ShapeModel& model, const FitConfig& config);

  const ShapeModel& model() const { return *model_; }
  const FitConfig& config() const { return config_; }
  const Points& centered_mean() const { return centered_mean_; }
  const Vec3& mean_center() const { return mean_center_; }
  const WarpSystem& warp() const { return *warp_; }
  const Eigen::MatrixXd& centerline_operator() const { return centerline_operator_; }

 private:
  const ShapeModel* model_;
  FitConfig config_;
  Points centered_mean_;
  Vec3 mean_center_;
  std::shared_ptr<const WarpSystem> warp_;
  Eigen::MatrixXd centerline_operator_;  // P_m x n_rings
};

/// Objective of one frame: contour points and data centerline, both in the centered frame.
/// With `base` set, the shape chain is replaced by those fixed nodes (later frames):
/// X = base + RBF(base). Otherwise X = X_T + RBF(X_T) with X_T from the SSM and pose.
class FrameObjective {
 public:
  FrameObjective(const FitContext& context, Points contour_points, Points slice_centerline,
                 std::optional<Points> base = std::nullopt);

  struct Evaluation {
    LossTerms terms;
    Eigen::VectorXd gradient;                // flat, see pack_parameters; zero on inactive entries
    std::array<Eigen::VectorXd, 5> per_term;  // mesh, centerline, modal, rot, warp (when requested)
    Points nodes;                            // predicted nodes, centered frame
  };

  Evaluation evaluate(const FitState& state, const ActiveSet& active, bool gradient, bool per_term = false) const;

  // X = X_T + RBF(X_T), centered frame.
  Points predict(const FitState& state) const;

  const Points& contour_points() const { return contour_points_; }
  const Points& slice_centerline() const { return slice_centerline_; }

 private:
  const FitContext* context_;
  Points contour_points_;
  Points slice_centerline_;
  std::optional<Points> base_;
};

// Nodes plus `subdivision - 1` evenly spaced points on every axial edge between consecutive rings,
// ring by ring; subdivision 1 returns the nodes.
Points axial_edge_samples(const Points& nodes, int n_rings, int pts_per_ring, int subdivision);

// Flat parameter layout: [a (M), delta, psi, euler (3), offset (3), delta_c (3K, row-major)].
Eigen::VectorXd pack_parameters(const FitState& state);
void unpack_parameters(const Eigen::VectorXd& flat, FitState& state);
Eigen::VectorXd active_mask(const FitState& state, const ActiveSet& active);

// Composition of the SSM reconstruction, similarity transform and solved warp for `state`
// against an uncentered model (no data centering). Used for checks and predictions.
Points predict_mesh(const ShapeModel& model, const FitState& state, const WarpSystem& warp);

/// Adam with per-entry step counters; entries outside the mask keep their moments untouched.
class Adam {
 public:
  Adam(Eigen::Index size, AdamConfig config);
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd& mask);

 private:
  AdamConfig config_;
  Eigen::VectorXd m_, v_;
  Eigen::VectorXi t_;
};

struct TraceRow {
  int frame = 0;
  int epoch = 0;
  int stage = 0;
  LossTerms terms;
  double best_total = 0.0;  // best-so-far total within the stage
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::vector<TraceRow> trace)
      : Error(ErrorCode::NonFinite, what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

struct FrameFit {
  FitState state;
  TubeMesh mesh;         // world coordinates
  Vec3 data_center = Vec3::Zero();
  LossTerms final_terms;
  std::vector<TraceRow> trace;
};

FrameFit fit_frame0(const FitContext& context, const std::vector<SliceContour>& contours);

struct FitResult {
  std::vector<TubeMesh> meshes;
  std::vector<CenterlineCurve> centerlines;
  std::vector<LossTerms> final_terms;
  std::vector<TraceRow> trace;
  FitState frame0_state;
};

// Frame 0 through fit_frame0, then warp-only warm starts frame by frame.
FitResult fit_sequence(const FitContext& context, const SliceSet& slices, int max_frames = -1);
// Warm-start part only, given an existing frame-0 fit.
FitResult fit_sequence(const FitContext& context, const SliceSet& slices, const FrameFit& frame0, int max_frames = -1);

}  // namespace archfit
