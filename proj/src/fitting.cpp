#include "archfit/fitting.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include <spdlog/spdlog.h>

#include "archfit/nearest.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/slicing.hpp"
#include "archfit/spline.hpp"

namespace archfit {

namespace {

Eigen::Matrix3d rot_x(double t) {
  Eigen::Matrix3d m;
  m << 1, 0, 0, 0, std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t);
  return m;
}
Eigen::Matrix3d rot_y(double t) {
  Eigen::Matrix3d m;
  m << std::cos(t), 0, std::sin(t), 0, 1, 0, -std::sin(t), 0, std::cos(t);
  return m;
}
Eigen::Matrix3d rot_z(double t) {
  Eigen::Matrix3d m;
  m << std::cos(t), -std::sin(t), 0, std::sin(t), std::cos(t), 0, 0, 0, 1;
  return m;
}
Eigen::Matrix3d drot_x(double t) {
  Eigen::Matrix3d m;
  m << 0, 0, 0, 0, -std::sin(t), -std::cos(t), 0, std::cos(t), -std::sin(t);
  return m;
}
Eigen::Matrix3d drot_y(double t) {
  Eigen::Matrix3d m;
  m << -std::sin(t), 0, std::cos(t), 0, 0, 0, -std::cos(t), 0, -std::sin(t);
  return m;
}
Eigen::Matrix3d drot_z(double t) {
  Eigen::Matrix3d m;
  m << -std::sin(t), -std::cos(t), 0, std::cos(t), -std::sin(t), 0, 0, 0, 0;
  return m;
}

double frob_dot(const Points& a, const Points& b) { return (a.array() * b.array()).sum(); }

bool all_finite(const Eigen::VectorXd& v) { return v.allFinite(); }

bool terms_finite(const LossTerms& t) {
  return std::isfinite(t.mesh) && std::isfinite(t.centerline) && std::isfinite(t.modal) && std::isfinite(t.rot) &&
         std::isfinite(t.warp) && std::isfinite(t.total);
}

// Index layout helpers.
struct Layout {
  int m;
  int k;
  int a() const { return 0; }
  int delta() const { return m; }
  int psi() const { return m + 1; }
  int euler() const { return m + 2; }
  int offset() const { return m + 5; }
  int warp() const { return m + 8; }
  int size() const { return m + 8 + 3 * k; }
};

Layout layout_of(const FitState& s) {
  return {static_cast<int>(s.a.size()), static_cast<int>(s.delta_c.rows())};
}

void refresh_warp(FitState& state, const WarpSystem& warp) {
  const int k = static_cast<int>(state.delta_c.rows());
  if (state.delta_c.isZero(0.0)) {
    state.rbf_weights = Points::Zero(k, 3);
    state.rbf_linear.setZero();
    return;
  }
  const Eigen::MatrixXd coef = warp.solve(state.delta_c);
  state.rbf_weights = coef.topRows(k);
  state.rbf_linear = coef.bottomRows(4);
}

}  // namespace

// ---------------------------------------------------------------------------------------------

Eigen::Matrix3d rotation_matrix(const Vec3& e) {
  return (rot_z(e.z()) * rot_y(e.y()) * rot_x(e.x())).transpose();
}

std::array<Eigen::Matrix3d, 3> rotation_derivatives(const Vec3& e) {
  const Eigen::Matrix3d rx = rot_x(e.x()), ry = rot_y(e.y()), rz = rot_z(e.z());
  return {(rz * ry * drot_x(e.x())).transpose(), (rz * drot_y(e.y()) * rx).transpose(),
          (drot_z(e.z()) * ry * rx).transpose()};
}

Points similarity_transform(const Points& x, double psi, const Vec3& euler, const Vec3& offset) {
  Points out = psi * (x * rotation_matrix(euler));
  out.rowwise() += offset.transpose();
  return out;
}

Points rbf_deform(const Points& x, const Points& centers, const Points& center_offsets, const Points& weights,
                  const Eigen::Matrix<double, 4, 3>& linear) {
  if (centers.rows() != center_offsets.rows() || centers.rows() != weights.rows()) {
    throw Error(ErrorCode::InvalidArgument, "rbf_deform: control point, offset and weight counts differ");
  }
  const Points moved = centers + center_offsets;
  Points out(x.rows(), 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::RowVector3d acc = x.row(i) * linear.topRows<3>() + linear.row(3);
    for (Eigen::Index k = 0; k < moved.rows(); ++k) acc += (x.row(i) - moved.row(k)).norm() * weights.row(k);
    out.row(i) = acc;
  }
  return out;
}

WarpSystem::WarpSystem(Points controls) : controls_(std::move(controls)) {
  const Eigen::Index k = controls_.rows();
  if (k < 4) throw Error(ErrorCode::InvalidArgument, "warp system needs at least 4 control points");
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k + 4, k + 4);
  for (Eigen::Index i = 0; i < k; ++i) {
    for (Eigen::Index j = i + 1; j < k; ++j) {
      const double r = (controls_.row(i) - controls_.row(j)).norm();
      a(i, j) = r;
      a(j, i) = r;
    }
    for (int c = 0; c < 3; ++c) {
      a(i, k + c) = controls_(i, c);
      a(k + c, i) = controls_(i, c);
    }
    a(i, k + 3) = 1.0;
    a(k + 3, i) = 1.0;
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw Error(ErrorCode::RankDeficient, "control points do not span 3-D space");
  // Only the columns multiplying the displacement block are ever needed.
  inverse_ = lu.inverse().leftCols(k);
}

Eigen::MatrixXd WarpSystem::solve(const Points& displacements) const {
  return inverse_ * displacements;
}

Points WarpSystem::solve_adjoint(const Eigen::MatrixXd& grad_coefficients) const {
  return inverse_.transpose() * grad_coefficients;
}

Points control_lattice(const Points& nodes, const ControlGridConfig& config) {
  for (int c : config.counts) {
    if (c < 2) throw Error(ErrorCode::Config, "control grid needs at least 2 points per axis");
  }
  if (!(config.inflate >= 0.0)) throw Error(ErrorCode::Config, "control grid inflation must be >= 0");
  const Vec3 lo = nodes.colwise().minCoeff().transpose();
  const Vec3 hi = nodes.colwise().maxCoeff().transpose();
  const Vec3 mid = 0.5 * (lo + hi);
  const Vec3 half = 0.5 * (hi - lo) * (1.0 + config.inflate);

  std::array<int, 3> counts = config.counts;
  if (config.sort_by_extent) {
    std::array<int, 3> axes{0, 1, 2};
    std::stable_sort(axes.begin(), axes.end(), [&](int p, int q) { return half[p] > half[q]; });
    std::array<int, 3> sorted = config.counts;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    for (int r = 0; r < 3; ++r) counts[static_cast<std::size_t>(axes[static_cast<std::size_t>(r)])] = sorted[static_cast<std::size_t>(r)];
  }
  Points out(counts[0] * counts[1] * counts[2], 3);
  Eigen::Index n = 0;
  auto coord = [&](int axis, int i) {
    return mid[axis] - half[axis] + 2.0 * half[axis] * i / (counts[static_cast<std::size_t>(axis)] - 1);
  };
  for (int k = 0; k < counts[2]; ++k)
    for (int j = 0; j < counts[1]; ++j)
      for (int i = 0; i < counts[0]; ++i) out.row(n++) << coord(0, i), coord(1, j), coord(2, k);
  return out;
}

// ---------------------------------------------------------------------------------------------

double loss_mesh(const Points& contour_points, const Points& mesh_points) {
  if (contour_points.rows() == 0 || mesh_points.rows() == 0) throw Error(ErrorCode::EmptySet, "loss_mesh on empty set");
  double s = 0.0;
  for (const Match& m : nearest_all(mesh_points, contour_points)) s += m.dist2;
  return s / static_cast<double>(contour_points.rows());
}

double loss_centerline(const Points& cl_slices, const Points& cl_mesh) {
  if (cl_slices.rows() == 0 || cl_mesh.rows() == 0) throw Error(ErrorCode::EmptySet, "loss_centerline on empty curve");
  double s = 0.0;
  for (const Match& m : nearest_all(cl_mesh, cl_slices)) s += m.dist2;
  return s / static_cast<double>(cl_slices.rows());
}

namespace {

std::vector<const SliceContour*> ordered_contours(const std::vector<SliceContour>& contours) {
  std::vector<const SliceContour*> out;
  for (const auto& c : contours) out.push_back(&c);
  const bool labelled = std::all_of(out.begin(), out.end(), [](const SliceContour* c) { return c->station > 0; });
  if (labelled) std::stable_sort(out.begin(), out.end(), [](auto* p, auto* q) { return p->station < q->station; });
  return out;
}

}  // namespace

CenterlineCurve centerline_from_slices(const std::vector<SliceContour>& contours, int n_points) {
  if (static_cast<int>(contours.size()) < kMinSplineSlices) {
    throw Error(ErrorCode::TooFewSlices, "spline centerline needs at least 5 contours, got " + std::to_string(contours.size()));
  }
  if (n_points < 2) throw Error(ErrorCode::InvalidArgument, "centerline needs at least 2 samples");
  const auto ordered = ordered_contours(contours);
  Points centers(static_cast<Eigen::Index>(ordered.size()), 3);
  for (std::size_t i = 0; i < ordered.size(); ++i) centers.row(static_cast<Eigen::Index>(i)) = loop_centroid(ordered[i]->points).transpose();
  return CenterlineCurve(resample_by_arclength(CubicSpline3::chord_length(centers), n_points));
}

CenterlineCurve data_centerline(const std::vector<SliceContour>& contours, int n_points) {
  if (static_cast<int>(contours.size()) >= kMinSplineSlices) return centerline_from_slices(contours, n_points);
  std::vector<SliceContour> sorted;
  for (const SliceContour* c : ordered_contours(contours)) sorted.push_back(*c);
  return surrogate_centerline(sorted, n_points);
}

// ---------------------------------------------------------------------------------------------

FitState FitState::initial(int n_modes, const Points& control_points) {
  FitState s;
  s.a = Eigen::VectorXd::Zero(n_modes);
  s.control_points = control_points;
  s.delta_c = Points::Zero(control_points.rows(), 3);
  s.rbf_weights = Points::Zero(control_points.rows(), 3);
  return s;
}

std::array<double, 3> regularization_losses(const FitState& state) {
  const double modal = state.a.size() ? state.a.squaredNorm() / static_cast<double>(state.a.size()) : 0.0;
  const double rot = state.euler.squaredNorm() / 3.0;
  const double warp = state.delta_c.rows() ? state.delta_c.squaredNorm() / static_cast<double>(state.delta_c.rows()) : 0.0;
  return {modal, rot, warp};
}

ActiveSet Schedule::active(int epoch) const {
  ActiveSet s;
  switch (stage(epoch)) {
    case 0:
      s.a = s.delta = true;
      break;
    case 1:
      s.a = s.delta = s.psi = s.euler = s.offset = true;
      break;
    case 2:
      s.a = s.delta = s.euler = s.warp = true;
      break;
    default:
      s.warp = true;
  }
  return s;
}

int Schedule::stage(int epoch) const {
  if (epoch < shape_end) return 0;
  if (epoch < pose_end) return 1;
  if (epoch < warp_end) return 2;
  return 3;
}

void Schedule::validate() const {
  if (!(0 <= shape_end && shape_end <= pose_end && pose_end <= warp_end && warp_end <= total)) {
    throw Error(ErrorCode::Config, "schedule boundaries must satisfy 0 <= shape_end <= pose_end <= warp_end <= total");
  }
  if (sequence_epochs < 0) throw Error(ErrorCode::Config, "sequence_epochs must be >= 0");
}

// ---------------------------------------------------------------------------------------------

FitContext::FitContext(const ShapeModel& model, const FitConfig& config) : model_(&model), config_(config) {
  config_.schedule.validate();
  const LossWeights& w = config_.weights;
  for (double v : {w.mesh, w.centerline, w.modal, w.rot, w.warp}) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorCode::Config, "loss weights must be finite and >= 0");
  }
  if (!(config_.adam.learning_rate > 0.0)) throw Error(ErrorCode::Config, "learning rate must be > 0");
  if (model.mean.rows() != static_cast<Eigen::Index>(model.n_rings) * model.pts_per_ring) {
    throw Error(ErrorCode::TopologyMismatch, "model mean does not match its ring layout");
  }
  mean_center_ = config_.center_data ? centroid(model.mean) : Vec3::Zero();
  centered_mean_ = model.mean.rowwise() - mean_center_.transpose();
  warp_ = std::make_shared<const WarpSystem>(control_lattice(centered_mean_, config_.grid));
  centerline_operator_ = uniform_spline_operator(model.n_rings, config_.mesh_centerline_points);
}

// ---------------------------------------------------------------------------------------------

Points axial_edge_samples(const Points& nodes, int n_rings, int ppr, int subdivision) {
  if (subdivision < 1) throw Error(ErrorCode::Config, "mesh loss subdivision must be >= 1");
  if (nodes.rows() != static_cast<Eigen::Index>(n_rings) * ppr) throw Error(ErrorCode::TopologyMismatch, "node count does not match rings");
  if (subdivision == 1) return nodes;
  Points out(static_cast<Eigen::Index>((n_rings - 1) * subdivision + 1) * ppr, 3);
  Eigen::Index o = 0;
  for (int r = 0; r + 1 < n_rings; ++r) {
    const auto a = nodes.middleRows(static_cast<Eigen::Index>(r) * ppr, ppr);
    const auto b = nodes.middleRows(static_cast<Eigen::Index>(r + 1) * ppr, ppr);
    for (int s = 0; s < subdivision; ++s, o += ppr) {
      const double t = static_cast<double>(s) / subdivision;
      out.middleRows(o, ppr) = (1.0 - t) * a + t * b;
    }
  }
  out.middleRows(o, ppr) = nodes.bottomRows(ppr);
  return out;
}

Eigen::VectorXd pack_parameters(const FitState& s) {
  const Layout l = layout_of(s);
  Eigen::VectorXd v(l.size());
  v.segment(l.a(), l.m) = s.a;
  v[l.delta()] = s.delta;
  v[l.psi()] = s.psi;
  v.segment<3>(l.euler()) = s.euler;
  v.segment<3>(l.offset()) = s.offset;
  for (int k = 0; k < l.k; ++k)
    for (int c = 0; c < 3; ++c) v[l.warp() + 3 * k + c] = s.delta_c(k, c);
  return v;
}

void unpack_parameters(const Eigen::VectorXd& v, FitState& s) {
  const Layout l = layout_of(s);
  if (v.size() != l.size()) throw Error(ErrorCode::InvalidArgument, "parameter vector has the wrong size");
  s.a = v.segment(l.a(), l.m);
  s.delta = v[l.delta()];
  s.psi = v[l.psi()];
  s.euler = v.segment<3>(l.euler());
  s.offset = v.segment<3>(l.offset());
  for (int k = 0; k < l.k; ++k)
    for (int c = 0; c < 3; ++c) s.delta_c(k, c) = v[l.warp() + 3 * k + c];
}

Eigen::VectorXd active_mask(const FitState& s, const ActiveSet& act) {
  const Layout l = layout_of(s);
  Eigen::VectorXd m = Eigen::VectorXd::Zero(l.size());
  if (act.a) m.segment(l.a(), l.m).setOnes();
  if (act.delta) m[l.delta()] = 1;
  if (act.psi) m[l.psi()] = 1;
  if (act.euler) m.segment<3>(l.euler()).setOnes();
  if (act.offset) m.segment<3>(l.offset()).setOnes();
  if (act.warp) m.segment(l.warp(), 3 * l.k).setOnes();
  return m;
}

Points predict_mesh(const ShapeModel& model, const FitState& state, const WarpSystem& warp) {
  const Points xt = similarity_transform(reconstruct(model, state.a, state.delta), state.psi, state.euler, state.offset);
  if (state.delta_c.isZero(0.0)) return xt;
  const Eigen::MatrixXd coef = warp.solve(state.delta_c);
  const Points w = coef.topRows(warp.size());
  const Eigen::Matrix<double, 4, 3> v = coef.bottomRows(4);
  return xt + rbf_deform(xt, warp.controls(), Points::Zero(warp.size(), 3), w, v);
}

// ---------------------------------------------------------------------------------------------

FrameObjective::FrameObjective(const FitContext& context, Points contour_points, Points slice_centerline,
                               std::optional<Points> base)
    : context_(&context),
      contour_points_(std::move(contour_points)),
      slice_centerline_(std::move(slice_centerline)),
      base_(std::move(base)) {
  if (contour_points_.rows() == 0) throw Error(ErrorCode::EmptySet, "no contour points to fit");
  if (slice_centerline_.rows() == 0) throw Error(ErrorCode::EmptySet, "empty data centerline");
  if (base_ && base_->rows() != context.centered_mean().rows()) {
    throw Error(ErrorCode::TopologyMismatch, "warm-start mesh does not match the model topology");
  }
}

namespace {

struct Forward {
  Points x_pca;  // empty with a base mesh
  Eigen::Matrix3d rot;
  Points x_t;
  bool warp_on = false;
  Points w;
  Eigen::Matrix<double, 4, 3> v = Eigen::Matrix<double, 4, 3>::Zero();
  Points x;
};

}  // namespace

Points FrameObjective::predict(const FitState& state) const {
  return evaluate(state, ActiveSet{}, false).nodes;
}

FrameObjective::Evaluation FrameObjective::evaluate(const FitState& state, const ActiveSet& active, bool want_gradient,
                                                    bool per_term) const {
  const FitContext& ctx = *context_;
  const ShapeModel& model = ctx.model();
  const WarpSystem& warp = ctx.warp();
  const FitConfig& cfg = ctx.config();
  const LossWeights& lw = cfg.weights;
  const Layout lay = layout_of(state);
  const int n_modes = lay.m;
  const Eigen::Index n = ctx.centered_mean().rows();
  const Eigen::Index k = warp.size();
  if (n_modes > model.n_modes()) throw Error(ErrorCode::InvalidArgument, "more amplitudes than model modes");
  if (state.delta_c.rows() != k) throw Error(ErrorCode::InvalidArgument, "state does not match the control lattice");

  // Forward chain.
  Forward f;
  f.rot = rotation_matrix(state.euler);
  if (base_) {
    f.x_t = *base_;
  } else {
    f.x_pca = ctx.centered_mean();
    for (int m = 0; m < n_modes; ++m) f.x_pca += (state.delta * state.a[m] * model.sigmas[static_cast<std::size_t>(m)]) * model.modes[static_cast<std::size_t>(m)];
    f.x_t = state.psi * (f.x_pca * f.rot);
    f.x_t.rowwise() += state.offset.transpose();
  }
  f.warp_on = active.warp || !state.delta_c.isZero(0.0);
  f.x = f.x_t;
  const Points& c = warp.controls();
  // Kernel matrix r_ik; reused between forward and backward.
  Eigen::MatrixXd kernel;
  if (f.warp_on) {
    const Eigen::MatrixXd coef = warp.solve(state.delta_c);
    f.w = coef.topRows(k);
    f.v = coef.bottomRows(4);
    kernel.resize(n, k);
    for (Eigen::Index kk = 0; kk < k; ++kk) {
      const double cx = c(kk, 0), cy = c(kk, 1), cz = c(kk, 2);
      for (Eigen::Index i = 0; i < n; ++i) {
        const double dx = f.x_t(i, 0) - cx, dy = f.x_t(i, 1) - cy, dz = f.x_t(i, 2) - cz;
        kernel(i, kk) = std::sqrt(dx * dx + dy * dy + dz * dz);
      }
    }
    f.x.noalias() += kernel * f.w;
    f.x.noalias() += f.x_t * f.v.topRows<3>();
    f.x.rowwise() += f.v.row(3);
  }

  Evaluation ev;
  ev.nodes = f.x;

  // Data terms.
  const int sub = cfg.mesh_loss_subdivision;
  const int n_rings = model.n_rings, ppr = model.pts_per_ring;
  const Points targets = axial_edge_samples(f.x, n_rings, ppr, sub);
  const std::vector<Match> mesh_matches = nearest_all(targets, contour_points_, cfg.grid_search);
  double lm = 0.0;
  for (const Match& m : mesh_matches) lm += m.dist2;
  const double q = static_cast<double>(contour_points_.rows());
  lm /= q;

  Points ring_c(n_rings, 3);
  for (int r = 0; r < n_rings; ++r) ring_c.row(r) = f.x.middleRows(static_cast<Eigen::Index>(r) * ppr, ppr).colwise().mean();
  const Eigen::MatrixXd& w_op = ctx.centerline_operator();
  const Points cl_mesh = w_op * ring_c;
  const std::vector<Match> cl_matches = nearest_all(cl_mesh, slice_centerline_, false);
  double lc = 0.0;
  for (const Match& m : cl_matches) lc += m.dist2;
  const double ps = static_cast<double>(slice_centerline_.rows());
  lc /= ps;

  const auto reg = regularization_losses(state);
  ev.terms = {lm, lc, reg[0], reg[1], reg[2], 0.0};
  ev.terms.total = lw.mesh * lm + lw.centerline * lc + lw.modal * reg[0] + lw.rot * reg[1] + lw.warp * reg[2];
  if (!want_gradient) return ev;

  // dL/dX per data term.
  Points g_mesh = Points::Zero(n, 3);
  for (Eigen::Index j = 0; j < contour_points_.rows(); ++j) {
    const Match& m = mesh_matches[static_cast<std::size_t>(j)];
    const Eigen::RowVector3d g = (2.0 / q) * (targets.row(m.index) - contour_points_.row(j));
    // Sample m sits at fraction t between node (r, jj) and node (r + 1, jj).
    const int per_gap = sub * ppr;
    const int r = m.index / per_gap, rem = m.index % per_gap;
    const int step = rem / ppr, jj = rem % ppr;
    const Eigen::Index lo = static_cast<Eigen::Index>(r) * ppr + jj;
    if (step == 0) {
      g_mesh.row(lo) += g;
    } else {
      const double t = static_cast<double>(step) / sub;
      g_mesh.row(lo) += (1.0 - t) * g;
      g_mesh.row(lo + ppr) += t * g;
    }
  }
  Points g_clm = Points::Zero(cl_mesh.rows(), 3);
  for (Eigen::Index i = 0; i < slice_centerline_.rows(); ++i) {
    const Match& m = cl_matches[static_cast<std::size_t>(i)];
    g_clm.row(m.index) += (2.0 / ps) * (cl_mesh.row(m.index) - slice_centerline_.row(i));
  }
  const Points g_ring = w_op.transpose() * g_clm;
  Points g_cl(n, 3);
  for (int r = 0; r < n_rings; ++r) {
    for (int j = 0; j < ppr; ++j) g_cl.row(static_cast<Eigen::Index>(r) * ppr + j) = g_ring.row(r) / ppr;
  }

  const bool need_xt = !base_ && (active.a || active.delta || active.psi || active.euler || active.offset);
  const auto backward = [&](const Points& g) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(lay.size());
    Points g_t = g;
    if (f.warp_on) {
      if (active.warp) {
        Eigen::MatrixXd g_coef(k + 4, 3);
        g_coef.topRows(k).noalias() = kernel.transpose() * g;
        g_coef.middleRows(k, 3).noalias() = f.x_t.transpose() * g;
        g_coef.row(k + 3) = g.colwise().sum();
        const Points g_dc = warp.solve_adjoint(g_coef);
        for (Eigen::Index kk = 0; kk < k; ++kk)
          for (int cc = 0; cc < 3; ++cc) grad[lay.warp() + 3 * kk + cc] = g_dc(kk, cc);
      }
      if (need_xt) {
        g_t.noalias() += g * f.v.topRows<3>().transpose();
        // sum_k (g_i . w_k) (x_i - c_k) / r_ik
        const Eigen::MatrixXd gw = g * f.w.transpose();  // n x k
        for (Eigen::Index i = 0; i < n; ++i) {
          double sx = 0, sy = 0, sz = 0;
          for (Eigen::Index kk = 0; kk < k; ++kk) {
            const double r = kernel(i, kk);
            if (r <= 0.0) continue;
            const double s = gw(i, kk) / r;
            sx += s * (f.x_t(i, 0) - c(kk, 0));
            sy += s * (f.x_t(i, 1) - c(kk, 1));
            sz += s * (f.x_t(i, 2) - c(kk, 2));
          }
          g_t(i, 0) += sx;
          g_t(i, 1) += sy;
          g_t(i, 2) += sz;
        }
      }
    }
    if (!need_xt) return grad;
    grad.segment<3>(lay.offset()) = g_t.colwise().sum().transpose();
    const Points xr = f.x_pca * f.rot;
    grad[lay.psi()] = frob_dot(g_t, xr);
    const Eigen::Matrix3d d_rot = state.psi * (f.x_pca.transpose() * g_t);
    const auto dr = rotation_derivatives(state.euler);
    for (int e = 0; e < 3; ++e) grad[lay.euler() + e] = (d_rot.array() * dr[static_cast<std::size_t>(e)].array()).sum();
    const Points g_pca = state.psi * (g_t * f.rot.transpose());
    double g_delta = 0.0;
    for (int m = 0; m < n_modes; ++m) {
      const double sigma = model.sigmas[static_cast<std::size_t>(m)];
      const double proj = frob_dot(g_pca, model.modes[static_cast<std::size_t>(m)]);
      grad[lay.a() + m] = state.delta * sigma * proj;
      g_delta += state.a[m] * sigma * proj;
    }
    grad[lay.delta()] = g_delta;
    return grad;
  };

  Eigen::VectorXd g_modal = Eigen::VectorXd::Zero(lay.size());
  Eigen::VectorXd g_rot = Eigen::VectorXd::Zero(lay.size());
  Eigen::VectorXd g_warp = Eigen::VectorXd::Zero(lay.size());
  if (n_modes > 0) g_modal.segment(lay.a(), n_modes) = (2.0 / n_modes) * state.a;
  g_rot.segment<3>(lay.euler()) = (2.0 / 3.0) * state.euler;
  for (Eigen::Index kk = 0; kk < k; ++kk)
    for (int cc = 0; cc < 3; ++cc) g_warp[lay.warp() + 3 * kk + cc] = (2.0 / static_cast<double>(k)) * state.delta_c(kk, cc);

  const Eigen::VectorXd mask = active_mask(state, active);
  if (per_term) {
    ev.per_term[0] = backward(g_mesh).cwiseProduct(mask);
    ev.per_term[1] = backward(g_cl).cwiseProduct(mask);
    ev.per_term[2] = g_modal.cwiseProduct(mask);
    ev.per_term[3] = g_rot.cwiseProduct(mask);
    ev.per_term[4] = g_warp.cwiseProduct(mask);
    ev.gradient = lw.mesh * ev.per_term[0] + lw.centerline * ev.per_term[1] + lw.modal * ev.per_term[2] +
                  lw.rot * ev.per_term[3] + lw.warp * ev.per_term[4];
  } else {
    const Points g_data = lw.mesh * g_mesh + lw.centerline * g_cl;
    ev.gradient = (backward(g_data) + lw.modal * g_modal + lw.rot * g_rot + lw.warp * g_warp).cwiseProduct(mask);
  }
  return ev;
}

// ---------------------------------------------------------------------------------------------

Adam::Adam(Eigen::Index size, AdamConfig config)
    : config_(config), m_(Eigen::VectorXd::Zero(size)), v_(Eigen::VectorXd::Zero(size)), t_(Eigen::VectorXi::Zero(size)) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, const Eigen::VectorXd& mask) {
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    if (mask[i] == 0.0) continue;
    const double g = grad[i];
    t_[i] += 1;
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * g;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * g * g;
    const double m_hat = m_[i] / (1.0 - std::pow(config_.beta1, t_[i]));
    const double v_hat = v_[i] / (1.0 - std::pow(config_.beta2, t_[i]));
    params[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

// ---------------------------------------------------------------------------------------------

namespace {

struct Centered {
  Vec3 center = Vec3::Zero();
  Points contour_points;
  Points centerline;
  std::vector<Plane> planes;  // shifted into the centered frame
};

Centered center_frame(const FitContext& ctx, const std::vector<SliceContour>& contours) {
  if (contours.size() < 2) throw Error(ErrorCode::TooFewSlices, "a frame needs at least 2 contours");
  Centered out;
  const Points all = stack_points(contours);
  if (!all.allFinite()) throw Error(ErrorCode::NonFinite, "contour points are not finite");
  out.center = ctx.config().center_data ? centroid(all) : Vec3::Zero();
  out.contour_points = all.rowwise() - out.center.transpose();
  const CenterlineCurve cl = data_centerline(contours, ctx.config().slice_centerline_points);
  out.centerline = cl.points().rowwise() - out.center.transpose();
  for (const auto& c : contours) out.planes.push_back(Plane{c.plane.origin - out.center, c.plane.normal});
  return out;
}

// Offset that puts the centroid of the mean's cross-sections at the data planes on the origin.
// Fixed-point iteration; planes that miss the shifted mean are skipped.
Vec3 aligned_offset(const FitContext& ctx, const Centered& data) {
  const ShapeModel& model = ctx.model();
  Vec3 offset = Vec3::Zero();
  for (int it = 0; it < 4; ++it) {
    const TubeMesh mesh = model.mesh(ctx.centered_mean().rowwise() + offset.transpose());
    Vec3 sum = Vec3::Zero();
    int used = 0;
    for (const Plane& plane : data.planes) {
      try {
        sum += centroid(resample_contour(slice_nearest(mesh, plane, plane.origin), 180));
        ++used;
      } catch (const Error&) {
      }
    }
    if (used == 0) break;
    offset -= sum / used;
  }
  return offset;
}

// Runs `epochs` Adam steps from `state`; epoch numbers in the trace start at `first_epoch`.
LossTerms optimize(const FrameObjective& objective, const FitContext& ctx, FitState& state, int frame, int first_epoch,
                   int epochs, const std::function<ActiveSet(int)>& active_at, const std::function<int(int)>& stage_at,
                   std::vector<TraceRow>& trace, Points& nodes_out) {
  Adam adam(pack_parameters(state).size(), ctx.config().adam);
  int current_stage = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int e = first_epoch; e < first_epoch + epochs; ++e) {
    const ActiveSet act = active_at(e);
    const int stage = stage_at(e);
    if (stage != current_stage) {
      current_stage = stage;
      best = std::numeric_limits<double>::infinity();
    }
    const auto ev = objective.evaluate(state, act, true);
    if (!terms_finite(ev.terms) || !all_finite(ev.gradient)) {
      throw NonFiniteError("non-finite loss or gradient at frame " + std::to_string(frame) + ", epoch " + std::to_string(e),
                           trace);
    }
    best = std::min(best, ev.terms.total);
    trace.push_back({frame, e, stage, ev.terms, best});
    Eigen::VectorXd flat = pack_parameters(state);
    adam.step(flat, ev.gradient, active_mask(state, act));
    unpack_parameters(flat, state);
    state.epoch = e + 1;
  }
  refresh_warp(state, ctx.warp());
  const auto final_ev = objective.evaluate(state, ActiveSet{}, false);
  if (!terms_finite(final_ev.terms) || !final_ev.nodes.allFinite()) {
    throw NonFiniteError("non-finite final state at frame " + std::to_string(frame), trace);
  }
  nodes_out = final_ev.nodes;
  return final_ev.terms;
}

}  // namespace

FrameFit fit_frame0(const FitContext& ctx, const std::vector<SliceContour>& contours) {
  const FitConfig& cfg = ctx.config();
  const Centered data = center_frame(ctx, contours);
  const FrameObjective objective(ctx, data.contour_points, data.centerline);
  FrameFit out;
  out.state = FitState::initial(ctx.model().n_modes(), ctx.warp().controls());
  out.state.loss_weights = cfg.weights;
  if (cfg.align_initial_offset) out.state.offset = aligned_offset(ctx, data);
  out.data_center = data.center;
  Points nodes;
  const Schedule& sch = cfg.schedule;
  out.final_terms = optimize(
      objective, ctx, out.state, 0, 0, sch.total, [&](int e) { return sch.active(e); },
      [&](int e) { return sch.stage(e); }, out.trace, nodes);
  nodes.rowwise() += data.center.transpose();
  out.mesh = ctx.model().mesh(std::move(nodes));
  spdlog::debug("frame 0 fitted: loss_mesh {:.4f} mm^2, loss_cl {:.4f} mm^2", out.final_terms.mesh, out.final_terms.centerline);
  return out;
}

FitResult fit_sequence(const FitContext& ctx, const SliceSet& slices, int max_frames) {
  slices.validate();
  const FrameFit frame0 = fit_frame0(ctx, slices.frames.front());
  return fit_sequence(ctx, slices, frame0, max_frames);
}

FitResult fit_sequence(const FitContext& ctx, const SliceSet& slices, const FrameFit& frame0, int max_frames) {
  slices.validate();
  const FitConfig& cfg = ctx.config();
  const int n_frames = max_frames < 0 ? slices.n_frames() : std::min(max_frames, slices.n_frames());
  FitResult out;
  out.frame0_state = frame0.state;
  out.trace = frame0.trace;
  out.meshes.push_back(frame0.mesh);
  out.final_terms.push_back(frame0.final_terms);
  out.centerlines.push_back(centerline_from_mesh(frame0.mesh, cfg.mesh_centerline_points));

  const int stage = 3;
  for (int t = 1; t < n_frames; ++t) {
    const Centered data = center_frame(ctx, slices.frames[static_cast<std::size_t>(t)]);
    Points base = out.meshes.back().nodes().rowwise() - data.center.transpose();
    const FrameObjective objective(ctx, data.contour_points, data.centerline, std::move(base));
    FitState state = frame0.state;
    state.delta_c.setZero();
    refresh_warp(state, ctx.warp());
    state.epoch = 0;
    Points nodes;
    ActiveSet warp_only;
    warp_only.warp = true;
    const LossTerms terms = optimize(
        objective, ctx, state, t, 0, cfg.schedule.sequence_epochs, [&](int) { return warp_only; },
        [&](int) { return stage; }, out.trace, nodes);
    nodes.rowwise() += data.center.transpose();
    out.meshes.push_back(ctx.model().mesh(std::move(nodes)));
    out.final_terms.push_back(terms);
    out.centerlines.push_back(centerline_from_mesh(out.meshes.back(), cfg.mesh_centerline_points));
  }
  return out;
}

}  // namespace archfit
