#include "archfit/ssm.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <random>

#include <spdlog/spdlog.h>

#include "archfit/error.hpp"

namespace archfit {

std::pair<Eigen::Matrix3d, Vec3> kabsch(const Points& moving, const Points& fixed) {
  const Eigen::RowVector3d cm = moving.colwise().mean();
  const Eigen::RowVector3d cf = fixed.colwise().mean();
  const Eigen::Matrix3d h = (moving.rowwise() - cm).transpose() * (fixed.rowwise() - cf);
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0) d(2, 2) = -1.0;
  const Eigen::Matrix3d r = svd.matrixV() * d * svd.matrixU().transpose();
  const Vec3 t = cf.transpose() - r * cm.transpose();
  return {r, t};
}

ShapeModel build_model(const std::vector<TubeMesh>& dataset, const BuildOptions& options) {
  if (dataset.size() < 2) throw Error(ErrorCode::InvalidArgument, "shape model needs >= 2 meshes");
  const TubeMesh& first = dataset.front();
  for (const auto& m : dataset) {
    if (!m.same_topology(first)) throw Error(ErrorCode::TopologyMismatch, "dataset meshes differ in topology");
  }
  const auto n = static_cast<Eigen::Index>(dataset.size());
  const Eigen::Index dim = 3 * first.n_nodes();

  Eigen::MatrixXd data(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    Points nodes = dataset[static_cast<std::size_t>(i)].nodes();
    if (options.rigid_align && i > 0) {
      const auto [r, t] = kabsch(nodes, first.nodes());
      nodes = ((nodes * r.transpose()).rowwise() + t.transpose()).eval();
    }
    data.row(i) = flatten(nodes).transpose();
  }
  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;

  // Thin SVD of the n x 3N centered matrix: right singular vectors are the modes.
  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd s = svd.singularValues();
  const double total = s.squaredNorm();
  const double tol = std::max(1e-9 * (s.size() ? s[0] : 0.0), 1e-12 * std::sqrt(static_cast<double>(dim)));

  ShapeModel model;
  model.mean = unflatten(mean.transpose());
  model.n_rings = first.n_rings();
  model.pts_per_ring = first.pts_per_ring();
  model.cells = first.cells();

  const int max_modes = static_cast<int>(std::min<Eigen::Index>(n - 1, dim));
  const int requested = options.n_modes;
  const int wanted = std::min(requested, max_modes);
  for (int m = 0; m < wanted; ++m) {
    if (!(s[m] > tol)) break;
    Eigen::VectorXd v = svd.matrixV().col(m);
    // Deterministic sign: largest-magnitude component positive.
    Eigen::Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0) v = -v;
    model.modes.push_back(unflatten(v));
    model.sigmas.push_back(s[m] / std::sqrt(static_cast<double>(n - 1)));
    model.explained_variance_ratio.push_back(total > 0 ? s[m] * s[m] / total : 0.0);
  }
  model.truncated_modes = requested - model.n_modes();
  if (model.modes.empty()) {
    throw Error(ErrorCode::RankDeficient, "dataset has no shape variance (0 usable modes)");
  }
  if (model.truncated_modes > 0) {
    spdlog::warn("shape model: {} of {} requested modes unavailable (data rank), truncated", model.truncated_modes,
                 requested);
  }
  return model;
}

Points reconstruct(const ShapeModel& model, const Eigen::VectorXd& amplitudes, double delta) {
  if (amplitudes.size() != model.n_modes()) {
    throw Error(ErrorCode::InvalidArgument, "amplitude count does not match the model's modes");
  }
  Points x = model.mean;
  for (int m = 0; m < model.n_modes(); ++m) {
    x += (delta * amplitudes[m] * model.sigmas[static_cast<std::size_t>(m)]) * model.modes[static_cast<std::size_t>(m)];
  }
  return x;
}

Eigen::VectorXd project(const ShapeModel& model, const Points& nodes) {
  Eigen::VectorXd a(model.n_modes());
  const Points diff = nodes - model.mean;
  for (int m = 0; m < model.n_modes(); ++m) {
    a[m] = (diff.array() * model.modes[static_cast<std::size_t>(m)].array()).sum() / model.sigmas[static_cast<std::size_t>(m)];
  }
  return a;
}

TubeMesh sample_shape(const ShapeModel& model, std::uint64_t seed, double sigma_scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::VectorXd a(model.n_modes());
  for (int m = 0; m < model.n_modes(); ++m) a[m] = sigma_scale * normal(rng);
  return model.mesh(reconstruct(model, a, 1.0));
}

}  // namespace archfit
