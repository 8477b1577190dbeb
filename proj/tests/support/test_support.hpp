#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "archfit/contours.hpp"
#include "archfit/fitting.hpp"
#include "archfit/mesh.hpp"
#include "archfit/nearest.hpp"
#include "archfit/ssm.hpp"
#include "archfit/synth.hpp"

namespace archfit::testing {

inline constexpr double kPi = 3.14159265358979323846;

// Circular rings of `radius` centered on the z axis at z = ring * dz.
inline TubeMesh straight_tube(double radius, int n_rings = kDefaultRings, int ppr = kDefaultPointsPerRing, double dz = 1.0) {
  Points nodes(static_cast<Eigen::Index>(n_rings) * ppr, 3);
  for (int r = 0; r < n_rings; ++r)
    for (int j = 0; j < ppr; ++j) {
      const double t = 2.0 * kPi * j / ppr;
      nodes.row(static_cast<Eigen::Index>(r) * ppr + j) << radius * std::cos(t), radius * std::sin(t), r * dz;
    }
  return TubeMesh(n_rings, ppr, nodes);
}

// Rings of `tube_radius` whose centers run over a half circle of radius `arc_radius` in the x-z
// plane, from (-R, 0, 0) over (0, 0, R) to (R, 0, 0).
inline TubeMesh semicircle_tube(double arc_radius, double tube_radius, int n_rings = kDefaultRings,
                                int ppr = kDefaultPointsPerRing) {
  Points nodes(static_cast<Eigen::Index>(n_rings) * ppr, 3);
  for (int r = 0; r < n_rings; ++r) {
    const double phi = kPi * r / (n_rings - 1);
    const Vec3 c(-arc_radius * std::cos(phi), 0.0, arc_radius * std::sin(phi));
    const Vec3 tangent(std::sin(phi), 0.0, std::cos(phi));
    const Vec3 e1 = Vec3::UnitY();
    const Vec3 e2 = tangent.cross(e1);
    for (int j = 0; j < ppr; ++j) {
      const double t = 2.0 * kPi * j / ppr;
      nodes.row(static_cast<Eigen::Index>(r) * ppr + j) = (c + tube_radius * (std::cos(t) * e1 + std::sin(t) * e2)).transpose();
    }
  }
  return TubeMesh(n_rings, ppr, nodes);
}

inline Points random_points(std::mt19937_64& rng, int n, double scale = 10.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Points p(n, 3);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < 3; ++c) p(i, c) = u(rng);
  return p;
}

// Small shape model from a parametric cohort.
inline ShapeModel cohort_model(std::uint64_t seed = 7, int count = 30, int n_modes = kDefaultModes) {
  BuildOptions opts;
  opts.n_modes = n_modes;
  return build_model(generate_cohort(seed, count), opts);
}

// Generic random state around the identity pose with a non-zero warp.
// Weights of the shipped study config (configs/study.json).
inline FitConfig study_fit_config() {
  FitConfig cfg;
  cfg.weights.centerline = 0.01;
  cfg.weights.modal = 0.01;
  cfg.align_initial_offset = true;
  return cfg;
}

inline FitState random_state(std::mt19937_64& rng, const FitContext& ctx) {
  std::normal_distribution<double> n01(0.0, 1.0);
  FitState s = FitState::initial(ctx.model().n_modes(), ctx.warp().controls());
  for (Eigen::Index i = 0; i < s.a.size(); ++i) s.a[i] = 0.5 * n01(rng);
  s.delta = 1.0 + 0.1 * n01(rng);
  s.psi = 1.0 + 0.05 * n01(rng);
  s.euler = Vec3(0.05 * n01(rng), 0.05 * n01(rng), 0.05 * n01(rng));
  s.offset = Vec3(n01(rng), n01(rng), n01(rng));
  for (Eigen::Index k = 0; k < s.delta_c.rows(); ++k)
    for (int c = 0; c < 3; ++c) s.delta_c(k, c) = 0.3 * n01(rng);
  return s;
}

struct GradientCheck {
  double max_rel_error = 0.0;
  int worst_term = -1;
  int worst_index = -1;
  int checked = 0;
};

inline double term_value(const LossTerms& t, int term) {
  switch (term) {
    case 0: return t.mesh;
    case 1: return t.centerline;
    case 2: return t.modal;
    case 3: return t.rot;
    default: return t.warp;
  }
}

// Five-point central differences of each loss term against its analytic gradient on the given
// parameter indices. The step is picked per entry from a ladder by agreement between successive FD
// estimates (never by agreement with the analytic value). Nearest-point matching makes the data
// terms piecewise smooth, so large steps can straddle a match switch. The error of an entry is
// |g - fd| / max(|g|, |fd|, 1e-6 * max|g| over the checked entries of that term).
inline GradientCheck check_gradients(const FrameObjective& obj, const FitState& state, const std::vector<int>& indices) {
  const auto ev = obj.evaluate(state, ActiveSet::all(), true, true);
  const Eigen::VectorXd p0 = pack_parameters(state);
  static const double kSteps[] = {1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9};
  constexpr int kLadder = 7;
  const auto terms_at = [&](int i, double x) {
    Eigen::VectorXd p = p0;
    p[i] += x;
    FitState s = state;
    unpack_parameters(p, s);
    return obj.evaluate(s, ActiveSet::all(), false).terms;
  };
  std::vector<std::array<double, 5>> fd(indices.size());
  for (std::size_t n = 0; n < indices.size(); ++n) {
    const int i = indices[n];
    std::array<std::array<double, 5>, kLadder> est{};
    for (int h_idx = 0; h_idx < kLadder; ++h_idx) {
      const double h = kSteps[h_idx] * std::max(1.0, std::abs(p0[i]));
      const LossTerms p1 = terms_at(i, h), m1 = terms_at(i, -h), p2 = terms_at(i, 2 * h), m2 = terms_at(i, -2 * h);
      for (int t = 0; t < 5; ++t) {
        est[h_idx][t] = (8.0 * (term_value(p1, t) - term_value(m1, t)) - (term_value(p2, t) - term_value(m2, t))) / (12.0 * h);
      }
    }
    for (int t = 0; t < 5; ++t) {
      // Successive-estimate gap plus the rounding error of the smaller step; two tiny steps can
      // agree exactly just because both are quantized.
      const auto score = [&](int h_idx) {
        const double h = kSteps[h_idx] * std::max(1.0, std::abs(p0[i]));
        return std::abs(est[h_idx][t] - est[h_idx - 1][t]) + 4e-16 * std::abs(term_value(ev.terms, t)) / h;
      };
      int best = 1;
      for (int h_idx = 2; h_idx < kLadder; ++h_idx) {
        if (score(h_idx) < score(best)) best = h_idx;
      }
      fd[n][t] = est[best][t];
    }
  }
  GradientCheck out;
  for (int t = 0; t < 5; ++t) {
    double scale = 0.0;
    for (int i : indices) scale = std::max(scale, std::abs(ev.per_term[t][i]));
    for (std::size_t n = 0; n < indices.size(); ++n) {
      const double g = ev.per_term[t][indices[n]];
      const double denom = std::max({std::abs(g), std::abs(fd[n][t]), 1e-6 * scale, 1e-12});
      const double rel = std::abs(g - fd[n][t]) / denom;
      ++out.checked;
      if (rel > out.max_rel_error) {
        out.max_rel_error = rel;
        out.worst_term = t;
        out.worst_index = indices[n];
      }
    }
  }
  return out;
}

// Every non-warp entry plus `n_warp` warp entries drawn at random.
inline std::vector<int> gradient_indices(std::mt19937_64& rng, const FitState& s, int n_warp) {
  const int m = static_cast<int>(s.a.size());
  std::vector<int> idx;
  for (int i = 0; i < m + 8; ++i) idx.push_back(i);
  std::uniform_int_distribution<int> pick(m + 8, m + 8 + 3 * static_cast<int>(s.delta_c.rows()) - 1);
  for (int i = 0; i < n_warp; ++i) idx.push_back(pick(rng));
  return idx;
}

// Contours of a mesh at its 12 candidate stations, data centered the way the fit centers it.
struct CenteredFrame {
  Points points;
  Points centerline;
};
inline CenteredFrame centered_frame(const std::vector<SliceContour>& contours) {
  CenteredFrame f;
  f.points = stack_points(contours);
  const Vec3 c = centroid(f.points);
  f.points.rowwise() -= c.transpose();
  f.centerline = data_centerline(contours).points();
  f.centerline.rowwise() -= c.transpose();
  return f;
}

}  // namespace archfit::testing
