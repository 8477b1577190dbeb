#include "archfit/synth.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <numbers>
#include <random>

#include "archfit/error.hpp"
#include "archfit/slicing.hpp"

namespace archfit {

namespace {

constexpr double kPi = std::numbers::pi;

// Centerline of the construction at arclength s (before shear), with unit tangent.
std::pair<Vec3, Vec3> construction_point(const ArchParams& p, double s) {
  const double la = p.ascending_length;
  const double arc = kPi * p.arch_radius;
  if (s <= la) return {Vec3(0, 0, s), Vec3::UnitZ()};
  if (s <= la + arc) {
    const double theta = kPi - (s - la) / p.arch_radius;
    const Vec3 center(p.arch_radius, 0, la);
    return {center + p.arch_radius * Vec3(std::cos(theta), 0, std::sin(theta)), Vec3(std::sin(theta), 0, -std::cos(theta))};
  }
  const double d = s - la - arc;
  return {Vec3(2.0 * p.arch_radius, 0, la - d), -Vec3::UnitZ()};
}

struct NoiseTerm {
  int axial;
  int angular;
  double amplitude;
  double phase_axial;
  double phase_angular;
};

std::vector<NoiseTerm> noise_terms(const ArchParams& p, double length) {
  std::vector<NoiseTerm> terms;
  if (p.noise_amplitude <= 0) return terms;
  std::mt19937_64 rng(p.seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  const int axial_modes = std::max(1, static_cast<int>(std::lround(length / p.noise_correlation_length)));
  for (int k = 0; k <= axial_modes; ++k) {
    for (int l = 0; l <= 3; ++l) {
      terms.push_back({k, l, normal(rng), phase(rng), phase(rng)});
    }
  }
  // Each term has mean-square 1/4 (product of two unit cosines); scale to the requested RMS.
  const double norm = p.noise_amplitude * 2.0 / std::sqrt(static_cast<double>(terms.size()));
  for (auto& t : terms) t.amplitude *= norm;
  return terms;
}

}  // namespace

void ArchParams::validate() const {
  auto require = [](bool ok, const char* field, const char* rule) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, std::string(field) + " " + rule);
  };
  require(arch_radius > 0, "arch_radius", "must be > 0");
  require(ascending_length >= 0, "ascending_length", "must be >= 0");
  require(descending_length >= 0, "descending_length", "must be >= 0");
  require(inlet_radius > 0, "inlet_radius", "must be > 0");
  require(taper > 0.3 && taper < 2.0, "taper", "must lie in (0.3, 2)");
  require(ellipticity > 0.5 && ellipticity < 2.0, "ellipticity", "must lie in (0.5, 2)");
  require(std::abs(bend_out_of_plane) < 1.2, "bend_out_of_plane", "must lie in (-1.2, 1.2) rad");
  require(noise_amplitude >= 0, "noise_amplitude", "must be >= 0");
  require(noise_correlation_length > 0, "noise_correlation_length", "must be > 0");
  require(n_rings >= 5, "n_rings", "must be >= 5");
  require(pts_per_ring >= 8, "pts_per_ring", "must be >= 8");
}

double construction_length(const ArchParams& p) {
  return p.ascending_length + kPi * p.arch_radius + p.descending_length;
}

TubeMesh generate_arch(const ArchParams& p) {
  p.validate();
  const double max_radius = p.inlet_radius * std::max(1.0, p.taper) * std::max(std::sqrt(p.ellipticity), 1.0 / std::sqrt(p.ellipticity)) +
                            3.0 * p.noise_amplitude;
  if (p.arch_radius < 1.5 * max_radius) {
    throw Error(ErrorCode::SelfIntersection, "arch_radius below 1.5 x the largest ring radius");
  }
  const double length = construction_length(p);
  const double shear = std::tan(p.bend_out_of_plane);
  auto sheared = [&](Vec3 v) {
    v.y() += shear * v.x();
    return v;
  };

  // Ring stations equally spaced in construction arclength; tangents follow the shear.
  std::vector<Vec3> centers(static_cast<std::size_t>(p.n_rings)), tangents(centers.size());
  for (int r = 0; r < p.n_rings; ++r) {
    const double s = length * r / (p.n_rings - 1);
    auto [c, t] = construction_point(p, s);
    centers[static_cast<std::size_t>(r)] = sheared(c);
    tangents[static_cast<std::size_t>(r)] = sheared(t).normalized();
  }

  // Parallel-transported ring frames, starting from the +x direction at the inlet.
  std::vector<Vec3> normals(centers.size());
  {
    const Vec3 t0 = tangents[0];
    Vec3 n0 = Vec3::UnitX() - Vec3::UnitX().dot(t0) * t0;
    if (n0.norm() < 1e-6) n0 = Vec3::UnitY() - Vec3::UnitY().dot(t0) * t0;
    normals[0] = n0.normalized();
    for (std::size_t r = 1; r < centers.size(); ++r) {
      const Eigen::Quaterniond q = Eigen::Quaterniond::FromTwoVectors(tangents[r - 1], tangents[r]);
      Vec3 n = q * normals[r - 1];
      normals[r] = (n - n.dot(tangents[r]) * tangents[r]).normalized();
    }
  }

  const auto terms = noise_terms(p, length);
  const double axis_n = std::sqrt(p.ellipticity);
  const double axis_b = 1.0 / std::sqrt(p.ellipticity);
  Points nodes(static_cast<Eigen::Index>(p.n_rings) * p.pts_per_ring, 3);
  for (int r = 0; r < p.n_rings; ++r) {
    const double u = static_cast<double>(r) / (p.n_rings - 1);
    const double s = length * u;
    const double radius = p.inlet_radius * (1.0 + (p.taper - 1.0) * u);
    const Vec3& c = centers[static_cast<std::size_t>(r)];
    const Vec3& n = normals[static_cast<std::size_t>(r)];
    const Vec3 b = tangents[static_cast<std::size_t>(r)].cross(n);
    for (int j = 0; j < p.pts_per_ring; ++j) {
      const double theta = 2.0 * kPi * j / p.pts_per_ring;
      double bump = 0.0;
      for (const auto& t : terms) {
        bump += t.amplitude * std::cos(t.axial * kPi * s / length + t.phase_axial) * std::cos(t.angular * theta + t.phase_angular);
      }
      const Vec3 offset = radius * (axis_n * std::cos(theta) * n + axis_b * std::sin(theta) * b);
      nodes.row(static_cast<Eigen::Index>(r) * p.pts_per_ring + j) = (c + offset * (1.0 + bump / radius)).transpose();
    }
  }
  TubeMesh mesh(p.n_rings, p.pts_per_ring, std::move(nodes));
  try {
    mesh.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::SelfIntersection, e.what());
  }
  return mesh;
}

ArchParams sample_arch_params(std::uint64_t seed, int index) {
  for (int attempt = 0;; ++attempt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(attempt)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double regime = unit(rng);  // 0 = young-like, 1 = elderly-like
    ArchParams p;
    p.inlet_radius = 11.0 + 6.0 * regime + 0.8 * normal(rng);
    p.arch_radius = 27.0 + 16.0 * regime + 2.5 * normal(rng);
    p.ascending_length = 32.0 + 20.0 * regime + 4.0 * normal(rng);
    p.descending_length = 75.0 + 20.0 * regime + 6.0 * normal(rng);
    p.taper = 0.72 + 0.06 * normal(rng);
    p.ellipticity = 1.0 + 0.05 * normal(rng);
    p.bend_out_of_plane = 0.12 * normal(rng);
    p.noise_amplitude = 0.4;
    p.noise_correlation_length = 45.0;
    p.seed = seed * 1000003ULL + static_cast<std::uint64_t>(index) * 7919ULL + static_cast<std::uint64_t>(attempt);
    // Short draws leave no room for the twelve candidate stations; redraw those too.
    if (construction_length(p) < kMinSampledLengthMm) {
      if (attempt > 100) throw Error(ErrorCode::TooShort, "no sampled arch reached the minimum length");
      continue;
    }
    try {
      generate_arch(p);
      return p;
    } catch (const Error&) {
      if (attempt > 100) throw;
    }
  }
}

std::vector<TubeMesh> generate_cohort(std::uint64_t seed, int count, std::vector<ArchParams>* params_out) {
  std::vector<TubeMesh> out;
  out.reserve(static_cast<std::size_t>(count));
  if (params_out) params_out->clear();
  for (int i = 0; i < count; ++i) {
    const ArchParams p = sample_arch_params(seed, i);
    out.push_back(generate_arch(p));
    if (params_out) params_out->push_back(p);
  }
  return out;
}

void MotionProfile::validate() const {
  if (radial.empty() || radial.size() != axial.size()) {
    throw Error(ErrorCode::InvalidArgument, "motion profile needs equal, non-empty radial/axial factor lists");
  }
  for (std::size_t t = 0; t < radial.size(); ++t) {
    if (!(radial[t] > 0) || !(axial[t] > 0)) throw Error(ErrorCode::InvalidArgument, "motion factors must be > 0");
  }
  if (radial[0] != 1.0 || axial[0] != 1.0) throw Error(ErrorCode::InvalidArgument, "frame 0 factors must be 1");
  if (peak_frame < 0 || peak_frame >= n_frames()) throw Error(ErrorCode::InvalidArgument, "peak frame out of range");
}

MotionProfile MotionProfile::cardiac(int n_frames, double peak_radial, double peak_axial, int peak_frame) {
  if (n_frames < 1) throw Error(ErrorCode::InvalidArgument, "n_frames must be >= 1");
  peak_frame = std::clamp(peak_frame, 0, n_frames - 1);
  MotionProfile m;
  m.peak_frame = peak_frame;
  for (int t = 0; t < n_frames; ++t) {
    double w = 0.0;
    if (t == 0) w = 0.0;
    else if (t <= peak_frame) w = std::pow(std::sin(0.5 * kPi * t / peak_frame), 2);
    else w = std::pow(std::cos(0.5 * kPi * (t - peak_frame) / double(n_frames - peak_frame)), 2);
    m.radial.push_back(t == 0 ? 1.0 : 1.0 + (peak_radial - 1.0) * w);
    m.axial.push_back(t == 0 ? 1.0 : 1.0 + (peak_axial - 1.0) * w);
  }
  m.validate();
  return m;
}

MotionProfile MotionProfile::still(int n_frames) {
  MotionProfile m;
  m.radial.assign(static_cast<std::size_t>(n_frames), 1.0);
  m.axial.assign(static_cast<std::size_t>(n_frames), 1.0);
  return m;
}

std::vector<TubeMesh> animate(const TubeMesh& mesh, const MotionProfile& profile) {
  profile.validate();
  const Points centroids = mesh.ring_centroids();
  const Vec3 anchor = row(centroids, 0);
  std::vector<TubeMesh> frames;
  frames.reserve(static_cast<std::size_t>(profile.n_frames()));
  for (int t = 0; t < profile.n_frames(); ++t) {
    const double fr = profile.radial[static_cast<std::size_t>(t)];
    const double fa = profile.axial[static_cast<std::size_t>(t)];
    if (fr == 1.0 && fa == 1.0) {
      frames.push_back(mesh);
      continue;
    }
    Points nodes = mesh.nodes();
    for (int r = 0; r < mesh.n_rings(); ++r) {
      const Vec3 c = row(centroids, r);
      const Vec3 moved = anchor + fa * (c - anchor);
      for (int j = 0; j < mesh.pts_per_ring(); ++j) {
        const int i = mesh.node_index(r, j);
        nodes.row(i) = (moved + fr * (row(mesh.nodes(), i) - c)).transpose();
      }
    }
    frames.push_back(mesh.with_nodes(std::move(nodes)));
  }
  return frames;
}

SliceSet extract_slice_set(const std::vector<TubeMesh>& sequence, const std::vector<Plane>& planes,
                           const SliceExtraction& options, const std::vector<int>& stations) {
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  SliceSet set;
  for (std::size_t t = 0; t < sequence.size(); ++t) {
    std::vector<SliceContour> frame;
    for (std::size_t s = 0; s < planes.size(); ++s) {
      const Plane& plane = planes[s];
      Points pts = resample_contour(slice_nearest(sequence[t], plane, plane.origin), options.points_per_contour);
      if (options.noise_sigma > 0) {
        const auto [u, v] = plane.basis();
        for (Eigen::Index i = 0; i < pts.rows(); ++i) {
          const double gu = normal(rng);
          const double gv = normal(rng);
          pts.row(i) += (options.noise_sigma * (gu * u + gv * v)).transpose();
        }
      }
      SliceContour c{plane, std::move(pts), static_cast<int>(t), s < stations.size() ? stations[s] : static_cast<int>(s) + 1};
      frame.push_back(std::move(c));
    }
    set.frames.push_back(std::move(frame));
  }
  return set;
}

void SliceSet::validate() const {
  if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "slice set has no frames");
  const auto s = frames.front().size();
  if (s < 2) throw Error(ErrorCode::InvalidArgument, "every frame needs >= 2 slices");
  for (const auto& f : frames) {
    if (f.size() != s) throw Error(ErrorCode::InvalidArgument, "frames disagree on slice count");
    for (std::size_t i = 0; i < s; ++i) {
      const auto& a = f[i].plane;
      const auto& b = frames.front()[i].plane;
      if ((a.origin - b.origin).norm() > 1e-9 || (a.normal - b.normal).norm() > 1e-9) {
        throw Error(ErrorCode::InvalidArgument, "frames disagree on slice planes");
      }
    }
  }
}

Points stack_points(const std::vector<SliceContour>& contours) {
  Eigen::Index total = 0;
  for (const auto& c : contours) total += c.points.rows();
  Points all(total, 3);
  Eigen::Index at = 0;
  for (const auto& c : contours) {
    all.middleRows(at, c.points.rows()) = c.points;
    at += c.points.rows();
  }
  return all;
}

}  // namespace archfit
