#include <doctest.h>

#include <random>

#include "archfit/error.hpp"
#include "archfit/geom_metrics.hpp"
#include "archfit/vessel_metrics.hpp"
#include "archfit/voxel.hpp"
#include "test_support.hpp"

using namespace archfit;
using namespace archfit::testing;

namespace {

VoxelMask line_mask(std::initializer_list<int> on, int n = 10) {
  VoxelMask m;
  m.grid.dims = {n, 1, 1};
  m.occupancy.assign(static_cast<std::size_t>(n), 0);
  for (int i : on) m.occupancy[static_cast<std::size_t>(i)] = 1;
  return m;
}

Points singleton(double x) {
  Points p(1, 3);
  p << x, 0, 0;
  return p;
}

double min_dist(const Points& set, const Vec3& q) {
  double best = 1e300;
  for (Eigen::Index i = 0; i < set.rows(); ++i) best = std::min(best, (row(set, i) - q).norm());
  return best;
}

}  // namespace

TEST_CASE("overlap scores by hand count") {
  const VoxelMask a = line_mask({0, 1, 2, 3}), b = line_mask({2, 3, 4, 5});
  CHECK(dice(a, b) == doctest::Approx(0.5));
  CHECK(iou(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(dice(a, a) == 1.0);
  CHECK(iou(a, a) == 1.0);
  CHECK(dice(a, line_mask({6, 7})) == 0.0);
  CHECK(dice(line_mask({}), line_mask({})) == 1.0);
  CHECK(iou(line_mask({}), line_mask({})) == 1.0);
  CHECK(dice(line_mask({}), a) == 0.0);

  try {
    dice(a, line_mask({1}, 11));
    FAIL("expected GridMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GridMismatch);
  }
}

TEST_CASE("iou equals dice over two minus dice on random masks") {
  std::mt19937_64 rng(17);
  std::bernoulli_distribution coin(0.3);
  for (int trial = 0; trial < 50; ++trial) {
    VoxelMask a, b;
    a.grid.dims = b.grid.dims = {6, 5, 4};
    for (int i = 0; i < 120; ++i) {
      a.occupancy.push_back(coin(rng));
      b.occupancy.push_back(coin(rng));
    }
    const double d = dice(a, b);
    CHECK(iou(a, b) == doctest::Approx(d / (2 - d)).epsilon(1e-12));
    CHECK(iou(a, b) <= d);
  }
}

TEST_CASE("point-set distances on singletons") {
  const Points x = singleton(0), y = singleton(3);
  CHECK(hausdorff(x, y) == 3.0);
  CHECK(asd(x, y) == 3.0);
  CHECK(chamfer(x, y) == 6.0);
  CHECK(hausdorff(x, x) == 0.0);
  CHECK(asd(x, x) == 0.0);
  CHECK(chamfer(x, x) == 0.0);
  try {
    hausdorff(x, Points(0, 3));
    FAIL("expected EmptySet");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptySet);
  }
}

TEST_CASE("point-set distances equal the double-loop oracle") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    const Points x = random_points(rng, 50), y = random_points(rng, 30 + trial);
    double hxy = 0, hyx = 0, sx = 0, sy = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double d = min_dist(y, row(x, i));
      hxy = std::max(hxy, d);
      sx += d;
    }
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double d = min_dist(x, row(y, j));
      hyx = std::max(hyx, d);
      sy += d;
    }
    CHECK(hausdorff(x, y) == std::max(hxy, hyx));
    CHECK(asd(x, y) == doctest::Approx((sx + sy) / static_cast<double>(x.rows() + y.rows())).epsilon(1e-14));
    CHECK(chamfer(x, y) == doctest::Approx(sx / static_cast<double>(x.rows()) + sy / static_cast<double>(y.rows())).epsilon(1e-14));
    CHECK(hausdorff(x, y) == hausdorff(y, x));
    CHECK(hausdorff(x, y) >= asd(x, y));
    CHECK(hausdorff(x, y) >= chamfer(x, y) / 2);
  }
  const Points a = random_points(rng, 40), b = random_points(rng, 40);
  CHECK(chamfer(a, b) == doctest::Approx(2 * asd(a, b)).epsilon(1e-14));
}

TEST_CASE("mesh comparison against itself") {
  const TubeMesh m = semicircle_tube(40.0, 10.0);
  const MetricReport r = compare_meshes(m, m, CompareOptions{1.0, false});
  CHECK(r.dice == 1.0);
  CHECK(r.iou == 1.0);
  CHECK(r.hausdorff == 0.0);
  CHECK(r.asd == 0.0);
  CHECK(r.chamfer == 0.0);
}

TEST_CASE("radius profile of an inflated tube") {
  const TubeMesh ref = generate_arch(ArchParams{});
  Points n = ref.nodes();
  for (int r = 0; r < ref.n_rings(); ++r) {
    const Vec3 c = ref.ring_centroid(r);
    for (int j = 0; j < ref.pts_per_ring(); ++j) {
      const Eigen::Index i = ref.node_index(r, j);
      n.row(i) = (c + 1.1 * (row(n, i) - c)).transpose();
    }
  }
  const auto same = radius_error_profile(ref, ref);
  REQUIRE(same.size() == 12);
  for (const auto& s : same) {
    CHECK(s.valid);
    CHECK(s.rel_err == doctest::Approx(0.0).scale(1.0));
  }
  for (const auto& s : radius_error_profile(ref.with_nodes(n), ref)) {
    CHECK(s.valid);
    CHECK(std::abs(s.rel_err - 0.10) < 0.005);
  }
}

TEST_CASE("semicircle landmarks, dimensions and tortuosity") {
  const double r = 50.0;
  Points p(2001, 3);
  for (int i = 0; i <= 2000; ++i) {
    const double phi = kPi * i / 2000;
    p.row(i) << -r * std::cos(phi), 0, r * std::sin(phi);
  }
  const CenterlineCurve cl(p);
  const ArchLandmarks lm = landmarks_at(cl, 0.0, cl.length() / 2, cl.length());
  const ArchDimensions d = arch_dimensions(lm);
  CHECK(std::abs(d.width - 2 * r) < 1e-3 * r);
  CHECK(std::abs(d.height - r) < 1e-3 * r);
  CHECK(std::abs(tortuosity(lm) - (1 - 2 / kPi)) < 1e-3);

  // Detection on the same curve: apex on top, B and C symmetric.
  const ArchLandmarks det = detect_landmarks(cl, Vec3::UnitZ(), 30.0);
  CHECK(det.T.z() == doctest::Approx(r).epsilon(1e-6));
  CHECK(det.B.z() == doctest::Approx(det.C.z()).epsilon(1e-6));
  CHECK(det.B.x() == doctest::Approx(-det.C.x()).epsilon(1e-6));
  CHECK(det.sA < det.sB);
  CHECK(det.sB < det.sT);
  CHECK(det.sT < det.sC);
  CHECK(det.sC < det.sD);
}

TEST_CASE("straight vertical tube has no apex") {
  try {
    detect_landmarks(straight_tube(10.0));
    FAIL("expected NoApex");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoApex);
  }
}

TEST_CASE("tortuosity grows when the arch is elongated at fixed width") {
  ArchParams p;
  p.noise_amplitude = 0;
  double prev = -1.0;
  for (double asc : {20.0, 40.0, 60.0}) {
    p.ascending_length = asc;
    p.descending_length = asc;
    const TubeMesh m = generate_arch(p);
    const double t = vessel_features(m, m).tortuosity;
    CHECK(t > prev);
    prev = t;
  }
}

TEST_CASE("tortuosity is scale and rigid invariant") {
  Points p(501, 3);
  for (int i = 0; i <= 500; ++i) p.row(i) << -30 * std::cos(kPi * i / 500), 0, 30 * std::sin(kPi * i / 500) + 0.01 * i;
  const CenterlineCurve c1(p), c2(Points(2.5 * p));
  const double t1 = tortuosity(landmarks_at(c1, 0.1 * c1.length(), 0.5 * c1.length(), 0.8 * c1.length()));
  const double t2 = tortuosity(landmarks_at(c2, 0.1 * c2.length(), 0.5 * c2.length(), 0.8 * c2.length()));
  CHECK(t1 == doctest::Approx(t2).epsilon(1e-9));

  const TubeMesh m = generate_arch(ArchParams{});
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.2, Vec3::UnitY()).toRotationMatrix();
  const TubeMesh moved = transformed(m, rot, Vec3(3, 4, 5));
  const double a = vessel_features(m, m).tortuosity;
  const double b = tortuosity(detect_landmarks(moved, rot * Vec3::UnitZ()));
  CHECK(a == doctest::Approx(b).epsilon(1e-3));
}

TEST_CASE("wall motion") {
  const TubeMesh m = semicircle_tube(40.0, 10.0);
  for (double v : wall_motion(m, m)) CHECK(v == 0.0);
  const TubeMesh moved = transformed(m, Eigen::Matrix3d::Identity(), Vec3(3, 4, 0));
  for (double v : wall_motion(moved, m)) CHECK(v == doctest::Approx(5.0));
  // Rotation about the centroid is reported as motion; nothing is re-aligned.
  const Vec3 c = centroid(m.nodes());
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.1, Vec3::UnitZ()).toRotationMatrix();
  const TubeMesh rotated = transformed(m, rot, c - rot * c);
  double mx = 0.0;
  for (double v : wall_motion(rotated, m)) mx = std::max(mx, v);
  CHECK(mx > 1.0);
  CHECK_THROWS_AS(wall_motion(straight_tube(10.0), straight_tube(10.0, 30)), Error);
}

TEST_CASE("radial strain and length change") {
  const TubeMesh m0 = generate_arch(ArchParams{});
  CHECK(ascending_radial_strain(m0, m0) == 0.0);
  CHECK(centerline_length_change(m0, m0) == 0.0);

  MotionProfile inflate;
  inflate.radial = {1.0, 1.05};
  inflate.axial = {1.0, 1.0};
  const auto seq = animate(m0, inflate);
  CHECK(ascending_radial_strain(seq[1], m0) == doctest::Approx(0.05).epsilon(1e-9));

  MotionProfile stretch;
  stretch.radial = {1.0, 1.0};
  stretch.axial = {1.0, 1.2};
  CHECK(ascending_radial_strain(animate(m0, stretch)[1], m0) <= 1e-6);

  const Vec3 c = centroid(m0.nodes());
  const TubeMesh scaled = transformed(m0, Eigen::Matrix3d::Identity(), c - 1.02 * c, 1.02);
  CHECK(std::abs(centerline_length_change(scaled, m0) - 0.02) < 1e-3);

  // Same rigid motion on both frames leaves the strain alone.
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.3, Vec3(1, 0, 1).normalized()).toRotationMatrix();
  const double moved = radial_strain(transformed(seq[1], rot, Vec3(1, 2, 3)), transformed(m0, rot, Vec3(1, 2, 3)), 0.0, 60.0);
  CHECK(moved == doctest::Approx(radial_strain(seq[1], m0, 0.0, 60.0)).epsilon(1e-9));

  try {
    radial_strain(seq[1], m0, 5000.0, 6000.0);
    FAIL("expected EmptyRegion");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyRegion);
  }
}

TEST_CASE("station slices every 7.5 mm") {
  CHECK(station_positions(75.0).size() == 11);
  CHECK(station_positions(5.0).size() == 2);
  const auto st = station_slices(semicircle_tube(40.0, 8.0));
  CHECK(st.size() >= 10);
  for (std::size_t i = 1; i < st.size(); ++i) CHECK(st[i].arclength > st[i - 1].arclength);
}
