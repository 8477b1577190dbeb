#include <doctest.h>

#include <random>

#include "archfit/error.hpp"
#include "archfit/ssm.hpp"
#include "test_support.hpp"

using namespace archfit;
using namespace archfit::testing;

TEST_CASE("identical shapes carry no variance") {
  const TubeMesh m = straight_tube(10.0, 6, 10);
  try {
    build_model({m, m, m});
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RankDeficient);
  }
}

TEST_CASE("two-shape model: one mode along the difference") {
  const TubeMesh a = straight_tube(10.0, 6, 10);
  const TubeMesh b = straight_tube(11.0, 6, 10);
  BuildOptions o;
  o.n_modes = 3;
  const ShapeModel m = build_model({a, b}, o);
  REQUIRE(m.n_modes() == 1);
  CHECK(m.truncated_modes == 2);
  const Eigen::VectorXd diff = flatten(b.nodes()) - flatten(a.nodes());
  const Eigen::VectorXd mode = flatten(m.modes[0]);
  CHECK(std::abs(std::abs(mode.dot(diff.normalized())) - 1.0) < 1e-12);
  // Sample deviation of the two scores +-|d|/2 with an (n - 1) denominator.
  CHECK(m.sigmas[0] == doctest::Approx(diff.norm() / std::sqrt(2.0)).epsilon(1e-12));
  CHECK((m.mean - 0.5 * (a.nodes() + b.nodes())).norm() < 1e-12);
  CHECK(m.explained_variance_ratio[0] == doctest::Approx(1.0));
}

TEST_CASE("mixed topologies are rejected") {
  try {
    build_model({straight_tube(10.0, 6, 10), straight_tube(10.0, 7, 10)});
    FAIL("expected TopologyMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TopologyMismatch);
  }
}

TEST_CASE("reconstruction examples") {
  ShapeModel m;
  m.n_rings = 2;
  m.pts_per_ring = 3;
  m.cells = tube_cells(2, 3);
  m.mean = Points::Zero(6, 3);
  Points u = Points::Zero(6, 3);
  u(0, 0) = 1.0;
  m.modes = {u};
  m.sigmas = {2.0};
  m.explained_variance_ratio = {1.0};
  Eigen::VectorXd a(1);
  a << 0.5;
  CHECK((reconstruct(m, a, 1.0) - (m.mean + u)).norm() == 0.0);
  CHECK(reconstruct(m, a, 0.0) == m.mean);
  CHECK(reconstruct(m, Eigen::VectorXd::Zero(1), 1.0) == m.mean);
}

TEST_CASE("cohort model invariants") {
  const std::vector<TubeMesh> cohort = generate_cohort(7, 12);
  BuildOptions o;
  o.n_modes = 11;
  const ShapeModel m = build_model(cohort, o);
  REQUIRE(m.n_modes() == 11);
  double total = 0.0;
  for (int i = 0; i < m.n_modes(); ++i) {
    total += m.explained_variance_ratio[static_cast<std::size_t>(i)];
    CHECK(m.sigmas[static_cast<std::size_t>(i)] > 0);
    if (i > 0) CHECK(m.sigmas[static_cast<std::size_t>(i)] <= m.sigmas[static_cast<std::size_t>(i - 1)]);
    for (int j = 0; j < m.n_modes(); ++j) {
      const double d = flatten(m.modes[static_cast<std::size_t>(i)]).dot(flatten(m.modes[static_cast<std::size_t>(j)]));
      CHECK(std::abs(d - (i == j ? 1.0 : 0.0)) < 1e-8);
    }
  }
  CHECK(total <= 1.0 + 1e-9);

  // Full rank: every training shape round-trips.
  for (const TubeMesh& s : cohort) {
    const Points back = reconstruct(m, project(m, s.nodes()));
    const double rms = std::sqrt((back - s.nodes()).squaredNorm() / static_cast<double>(s.n_nodes()));
    CHECK(rms < 1e-6);
  }

  // Linearity in the amplitudes.
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  Eigen::VectorXd a1(11), a2(11);
  for (int i = 0; i < 11; ++i) a1[i] = n01(rng), a2[i] = n01(rng);
  const Points lhs = reconstruct(m, a1 + a2) - m.mean;
  const Points rhs = (reconstruct(m, a1) - m.mean) + (reconstruct(m, a2) - m.mean);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("shape sampling") {
  const ShapeModel m = cohort_model(7, 12, 5);
  CHECK(sample_shape(m, 3, 0.0).nodes() == m.mean);
  CHECK(sample_shape(m, 3, 1.58).nodes() == sample_shape(m, 3, 1.58).nodes());
  CHECK(sample_shape(m, 3, 1.58).nodes() != sample_shape(m, 4, 1.58).nodes());
}

TEST_CASE("rigid alignment recovers a rotated copy") {
  const TubeMesh m = semicircle_tube(40.0, 8.0, 10, 12);
  const Eigen::Matrix3d rot = Eigen::AngleAxisd(0.4, Vec3(0, 1, 1).normalized()).toRotationMatrix();
  const TubeMesh moved = transformed(m, rot, Vec3(1, 2, 3));
  const auto [r, t] = kabsch(moved.nodes(), m.nodes());
  Points back = moved.nodes() * r.transpose();
  back.rowwise() += t.transpose();
  CHECK((back - m.nodes()).cwiseAbs().maxCoeff() < 1e-9);
}
