#include <doctest.h>

#include <set>

#include "archfit/error.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/slicing.hpp"
#include "archfit/synth.hpp"
#include "archfit/vessel_metrics.hpp"
#include "test_support.hpp"

using namespace archfit;
using namespace archfit::testing;

TEST_CASE("generator parameter validation names the field") {
  ArchParams p;
  p.taper = 0.0;
  try {
    p.validate();
    FAIL("expected InvalidArgument");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
    CHECK(std::string(e.what()).find("taper") != std::string::npos);
  }
  ArchParams tight;
  tight.arch_radius = 15.0;
  tight.inlet_radius = 13.0;
  try {
    generate_arch(tight);
    FAIL("expected SelfIntersection");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SelfIntersection);
  }
}

TEST_CASE("plain semicircle construction") {
  ArchParams p;
  p.ascending_length = 0;
  p.descending_length = 0;
  p.taper = 1.0;
  p.ellipticity = 1.0;
  p.noise_amplitude = 0.0;
  const TubeMesh m = generate_arch(p);
  CHECK_NOTHROW(m.validate());
  for (double r : ring_radii(m)) CHECK(r == doctest::Approx(p.inlet_radius).epsilon(1e-9));
  const CenterlineCurve cl = centerline_from_mesh(m);
  const ArchLandmarks lm = landmarks_at(cl, 0.0, 0.5 * cl.length(), cl.length());
  CHECK(std::abs(tortuosity(lm) - (1 - 2 / kPi)) < 2e-3);
}

TEST_CASE("generator is deterministic and cohorts are valid") {
  CHECK(generate_arch(sample_arch_params(3, 4)).nodes() == generate_arch(sample_arch_params(3, 4)).nodes());
  std::vector<ArchParams> params;
  const auto cohort = generate_cohort(7, 30, &params);
  REQUIRE(cohort.size() == 30);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    CHECK_NOTHROW(cohort[i].validate());
    CHECK_NOTHROW(params[i].validate());
    CHECK(construction_length(params[i]) >= kMinSampledLengthMm);
    CHECK_NOTHROW(candidate_stations(cohort[i]));
  }
}

TEST_CASE("larger construction scale gives larger features") {
  // Regimes ordered young to elderly by index within the sampler's sweep.
  ArchParams small, large;
  small.inlet_radius = 11;
  small.arch_radius = 30;
  small.ascending_length = 40;
  large.inlet_radius = 16.5;
  large.arch_radius = 42;
  large.ascending_length = 60;
  const TubeMesh a = generate_arch(small), b = generate_arch(large);
  const VesselFeatures fa = vessel_features(a, a), fb = vessel_features(b, b);
  CHECK(fb.radius_A > fa.radius_A);
  CHECK(fb.total_length > fa.total_length);
  CHECK(fb.width > fa.width);
  CHECK(fb.height > fa.height);
}

TEST_CASE("animation ground truth") {
  const TubeMesh m = generate_arch(ArchParams{});
  for (const TubeMesh& f : animate(m, MotionProfile::still(4))) CHECK(f.nodes() == m.nodes());
  const MotionProfile prof = MotionProfile::cardiac(40, 1.11, 1.035, 12);
  CHECK(prof.radial[0] == 1.0);
  CHECK(prof.radial[12] == doctest::Approx(1.11));
  const auto seq = animate(m, prof);
  CHECK(seq.size() == 40);
  CHECK(seq[0].nodes() == m.nodes());
  CHECK(std::abs(radial_strain(seq[12], m, 0.0, 1e9) - 0.11) < 0.01);
  CHECK(std::abs(centerline_length_change(seq[12], m) - 0.035) < 0.035 * 0.1);

  MotionProfile bad = prof;
  bad.radial[0] = 1.1;
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("slice extraction") {
  const TubeMesh m = generate_arch(ArchParams{});
  const CandidateStations st = candidate_stations(m);
  SliceExtraction clean;
  clean.noise_sigma = 0.0;
  const std::vector<Plane> six(st.planes.begin(), st.planes.begin() + 6);
  const SliceSet a = extract_slice_set({m}, six, clean);
  REQUIRE(a.n_slices() == 6);
  CHECK(stack_points(a.frames[0]).rows() == 1080);
  for (const auto& c : a.frames[0]) {
    CHECK(c.points.rows() == 180);
    for (Eigen::Index i = 0; i < c.points.rows(); ++i) {
      CHECK(std::abs(c.plane.signed_distance(row(c.points, i))) < 1e-6);
      CHECK(std::sqrt(nearest_brute(m.nodes(), row(c.points, i)).dist2) < 3.0);
    }
  }

  SliceExtraction noisy;
  noisy.noise_sigma = 0.5;
  noisy.seed = 4;
  const SliceSet b = extract_slice_set({m}, st.planes, noisy);
  const SliceSet c = extract_slice_set({m}, st.planes, clean);
  double mean_disp = 0.0;
  int count = 0;
  for (std::size_t s = 0; s < b.frames[0].size(); ++s) {
    for (Eigen::Index i = 0; i < 180; ++i) {
      const Vec3 d = row(b.frames[0][s].points, i) - row(c.frames[0][s].points, i);
      CHECK(std::abs(d.dot(b.frames[0][s].plane.normal)) < 1e-9);
      mean_disp += d.norm();
      ++count;
    }
  }
  mean_disp /= count;
  CHECK(std::abs(mean_disp - 0.5 * std::sqrt(kPi / 2)) < 0.03);
  CHECK(stack_points(extract_slice_set({m}, st.planes, noisy).frames[0]) == stack_points(b.frames[0]));
}

TEST_CASE("candidate stations") {
  const TubeMesh m = generate_arch(ArchParams{});
  const CandidateStations st = candidate_stations(m);
  REQUIRE(st.planes.size() == 12);
  CHECK(st.arclengths[0] == doctest::Approx(25.0));
  CHECK(st.spacing == doctest::Approx((st.usable_length - 25.0) / 11.0));
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(std::abs(st.planes[i].normal.dot(st.centerline.tangent_at(st.arclengths[i]))) > 0.999);
  }
  CHECK(station_spacing(220.0) == doctest::Approx(17.727).epsilon(1e-4));
  CHECK(station_spacing(170.0) == doctest::Approx(13.18).epsilon(1e-3));
  try {
    candidate_stations(straight_tube(10.0));
    FAIL("expected TooShort");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::TooShort);
  }
}

TEST_CASE("surrogate centerline is a half circle on the chord") {
  std::vector<SliceContour> cs(2);
  for (int k = 0; k < 2; ++k) {
    const Vec3 c(k == 0 ? -30.0 : 30.0, 0, 0);
    cs[static_cast<std::size_t>(k)].plane = Plane::make(c, k == 0 ? Vec3(0, 0, 1) : Vec3(0, 0, -1));
    Points p(16, 3);
    for (int j = 0; j < 16; ++j) p.row(j) = (c + 5 * Vec3(std::cos(2 * kPi * j / 16), std::sin(2 * kPi * j / 16), 0)).transpose();
    cs[static_cast<std::size_t>(k)].points = p;
  }
  const CenterlineCurve cl = surrogate_centerline(cs);
  CHECK(cl.size() == 300);
  CHECK(cl.length() == doctest::Approx(kPi * 30).epsilon(1e-3));
  // Bulges along n_first - n_last = +z and stays in the x-z plane.
  const Vec3 top = cl.point_at(cl.length() / 2);
  CHECK(top.z() == doctest::Approx(30.0).epsilon(1e-3));
  for (Eigen::Index i = 0; i < cl.size(); ++i) CHECK(std::abs(cl.points()(i, 1)) < 1e-6);

  cs[1].points = cs[0].points;
  try {
    surrogate_centerline(cs);
    FAIL("expected CoincidentCenters");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CoincidentCenters);
  }
}

TEST_CASE("combined error normalization") {
  std::vector<SubsetScore> s(3);
  s[0].dice = 0.9, s[0].iou = 0.8, s[0].hausdorff = 5, s[0].chamfer = 3;
  s[1].dice = 0.8, s[1].iou = 0.7, s[1].hausdorff = 7, s[1].chamfer = 4;
  s[2].dice = 0.85, s[2].iou = 0.75, s[2].hausdorff = 6, s[2].chamfer = 3.5;
  for (auto& x : s) x.available = 1;
  const auto e = combined_errors(s);
  CHECK(e[0] == doctest::Approx(0.0));
  CHECK(e[1] == doctest::Approx(1.0));
  CHECK(e[2] == doctest::Approx(0.5));
  s[1].available = 0;
  CHECK(std::isinf(combined_errors(s)[1]));
}

TEST_CASE("greedy selection matches an independent recomputation") {
  const ShapeModel model = cohort_model(7, 30);
  FitConfig cfg = study_fit_config();
  cfg.schedule = Schedule{5, 60, 80, 100, 10};
  const FitContext ctx(model, cfg);
  SliceExtraction ex;
  std::vector<PlannerSubject> cohort{make_planner_subject("s0", sample_shape(model, 2001, 1.58), ex)};
  PlannerConfig pc;
  pc.pool = {2, 12, 4, 7, 9};
  pc.max_slices = 4;
  const SlicePlan plan = greedy_select(ctx, cohort, pc);
  REQUIRE(plan.selected.size() == 4);
  CHECK(plan.selected[0] == 2);
  CHECK(plan.selected[1] == 12);
  CHECK(std::set<int>(plan.selected.begin(), plan.selected.end()).size() == 4);
  const auto oracle = exhaustive_path_oracle(ctx, cohort, plan.selected, pc);
  REQUIRE(oracle.size() == 2);
  for (const auto& step : oracle) CHECK(step.best_candidate == plan.selected[static_cast<std::size_t>(step.n_slices - 1)]);
  // Score table: 3 candidates in the first iteration, 2 in the second.
  CHECK(plan.scores.size() == 5);

  PlannerConfig bad = pc;
  bad.start = {2};
  CHECK_THROWS_AS(greedy_select(ctx, cohort, bad), Error);
}
