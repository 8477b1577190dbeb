#include "archfit/slice_planner.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "archfit/error.hpp"
#include "archfit/parallel.hpp"
#include "archfit/slicing.hpp"

namespace archfit {

CandidateStations candidate_stations(const TubeMesh& mesh, double outlet_margin) {
  CandidateStations out;
  out.centerline = centerline_from_mesh(mesh, kMeshCenterlinePoints);
  const double total = out.centerline.length();
  out.usable_length = total - outlet_margin;
  const double needed = kFirstStationMm + (kCandidateCount - 1) * kMinStationSpacingMm;
  if (!(out.usable_length > needed)) {
    throw Error(ErrorCode::TooShort, fmt::format("usable centerline length {:.1f} mm does not exceed {:.1f} mm",
                                                 out.usable_length, needed));
  }
  out.spacing = station_spacing(out.usable_length);
  // Keep end stations strictly inside the tube so their slices close.
  const double lo = 1e-3, hi = total - 1e-3;
  for (int i = 0; i < kCandidateCount; ++i) {
    const double s = std::clamp(kFirstStationMm + i * out.spacing, lo, hi);
    out.arclengths.push_back(s);
    out.planes.push_back(Plane::make(out.centerline.point_at(s), out.centerline.tangent_at(s)));
  }
  return out;
}

std::vector<Plane> candidate_planes(const TubeMesh& mesh) { return candidate_stations(mesh).planes; }

CenterlineCurve surrogate_centerline(const std::vector<SliceContour>& contours, int n_points) {
  if (contours.size() < 2) throw Error(ErrorCode::TooFewSlices, "surrogate centerline needs at least 2 contours");
  if (n_points < 2) throw Error(ErrorCode::InvalidArgument, "centerline needs at least 2 samples");
  const Vec3 p0 = loop_centroid(contours.front().points);
  const Vec3 p1 = loop_centroid(contours.back().points);
  const Vec3 chord = p1 - p0;
  const double len = chord.norm();
  if (len < 1e-9) throw Error(ErrorCode::CoincidentCenters, "first and last contour centroids coincide");
  const Vec3 u = chord / len;
  auto perpendicular = [&](const Vec3& d) { return Vec3(d - d.dot(u) * u); };
  Vec3 bulge = perpendicular(contours.front().plane.normal - contours.back().plane.normal);
  if (bulge.norm() < 1e-6) bulge = perpendicular(Vec3::UnitZ());
  if (bulge.norm() < 1e-6) bulge = perpendicular(Vec3::UnitX());
  bulge.normalize();
  const Vec3 mid = 0.5 * (p0 + p1);
  const double rho = 0.5 * len;
  Points pts(n_points, 3);
  for (int i = 0; i < n_points; ++i) {
    const double t = std::numbers::pi * i / (n_points - 1);
    pts.row(i) = (mid - rho * std::cos(t) * u + rho * std::sin(t) * bulge).transpose();
  }
  pts.row(0) = p0.transpose();
  pts.row(n_points - 1) = p1.transpose();
  return CenterlineCurve(std::move(pts));
}

// ---------------------------------------------------------------------------------------------

PlannerSubject make_planner_subject(std::string name, const TubeMesh& truth, const SliceExtraction& extraction) {
  PlannerSubject s;
  s.name = std::move(name);
  s.truth = truth;
  const CandidateStations st = candidate_stations(truth);
  std::vector<int> labels(kCandidateCount);
  for (int i = 0; i < kCandidateCount; ++i) labels[static_cast<std::size_t>(i)] = i + 1;
  s.candidates = extract_slice_set({truth}, st.planes, extraction, labels).frames.front();
  return s;
}

TubeMesh sample_plannable_shape(const ShapeModel& model, std::uint64_t seed, double sigma_scale, int* redraws) {
  SliceExtraction clean;
  clean.noise_sigma = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const TubeMesh m = sample_shape(model, k == 0 ? seed : seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k), sigma_scale);
    try {
      m.validate();
      make_planner_subject("probe", m, clean);
      if (redraws) *redraws = k;
      return m;
    } catch (const Error& e) {
      spdlog::debug("shape sample {} redrawn: {}", k, e.what());
    }
  }
  throw Error(ErrorCode::TooShort, fmt::format("no plannable shape in 101 draws from seed {}", seed));
}

namespace {

std::vector<int> sorted_unique(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

std::vector<int> full_pool(const PlannerConfig& config) {
  std::vector<int> pool = config.pool;
  if (pool.empty()) {
    for (int i = 1; i <= kCandidateCount; ++i) pool.push_back(i);
  }
  pool = sorted_unique(pool);
  for (int s : pool) {
    if (s < 1 || s > kCandidateCount) throw Error(ErrorCode::Config, fmt::format("candidate station {} outside 1..12", s));
  }
  for (int s : config.start) {
    if (!std::binary_search(pool.begin(), pool.end(), s)) {
      throw Error(ErrorCode::Config, fmt::format("start station {} is not in the candidate pool", s));
    }
  }
  if (sorted_unique(config.start).size() != config.start.size() || config.start.size() < 2) {
    throw Error(ErrorCode::Config, "start set needs at least 2 distinct stations");
  }
  return pool;
}

// Unselected pool members offered at a given (1-based) greedy iteration.
std::vector<int> offered(const std::vector<int>& pool, const std::vector<int>& selected, int iteration,
                         const PlannerConfig& config) {
  std::vector<int> out;
  for (int s : pool) {
    if (std::find(selected.begin(), selected.end(), s) != selected.end()) continue;
    if (config.delay_station_one && s == 1 && iteration == 1) continue;
    out.push_back(s);
  }
  return out;
}

std::vector<int> with(std::vector<int> v, int s) {
  v.push_back(s);
  return v;
}

int argmin_lowest(const std::vector<double>& v) {
  int best = -1;
  for (int i = 0; i < static_cast<int>(v.size()); ++i) {
    if (best < 0 || v[static_cast<std::size_t>(i)] < v[static_cast<std::size_t>(best)]) best = i;
  }
  return best;
}

}  // namespace

SubsetScore evaluate_subset(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                            const std::vector<int>& stations, const PlannerConfig& config) {
  if (cohort.empty()) throw Error(ErrorCode::InvalidArgument, "planner cohort is empty");
  SubsetScore out;
  out.stations = sorted_unique(stations);
  const std::size_t n = cohort.size();
  out.per_subject.assign(n, MetricReport{});
  std::vector<char> ok(n, 0);
  parallel_for(static_cast<int>(n), config.jobs, [&](int i) {
    const PlannerSubject& subj = cohort[static_cast<std::size_t>(i)];
    std::vector<SliceContour> contours;
    for (int s : out.stations) contours.push_back(subj.candidates.at(static_cast<std::size_t>(s - 1)));
    try {
      const FrameFit fit = fit_frame0(context, contours);
      CompareOptions opts;
      opts.voxel_spacing = config.voxel_spacing;
      out.per_subject[static_cast<std::size_t>(i)] = compare_meshes(fit.mesh, subj.truth, opts);
      ok[static_cast<std::size_t>(i)] = 1;
    } catch (const Error& e) {
      spdlog::warn("subject {} with stations [{}] failed: {}", subj.name, fmt::join(out.stations, " "), e.what());
    }
  });
  double rad_sum = 0.0;
  int rad_n = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.subject_ok.push_back(ok[i] != 0);
    if (!ok[i]) {
      ++out.failed;
      continue;
    }
    const MetricReport& r = out.per_subject[i];
    ++out.available;
    out.dice += r.dice;
    out.iou += r.iou;
    out.hausdorff += r.hausdorff;
    out.chamfer += r.chamfer;
    out.asd += r.asd;
    const double rel = mean_abs_relative_error(r.radius_profile);
    if (std::isfinite(rel)) {
      rad_sum += rel;
      ++rad_n;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (out.available == 0) {
    out.dice = out.iou = out.hausdorff = out.chamfer = out.asd = nan;
  } else {
    const double a = out.available;
    out.dice /= a;
    out.iou /= a;
    out.hausdorff /= a;
    out.chamfer /= a;
    out.asd /= a;
  }
  out.radius_abs_rel = rad_n ? rad_sum / rad_n : nan;
  return out;
}

std::vector<double> combined_errors(const std::vector<SubsetScore>& candidates) {
  const std::size_t n = candidates.size();
  std::vector<std::array<double, 4>> err(n);
  for (std::size_t i = 0; i < n; ++i) {
    const SubsetScore& s = candidates[i];
    err[i] = {1.0 - s.dice, 1.0 - s.iou, s.hausdorff, s.chamfer};
  }
  std::vector<double> out(n, 0.0);
  for (int m = 0; m < 4; ++m) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = 0; i < n; ++i) {
      if (candidates[i].available == 0) continue;
      lo = std::min(lo, err[i][static_cast<std::size_t>(m)]);
      hi = std::max(hi, err[i][static_cast<std::size_t>(m)]);
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (candidates[i].available == 0) continue;
      out[i] += hi > lo ? (err[i][static_cast<std::size_t>(m)] - lo) / (hi - lo) / 4.0 : 0.0;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (candidates[i].available == 0) out[i] = std::numeric_limits<double>::infinity();
  }
  return out;
}

SlicePlan greedy_select(const FitContext& context, const std::vector<PlannerSubject>& cohort, const PlannerConfig& config) {
  const std::vector<int> pool = full_pool(config);
  SlicePlan plan;
  plan.selected = config.start;
  plan.path.push_back(evaluate_subset(context, cohort, plan.selected, config));
  int cells = static_cast<int>(cohort.size()), failures = plan.path.back().failed;
  const int limit = std::min<int>(config.max_slices, static_cast<int>(pool.size()));
  for (int iteration = 1; static_cast<int>(plan.selected.size()) < limit; ++iteration) {
    const std::vector<int> cands = offered(pool, plan.selected, iteration, config);
    if (cands.empty()) break;
    std::vector<SubsetScore> scores;
    for (int c : cands) {
      scores.push_back(evaluate_subset(context, cohort, with(plan.selected, c), config));
      cells += static_cast<int>(cohort.size());
      failures += scores.back().failed;
    }
    const std::vector<double> combined = combined_errors(scores);
    for (std::size_t i = 0; i < cands.size(); ++i) {
      const SubsetScore& s = scores[i];
      plan.scores.push_back({iteration, static_cast<int>(plan.selected.size()) + 1, cands[i], s.dice, s.iou, s.hausdorff,
                             s.chamfer, combined[i], s.available});
    }
    const int best = argmin_lowest(combined);
    if (!std::isfinite(combined[static_cast<std::size_t>(best)])) {
      throw Error(ErrorCode::SliceFailure, fmt::format("every candidate failed for every subject at iteration {}", iteration));
    }
    plan.selected.push_back(cands[static_cast<std::size_t>(best)]);
    plan.path.push_back(scores[static_cast<std::size_t>(best)]);
    spdlog::info("greedy iteration {}: station {} (dice {:.4f}, chamfer {:.3f} mm)", iteration,
                 cands[static_cast<std::size_t>(best)], scores[static_cast<std::size_t>(best)].dice,
                 scores[static_cast<std::size_t>(best)].chamfer);
  }
  plan.failure_fraction = cells ? static_cast<double>(failures) / cells : 0.0;
  if (plan.failure_fraction > config.max_failure_fraction) {
    throw Error(ErrorCode::SliceFailure, fmt::format("{:.0f}% of planner fits failed", 100.0 * plan.failure_fraction));
  }
  return plan;
}

std::vector<ExhaustiveStep> exhaustive_path_oracle(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                                                   const std::vector<int>& greedy_order, const PlannerConfig& config) {
  const std::vector<int> pool = full_pool(config);
  if (pool.size() > 8) throw Error(ErrorCode::Config, "exhaustive oracle is limited to 8 candidates");
  std::vector<ExhaustiveStep> out;
  const std::size_t n0 = config.start.size();
  for (std::size_t step = n0; step < greedy_order.size(); ++step) {
    const std::vector<int> prefix(greedy_order.begin(), greedy_order.begin() + static_cast<std::ptrdiff_t>(step));
    const int iteration = static_cast<int>(step - n0) + 1;
    ExhaustiveStep es;
    es.n_slices = static_cast<int>(step) + 1;
    // Every subset of this size that extends the prefix, each fitted from scratch.
    for (int s : pool) {
      if (std::find(prefix.begin(), prefix.end(), s) != prefix.end()) continue;
      if (config.delay_station_one && s == 1 && iteration == 1) continue;
      es.candidates.push_back(s);
    }
    std::vector<SubsetScore> scores;
    for (int c : es.candidates) scores.push_back(evaluate_subset(context, cohort, with(prefix, c), config));
    es.combined = combined_errors(scores);
    es.best_candidate = es.candidates.at(static_cast<std::size_t>(argmin_lowest(es.combined)));
    out.push_back(std::move(es));
  }
  return out;
}

std::vector<ExhaustiveBest> exhaustive_subsets(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                                               const PlannerConfig& config) {
  const std::vector<int> pool = full_pool(config);
  if (pool.size() > 8) throw Error(ErrorCode::Config, "exhaustive search is limited to 8 candidates");
  std::vector<int> free;
  for (int s : pool) {
    if (std::find(config.start.begin(), config.start.end(), s) == config.start.end()) free.push_back(s);
  }
  const int nf = static_cast<int>(free.size());
  std::vector<ExhaustiveBest> out;
  for (int extra = 0; extra <= nf && static_cast<int>(config.start.size()) + extra <= config.max_slices; ++extra) {
    std::vector<std::vector<int>> subsets;
    for (unsigned mask = 0; mask < (1u << nf); ++mask) {
      if (std::popcount(mask) != extra) continue;
      std::vector<int> s = config.start;
      for (int b = 0; b < nf; ++b)
        if (mask & (1u << b)) s.push_back(free[static_cast<std::size_t>(b)]);
      subsets.push_back(sorted_unique(s));
    }
    std::vector<SubsetScore> scores;
    for (const auto& s : subsets) scores.push_back(evaluate_subset(context, cohort, s, config));
    const std::vector<double> combined = combined_errors(scores);
    const int best = argmin_lowest(combined);
    out.push_back({static_cast<int>(config.start.size()) + extra, subsets[static_cast<std::size_t>(best)],
                   scores[static_cast<std::size_t>(best)], combined[static_cast<std::size_t>(best)]});
  }
  return out;
}

std::string score_csv_header() {
  return "iteration,n_slices,candidate,dice,iou,hausdorff_mm,chamfer_mm,combined_error,available,selected\n";
}

std::string score_csv(const SlicePlan& plan) {
  std::string out = score_csv_header();
  for (const ScoreRow& r : plan.scores) {
    const std::size_t idx = static_cast<std::size_t>(r.n_slices) - 1;
    const bool chosen = idx < plan.selected.size() && plan.selected[idx] == r.candidate;
    out += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{},{}\n", r.iteration, r.n_slices, r.candidate, r.dice,
                       r.iou, r.hausdorff, r.chamfer, r.combined_error, r.available, chosen ? 1 : 0);
  }
  return out;
}

}  // namespace archfit
