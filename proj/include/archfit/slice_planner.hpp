#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "archfit/contours.hpp"
#include "archfit/fitting.hpp"
#include "archfit/geom_metrics.hpp"
#include "archfit/mesh.hpp"
#include "archfit/synth.hpp"

namespace archfit {

inline constexpr int kCandidateCount = 12;
inline constexpr double kFirstStationMm = 25.0;
inline constexpr double kMinStationSpacingMm = 13.0;
inline constexpr double kOutletMarginMm = 10.0;

/// Twelve cross-sections along a mesh centerline: station 1 at 25 mm from the inlet, stations
/// 2..12 evenly spread up to the usable end (total length minus the outlet margin).
struct CandidateStations {
  std::vector<Plane> planes;       // index i holds station i + 1
  std::vector<double> arclengths;  // mm along `centerline`
  double spacing = 0.0;            // mm between stations 2..12
  double usable_length = 0.0;
  CenterlineCurve centerline;
};

// Throws TooShort when usable length <= 25 + 11 x 13 mm.
CandidateStations candidate_stations(const TubeMesh& mesh, double outlet_margin = kOutletMarginMm);
std::vector<Plane> candidate_planes(const TubeMesh& mesh);

// Station spacing for a given usable length.
inline double station_spacing(double usable_length) {
  return (usable_length - kFirstStationMm) / (kCandidateCount - 1);
}

/// Semicircle between the first and last contour centroids (radius = half chord). The arc lies
/// in the plane of the chord and the end-normal difference n_first - n_last and bulges along it;
/// +z is used when that difference is parallel to the chord. Throws CoincidentCenters.
CenterlineCurve surrogate_centerline(const std::vector<SliceContour>& contours, int n_points = kSliceCenterlinePoints);

// ---------------------------------------------------------------------------------------------
// Greedy selection study

/// One cohort member: ground truth and its contours at all 12 candidate stations (frame 0).
struct PlannerSubject {
  std::string name;
  TubeMesh truth;
  std::vector<SliceContour> candidates;  // candidates[i] is station i + 1
};

PlannerSubject make_planner_subject(std::string name, const TubeMesh& truth, const SliceExtraction& extraction);

// SSM sample that can host all twelve candidate stations. Draws that are too short or fail to
// slice are replaced by draws from derived seeds; `redraws` counts the replacements.
TubeMesh sample_plannable_shape(const ShapeModel& model, std::uint64_t seed, double sigma_scale, int* redraws = nullptr);

struct PlannerConfig {
  std::vector<int> start{2, 12};
  int max_slices = kCandidateCount;
  // Station 1 only joins the pool from the second greedy iteration on.
  bool delay_station_one = true;
  std::vector<int> pool;  // candidate stations; empty means 1..12
  double voxel_spacing = kDefaultVoxelSpacing;
  int jobs = 1;
  // Fraction of failed (subject, candidate) fits tolerated before the study aborts.
  double max_failure_fraction = 0.5;
};

/// Cohort means of one slice subset. Errors are (1 - dice, 1 - iou, hd, chamfer).
struct SubsetScore {
  std::vector<int> stations;  // sorted
  double dice = 0.0;
  double iou = 0.0;
  double hausdorff = 0.0;
  double chamfer = 0.0;
  double asd = 0.0;
  double radius_abs_rel = 0.0;  // mean |relative radius error|
  int available = 0;            // subjects that fitted successfully
  int failed = 0;
  std::vector<MetricReport> per_subject;  // empty reports for failures
  std::vector<bool> subject_ok;
};

SubsetScore evaluate_subset(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                            const std::vector<int>& stations, const PlannerConfig& config);

struct ScoreRow {
  int iteration = 0;  // 1-based greedy iteration
  int n_slices = 0;   // subset size including the candidate
  int candidate = 0;
  double dice = 0.0;
  double iou = 0.0;
  double hausdorff = 0.0;
  double chamfer = 0.0;
  double combined_error = 0.0;
  int available = 0;
};

struct SlicePlan {
  std::vector<int> selected;        // selection order, start pair first
  std::vector<ScoreRow> scores;     // every candidate of every iteration
  std::vector<SubsetScore> path;    // metrics of the start set and of each selected subset
  double failure_fraction = 0.0;
};

// Min-max normalized error averaging; returns the combined error per candidate (0 when a metric
// is constant across the candidates).
std::vector<double> combined_errors(const std::vector<SubsetScore>& candidates);

SlicePlan greedy_select(const FitContext& context, const std::vector<PlannerSubject>& cohort, const PlannerConfig& config);

/// Oracle for the greedy path: for each iteration, the best extension of the previous greedy
/// subset found by fitting every candidate subset independently (no reuse of greedy results).
struct ExhaustiveStep {
  int n_slices = 0;
  int best_candidate = 0;
  std::vector<int> candidates;
  std::vector<double> combined;
};
std::vector<ExhaustiveStep> exhaustive_path_oracle(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                                                   const std::vector<int>& greedy_order, const PlannerConfig& config);

// Best subset of each size over every subset of the pool containing the start pair (pool <= 8).
struct ExhaustiveBest {
  int n_slices = 0;
  std::vector<int> stations;
  SubsetScore score;
  double combined_error = 0.0;
};
std::vector<ExhaustiveBest> exhaustive_subsets(const FitContext& context, const std::vector<PlannerSubject>& cohort,
                                               const PlannerConfig& config);

std::string score_csv_header();
std::string score_csv(const SlicePlan& plan);

}  // namespace archfit
