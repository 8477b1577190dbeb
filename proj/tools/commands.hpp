#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "archfit/config.hpp"

namespace archfit::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumeric = 4;

// Maps a library error to the CLI exit contract.
int exit_code_for(const Error& e);

struct SynthArgs {
  fs::path out;
  std::optional<fs::path> model;  // required when synth.source == "model"
};
// cohort.json, meshes/<name>.json (frame-0 truth), contours/<name>.json (12 stations x n_frames).
void cmd_synth(const RunConfig& config, const SynthArgs& args);

struct BuildArgs {
  fs::path cohort;
  fs::path out;
};
// model.json + variance.csv.
void cmd_build_ssm(const RunConfig& config, const BuildArgs& args);

struct FitArgs {
  fs::path model;
  fs::path contours;
  fs::path out;
};
// frames/frame_NNN.json, centerlines.csv, convergence.csv, final_losses.csv. A non-finite loss
// still writes convergence.csv before the error propagates.
void cmd_fit(const RunConfig& config, const FitArgs& args);

struct PlanArgs {
  fs::path model;
  fs::path cohort;
  fs::path out;
  bool svg = true;
};
// scores.csv, selected.csv, optional heatmaps, exhaustive.csv with plan.exhaustive.
void cmd_plan(const RunConfig& config, const PlanArgs& args);

struct MetricsArgs {
  std::vector<fs::path> fits;  // frames of one subject, in order
  std::vector<fs::path> refs;  // one shared reference or one per fit
  std::optional<fs::path> ref_mask;
  std::string subject = "subject";
  fs::path out;
};
// metrics.csv, radius.csv, features.csv, wall_motion/frame_NNN.json for frames after the first.
void cmd_metrics(const RunConfig& config, const MetricsArgs& args);

struct ReportArgs {
  std::optional<fs::path> plan_dir;
  std::optional<fs::path> fit_dir;
  std::optional<fs::path> radius_csv;
  fs::path out;
};
void cmd_report(const RunConfig& config, const ReportArgs& args);

// Shared CSV writers.
std::string trace_csv(const std::vector<TraceRow>& trace);

// Figure-3 style heatmaps (one per metric) from a score table.
void write_plan_heatmaps(const std::string& score_csv_text, const fs::path& out_dir);

}  // namespace archfit::cli
