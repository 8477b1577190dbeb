#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "archfit/fitting.hpp"
#include "archfit/io.hpp"
#include "archfit/slice_planner.hpp"

namespace archfit {

struct SynthSettings {
  int count = 30;
  // "parametric": generator draws; "model": SSM samples at sigma_scale (needs a model file).
  std::string source = "parametric";
  double sigma_scale = 1.58;
  int n_frames = 1;
  double peak_radial = 1.0;
  double peak_axial = 1.0;
  int peak_frame = 12;
  double noise_sigma = 0.5;
  int points_per_contour = kContourPoints;
  // Fixed generator fields (arch_radius, taper, ...) replacing the sampled values on every subject.
  std::map<std::string, double> arch;

  // Sampled parameters with the overrides applied.
  ArchParams apply(ArchParams p) const;
};

struct SsmSettings {
  int n_modes = kDefaultModes;
  bool rigid_align = false;
};

struct FitSettings {
  FitConfig config;
  int frames = -1;            // -1: every frame in the contours file
  std::vector<int> stations;  // empty: every contour in the file
};

struct PlanSettings {
  PlannerConfig config;
  bool exhaustive = false;
  int subjects = -1;  // -1: whole cohort
};

struct MetricsSettings {
  double voxel_spacing = kDefaultVoxelSpacing;
  bool radius_profile = true;
  Vec3 up = Vec3::UnitZ();
};

/// Everything a CLI run reads. Parsing rejects unknown keys anywhere in the document.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  std::string log_level = "info";
  int jobs = 1;
  SynthSettings synth;
  SsmSettings ssm;
  FitSettings fit;
  PlanSettings plan;
  MetricsSettings metrics;

  // Throws Error(Config) naming the offending key or value.
  void validate() const;
};

RunConfig config_from_json(const io::Json& doc);
io::Json config_to_json(const RunConfig& config);

}  // namespace archfit
