#include "archfit/config.hpp"

#include <set>

#include <fmt/format.h>

#include "archfit/error.hpp"

namespace archfit {

namespace {

using io::Json;

// Reads keys of one JSON object and complains about any key it was never asked for.
class Section {
 public:
  Section(const Json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw Error(ErrorCode::Config, fmt::format("'{}' must be an object", label()));
  }
  ~Section() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : doc_.items()) {
      if (!seen_.count(key)) throw Error(ErrorCode::Config, fmt::format("unknown key '{}'", join(key)));
    }
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const Json::exception&) {
      throw Error(ErrorCode::Config, fmt::format("'{}' has the wrong type", join(key)));
    }
  }

  void get_vec3(const char* key, Vec3& out) {
    std::vector<double> v;
    get(key, v);
    if (!doc_.contains(key)) return;
    if (v.size() != 3) throw Error(ErrorCode::Config, fmt::format("'{}' must have 3 entries", join(key)));
    out = Vec3(v[0], v[1], v[2]);
  }

  bool has(const char* key) {
    seen_.insert(key);
    return doc_.contains(key);
  }
  Section child(const char* key) { return Section(doc_.at(key), join(key)); }

 private:
  std::string join(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string label() const { return path_.empty() ? "<root>" : path_; }

  const Json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::Config, what);
}

const char* const kArchKeys[] = {"arch_radius", "ascending_length", "descending_length", "inlet_radius",
                                 "taper", "ellipticity", "bend_out_of_plane", "noise_amplitude"};

double* arch_field(ArchParams& p, const std::string& key) {
  if (key == "arch_radius") return &p.arch_radius;
  if (key == "ascending_length") return &p.ascending_length;
  if (key == "descending_length") return &p.descending_length;
  if (key == "inlet_radius") return &p.inlet_radius;
  if (key == "taper") return &p.taper;
  if (key == "ellipticity") return &p.ellipticity;
  if (key == "bend_out_of_plane") return &p.bend_out_of_plane;
  if (key == "noise_amplitude") return &p.noise_amplitude;
  return nullptr;
}

}  // namespace

ArchParams SynthSettings::apply(ArchParams p) const {
  for (const auto& [key, value] : arch) {
    double* field = arch_field(p, key);
    if (!field) throw Error(ErrorCode::Config, fmt::format("unknown key 'synth.arch.{}'", key));
    *field = value;
  }
  return p;
}

void RunConfig::validate() const {
  require(jobs >= 1, "jobs must be >= 1");
  require(log_level == "trace" || log_level == "debug" || log_level == "info" || log_level == "warn" || log_level == "error" ||
              log_level == "off",
          "log_level must be one of trace, debug, info, warn, error, off");
  require(synth.count >= 1, "synth.count must be >= 1");
  require(synth.source == "parametric" || synth.source == "model", "synth.source must be 'parametric' or 'model'");
  require(synth.sigma_scale >= 0, "synth.sigma_scale must be >= 0");
  require(synth.n_frames >= 1, "synth.n_frames must be >= 1");
  require(synth.peak_radial > 0 && synth.peak_axial > 0, "synth.peak_radial and synth.peak_axial must be > 0");
  require(synth.noise_sigma >= 0, "synth.noise_sigma must be >= 0");
  require(synth.points_per_contour >= 3, "synth.points_per_contour must be >= 3");
  try {
    synth.apply(ArchParams{}).validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::Config) throw;
    throw Error(ErrorCode::Config, "synth.arch." + std::string(e.what()).substr(to_string(e.code()).size() + 2));
  }
  require(ssm.n_modes >= 1, "ssm.n_modes must be >= 1");
  const FitConfig& f = fit.config;
  try {
    f.schedule.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Config, std::string("fit.schedule: ") + e.what());
  }
  require(f.adam.learning_rate > 0, "fit.learning_rate must be > 0");
  require(f.adam.beta1 >= 0 && f.adam.beta1 < 1 && f.adam.beta2 >= 0 && f.adam.beta2 < 1, "fit.beta1/beta2 must lie in [0, 1)");
  const LossWeights& w = f.weights;
  require(w.mesh >= 0 && w.centerline >= 0 && w.modal >= 0 && w.rot >= 0 && w.warp >= 0, "fit.weights must be >= 0");
  for (int c : f.grid.counts) require(c >= 1, "fit.grid.counts entries must be >= 1");
  require(f.grid.inflate >= 0, "fit.grid.inflate must be >= 0");
  require(f.mesh_loss_subdivision >= 1, "fit.mesh_loss_subdivision must be >= 1");
  require(f.mesh_centerline_points >= 5 && f.slice_centerline_points >= 5, "centerline point counts must be >= 5");
  for (int s : fit.stations) require(s >= 1 && s <= kCandidateCount, "fit.stations entries must lie in 1..12");
  const PlannerConfig& p = plan.config;
  require(p.start.size() >= 2, "plan.start needs at least two stations");
  require(p.max_slices >= static_cast<int>(p.start.size()) && p.max_slices <= kCandidateCount, "plan.max_slices out of range");
  for (int s : p.start) require(s >= 1 && s <= kCandidateCount, "plan.start entries must lie in 1..12");
  for (int s : p.pool) require(s >= 1 && s <= kCandidateCount, "plan.pool entries must lie in 1..12");
  require(p.voxel_spacing > 0, "plan.voxel_spacing must be > 0");
  require(p.max_failure_fraction >= 0 && p.max_failure_fraction <= 1, "plan.max_failure_fraction must lie in [0, 1]");
  require(metrics.voxel_spacing > 0, "metrics.voxel_spacing must be > 0");
  require(metrics.up.norm() > 0, "metrics.up must be non-zero");
}

RunConfig config_from_json(const Json& doc) {
  RunConfig c;
  {
    Section root(doc, "");
    root.get("seed", c.seed);
    root.get("output_dir", c.output_dir);
    root.get("log_level", c.log_level);
    root.get("jobs", c.jobs);
    if (root.has("synth")) {
      Section s = root.child("synth");
      s.get("count", c.synth.count);
      s.get("source", c.synth.source);
      s.get("sigma_scale", c.synth.sigma_scale);
      s.get("n_frames", c.synth.n_frames);
      s.get("peak_radial", c.synth.peak_radial);
      s.get("peak_axial", c.synth.peak_axial);
      s.get("peak_frame", c.synth.peak_frame);
      s.get("noise_sigma", c.synth.noise_sigma);
      s.get("points_per_contour", c.synth.points_per_contour);
      if (s.has("arch")) {
        Section a = s.child("arch");
        for (const char* key : kArchKeys) {
          if (!a.has(key)) continue;
          double v = 0.0;
          a.get(key, v);
          c.synth.arch[key] = v;
        }
      }
    }
    if (root.has("ssm")) {
      Section s = root.child("ssm");
      s.get("n_modes", c.ssm.n_modes);
      s.get("rigid_align", c.ssm.rigid_align);
    }
    if (root.has("fit")) {
      Section s = root.child("fit");
      FitConfig& f = c.fit.config;
      s.get("frames", c.fit.frames);
      s.get("stations", c.fit.stations);
      s.get("learning_rate", f.adam.learning_rate);
      s.get("beta1", f.adam.beta1);
      s.get("beta2", f.adam.beta2);
      s.get("epsilon", f.adam.epsilon);
      s.get("mesh_loss_subdivision", f.mesh_loss_subdivision);
      s.get("mesh_centerline_points", f.mesh_centerline_points);
      s.get("slice_centerline_points", f.slice_centerline_points);
      s.get("center_data", f.center_data);
      s.get("grid_search", f.grid_search);
      s.get("align_initial_offset", f.align_initial_offset);
      if (s.has("schedule")) {
        Section sc = s.child("schedule");
        sc.get("shape_end", f.schedule.shape_end);
        sc.get("pose_end", f.schedule.pose_end);
        sc.get("warp_end", f.schedule.warp_end);
        sc.get("total", f.schedule.total);
        sc.get("sequence_epochs", f.schedule.sequence_epochs);
      }
      if (s.has("weights")) {
        Section w = s.child("weights");
        w.get("mesh", f.weights.mesh);
        w.get("centerline", f.weights.centerline);
        w.get("modal", f.weights.modal);
        w.get("rot", f.weights.rot);
        w.get("warp", f.weights.warp);
      }
      if (s.has("grid")) {
        Section g = s.child("grid");
        g.get("counts", f.grid.counts);
        g.get("inflate", f.grid.inflate);
        g.get("sort_by_extent", f.grid.sort_by_extent);
      }
    }
    if (root.has("plan")) {
      Section s = root.child("plan");
      PlannerConfig& p = c.plan.config;
      s.get("start", p.start);
      s.get("max_slices", p.max_slices);
      s.get("delay_station_one", p.delay_station_one);
      s.get("pool", p.pool);
      s.get("voxel_spacing", p.voxel_spacing);
      s.get("max_failure_fraction", p.max_failure_fraction);
      s.get("exhaustive", c.plan.exhaustive);
      s.get("subjects", c.plan.subjects);
    }
    if (root.has("metrics")) {
      Section s = root.child("metrics");
      s.get("voxel_spacing", c.metrics.voxel_spacing);
      s.get("radius_profile", c.metrics.radius_profile);
      s.get_vec3("up", c.metrics.up);
    }
  }
  c.fit.config.seed = c.seed;
  return c;
}

Json config_to_json(const RunConfig& c) {
  const FitConfig& f = c.fit.config;
  const PlannerConfig& p = c.plan.config;
  return Json{
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"log_level", c.log_level},
      {"jobs", c.jobs},
      {"synth",
       {{"count", c.synth.count},
        {"source", c.synth.source},
        {"sigma_scale", c.synth.sigma_scale},
        {"n_frames", c.synth.n_frames},
        {"peak_radial", c.synth.peak_radial},
        {"peak_axial", c.synth.peak_axial},
        {"peak_frame", c.synth.peak_frame},
        {"noise_sigma", c.synth.noise_sigma},
        {"points_per_contour", c.synth.points_per_contour},
        {"arch", c.synth.arch}}},
      {"ssm", {{"n_modes", c.ssm.n_modes}, {"rigid_align", c.ssm.rigid_align}}},
      {"fit",
       {{"frames", c.fit.frames},
        {"stations", c.fit.stations},
        {"learning_rate", f.adam.learning_rate},
        {"beta1", f.adam.beta1},
        {"beta2", f.adam.beta2},
        {"epsilon", f.adam.epsilon},
        {"mesh_loss_subdivision", f.mesh_loss_subdivision},
        {"mesh_centerline_points", f.mesh_centerline_points},
        {"slice_centerline_points", f.slice_centerline_points},
        {"center_data", f.center_data},
        {"grid_search", f.grid_search},
        {"align_initial_offset", f.align_initial_offset},
        {"schedule",
         {{"shape_end", f.schedule.shape_end},
          {"pose_end", f.schedule.pose_end},
          {"warp_end", f.schedule.warp_end},
          {"total", f.schedule.total},
          {"sequence_epochs", f.schedule.sequence_epochs}}},
        {"weights",
         {{"mesh", f.weights.mesh},
          {"centerline", f.weights.centerline},
          {"modal", f.weights.modal},
          {"rot", f.weights.rot},
          {"warp", f.weights.warp}}},
        {"grid", {{"counts", f.grid.counts}, {"inflate", f.grid.inflate}, {"sort_by_extent", f.grid.sort_by_extent}}}}},
      {"plan",
       {{"start", p.start},
        {"max_slices", p.max_slices},
        {"delay_station_one", p.delay_station_one},
        {"pool", p.pool},
        {"voxel_spacing", p.voxel_spacing},
        {"max_failure_fraction", p.max_failure_fraction},
        {"exhaustive", c.plan.exhaustive},
        {"subjects", c.plan.subjects}}},
      {"metrics",
       {{"voxel_spacing", c.metrics.voxel_spacing},
        {"radius_profile", c.metrics.radius_profile},
        {"up", {c.metrics.up.x(), c.metrics.up.y(), c.metrics.up.z()}}}}};
}

}  // namespace archfit
