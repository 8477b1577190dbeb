#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "archfit/config.hpp"
#include "archfit/error.hpp"
#include "archfit/io.hpp"
#include "commands.hpp"

namespace {

using namespace archfit;
namespace cli = archfit::cli;

constexpr const char* kOutputEnv = "ARCHFIT_OUTPUT_DIR";

template <class T>
void override_if(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

struct GlobalFlags {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> output_dir;
  std::optional<std::string> log_level;
};

// Config file, then environment default for the output directory, then flags.
RunConfig load_config(const GlobalFlags& g) {
  RunConfig c;
  bool output_from_file = false;
  if (g.config) {
    const io::Json doc = io::read_json(*g.config);
    c = config_from_json(doc);
    output_from_file = doc.contains("output_dir");
  }
  if (!output_from_file) {
    if (const char* env = std::getenv(kOutputEnv); env && *env) c.output_dir = env;
  }
  override_if(g.seed, c.seed);
  override_if(g.jobs, c.jobs);
  override_if(g.output_dir, c.output_dir);
  override_if(g.log_level, c.log_level);
  c.fit.config.seed = c.seed;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  spdlog::set_default_logger(spdlog::stderr_color_st("archfit"));
  spdlog::set_pattern("[%l] %v");

  CLI::App app{"Statistical shape model fitting of aortic arches from sparse contours"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", io::tool_version());

  GlobalFlags g;
  app.add_option("-c,--config", g.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Root seed");
  app.add_option("-j,--jobs", g.jobs, "Worker threads");
  app.add_option("-o,--output-dir", g.output_dir, std::string("Output directory (default: $") + kOutputEnv + " or ./out)");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic cohort with contours at the 12 candidate stations");
  std::optional<int> s_count, s_frames, s_peak_frame, s_ppc;
  std::optional<std::string> s_source;
  std::optional<double> s_sigma, s_peak_radial, s_peak_axial, s_noise;
  std::optional<std::string> s_model;
  std::vector<std::string> s_arch;
  synth->add_option("--count", s_count, "Number of subjects");
  synth->add_option("--source", s_source, "parametric or model");
  synth->add_option("--model", s_model, "Shape model for --source model")->check(CLI::ExistingFile);
  synth->add_option("--sigma-scale", s_sigma, "Mode amplitude scale for model samples");
  synth->add_option("--frames", s_frames, "Frames per subject");
  synth->add_option("--peak-radial", s_peak_radial, "Peak radial scale factor");
  synth->add_option("--peak-axial", s_peak_axial, "Peak axial scale factor");
  synth->add_option("--peak-frame", s_peak_frame, "Frame of peak motion");
  synth->add_option("--noise", s_noise, "In-plane contour noise sigma (mm)");
  synth->add_option("--points", s_ppc, "Points per contour");
  synth->add_option("--arch", s_arch, "Fixed generator field, KEY=VALUE (repeatable)");

  // build-ssm
  auto* build = app.add_subcommand("build-ssm", "Build a PCA shape model from a cohort");
  std::string b_cohort;
  std::optional<int> b_modes;
  bool b_align = false;
  build->add_option("--cohort", b_cohort, "cohort.json")->required()->check(CLI::ExistingFile);
  build->add_option("--modes", b_modes, "Number of modes");
  build->add_flag("--rigid-align", b_align, "Kabsch-align shapes before PCA");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit the shape model to one subject's contours");
  std::string f_model, f_contours;
  std::optional<int> f_frames;
  std::optional<std::vector<int>> f_stations;
  std::optional<double> f_lr;
  fit->add_option("--model", f_model, "model.json")->required()->check(CLI::ExistingFile);
  fit->add_option("--contours", f_contours, "Contours file")->required()->check(CLI::ExistingFile);
  fit->add_option("--frames", f_frames, "Fit only the first N frames");
  fit->add_option("--stations", f_stations, "Station labels to use")->delimiter(',');
  fit->add_option("--learning-rate", f_lr, "Adam learning rate");

  // plan
  auto* plan = app.add_subcommand("plan", "Greedy slice-position study over a cohort");
  std::string p_model, p_cohort;
  std::optional<int> p_max, p_subjects;
  std::optional<std::vector<int>> p_pool;
  bool p_exhaustive = false, p_no_svg = false;
  plan->add_option("--model", p_model, "model.json")->required()->check(CLI::ExistingFile);
  plan->add_option("--cohort", p_cohort, "cohort.json")->required()->check(CLI::ExistingFile);
  plan->add_option("--max-slices", p_max, "Stop after this many slices");
  plan->add_option("--subjects", p_subjects, "Use the first N subjects");
  plan->add_option("--pool", p_pool, "Candidate stations")->delimiter(',');
  plan->add_flag("--exhaustive", p_exhaustive, "Also run the exhaustive-subset oracle");
  plan->add_flag("--no-svg", p_no_svg, "Skip the heatmaps");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compare fitted meshes to references and extract vessel features");
  std::vector<std::string> m_fits, m_refs;
  std::optional<std::string> m_mask;
  std::string m_subject = "subject";
  std::optional<double> m_spacing;
  bool m_no_radius = false;
  metrics->add_option("--fit", m_fits, "Fitted mesh, one per frame in order")->required()->check(CLI::ExistingFile);
  metrics->add_option("--ref", m_refs, "Reference mesh (once, or once per --fit)")->check(CLI::ExistingFile);
  metrics->add_option("--ref-mask", m_mask, "Reference voxel mask")->check(CLI::ExistingFile);
  metrics->add_option("--subject", m_subject, "Subject label in the CSVs");
  metrics->add_option("--voxel-spacing", m_spacing, "Voxel spacing (mm)");
  metrics->add_flag("--no-radius", m_no_radius, "Skip the radius profile");

  // report
  auto* report = app.add_subcommand("report", "Render SVG figures from earlier outputs");
  std::optional<std::string> r_plan, r_fit, r_radius;
  report->add_option("--plan", r_plan, "Output directory of a plan run")->check(CLI::ExistingDirectory);
  report->add_option("--fit", r_fit, "Output directory of a fit run")->check(CLI::ExistingDirectory);
  report->add_option("--radius", r_radius, "radius.csv from a metrics run")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? cli::kExitOk : cli::kExitConfig;
  }

  try {
    RunConfig config = load_config(g);
    override_if(s_count, config.synth.count);
    override_if(s_source, config.synth.source);
    override_if(s_sigma, config.synth.sigma_scale);
    override_if(s_frames, config.synth.n_frames);
    override_if(s_peak_radial, config.synth.peak_radial);
    override_if(s_peak_axial, config.synth.peak_axial);
    override_if(s_peak_frame, config.synth.peak_frame);
    override_if(s_noise, config.synth.noise_sigma);
    override_if(s_ppc, config.synth.points_per_contour);
    for (const std::string& kv : s_arch) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::Config, "--arch expects KEY=VALUE, got '" + kv + "'");
      try {
        config.synth.arch[kv.substr(0, eq)] = std::stod(kv.substr(eq + 1));
      } catch (const std::logic_error&) {
        throw Error(ErrorCode::Config, "--arch value is not a number: '" + kv + "'");
      }
    }
    override_if(b_modes, config.ssm.n_modes);
    if (b_align) config.ssm.rigid_align = true;
    override_if(f_frames, config.fit.frames);
    override_if(f_stations, config.fit.stations);
    override_if(f_lr, config.fit.config.adam.learning_rate);
    override_if(p_max, config.plan.config.max_slices);
    override_if(p_subjects, config.plan.subjects);
    override_if(p_pool, config.plan.config.pool);
    if (p_exhaustive) config.plan.exhaustive = true;
    override_if(m_spacing, config.metrics.voxel_spacing);
    if (m_no_radius) config.metrics.radius_profile = false;
    config.validate();

    spdlog::set_level(spdlog::level::from_str(config.log_level));
    const cli::fs::path out = config.output_dir;

    if (*synth) {
      cli::SynthArgs a{out, {}};
      if (s_model) a.model = *s_model;
      cli::cmd_synth(config, a);
    } else if (*build) {
      cli::cmd_build_ssm(config, {b_cohort, out});
    } else if (*fit) {
      cli::cmd_fit(config, {f_model, f_contours, out});
    } else if (*plan) {
      cli::cmd_plan(config, {p_model, p_cohort, out, !p_no_svg});
    } else if (*metrics) {
      cli::MetricsArgs a;
      a.fits.assign(m_fits.begin(), m_fits.end());
      a.refs.assign(m_refs.begin(), m_refs.end());
      if (m_mask) a.ref_mask = *m_mask;
      a.subject = m_subject;
      a.out = out;
      cli::cmd_metrics(config, a);
    } else if (*report) {
      cli::ReportArgs a;
      if (r_plan) a.plan_dir = *r_plan;
      if (r_fit) a.fit_dir = *r_fit;
      if (r_radius) a.radius_csv = *r_radius;
      a.out = out;
      cli::cmd_report(config, a);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return cli::exit_code_for(e);
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return cli::kExitData;
  }
  return cli::kExitOk;
}
