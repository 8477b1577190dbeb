#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ranges.h>
#include <spdlog/spdlog.h>

#include "archfit/error.hpp"
#include "archfit/geom_metrics.hpp"
#include "archfit/io.hpp"
#include "archfit/parallel.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/svg.hpp"
#include "archfit/synth.hpp"
#include "archfit/vessel_metrics.hpp"

namespace archfit::cli {

namespace {

using io::Json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string frame_name(int t) { return fmt::format("frame_{:03d}.json", t); }

// Relative path from the cohort file's directory, so cohorts can be moved as a whole.
fs::path resolve(const fs::path& base_file, const std::string& rel) {
  const fs::path p(rel);
  return p.is_absolute() ? p : base_file.parent_path() / p;
}

struct CohortEntry {
  std::string name;
  fs::path mesh;
  fs::path contours;
};

std::vector<CohortEntry> read_cohort(const fs::path& cohort_file) {
  const Json doc = io::read_json(cohort_file);
  std::vector<CohortEntry> out;
  try {
    for (const auto& s : doc.at("subjects")) {
      out.push_back({s.at("name").get<std::string>(), resolve(cohort_file, s.at("mesh").get<std::string>()),
                     resolve(cohort_file, s.at("contours").get<std::string>())});
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::Io, cohort_file.string() + ": " + e.what());
  }
  if (out.empty()) throw Error(ErrorCode::Io, cohort_file.string() + " lists no subjects");
  return out;
}

// Minimal reader for the CSVs this tool writes: header row, comma separated, no quoting.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw Error(ErrorCode::Io, "CSV column '" + name + "' not found");
  }
  double num(std::size_t r, int c) const { return std::stod(rows[r][static_cast<std::size_t>(c)]); }
};

Table parse_csv(const std::string& text) {
  Table t;
  std::istringstream in(text);
  std::string line;
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    return cells;
  };
  if (std::getline(in, line)) t.header = split(line);
  while (std::getline(in, line)) {
    if (!line.empty()) t.rows.push_back(split(line));
  }
  return t;
}

}  // namespace

int exit_code_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Config:
    case ErrorCode::InvalidArgument:
      return kExitConfig;
    case ErrorCode::NonFinite:
      return kExitNumeric;
    default:
      return kExitData;
  }
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::string out = "frame,epoch,stage,loss_mesh,loss_centerline,loss_modal,loss_rot,loss_warp,total,best_total\n";
  for (const auto& r : trace) {
    out += fmt::format("{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", r.frame, r.epoch, r.stage, r.terms.mesh,
                       r.terms.centerline, r.terms.modal, r.terms.rot, r.terms.warp, r.terms.total, r.best_total);
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

void cmd_synth(const RunConfig& config, const SynthArgs& args) {
  const auto t0 = Clock::now();
  const SynthSettings& s = config.synth;
  const std::uint64_t seed = io::stage_seed(config.seed, "synth");
  io::Manifest manifest("synth", config_to_json(config));

  std::vector<TubeMesh> shapes;
  std::vector<Json> provenance;
  if (s.source == "model") {
    if (!args.model) throw Error(ErrorCode::Config, "synth.source = \"model\" needs --model");
    const ShapeModel model = io::model_from_json(io::read_json(*args.model));
    manifest.add_input(*args.model);
    for (int i = 0; i < s.count; ++i) {
      const std::uint64_t si = io::stage_seed(seed, fmt::format("sample:{}", i));
      int redraws = 0;
      shapes.push_back(sample_plannable_shape(model, si, s.sigma_scale, &redraws));
      if (redraws > 0) spdlog::info("sample {} redrawn {} times to fit the candidate stations", i, redraws);
      const Eigen::VectorXd a = project(model, shapes.back().nodes());
      provenance.push_back(Json{{"sample_seed", si}, {"amplitudes", std::vector<double>(a.data(), a.data() + a.size())}});
    }
  } else {
    for (int i = 0; i < s.count; ++i) {
      const ArchParams p = s.apply(sample_arch_params(seed, i));
      shapes.push_back(generate_arch(p));
      provenance.push_back(Json{{"params", io::arch_params_to_json(p)}});
    }
  }

  const MotionProfile motion = s.n_frames == 1 ? MotionProfile::still(1)
                                               : MotionProfile::cardiac(s.n_frames, s.peak_radial, s.peak_axial, s.peak_frame);
  std::vector<Json> entries(shapes.size());
  std::vector<std::string> mesh_files(shapes.size()), contour_files(shapes.size());
  parallel_for(static_cast<int>(shapes.size()), config.jobs, [&](int i) {
    const std::string name = fmt::format("subject_{:03d}", i);
    const TubeMesh& truth = shapes[static_cast<std::size_t>(i)];
    const CandidateStations st = candidate_stations(truth);
    std::vector<int> labels(kCandidateCount);
    for (int k = 0; k < kCandidateCount; ++k) labels[static_cast<std::size_t>(k)] = k + 1;
    SliceExtraction ex;
    ex.points_per_contour = s.points_per_contour;
    ex.noise_sigma = s.noise_sigma;
    ex.seed = io::stage_seed(seed, fmt::format("contours:{}", i));
    const SliceSet slices = extract_slice_set(animate(truth, motion), st.planes, ex, labels);
    const std::string mesh_rel = "meshes/" + name + ".json";
    const std::string cont_rel = "contours/" + name + ".json";
    io::save_mesh(args.out / mesh_rel, truth);
    io::write_json(args.out / cont_rel, io::slices_to_json(slices));
    Json e{{"name", name}, {"mesh", mesh_rel}, {"contours", cont_rel}, {"candidate_spacing_mm", st.spacing},
           {"usable_length_mm", st.usable_length}};
    for (const auto& [k, v] : provenance[static_cast<std::size_t>(i)].items()) e[k] = v;
    entries[static_cast<std::size_t>(i)] = std::move(e);
    mesh_files[static_cast<std::size_t>(i)] = mesh_rel;
    contour_files[static_cast<std::size_t>(i)] = cont_rel;
  });

  Json cohort{{"seed", seed},
              {"source", s.source},
              {"sigma_scale", s.sigma_scale},
              {"noise_sigma_mm", s.noise_sigma},
              {"motion", {{"radial", motion.radial}, {"axial", motion.axial}, {"peak_frame", motion.peak_frame}}},
              {"subjects", entries}};
  io::write_json(args.out / "cohort.json", cohort, 1);
  manifest.add_output(args.out / "cohort.json");
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    manifest.add_output(args.out / mesh_files[i]);
    manifest.add_output(args.out / contour_files[i]);
  }
  manifest.add_timing("synth", seconds_since(t0));
  manifest.write(args.out / "manifest.json");
  spdlog::info("wrote {} subjects to {}", shapes.size(), args.out.string());
}

// ---------------------------------------------------------------------------------------------

void cmd_build_ssm(const RunConfig& config, const BuildArgs& args) {
  const auto t0 = Clock::now();
  io::Manifest manifest("build-ssm", config_to_json(config));
  std::vector<TubeMesh> dataset;
  manifest.add_input(args.cohort);
  for (const auto& e : read_cohort(args.cohort)) {
    dataset.push_back(io::load_mesh(e.mesh));
    manifest.add_input(e.mesh);
  }
  BuildOptions opts;
  opts.n_modes = config.ssm.n_modes;
  opts.rigid_align = config.ssm.rigid_align;
  const ShapeModel model = build_model(dataset, opts);
  if (model.truncated_modes > 0) {
    spdlog::warn("requested {} modes, data rank allows {}; truncated", config.ssm.n_modes, model.n_modes());
  }
  io::write_json(args.out / "model.json", io::model_to_json(model));
  std::string csv = "mode,sigma_mm,explained_variance_ratio,cumulative\n";
  double cum = 0.0;
  for (int m = 0; m < model.n_modes(); ++m) {
    cum += model.explained_variance_ratio[static_cast<std::size_t>(m)];
    csv += fmt::format("{},{:.9g},{:.9g},{:.9g}\n", m + 1, model.sigmas[static_cast<std::size_t>(m)],
                       model.explained_variance_ratio[static_cast<std::size_t>(m)], cum);
  }
  io::write_text(args.out / "variance.csv", csv);
  manifest.add_output(args.out / "model.json");
  manifest.add_output(args.out / "variance.csv");
  manifest.add_timing("build", seconds_since(t0));
  manifest.write(args.out / "manifest.json");
  spdlog::info("model with {} modes, {:.1f}% variance", model.n_modes(), 100.0 * cum);
}

// ---------------------------------------------------------------------------------------------

void cmd_fit(const RunConfig& config, const FitArgs& args) {
  const auto t0 = Clock::now();
  io::Manifest manifest("fit", config_to_json(config));
  const ShapeModel model = io::model_from_json(io::read_json(args.model));
  SliceSet slices = io::slices_from_json(io::read_json(args.contours));
  manifest.add_input(args.model);
  manifest.add_input(args.contours);
  if (!config.fit.stations.empty()) slices = io::select_stations(slices, config.fit.stations);
  slices.validate();

  const FitContext ctx(model, config.fit.config);
  manifest.add_timing("setup", seconds_since(t0));
  const auto t1 = Clock::now();
  FitResult result;
  try {
    result = fit_sequence(ctx, slices, config.fit.frames);
  } catch (const NonFiniteError& e) {
    io::write_text(args.out / "convergence.csv", trace_csv(e.trace()));
    spdlog::error("{}; partial trace written to {}", e.what(), (args.out / "convergence.csv").string());
    throw;
  }
  manifest.add_timing("fit", seconds_since(t1));

  std::string cl = "frame,index,arclength_mm,x,y,z\n";
  std::string losses = "frame,loss_mesh,loss_centerline,loss_modal,loss_rot,loss_warp,total\n";
  for (std::size_t t = 0; t < result.meshes.size(); ++t) {
    const fs::path mesh_path = args.out / "frames" / frame_name(static_cast<int>(t));
    io::save_mesh(mesh_path, result.meshes[t]);
    manifest.add_output(mesh_path);
    const CenterlineCurve& c = result.centerlines[t];
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      cl += fmt::format("{},{},{:.9g},{:.9g},{:.9g},{:.9g}\n", t, i, c.arclength()[static_cast<std::size_t>(i)], c.points()(i, 0),
                        c.points()(i, 1), c.points()(i, 2));
    }
    const LossTerms& l = result.final_terms[t];
    losses += fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g}\n", t, l.mesh, l.centerline, l.modal, l.rot, l.warp, l.total);
  }
  io::write_text(args.out / "centerlines.csv", cl);
  io::write_text(args.out / "convergence.csv", trace_csv(result.trace));
  io::write_text(args.out / "final_losses.csv", losses);
  for (const char* f : {"centerlines.csv", "convergence.csv", "final_losses.csv"}) manifest.add_output(args.out / f);
  manifest.write(args.out / "manifest.json");
  spdlog::info("fitted {} frames; frame 0 loss_mesh {:.4f} mm^2", result.meshes.size(), result.final_terms.front().mesh);
}

// ---------------------------------------------------------------------------------------------

void write_plan_heatmaps(const std::string& score_csv_text, const fs::path& out_dir) {
  const Table t = parse_csv(score_csv_text);
  if (t.rows.empty()) return;
  const int c_n = t.column("n_slices"), c_cand = t.column("candidate"), c_sel = t.column("selected");
  int n_min = 99, n_max = 0;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    n_min = std::min(n_min, static_cast<int>(t.num(r, c_n)));
    n_max = std::max(n_max, static_cast<int>(t.num(r, c_n)));
  }
  struct Panel {
    const char* column;
    const char* title;
    bool higher_better;
    const char* file;
  };
  const Panel panels[] = {{"dice", "Mean Dice", true, "plan_dice.svg"},
                          {"iou", "Mean IoU", true, "plan_iou.svg"},
                          {"hausdorff_mm", "Mean Hausdorff distance (mm)", false, "plan_hausdorff.svg"},
                          {"chamfer_mm", "Mean Chamfer distance (mm)", false, "plan_chamfer.svg"}};
  for (const Panel& p : panels) {
    svg::Heatmap map;
    map.title = p.title;
    map.higher_is_better = p.higher_better;
    for (int c = 1; c <= kCandidateCount; ++c) map.col_labels.push_back(std::to_string(c));
    for (int n = n_min; n <= n_max; ++n) map.row_labels.push_back(fmt::format("{} slices", n));
    map.values.assign(static_cast<std::size_t>(n_max - n_min + 1), std::vector<double>(kCandidateCount, std::nan("")));
    const int col = t.column(p.column);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      const int row = static_cast<int>(t.num(r, c_n)) - n_min;
      const int cand = static_cast<int>(t.num(r, c_cand)) - 1;
      map.values[static_cast<std::size_t>(row)][static_cast<std::size_t>(cand)] = t.num(r, col);
      if (t.num(r, c_sel) == 1) map.marked.emplace_back(row, cand);
    }
    io::write_text(out_dir / p.file, svg::render(map));
  }
}

void cmd_plan(const RunConfig& config, const PlanArgs& args) {
  const auto t0 = Clock::now();
  io::Manifest manifest("plan", config_to_json(config));
  const ShapeModel model = io::model_from_json(io::read_json(args.model));
  manifest.add_input(args.model);
  manifest.add_input(args.cohort);
  auto entries = read_cohort(args.cohort);
  if (config.plan.subjects > 0 && config.plan.subjects < static_cast<int>(entries.size())) entries.resize(static_cast<std::size_t>(config.plan.subjects));

  std::vector<PlannerSubject> cohort;
  for (const auto& e : entries) {
    PlannerSubject subj;
    subj.name = e.name;
    subj.truth = io::load_mesh(e.mesh);
    const SliceSet all = io::slices_from_json(io::read_json(e.contours));
    std::vector<int> stations(kCandidateCount);
    for (int k = 0; k < kCandidateCount; ++k) stations[static_cast<std::size_t>(k)] = k + 1;
    subj.candidates = io::select_stations(all, stations).frames.front();
    cohort.push_back(std::move(subj));
    manifest.add_input(e.mesh);
    manifest.add_input(e.contours);
  }

  PlannerConfig pc = config.plan.config;
  pc.jobs = config.jobs;
  const FitContext ctx(model, config.fit.config);
  const SlicePlan plan = greedy_select(ctx, cohort, pc);
  manifest.add_timing("greedy", seconds_since(t0));

  const std::string scores = score_csv(plan);
  io::write_text(args.out / "scores.csv", scores);
  std::string sel = "order,station,n_slices,dice,iou,hausdorff_mm,chamfer_mm,asd_mm,radius_abs_rel,available\n";
  for (std::size_t k = 0; k < plan.path.size(); ++k) {
    const SubsetScore& s = plan.path[k];
    const int n = static_cast<int>(s.stations.size());
    // path[0] is the start set; its "station" column names the last start station.
    const int station = plan.selected[static_cast<std::size_t>(n - 1)];
    sel += fmt::format("{},{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", k, station, n, s.dice, s.iou, s.hausdorff,
                       s.chamfer, s.asd, s.radius_abs_rel, s.available);
  }
  io::write_text(args.out / "selected.csv", sel);
  manifest.add_output(args.out / "scores.csv");
  manifest.add_output(args.out / "selected.csv");
  if (args.svg) write_plan_heatmaps(scores, args.out);

  if (config.plan.exhaustive) {
    const auto t1 = Clock::now();
    const auto oracle = exhaustive_path_oracle(ctx, cohort, plan.selected, pc);
    std::string ex = "n_slices,greedy_candidate,oracle_candidate,match\n";
    for (const auto& step : oracle) {
      const int greedy = plan.selected[static_cast<std::size_t>(step.n_slices - 1)];
      ex += fmt::format("{},{},{},{}\n", step.n_slices, greedy, step.best_candidate, greedy == step.best_candidate ? 1 : 0);
    }
    io::write_text(args.out / "exhaustive.csv", ex);
    std::string best = "n_slices,stations,dice,iou,hausdorff_mm,chamfer_mm,combined_error\n";
    for (const auto& b : exhaustive_subsets(ctx, cohort, pc)) {
      best += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", b.n_slices, fmt::join(b.stations, " "), b.score.dice,
                          b.score.iou, b.score.hausdorff, b.score.chamfer, b.combined_error);
    }
    io::write_text(args.out / "exhaustive_best.csv", best);
    manifest.add_output(args.out / "exhaustive.csv");
    manifest.add_output(args.out / "exhaustive_best.csv");
    manifest.add_timing("exhaustive", seconds_since(t1));
  }
  manifest.write(args.out / "manifest.json");
  spdlog::info("selection order: {}", fmt::join(plan.selected, " "));
}

// ---------------------------------------------------------------------------------------------

namespace {

// Voxel centers of occupied voxels with at least one empty 6-neighbour (or on the grid border).
Points mask_boundary(const VoxelMask& m) {
  std::vector<Vec3> pts;
  const auto& d = m.grid.dims;
  auto occ = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) return false;
    return m.occupancy[m.grid.index(i, j, k)] != 0;
  };
  for (int k = 0; k < d[2]; ++k)
    for (int j = 0; j < d[1]; ++j)
      for (int i = 0; i < d[0]; ++i) {
        if (!occ(i, j, k)) continue;
        if (!occ(i - 1, j, k) || !occ(i + 1, j, k) || !occ(i, j - 1, k) || !occ(i, j + 1, k) || !occ(i, j, k - 1) || !occ(i, j, k + 1))
          pts.push_back(m.grid.center(i, j, k));
      }
  return from_vector(pts);
}

}  // namespace

void cmd_metrics(const RunConfig& config, const MetricsArgs& args) {
  const auto t0 = Clock::now();
  io::Manifest manifest("metrics", config_to_json(config));
  if (args.fits.empty()) throw Error(ErrorCode::Config, "metrics needs at least one --fit");
  if (args.ref_mask && !args.refs.empty()) throw Error(ErrorCode::Config, "use either --ref or --ref-mask");
  if (!args.refs.empty() && args.refs.size() != 1 && args.refs.size() != args.fits.size()) {
    throw Error(ErrorCode::Config, "--ref must be given once or once per --fit");
  }
  std::vector<TubeMesh> fits;
  for (const auto& f : args.fits) {
    fits.push_back(io::load_mesh(f));
    manifest.add_input(f);
  }

  std::string metrics = metric_csv_header(), radius = radius_csv_header(), features = feature_csv_header();
  std::optional<VoxelMask> mask;
  Points mask_surface;
  if (args.ref_mask) {
    mask = io::mask_from_json(io::read_json(*args.ref_mask));
    mask_surface = mask_boundary(*mask);
    manifest.add_input(*args.ref_mask);
  }
  for (std::size_t t = 0; t < fits.size(); ++t) {
    const int frame = static_cast<int>(t);
    if (mask) {
      const VoxelMask fm = voxelize(fits[t], mask->grid);
      MetricReport r;
      r.dice = dice(fm, *mask);
      r.iou = iou(fm, *mask);
      const Points fit_pts = surface_points(fits[t]);
      r.hausdorff = hausdorff(fit_pts, mask_surface);
      r.asd = asd(fit_pts, mask_surface);
      r.chamfer = chamfer(fit_pts, mask_surface);
      metrics += metric_csv_row(args.subject, frame, r);
    } else if (!args.refs.empty()) {
      const fs::path& ref_path = args.refs.size() == 1 ? args.refs.front() : args.refs[t];
      const TubeMesh ref = io::load_mesh(ref_path);
      if (t == 0 || args.refs.size() > 1) manifest.add_input(ref_path);
      CompareOptions opts;
      opts.voxel_spacing = config.metrics.voxel_spacing;
      opts.radius_profile = config.metrics.radius_profile;
      const MetricReport r = compare_meshes(fits[t], ref, opts);
      metrics += metric_csv_row(args.subject, frame, r);
      radius += radius_csv_rows(args.subject, frame, r.radius_profile);
    }
    features += feature_csv_row(args.subject, frame, vessel_features(fits[t], fits.front(), config.metrics.up.normalized()));
    if (t > 0) {
      const fs::path wm = args.out / "wall_motion" / frame_name(frame);
      io::save_mesh(wm, fits[t], {{"wall_motion_mm", wall_motion(fits[t], fits.front())}});
      manifest.add_output(wm);
    }
  }
  if (mask || !args.refs.empty()) {
    io::write_text(args.out / "metrics.csv", metrics);
    manifest.add_output(args.out / "metrics.csv");
  }
  if (!args.refs.empty() && config.metrics.radius_profile) {
    io::write_text(args.out / "radius.csv", radius);
    manifest.add_output(args.out / "radius.csv");
  }
  io::write_text(args.out / "features.csv", features);
  manifest.add_output(args.out / "features.csv");
  manifest.add_timing("metrics", seconds_since(t0));
  manifest.write(args.out / "manifest.json");
}

// ---------------------------------------------------------------------------------------------

void cmd_report(const RunConfig& config, const ReportArgs& args) {
  (void)config;
  if (!args.plan_dir && !args.fit_dir && !args.radius_csv) throw Error(ErrorCode::Config, "report needs --plan, --fit or --radius");
  if (args.plan_dir) write_plan_heatmaps(io::read_text(*args.plan_dir / "scores.csv"), args.out);
  if (args.fit_dir) {
    const Table t = parse_csv(io::read_text(*args.fit_dir / "convergence.csv"));
    const int c_frame = t.column("frame"), c_epoch = t.column("epoch");
    const char* terms[] = {"total", "loss_mesh", "loss_centerline", "loss_modal", "loss_rot", "loss_warp"};
    svg::LineChart chart;
    chart.title = "Frame 0 convergence";
    chart.x_label = "epoch";
    chart.y_label = "loss (log10)";
    chart.log_y = true;
    for (const char* term : terms) {
      svg::Series s;
      s.name = term;
      const int c = t.column(term);
      for (std::size_t r = 0; r < t.rows.size(); ++r) {
        if (t.num(r, c_frame) != 0) continue;
        s.x.push_back(t.num(r, c_epoch));
        s.y.push_back(t.num(r, c));
      }
      chart.series.push_back(std::move(s));
    }
    io::write_text(args.out / "convergence.svg", svg::render(chart));
  }
  if (args.radius_csv) {
    const Table t = parse_csv(io::read_text(*args.radius_csv));
    const int c_subj = t.column("subject"), c_station = t.column("station"), c_rel = t.column("rel_err"), c_valid = t.column("valid");
    // Mean relative error per station for each subject label (e.g. one label per slice count).
    std::map<std::string, std::map<int, std::pair<double, int>>> acc;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
      if (t.num(r, c_valid) == 0) continue;
      auto& cell = acc[t.rows[r][static_cast<std::size_t>(c_subj)]][static_cast<int>(t.num(r, c_station))];
      cell.first += t.num(r, c_rel);
      cell.second += 1;
    }
    svg::LineChart chart;
    chart.title = "Relative radius error along the arch";
    chart.x_label = "station";
    chart.y_label = "relative radius error";
    chart.zero_line = true;
    for (const auto& [label, stations] : acc) {
      svg::Series s;
      s.name = label;
      for (const auto& [st, v] : stations) {
        s.x.push_back(st);
        s.y.push_back(v.first / v.second);
      }
      chart.series.push_back(std::move(s));
    }
    io::write_text(args.out / "radius_profile.svg", svg::render(chart));
  }
}

}  // namespace archfit::cli
