// Acceptance run: one PASS/FAIL line per criterion, tolerances pinned below.
#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "archfit/config.hpp"
#include "archfit/error.hpp"
#include "archfit/geom_metrics.hpp"
#include "archfit/io.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/slicing.hpp"
#include "archfit/ssm.hpp"
#include "archfit/synth.hpp"
#include "archfit/vessel_metrics.hpp"
#include "test_support.hpp"

using namespace archfit;
namespace fs = std::filesystem;

namespace {

// Tolerances.
constexpr double kMinDice = 0.93;
constexpr double kMaxChamfer = 3.0;
constexpr double kRadiusRatio = 1.0 / 5.0;
constexpr double kMaxRadiusErr11 = 1e-2;
constexpr double kMaxGradRelErr = 1e-4;
constexpr double kIdentityTol = 1e-12;
constexpr double kSelfFitDice = 0.99;
constexpr double kPeakRadial = 1.11, kPeakAxial = 1.035;
constexpr double kStrainRelTol = 0.20, kLengthRelTol = 0.30;
constexpr double kGeomTol = 1e-3;
constexpr double kDiceSlack = 0.005;

// Held-out draws never overlap the seeds used while tuning the study weights (1000-1002).
constexpr std::uint64_t kHeldOutSeed = 5000;
constexpr std::uint64_t kPlannerSeed = 4000;
constexpr std::uint64_t kSequenceSeed = 6000;
constexpr double kSigmaScale = 1.58;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<SliceContour> pick(const PlannerSubject& s, const std::vector<int>& stations) {
  std::vector<SliceContour> out;
  for (int st : stations) out.push_back(s.candidates[static_cast<std::size_t>(st - 1)]);
  return out;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

class Study {
 public:
  Study(const RunConfig& config, int planner_subjects, int held_out) : config_(config) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<TubeMesh> cohort = generate_cohort(io::stage_seed(config.seed, "synth"), config.synth.count);
    BuildOptions bo;
    bo.n_modes = config.ssm.n_modes;
    model_ = build_model(cohort, bo);
    ctx_ = std::make_unique<FitContext>(model_, config.fit.config);
    for (int i = 0; i < planner_subjects; ++i) planners_.push_back(subject("plan", kPlannerSeed, i));
    for (int i = 0; i < held_out; ++i) held_.push_back(subject("held", kHeldOutSeed, i));
    spdlog::info("cohort, model ({} modes) and {} + {} subjects ready in {:.1f} s ({} samples redrawn)", model_.n_modes(),
                 planner_subjects, held_out, seconds_since(t0), redraws_);
  }

  const ShapeModel& model() const { return model_; }
  const FitContext& ctx() const { return *ctx_; }
  const RunConfig& config() const { return config_; }
  const std::vector<PlannerSubject>& planners() const { return planners_; }
  const std::vector<PlannerSubject>& held_out() const { return held_; }
  // Samples replaced because they could not host the twelve candidate stations.
  int redraws() const { return redraws_; }

  // Greedy order over the full pool, computed once.
  const SlicePlan& plan() {
    if (!plan_) {
      const auto t0 = std::chrono::steady_clock::now();
      PlannerConfig pc = config_.plan.config;
      pc.max_slices = 11;
      pc.pool.clear();
      plan_ = greedy_select(*ctx_, planners_, pc);
      spdlog::info("greedy order {} on {} subjects in {:.0f} s", join(plan_->selected), planners_.size(), seconds_since(t0));
    }
    return *plan_;
  }

  std::vector<int> first(int n) {
    const auto& s = plan().selected;
    return std::vector<int>(s.begin(), s.begin() + n);
  }

 private:
  PlannerSubject subject(const std::string& tag, std::uint64_t seed, int i) {
    SliceExtraction ex;
    ex.noise_sigma = config_.synth.noise_sigma;
    ex.seed = io::stage_seed(seed + static_cast<std::uint64_t>(i), "contours");
    int redraws = 0;
    const TubeMesh truth = sample_plannable_shape(model_, seed + static_cast<std::uint64_t>(i), kSigmaScale, &redraws);
    redraws_ += redraws;
    return make_planner_subject(fmt::format("{}_{:03d}", tag, i), truth, ex);
  }

  RunConfig config_;
  ShapeModel model_;
  std::unique_ptr<FitContext> ctx_;
  std::vector<PlannerSubject> planners_, held_;
  std::optional<SlicePlan> plan_;
  int redraws_ = 0;
};

Outcome closed_loop(Study& study) {
  const std::vector<int> six = study.first(6);
  std::vector<double> d, c;
  for (const PlannerSubject& s : study.held_out()) {
    const FrameFit fit = fit_frame0(study.ctx(), pick(s, six));
    const MetricReport r = compare_meshes(fit.mesh, s.truth, CompareOptions{1.0, false});
    d.push_back(r.dice);
    c.push_back(r.chamfer);
    spdlog::debug("{}: dice {:.4f} chamfer {:.3f}", s.name, r.dice, r.chamfer);
  }
  const double md = mean(d), mc = mean(c);
  return {md >= kMinDice && mc <= kMaxChamfer,
          fmt::format("slices {} on {} held-out shapes ({} short samples redrawn): dice {:.4f} (>= {}), chamfer {:.3f} mm "
                      "(<= {})",
                      join(six), d.size(), study.redraws(), md, kMinDice, mc, kMaxChamfer)};
}

Outcome slice_sweep(Study& study) {
  const std::vector<int> two = study.first(2), eleven = study.first(11);
  std::vector<double> e2, e11;
  for (const PlannerSubject& s : study.held_out()) {
    for (auto [stations, out] : {std::pair{&two, &e2}, std::pair{&eleven, &e11}}) {
      const FrameFit fit = fit_frame0(study.ctx(), pick(s, *stations));
      out->push_back(mean_abs_relative_error(radius_error_profile(fit.mesh, s.truth)));
    }
  }
  const double m2 = mean(e2), m11 = mean(e11);
  return {m11 < kRadiusRatio * m2 && m11 < kMaxRadiusErr11,
          fmt::format("mean |rel radius err| 2 slices {:.4f}, 11 slices {:.4f} (ratio {:.3f} < {:.2f}, abs < {})", m2, m11,
                      m11 / m2, kRadiusRatio, kMaxRadiusErr11)};
}

Outcome gradients(Study& study) {
  const testing::CenteredFrame data = testing::centered_frame(study.held_out().front().candidates);
  const FrameObjective obj(study.ctx(), data.points, data.centerline);
  std::mt19937_64 rng(20);
  double worst = 0.0;
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const FitState s = testing::random_state(rng, study.ctx());
    const testing::GradientCheck g = testing::check_gradients(obj, s, testing::gradient_indices(rng, s, 12));
    worst = std::max(worst, g.max_rel_error);
    checked += g.checked;
  }
  return {worst <= kMaxGradRelErr,
          fmt::format("20 states, {} (term, entry) pairs: max rel error {:.2e} (<= {:.0e})", checked, worst, kMaxGradRelErr)};
}

double oracle_directed_sum(const Points& x, const Points& y, double* max_out) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < y.rows(); ++j) {
      const double dx = y(j, 0) - x(i, 0), dy = y(j, 1) - x(i, 1), dz = y(j, 2) - x(i, 2);
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    const double d = std::sqrt(best);
    s += d;
    *max_out = std::max(*max_out, d);
  }
  return s;
}

Outcome metric_oracles() {
  std::mt19937_64 rng(44);
  std::uniform_int_distribution<int> dim(1, 6), npts(1, 25);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  int mismatches = 0, identity_failures = 0;
  for (int trial = 0; trial < 100; ++trial) {
    VoxelMask a, b;
    a.grid.dims = {dim(rng), dim(rng), dim(rng)};
    b.grid = a.grid;
    const double pa = unit(rng), pb = unit(rng);
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < a.grid.size(); ++i) {
      a.occupancy.push_back(unit(rng) < pa);
      b.occupancy.push_back(unit(rng) < pb);
      tp += a.occupancy[i] && b.occupancy[i];
      fp += a.occupancy[i] && !b.occupancy[i];
      fn += !a.occupancy[i] && b.occupancy[i];
    }
    const double od = 2 * tp + fp + fn == 0 ? 1.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    const double oi = tp + fp + fn == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
    const double d = dice(a, b), j = iou(a, b);
    mismatches += (d != od) + (j != oi);
    identity_failures += std::abs(j - d / (2.0 - d)) > kIdentityTol;

    const Points x = testing::random_points(rng, npts(rng)), y = testing::random_points(rng, npts(rng));
    double hmax = 0.0;
    const double sx = oracle_directed_sum(x, y, &hmax), sy = oracle_directed_sum(y, x, &hmax);
    const double nx = static_cast<double>(x.rows()), ny = static_cast<double>(y.rows());
    mismatches += (hausdorff(x, y) != hmax) + (asd(x, y) != (sx + sy) / (nx + ny)) + (chamfer(x, y) != sx / nx + sy / ny);
  }
  return {mismatches == 0 && identity_failures == 0,
          fmt::format("100 instances: {} value mismatches, {} identity violations", mismatches, identity_failures)};
}

Outcome self_fit(Study& study) {
  const TubeMesh mean = study.model().mean_mesh();
  const CandidateStations st = candidate_stations(mean);
  std::vector<SliceContour> cs;
  for (int i = 1; i <= kCandidateCount; ++i) {
    SliceContour c;
    c.plane = st.planes[static_cast<std::size_t>(i - 1)];
    c.points = resample_contour(slice_nearest(mean, c.plane, c.plane.origin), kContourPoints);
    c.station = i;
    cs.push_back(c);
  }
  const FrameFit fit = fit_frame0(study.ctx(), cs);
  const double d = compare_meshes(fit.mesh, mean, CompareOptions{1.0, false}).dice;
  const int epochs = fit.trace.empty() ? 0 : fit.trace.back().epoch + 1;
  return {d > kSelfFitDice && epochs <= 300, fmt::format("dice vs mean {:.4f} (> {}) after {} epochs", d, kSelfFitDice, epochs)};
}

Outcome strain_round_trip(Study& study) {
  const std::vector<int> six = study.first(6);
  const TubeMesh truth = generate_arch(sample_arch_params(kSequenceSeed, 0));
  const MotionProfile profile = MotionProfile::cardiac(40, kPeakRadial, kPeakAxial, 12);
  const std::vector<TubeMesh> seq = animate(truth, profile);
  const CandidateStations st = candidate_stations(truth);
  std::vector<Plane> planes;
  for (int s : six) planes.push_back(st.planes[static_cast<std::size_t>(s - 1)]);
  SliceExtraction ex;
  ex.noise_sigma = 0.5;
  ex.seed = io::stage_seed(kSequenceSeed, "contours");
  const SliceSet slices = extract_slice_set(seq, planes, ex, six);
  const FitResult fit = fit_sequence(study.ctx(), slices);
  double peak_strain = 0.0, peak_length = 0.0;
  int peak_frame = 0;
  for (std::size_t t = 1; t < fit.meshes.size(); ++t) {
    const double e = ascending_radial_strain(fit.meshes[t], fit.meshes[0]);
    if (e > peak_strain) peak_strain = e, peak_frame = static_cast<int>(t);
    peak_length = std::max(peak_length, centerline_length_change(fit.meshes[t], fit.meshes[0]));
  }
  const double true_strain = kPeakRadial - 1.0, true_length = kPeakAxial - 1.0;
  const double es = std::abs(peak_strain - true_strain) / true_strain, el = std::abs(peak_length - true_length) / true_length;
  return {es <= kStrainRelTol && el <= kLengthRelTol,
          fmt::format("peak radial strain {:.4f} vs {:.3f} at frame {} ({:.0f}% off, <= {:.0f}%), length change {:.4f} vs "
                      "{:.3f} ({:.0f}% off, <= {:.0f}%)",
                      peak_strain, true_strain, peak_frame, 100 * es, 100 * kStrainRelTol, peak_length, true_length, 100 * el,
                      100 * kLengthRelTol)};
}

Outcome analytic_geometry() {
  ArchParams p;
  p.ascending_length = 0.0;
  p.descending_length = 0.0;
  p.taper = 1.0;
  p.noise_amplitude = 0.0;
  const double r = p.arch_radius;
  const CenterlineCurve cl = centerline_from_mesh(generate_arch(p), 2001);
  const ArchLandmarks lm = landmarks_at(cl, 0.0, cl.length() / 2, cl.length());
  const ArchDimensions dim = arch_dimensions(lm);
  const double tau = tortuosity(lm), expect = 1.0 - 2.0 / std::numbers::pi;
  const bool ok = std::abs(tau - expect) <= kGeomTol && std::abs(dim.width - 2 * r) <= kGeomTol * r &&
                  std::abs(dim.height - r) <= kGeomTol * r;
  return {ok, fmt::format("R = {} mm: tortuosity {:.5f} vs {:.5f}, w {:.3f} vs {:.1f}, h {:.3f} vs {:.1f} mm", r, tau, expect,
                          dim.width, 2 * r, dim.height, r)};
}

int run_cli(const std::string& args) {
  const std::string cmd = "\"" ARCHFIT_BIN "\" --log-level error " + args;
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::map<std::string, std::string> digests(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), root).string()] = io::file_sha256(e.path());
  }
  return out;
}

Outcome determinism(const fs::path& scratch) {
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  // Short schedule: the point is byte equality, not fit quality.
  io::write_text(scratch / "config.json",
                 R"({"seed": 11, "fit": {"schedule": {"shape_end": 5, "pose_end": 30, "warp_end": 40, "total": 50, )"
                 R"("sequence_epochs": 10}}, "plan": {"max_slices": 3}})" "\n");
  std::map<std::string, std::map<std::string, std::string>> runs;
  int failures = 0;
  for (const char* tag : {"a", "b"}) {
    const fs::path d = scratch / tag;
    const std::string c = "-c \"" + (scratch / "config.json").string() + "\" -o \"";
    const std::string q = "\"";
    failures += run_cli(c + (d / "cohort").string() + q + " synth --count 4 --frames 3 --peak-radial 1.08 --peak-frame 1") != 0;
    failures += run_cli(c + (d / "ssm").string() + q + " build-ssm --cohort \"" + (d / "cohort/cohort.json").string() + q) != 0;
    failures += run_cli(c + (d / "fit").string() + q + " fit --model \"" + (d / "ssm/model.json").string() + "\" --contours \"" +
                        (d / "cohort/contours/subject_000.json").string() + "\" --stations 2,12,5,8,10,1") != 0;
    failures += run_cli(c + (d / "plan").string() + q + " plan --model \"" + (d / "ssm/model.json").string() + "\" --cohort \"" +
                        (d / "cohort/cohort.json").string() + "\" --subjects 1 --pool 2,12,5,8") != 0;
    std::string fits;
    for (int f = 0; f < 3; ++f) fits += fmt::format(" --fit \"{}\"", (d / fmt::format("fit/frames/frame_{:03d}.json", f)).string());
    failures += run_cli(c + (d / "metrics").string() + q + " metrics" + fits + " --ref \"" +
                        (d / "cohort/meshes/subject_000.json").string() + q) != 0;
    failures += run_cli(c + (d / "report").string() + q + " report --plan \"" + (d / "plan").string() + "\" --fit \"" +
                        (d / "fit").string() + "\" --radius \"" + (d / "metrics/radius.csv").string() + q) != 0;
    runs[tag] = digests(d);
  }
  int differing = 0;
  for (const auto& [path, sha] : runs["a"]) {
    const auto it = runs["b"].find(path);
    if (it == runs["b"].end() || it->second != sha) {
      ++differing;
      spdlog::warn("differs between reruns: {}", path);
    }
  }
  differing += static_cast<int>(runs["b"].size() != runs["a"].size());
  return {failures == 0 && differing == 0 && !runs["a"].empty(),
          fmt::format("synth, build-ssm, fit, plan, metrics, report rerun: {} files compared, {} differ, {} failed commands",
                      runs["a"].size(), differing, failures)};
}

Outcome planner_validity(Study& study) {
  PlannerConfig pc = study.config().plan.config;
  pc.pool = {2, 12, 3, 5, 8, 10};
  pc.max_slices = 6;
  const SlicePlan plan = greedy_select(study.ctx(), study.planners(), pc);
  const std::vector<ExhaustiveStep> oracle = exhaustive_path_oracle(study.ctx(), study.planners(), plan.selected, pc);
  int matches = 0;
  for (const ExhaustiveStep& s : oracle) {
    matches += s.best_candidate == plan.selected[static_cast<std::size_t>(s.n_slices - 1)];
  }
  bool monotone = true;
  std::string dices;
  for (std::size_t k = 0; k < plan.path.size(); ++k) {
    dices += fmt::format("{}{:.4f}", k ? " " : "", plan.path[k].dice);
    if (k > 0 && plan.path[k].dice < plan.path[k - 1].dice - kDiceSlack) monotone = false;
  }
  return {matches == static_cast<int>(oracle.size()) && !oracle.empty() && monotone,
          fmt::format("pool {}: greedy {}, oracle agrees on {}/{} iterations, dice path [{}] (drops <= {} pp)", join(pc.pool),
                      join(plan.selected), matches, oracle.size(), dices, 100 * kDiceSlack)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria for archfit"};
  std::string config_path = ARCHFIT_STUDY_CONFIG;
  std::vector<int> only, known;
  int planner_subjects = 3, held_out = 30;
  std::string scratch = (fs::temp_directory_path() / "archfit_acceptance").string();
  bool verbose = false;
  app.add_option("-c,--config", config_path, "Study config")->check(CLI::ExistingFile);
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-failures", known, "Criteria allowed to fail without failing the run (still reported)")->delimiter(',');
  app.add_option("--planner-subjects", planner_subjects, "Subjects in the greedy study");
  app.add_option("--held-out", held_out, "Held-out shapes for criteria 1 and 2");
  app.add_option("--scratch", scratch, "Work directory for the CLI reruns");
  app.add_flag("-v,--verbose", verbose, "Per-subject log lines");
  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_st("acceptance");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  const RunConfig config = config_from_json(io::read_json(config_path));
  config.validate();
  const std::set<int> wanted(only.begin(), only.end());
  const auto want = [&](int k) { return wanted.empty() || wanted.count(k) > 0; };

  std::optional<Study> study;
  const auto need_study = [&]() -> Study& {
    if (!study) study.emplace(config, planner_subjects, held_out);
    return *study;
  };

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-loop recovery", [&] { return closed_loop(need_study()); }},
      {"slice-count sweep", [&] { return slice_sweep(need_study()); }},
      {"gradient correctness", [&] { return gradients(need_study()); }},
      {"metric oracle equivalence", [&] { return metric_oracles(); }},
      {"self-fit sanity", [&] { return self_fit(need_study()); }},
      {"strain round trip", [&] { return strain_round_trip(need_study()); }},
      {"analytic geometry", [&] { return analytic_geometry(); }},
      {"determinism", [&] { return determinism(scratch); }},
      {"greedy planner validity", [&] { return planner_validity(need_study()); }},
  };

  std::vector<std::string> lines;
  bool ok = true;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k) + 1;
    if (!want(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const bool tolerated = !o.pass && std::find(known.begin(), known.end(), id) != known.end();
    if (!o.pass && !tolerated) ok = false;
    const std::string line = fmt::format("criterion {} {}: {}{} | {} [{:.0f} s]", id, criteria[k].first, o.pass ? "PASS" : "FAIL",
                                         tolerated ? " (known failure)" : "", o.detail, seconds_since(t0));
    spdlog::info("{}", line);
    lines.push_back(line);
  }
  fmt::print("\n");
  for (const std::string& l : lines) fmt::print("{}\n", l);
  return ok ? 0 : 1;
}
