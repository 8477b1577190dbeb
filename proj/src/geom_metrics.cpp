#include "archfit/geom_metrics.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <fmt/format.h>

#include "archfit/error.hpp"
#include "archfit/nearest.hpp"
#include "archfit/slice_planner.hpp"
#include "archfit/slicing.hpp"

namespace archfit {

namespace {

struct Counts {
  std::size_t tp = 0, fp = 0, fn = 0;
};

Counts confusion(const VoxelMask& a, const VoxelMask& b) {
  if (!(a.grid == b.grid) || a.occupancy.size() != b.occupancy.size()) {
    throw Error(ErrorCode::GridMismatch, "masks live on different voxel grids");
  }
  Counts c;
  for (std::size_t i = 0; i < a.occupancy.size(); ++i) {
    const bool pa = a.occupancy[i] != 0, pb = b.occupancy[i] != 0;
    c.tp += pa && pb;
    c.fp += pa && !pb;
    c.fn += !pa && pb;
  }
  return c;
}

// Nearest distances from every point of x to y.
std::vector<double> directed(const Points& x, const Points& y) {
  std::vector<double> d;
  d.reserve(static_cast<std::size_t>(x.rows()));
  for (const Match& m : nearest_all(y, x)) d.push_back(std::sqrt(m.dist2));
  return d;
}

void require_nonempty(const Points& x, const Points& y) {
  if (x.rows() == 0 || y.rows() == 0) throw Error(ErrorCode::EmptySet, "point-set distance on an empty set");
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double d : v) s += d;
  return s;
}

}  // namespace

double dice(const VoxelMask& a, const VoxelMask& b) {
  const Counts c = confusion(a, b);
  const std::size_t denom = 2 * c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double iou(const VoxelMask& a, const VoxelMask& b) {
  const Counts c = confusion(a, b);
  const std::size_t denom = c.tp + c.fp + c.fn;
  return denom == 0 ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

double hausdorff(const Points& x, const Points& y) {
  require_nonempty(x, y);
  double h = 0.0;
  for (double d : directed(x, y)) h = std::max(h, d);
  for (double d : directed(y, x)) h = std::max(h, d);
  return h;
}

double asd(const Points& x, const Points& y) {
  require_nonempty(x, y);
  return (sum(directed(x, y)) + sum(directed(y, x))) / static_cast<double>(x.rows() + y.rows());
}

double chamfer(const Points& x, const Points& y) {
  require_nonempty(x, y);
  return sum(directed(x, y)) / static_cast<double>(x.rows()) + sum(directed(y, x)) / static_cast<double>(y.rows());
}

std::vector<RadiusStation> radius_error_profile(const TubeMesh& fit, const TubeMesh& ref) {
  const CandidateStations st = candidate_stations(ref);
  return radius_error_profile(fit, ref, st.planes, st.arclengths);
}

std::vector<RadiusStation> radius_error_profile(const TubeMesh& fit, const TubeMesh& ref, const std::vector<Plane>& planes,
                                                const std::vector<double>& arclengths) {
  if (planes.size() != arclengths.size()) throw Error(ErrorCode::InvalidArgument, "one arclength per station plane expected");
  std::vector<RadiusStation> out;
  for (std::size_t i = 0; i < planes.size(); ++i) {
    RadiusStation s;
    s.station = static_cast<int>(i) + 1;
    s.arclength = arclengths[i];
    try {
      const Plane& p = planes[i];
      s.radius_ref = loop_perimeter(slice_nearest(ref, p, p.origin)) / (2.0 * std::numbers::pi);
      s.radius_fit = loop_perimeter(slice_nearest(fit, p, p.origin)) / (2.0 * std::numbers::pi);
      s.abs_err = std::abs(s.radius_fit - s.radius_ref);
      s.rel_err = (s.radius_fit - s.radius_ref) / s.radius_ref;
      s.valid = std::isfinite(s.rel_err);
    } catch (const Error&) {
      s.valid = false;
    }
    out.push_back(s);
  }
  return out;
}

double mean_abs_relative_error(const std::vector<RadiusStation>& profile) {
  double s = 0.0;
  int n = 0;
  for (const auto& st : profile) {
    if (!st.valid) continue;
    s += std::abs(st.rel_err);
    ++n;
  }
  return n ? s / n : std::numeric_limits<double>::quiet_NaN();
}

MetricReport compare_meshes(const TubeMesh& fit, const TubeMesh& ref, const CompareOptions& options) {
  MetricReport r;
  const VoxelGrid grid = grid_enclosing({&fit, &ref}, options.voxel_spacing);
  const VoxelMask a = voxelize(fit, grid);
  const VoxelMask b = voxelize(ref, grid);
  r.dice = dice(a, b);
  r.iou = iou(a, b);
  const Points x = surface_points(fit), y = surface_points(ref);
  r.hausdorff = hausdorff(x, y);
  r.asd = asd(x, y);
  r.chamfer = chamfer(x, y);
  if (options.radius_profile) r.radius_profile = radius_error_profile(fit, ref);
  return r;
}

std::string metric_csv_header() { return "subject,frame,dice,iou,hausdorff_mm,chamfer_mm,asd_mm,radius_abs_rel\n"; }

std::string metric_csv_row(const std::string& subject, int frame, const MetricReport& r) {
  return fmt::format("{},{},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f}\n", subject, frame, r.dice, r.iou, r.hausdorff,
                     r.chamfer, r.asd, r.radius_profile.empty() ? 0.0 : mean_abs_relative_error(r.radius_profile));
}

std::string radius_csv_header() { return "subject,frame,station,arclength_mm,radius_ref_mm,radius_fit_mm,abs_err_mm,rel_err,valid\n"; }

std::string radius_csv_rows(const std::string& subject, int frame, const std::vector<RadiusStation>& profile) {
  std::string out;
  for (const auto& s : profile) {
    out += fmt::format("{},{},{},{:.4f},{:.6f},{:.6f},{:.6f},{:.6f},{}\n", subject, frame, s.station, s.arclength, s.radius_ref,
                       s.radius_fit, s.abs_err, s.rel_err, s.valid ? 1 : 0);
  }
  return out;
}

}  // namespace archfit
