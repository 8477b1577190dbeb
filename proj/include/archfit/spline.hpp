#pragma once

#include <vector>

#include "archfit/geometry.hpp"

namespace archfit {

// Natural cubic spline through 3-D points at strictly increasing parameter values.
// Two points degrade to a straight segment.
class CubicSpline3 {
 public:
  CubicSpline3(std::vector<double> params, const Points& values);

  // Chord-length parameterization; throws DegenerateMesh on coincident consecutive points.
  static CubicSpline3 chord_length(const Points& values);

  Vec3 eval(double t) const;
  Vec3 derivative(double t) const;

  double t_min() const { return t_.front(); }
  double t_max() const { return t_.back(); }

 private:
  std::size_t segment(double t) const;

  std::vector<double> t_;
  Points y_;
  Points m_;  // second derivatives at the knots
};

// Linear operator W (n_out x n_in) such that W * data evaluates the natural cubic spline with
// knots at 0..n_in-1 at n_out uniformly spaced parameters. Depends only on the sizes.
Eigen::MatrixXd uniform_spline_operator(int n_in, int n_out);

// Resamples the spline to n_points samples at (approximately) equal arclength spacing.
// The first and last samples are the spline endpoints.
Points resample_by_arclength(const CubicSpline3& spline, int n_points);

}  // namespace archfit
