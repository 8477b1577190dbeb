#include "archfit/spline.hpp"

#include <algorithm>
#include <cmath>

#include "archfit/error.hpp"

namespace archfit {

namespace {

// Second derivatives of a natural cubic spline (Thomas algorithm on the tridiagonal system).
Points natural_second_derivatives(const std::vector<double>& t, const Points& y) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Points m = Points::Zero(n, 3);
  if (n < 3) return m;
  const Eigen::Index k = n - 2;
  std::vector<double> diag(k), upper(k), lower(k);
  Points rhs(k, 3);
  for (Eigen::Index i = 1; i <= k; ++i) {
    const double h0 = t[i] - t[i - 1];
    const double h1 = t[i + 1] - t[i];
    diag[i - 1] = 2.0 * (h0 + h1);
    lower[i - 1] = h0;
    upper[i - 1] = h1;
    rhs.row(i - 1) = 6.0 * ((y.row(i + 1) - y.row(i)) / h1 - (y.row(i) - y.row(i - 1)) / h0);
  }
  for (Eigen::Index i = 1; i < k; ++i) {
    const double w = lower[i] / diag[i - 1];
    diag[i] -= w * upper[i - 1];
    rhs.row(i) -= w * rhs.row(i - 1);
  }
  m.row(k) = rhs.row(k - 1) / diag[k - 1];
  for (Eigen::Index i = k - 2; i >= 0; --i) {
    m.row(i + 1) = (rhs.row(i) - upper[i] * m.row(i + 2)) / diag[i];
  }
  return m;
}

}  // namespace

CubicSpline3::CubicSpline3(std::vector<double> params, const Points& values)
    : t_(std::move(params)), y_(values) {
  if (t_.size() < 2 || static_cast<Eigen::Index>(t_.size()) != y_.rows()) {
    throw Error(ErrorCode::InvalidArgument, "spline needs >= 2 knots matching the value count");
  }
  for (std::size_t i = 1; i < t_.size(); ++i) {
    if (!(t_[i] > t_[i - 1])) {
      throw Error(ErrorCode::InvalidArgument, "spline parameters must be strictly increasing");
    }
  }
  m_ = natural_second_derivatives(t_, y_);
}

CubicSpline3 CubicSpline3::chord_length(const Points& values) {
  std::vector<double> t(values.rows(), 0.0);
  for (Eigen::Index i = 1; i < values.rows(); ++i) {
    const double d = (values.row(i) - values.row(i - 1)).norm();
    if (d < 1e-12) {
      throw Error(ErrorCode::DegenerateMesh, "consecutive centroids coincide at index " + std::to_string(i));
    }
    t[i] = t[i - 1] + d;
  }
  return CubicSpline3(std::move(t), values);
}

std::size_t CubicSpline3::segment(double t) const {
  auto it = std::upper_bound(t_.begin(), t_.end(), t);
  std::size_t i = it == t_.begin() ? 0 : static_cast<std::size_t>(it - t_.begin()) - 1;
  return std::min(i, t_.size() - 2);
}

Vec3 CubicSpline3::eval(double t) const {
  const std::size_t i = segment(t);
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  Vec3 r = a * row(y_, i) + b * row(y_, i + 1) +
           ((a * a * a - a) * row(m_, i) + (b * b * b - b) * row(m_, i + 1)) * (h * h / 6.0);
  return r;
}

Vec3 CubicSpline3::derivative(double t) const {
  const std::size_t i = segment(t);
  const double h = t_[i + 1] - t_[i];
  const double a = (t_[i + 1] - t) / h;
  const double b = (t - t_[i]) / h;
  return (row(y_, i + 1) - row(y_, i)) / h +
         (-(3.0 * a * a - 1.0) * row(m_, i) + (3.0 * b * b - 1.0) * row(m_, i + 1)) * (h / 6.0);
}

Eigen::MatrixXd uniform_spline_operator(int n_in, int n_out) {
  std::vector<double> knots(n_in);
  for (int i = 0; i < n_in; ++i) knots[i] = i;
  Eigen::MatrixXd w(n_out, n_in);
  for (int j = 0; j < n_in; ++j) {
    Points unit = Points::Zero(n_in, 3);
    unit(j, 0) = 1.0;
    CubicSpline3 s(knots, unit);
    for (int k = 0; k < n_out; ++k) {
      const double t = n_out == 1 ? 0.0 : double(n_in - 1) * k / double(n_out - 1);
      w(k, j) = s.eval(t).x();
    }
  }
  return w;
}

Points resample_by_arclength(const CubicSpline3& spline, int n_points) {
  if (n_points < 2) throw Error(ErrorCode::InvalidArgument, "need at least 2 resample points");
  const int dense = std::max(4000, 8 * n_points);
  std::vector<double> ts(dense + 1), cum(dense + 1, 0.0);
  Vec3 prev = spline.eval(spline.t_min());
  ts[0] = spline.t_min();
  for (int i = 1; i <= dense; ++i) {
    ts[i] = spline.t_min() + (spline.t_max() - spline.t_min()) * i / dense;
    const Vec3 p = spline.eval(ts[i]);
    cum[i] = cum[i - 1] + (p - prev).norm();
    prev = p;
  }
  const double total = cum.back();
  Points out(n_points, 3);
  std::size_t k = 0;
  for (int j = 0; j < n_points; ++j) {
    const double target = total * j / (n_points - 1);
    while (k + 1 < cum.size() - 1 && cum[k + 1] < target) ++k;
    const double span = cum[k + 1] - cum[k];
    const double f = span > 0 ? std::clamp((target - cum[k]) / span, 0.0, 1.0) : 0.0;
    out.row(j) = spline.eval(ts[k] + f * (ts[k + 1] - ts[k])).transpose();
  }
  out.row(0) = spline.eval(spline.t_min()).transpose();
  out.row(n_points - 1) = spline.eval(spline.t_max()).transpose();
  return out;
}

}  // namespace archfit
