#pragma once

#include <vector>

#include "archfit/geometry.hpp"

namespace archfit {

inline constexpr int kContourPoints = 180;

/// One planar contour of one time frame. Points are resampled at equal arclength.
struct SliceContour {
  Plane plane;
  Points points;
  int frame = 0;
  int station = 0;  // candidate station index (1-based) the plane came from; 0 when unknown
};

/// Contours per frame; every frame carries the same planes in the same order.
struct SliceSet {
  std::vector<std::vector<SliceContour>> frames;

  int n_frames() const { return static_cast<int>(frames.size()); }
  int n_slices() const { return frames.empty() ? 0 : static_cast<int>(frames.front().size()); }

  // Throws InvalidArgument when frames disagree on planes or a frame has < 2 slices.
  void validate() const;
};

// All contour points of a frame stacked in contour order (Q = S * P rows).
Points stack_points(const std::vector<SliceContour>& contours);

}  // namespace archfit
