#pragma once

#include <vector>

#include "archfit/geometry.hpp"
#include "archfit/mesh.hpp"

namespace archfit {

// Closed loops are stored without repeating the first vertex.

// All closed intersection loops of the plane with the open tube surface, counter-clockwise about
// the plane normal and sorted by descending perimeter. Open chains (plane leaving through an end
// ring) are dropped.
std::vector<Points> slice_loops(const TubeMesh& mesh, const Plane& plane);

// Exactly one loop; NoIntersection for none, MultipleLoops for more.
Points slice_with_plane(const TubeMesh& mesh, const Plane& plane);

// The loop whose centroid is closest to `anchor` (e.g. a centerline station); NoIntersection if
// the plane misses the surface.
Points slice_nearest(const TubeMesh& mesh, const Plane& plane, const Vec3& anchor);

double loop_perimeter(const Points& loop);

// Vertex average of the resampled loop (equal spacing makes this the arclength centroid).
Vec3 loop_centroid(const Points& loop);

// p points at equal arclength spacing, starting at the first vertex.
Points resample_contour(const Points& loop, int p);

}  // namespace archfit
