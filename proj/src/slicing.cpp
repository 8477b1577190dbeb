#include "archfit/slicing.hpp"

#include <algorithm>
#include <cstdint>
#include <unordered_map>

#include "archfit/error.hpp"

namespace archfit {

namespace {

std::int64_t edge_key(int a, int b, int n) {
  if (a > b) std::swap(a, b);
  return static_cast<std::int64_t>(a) * n + b;
}

}  // namespace

double loop_perimeter(const Points& loop) {
  double p = 0.0;
  const Eigen::Index m = loop.rows();
  for (Eigen::Index i = 0; i < m; ++i) p += (loop.row((i + 1) % m) - loop.row(i)).norm();
  return p;
}

Vec3 loop_centroid(const Points& loop) { return centroid(loop); }

std::vector<Points> slice_loops(const TubeMesh& mesh, const Plane& plane) {
  const Points& nodes = mesh.nodes();
  const int n = mesh.n_nodes();
  Eigen::VectorXd d = (nodes.rowwise() - plane.origin.transpose()) * plane.normal;
  auto positive = [&](int i) { return d[i] >= 0.0; };

  std::unordered_map<std::int64_t, int> edge_ids;
  std::vector<Vec3> crossing;
  std::vector<std::array<int, 2>> adjacency;
  auto crossing_id = [&](int a, int b) {
    const auto key = edge_key(a, b, n);
    auto [it, inserted] = edge_ids.try_emplace(key, static_cast<int>(crossing.size()));
    if (inserted) {
      const double t = d[a] / (d[a] - d[b]);
      crossing.push_back(row(nodes, a) + t * (row(nodes, b) - row(nodes, a)));
      adjacency.push_back({-1, -1});
    }
    return it->second;
  };
  auto link = [&](int e, int f) {
    auto& slot = adjacency[static_cast<std::size_t>(e)];
    if (slot[0] < 0) slot[0] = f;
    else slot[1] = f;
  };

  for (const auto& tri : mesh.cells()) {
    int ids[2];
    int k = 0;
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e];
      const int b = tri[(e + 1) % 3];
      if (positive(a) != positive(b)) ids[k++] = crossing_id(a, b);
    }
    if (k == 2) {
      link(ids[0], ids[1]);
      link(ids[1], ids[0]);
    }
  }

  std::vector<char> visited(crossing.size(), 0);
  std::vector<Points> loops;
  // Mark open chains first so they are never walked as loops.
  for (std::size_t s = 0; s < crossing.size(); ++s) {
    if (visited[s] || adjacency[s][1] >= 0) continue;
    int prev = -1;
    int cur = static_cast<int>(s);
    while (cur >= 0 && !visited[static_cast<std::size_t>(cur)]) {
      visited[static_cast<std::size_t>(cur)] = 1;
      const auto& adj = adjacency[static_cast<std::size_t>(cur)];
      const int next = adj[0] != prev ? adj[0] : adj[1];
      prev = cur;
      cur = next;
    }
  }
  for (std::size_t s = 0; s < crossing.size(); ++s) {
    if (visited[s]) continue;
    std::vector<Vec3> loop;
    int prev = -1;
    int cur = static_cast<int>(s);
    while (!visited[static_cast<std::size_t>(cur)]) {
      visited[static_cast<std::size_t>(cur)] = 1;
      loop.push_back(crossing[static_cast<std::size_t>(cur)]);
      const auto& adj = adjacency[static_cast<std::size_t>(cur)];
      const int next = adj[0] != prev ? adj[0] : adj[1];
      prev = cur;
      cur = next;
    }
    if (loop.size() < 3) continue;
    Points pts = from_vector(loop);
    Vec3 area = Vec3::Zero();
    for (Eigen::Index i = 0; i < pts.rows(); ++i) area += row(pts, i).cross(row(pts, (i + 1) % pts.rows()));
    if (area.dot(plane.normal) < 0) pts = pts.colwise().reverse().eval();
    loops.push_back(std::move(pts));
  }
  std::stable_sort(loops.begin(), loops.end(),
                   [](const Points& a, const Points& b) { return loop_perimeter(a) > loop_perimeter(b); });
  return loops;
}

Points slice_with_plane(const TubeMesh& mesh, const Plane& plane) {
  auto loops = slice_loops(mesh, plane);
  if (loops.empty()) throw Error(ErrorCode::NoIntersection, "plane does not cut the surface in a closed loop");
  if (loops.size() > 1) throw Error(ErrorCode::MultipleLoops, std::to_string(loops.size()) + " loops");
  return std::move(loops.front());
}

Points slice_nearest(const TubeMesh& mesh, const Plane& plane, const Vec3& anchor) {
  auto loops = slice_loops(mesh, plane);
  if (loops.empty()) throw Error(ErrorCode::NoIntersection, "plane does not cut the surface in a closed loop");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const double dist = (loop_centroid(loops[i]) - anchor).norm();
    if (dist < best_d) {
      best_d = dist;
      best = i;
    }
  }
  return std::move(loops[best]);
}

Points resample_contour(const Points& loop, int p) {
  if (loop.rows() < 3 || p < 3) throw Error(ErrorCode::InvalidArgument, "resampling needs >= 3 vertices and p >= 3");
  const Eigen::Index m = loop.rows();
  std::vector<double> cum(static_cast<std::size_t>(m) + 1, 0.0);
  for (Eigen::Index i = 0; i < m; ++i) {
    cum[static_cast<std::size_t>(i) + 1] = cum[static_cast<std::size_t>(i)] + (loop.row((i + 1) % m) - loop.row(i)).norm();
  }
  const double perimeter = cum.back();
  if (!(perimeter >= 1e-9)) throw Error(ErrorCode::DegenerateContour, "contour perimeter below 1e-9 mm");
  Points out(p, 3);
  std::size_t seg = 0;
  for (int k = 0; k < p; ++k) {
    const double target = perimeter * k / p;
    while (seg + 1 < static_cast<std::size_t>(m) && cum[seg + 1] <= target) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0 ? (target - cum[seg]) / len : 0.0;
    const Vec3 a = row(loop, static_cast<Eigen::Index>(seg));
    const Vec3 b = row(loop, static_cast<Eigen::Index>((seg + 1) % static_cast<std::size_t>(m)));
    out.row(k) = (a + f * (b - a)).transpose();
  }
  return out;
}

}  // namespace archfit
