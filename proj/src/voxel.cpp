#include "archfit/voxel.hpp"

#include <algorithm>
#include <cmath>

#include "archfit/error.hpp"

namespace archfit {

namespace {

constexpr double kEdgeTolerance = 1e-9;  // mm; rows closer than this to a projected edge are re-cast
constexpr double kJitter = 1e-7;         // mm
constexpr int kMaxRecasts = 4;

struct RowHits {
  std::vector<double> xs;
  bool degenerate = false;
};

// Intersections of the line {y = py, z = pz} with one triangle, appended to hits.
void intersect_row(const Vec3& a, const Vec3& b, const Vec3& c, double py, double pz, RowHits& hits) {
  const Eigen::Vector2d p(py, pz);
  const Eigen::Vector2d pa(a.y(), a.z()), pb(b.y(), b.z()), pc(c.y(), c.z());
  const double area = (pb - pa).x() * (pc - pa).y() - (pb - pa).y() * (pc - pa).x();
  if (area == 0.0) return;  // edge-on triangle; neighbours carry the crossing
  auto edge = [&](const Eigen::Vector2d& u, const Eigen::Vector2d& v, double& dist) {
    const Eigen::Vector2d e = v - u;
    const double cr = e.x() * (p - u).y() - e.y() * (p - u).x();
    const double len = e.norm();
    dist = len > 0 ? std::abs(cr) / len : 0.0;
    return cr;
  };
  double d0, d1, d2;
  const double w0 = edge(pb, pc, d0);
  const double w1 = edge(pc, pa, d1);
  const double w2 = edge(pa, pb, d2);
  const bool inside = area > 0 ? (w0 >= 0 && w1 >= 0 && w2 >= 0) : (w0 <= 0 && w1 <= 0 && w2 <= 0);
  if (!inside) return;
  if (d0 < kEdgeTolerance || d1 < kEdgeTolerance || d2 < kEdgeTolerance) {
    hits.degenerate = true;
    return;
  }
  const double l0 = w0 / area, l1 = w1 / area, l2 = w2 / area;
  hits.xs.push_back(l0 * a.x() + l1 * b.x() + l2 * c.x());
}

}  // namespace

std::size_t VoxelMask::count() const {
  return static_cast<std::size_t>(std::count(occupancy.begin(), occupancy.end(), char{1}));
}

VoxelGrid VoxelGrid::enclosing(const Vec3& lo, const Vec3& hi, double spacing) {
  if (!(spacing > 0)) throw Error(ErrorCode::InvalidArgument, "voxel spacing must be > 0");
  VoxelGrid g;
  g.spacing = Vec3::Constant(spacing);
  for (int a = 0; a < 3; ++a) {
    const double start = (std::floor(lo[a] / spacing) - 1.0) * spacing;
    const double stop = (std::ceil(hi[a] / spacing) + 1.0) * spacing;
    g.origin[a] = start;
    g.dims[a] = static_cast<int>(std::lround((stop - start) / spacing));
  }
  return g;
}

VoxelGrid grid_enclosing(const std::vector<const TubeMesh*>& meshes, double spacing) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto* m : meshes) {
    lo = lo.cwiseMin(m->nodes().colwise().minCoeff().transpose());
    hi = hi.cwiseMax(m->nodes().colwise().maxCoeff().transpose());
  }
  return VoxelGrid::enclosing(lo, hi, spacing);
}

std::pair<Points, std::vector<Triangle>> capped_surface(const TubeMesh& mesh) {
  const int n = mesh.n_nodes();
  const int ppr = mesh.pts_per_ring();
  Points verts(n + 2, 3);
  verts.topRows(n) = mesh.nodes();
  std::vector<Triangle> tris = mesh.cells();
  for (int end = 0; end < 2; ++end) {
    const int r = end == 0 ? 0 : mesh.n_rings() - 1;
    const Points ring = mesh.ring(r);
    Vec3 area = Vec3::Zero();
    for (int j = 0; j < ppr; ++j) area += row(ring, j).cross(row(ring, (j + 1) % ppr));
    if (!(area.norm() > 1e-12)) throw Error(ErrorCode::OpenSurface, "degenerate end ring " + std::to_string(r));
    const int center = n + end;
    verts.row(center) = centroid(ring).transpose();
    for (int j = 0; j < ppr; ++j) {
      const int a = mesh.node_index(r, j);
      const int b = mesh.node_index(r, (j + 1) % ppr);
      if (end == 0) tris.push_back({center, b, a});
      else tris.push_back({center, a, b});
    }
  }
  return {std::move(verts), std::move(tris)};
}

VoxelMask voxelize(const TubeMesh& mesh, const VoxelGrid& grid) {
  const auto [verts, tris] = capped_surface(mesh);
  VoxelMask mask{grid, std::vector<char>(grid.size(), 0)};
  const int ny = grid.dims[1], nz = grid.dims[2];
  const double hy = grid.spacing.y(), hz = grid.spacing.z();

  // Bucket triangles by the (y, z) rows their projection may cover.
  std::vector<std::vector<int>> buckets(static_cast<std::size_t>(ny) * nz);
  for (std::size_t t = 0; t < tris.size(); ++t) {
    double ylo = std::numeric_limits<double>::infinity(), yhi = -ylo, zlo = ylo, zhi = -ylo;
    for (int v : tris[t]) {
      ylo = std::min(ylo, verts(v, 1));
      yhi = std::max(yhi, verts(v, 1));
      zlo = std::min(zlo, verts(v, 2));
      zhi = std::max(zhi, verts(v, 2));
    }
    const int j0 = std::max(0, static_cast<int>(std::floor((ylo - grid.origin.y()) / hy - 0.5)));
    const int j1 = std::min(ny - 1, static_cast<int>(std::ceil((yhi - grid.origin.y()) / hy - 0.5)));
    const int k0 = std::max(0, static_cast<int>(std::floor((zlo - grid.origin.z()) / hz - 0.5)));
    const int k1 = std::min(nz - 1, static_cast<int>(std::ceil((zhi - grid.origin.z()) / hz - 0.5)));
    for (int k = k0; k <= k1; ++k)
      for (int j = j0; j <= j1; ++j) buckets[static_cast<std::size_t>(k) * ny + j].push_back(static_cast<int>(t));
  }

  const double jitters[kMaxRecasts + 1][2] = {{0, 0}, {1.0, 0.618}, {-0.731, 1.27}, {0.383, -1.09}, {-1.21, -0.457}};
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      const auto& bucket = buckets[static_cast<std::size_t>(k) * ny + j];
      if (bucket.empty()) continue;
      const Vec3 c = grid.center(0, j, k);
      RowHits hits;
      for (int attempt = 0; attempt <= kMaxRecasts; ++attempt) {
        hits = RowHits{};
        const double py = c.y() + kJitter * jitters[attempt][0];
        const double pz = c.z() + kJitter * jitters[attempt][1];
        for (int t : bucket) {
          const auto& tri = tris[static_cast<std::size_t>(t)];
          intersect_row(row(verts, tri[0]), row(verts, tri[1]), row(verts, tri[2]), py, pz, hits);
        }
        if (!hits.degenerate) break;
      }
      std::sort(hits.xs.begin(), hits.xs.end());
      for (std::size_t h = 0; h + 1 < hits.xs.size(); h += 2) {
        const double x0 = hits.xs[h], x1 = hits.xs[h + 1];
        const int i0 = std::max(0, static_cast<int>(std::ceil((x0 - grid.origin.x()) / grid.spacing.x() - 0.5)));
        const int i1 = std::min(grid.dims[0] - 1, static_cast<int>(std::floor((x1 - grid.origin.x()) / grid.spacing.x() - 0.5)));
        for (int i = i0; i <= i1; ++i) mask.occupancy[grid.index(i, j, k)] = 1;
      }
    }
  }
  return mask;
}

VoxelMask voxelize(const TubeMesh& mesh, double spacing) {
  return voxelize(mesh, grid_enclosing({&mesh}, spacing));
}

}  // namespace archfit
