/* otk/regionprops.hpp
 *
 * Standard region properties of labeled voxel sets: physical area/volume,
 * equivalent-ellipse(-oid) axis lengths from the second central moments,
 * extent, solidity via exact integer convex hulls, and sorted inertia
 * tensor eigenvalues.
 *
 * Hull predicates run on integer voxel coordinates with int64 arithmetic,
 * so lattice-point-in-hull tests are exact; a lattice point on the hull
 * boundary counts as inside. Degenerate point sets (single voxel,
 * collinear, coplanar) fall back to the matching lower-dimensional test.
 */

#ifndef OTK_REGIONPROPS_HPP
#define OTK_REGIONPROPS_HPP

#include "otk/volume.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace otk {

struct RegionProps {
  double area = 0.0;            // um^2 (2D) or um^3 (3D)
  double axis_length_maj = 0.0; // um
  double axis_length_min = 0.0; // um
  double extent = 0.0;
  double solidity = 0.0;
  // ascending; [1] is NaN in 2D
  std::array<double, 3> inertia_eigs_sorted = {0.0, 0.0, 0.0};
};

namespace hull {

using I64 = std::int64_t;

struct P3 {
  I64 x = 0, y = 0, z = 0;  // here x/y/z are just axis slots
  P3 operator-(const P3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  bool operator==(const P3&) const = default;
};

inline P3 cross(const P3& a, const P3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline I64 dot(const P3& a, const P3& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}

// 2D hull (monotone chain) over (u, v) integer points; returns CCW polygon.
inline std::vector<std::array<I64, 2>> hull2d(std::vector<std::array<I64, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const std::size_t n = pts.size();
  if (n <= 2) return pts;
  auto cross2 = [](const std::array<I64, 2>& o, const std::array<I64, 2>& a,
                   const std::array<I64, 2>& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<I64, 2>> h(2 * n);
  std::size_t k = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (k >= 2 && cross2(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  const std::size_t lower = k + 1;
  for (std::size_t i = n - 1; i-- > 0;) {
    while (k >= lower && cross2(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

// point-in-convex-polygon, boundary inclusive (polygon is CCW)
inline bool in_poly(const std::vector<std::array<I64, 2>>& poly, I64 u, I64 v) {
  const std::size_t n = poly.size();
  if (n == 1) return u == poly[0][0] && v == poly[0][1];
  if (n == 2) {
    const I64 du = poly[1][0] - poly[0][0], dv = poly[1][1] - poly[0][1];
    const I64 pu = u - poly[0][0], pv = v - poly[0][1];
    if (du * pv - dv * pu != 0) return false;
    const I64 t = du * pu + dv * pv;
    return t >= 0 && t <= du * du + dv * dv;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % n];
    const I64 c =
        (b[0] - a[0]) * (v - a[1]) - (b[1] - a[1]) * (u - a[0]);
    if (c < 0) return false;
  }
  return true;
}

struct Face {
  int a, b, c;
  P3 n;      // outward normal (not normalized)
  I64 d;     // plane offset: dot(n, p) == d on the plane
};

// Quickhull over integer 3D points. Returns faces with outward normals;
// degenerate inputs (rank < 3) return an empty face list.
inline std::vector<Face> quickhull3(const std::vector<P3>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<Face> faces;
  if (n < 4) return faces;

  // initial extremes: most distant pair among axis extremes
  int ex[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 1; i < n; ++i) {
    if (pts[i].x < pts[ex[0]].x) ex[0] = i;
    if (pts[i].x > pts[ex[1]].x) ex[1] = i;
    if (pts[i].y < pts[ex[2]].y) ex[2] = i;
    if (pts[i].y > pts[ex[3]].y) ex[3] = i;
    if (pts[i].z < pts[ex[4]].z) ex[4] = i;
    if (pts[i].z > pts[ex[5]].z) ex[5] = i;
  }
  int p0 = ex[0], p1 = ex[1];
  I64 best = -1;
  for (int i = 0; i < 6; ++i)
    for (int j = i + 1; j < 6; ++j) {
      const P3 d = pts[ex[i]] - pts[ex[j]];
      const I64 l = dot(d, d);
      if (l > best) {
        best = l;
        p0 = ex[i];
        p1 = ex[j];
      }
    }
  if (best <= 0) return faces;  // all points identical

  // farthest from the p0-p1 line
  int p2 = -1;
  best = 0;
  for (int i = 0; i < n; ++i) {
    const P3 c = cross(pts[p1] - pts[p0], pts[i] - pts[p0]);
    const I64 l = dot(c, c);
    if (l > best) {
      best = l;
      p2 = i;
    }
  }
  if (p2 < 0) return faces;  // collinear

  // farthest from the p0-p1-p2 plane
  const P3 n012 = cross(pts[p1] - pts[p0], pts[p2] - pts[p0]);
  int p3 = -1;
  best = 0;
  for (int i = 0; i < n; ++i) {
    const I64 l = std::abs(dot(n012, pts[i] - pts[p0]));
    if (l > best) {
      best = l;
      p3 = i;
    }
  }
  if (p3 < 0) return faces;  // coplanar

  auto make_face = [&](int a, int b, int c, int opposite) {
    Face f;
    f.a = a;
    f.b = b;
    f.c = c;
    f.n = cross(pts[b] - pts[a], pts[c] - pts[a]);
    f.d = dot(f.n, pts[a]);
    if (dot(f.n, pts[opposite]) > f.d) {  // flip outward
      std::swap(f.b, f.c);
      f.n = cross(pts[f.b] - pts[f.a], pts[f.c] - pts[f.a]);
      f.d = dot(f.n, pts[f.a]);
    }
    return f;
  };

  faces.push_back(make_face(p0, p1, p2, p3));
  faces.push_back(make_face(p0, p1, p3, p2));
  faces.push_back(make_face(p0, p2, p3, p1));
  faces.push_back(make_face(p1, p2, p3, p0));

  // iterative expansion
  bool grew = true;
  while (grew) {
    grew = false;
    // farthest outside point over all faces
    int far_pt = -1, far_face = -1;
    I64 far_excess = 0;
    for (int fi = 0; fi < static_cast<int>(faces.size()); ++fi) {
      for (int i = 0; i < n; ++i) {
        const I64 e = dot(faces[fi].n, pts[i]) - faces[fi].d;
        if (e > far_excess) {
          far_excess = e;
          far_pt = i;
          far_face = fi;
        }
      }
    }
    if (far_pt < 0) break;
    (void)far_face;

    // visible faces and horizon edges
    std::vector<char> visible(faces.size(), 0);
    for (std::size_t fi = 0; fi < faces.size(); ++fi)
      visible[fi] = dot(faces[fi].n, pts[far_pt]) > faces[fi].d ? 1 : 0;

    std::vector<std::pair<int, int>> horizon;
    auto edge_key = [](int a, int b) {
      return std::pair<int, int>(std::min(a, b), std::max(a, b));
    };
    std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> edges;
    for (std::size_t fi = 0; fi < faces.size(); ++fi) {
      if (!visible[fi]) continue;
      const Face& f = faces[fi];
      const std::array<std::pair<int, int>, 3> es = {
          {{f.a, f.b}, {f.b, f.c}, {f.c, f.a}}};
      for (const auto& e : es) edges.push_back({edge_key(e.first, e.second), e});
    }
    std::sort(edges.begin(), edges.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    for (std::size_t i = 0; i < edges.size();) {
      std::size_t j = i + 1;
      while (j < edges.size() && edges[j].first == edges[i].first) ++j;
      if (j - i == 1) horizon.push_back(edges[i].second);  // shared once: horizon
      i = j;
    }

    std::vector<Face> next;
    for (std::size_t fi = 0; fi < faces.size(); ++fi)
      if (!visible[fi]) next.push_back(faces[fi]);
    for (const auto& e : horizon) {
      Face f;
      f.a = e.first;
      f.b = e.second;
      f.c = far_pt;
      f.n = cross(pts[f.b] - pts[f.a], pts[f.c] - pts[f.a]);
      f.d = dot(f.n, pts[f.a]);
      if (f.n == P3{0, 0, 0}) continue;  // degenerate sliver
      next.push_back(f);
    }
    faces.swap(next);
    grew = true;
  }
  return faces;
}

}  // namespace hull

// Number of lattice points (voxel centers) inside the convex hull of the
// region's voxel centers, boundary inclusive.
inline std::int64_t convex_hull_lattice_count(std::span<const Voxel> all_voxels,
                                              bool is_3d) {
  if (all_voxels.empty()) return 0;
  // hull vertices are x-extremes of their (z, y) row; dropping interior
  // row voxels keeps the hull identical and bounds quickhull's point count
  // by the region surface
  std::vector<Voxel> voxels;
  {
    std::vector<Voxel> sorted(all_voxels.begin(), all_voxels.end());
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
      std::size_t j = i;
      while (j + 1 < sorted.size() && sorted[j + 1].z == sorted[i].z &&
             sorted[j + 1].y == sorted[i].y)
        ++j;
      voxels.push_back(sorted[i]);
      if (j != i) voxels.push_back(sorted[j]);
      i = j + 1;
    }
  }

  Voxel lo = voxels[0], hi = voxels[0];
  for (const Voxel& v : voxels) {
    lo.z = std::min(lo.z, v.z);
    lo.y = std::min(lo.y, v.y);
    lo.x = std::min(lo.x, v.x);
    hi.z = std::max(hi.z, v.z);
    hi.y = std::max(hi.y, v.y);
    hi.x = std::max(hi.x, v.x);
  }

  if (!is_3d || lo.z == hi.z) {
    std::vector<std::array<hull::I64, 2>> pts;
    pts.reserve(voxels.size());
    for (const Voxel& v : voxels) pts.push_back({v.y, v.x});
    const auto poly = hull::hull2d(std::move(pts));
    std::int64_t count = 0;
    for (Index y = lo.y; y <= hi.y; ++y)
      for (Index x = lo.x; x <= hi.x; ++x)
        if (hull::in_poly(poly, y, x)) ++count;
    return count;
  }

  std::vector<hull::P3> pts;
  pts.reserve(voxels.size());
  for (const Voxel& v : voxels) pts.push_back({v.z, v.y, v.x});
  const auto faces = hull::quickhull3(pts);

  if (faces.empty()) {
    // rank < 3: all points coplanar. Project out the plane normal by brute
    // membership: a lattice point is inside iff it satisfies the plane
    // equation and falls in the 2D hull of two projected axes.
    // Find the plane from any three affinely independent points.
    hull::P3 a = pts[0];
    hull::P3 n{0, 0, 0};
    for (std::size_t i = 1; i < pts.size() && n == hull::P3{0, 0, 0}; ++i)
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        n = hull::cross(pts[i] - a, pts[j] - a);
        if (!(n == hull::P3{0, 0, 0})) break;
      }
    if (n == hull::P3{0, 0, 0}) {
      // collinear or single point: count lattice points on the segment
      hull::P3 far = pts[0];
      hull::I64 bl = 0;
      for (const auto& p : pts) {
        const hull::I64 l = hull::dot(p - pts[0], p - pts[0]);
        if (l > bl) {
          bl = l;
          far = p;
        }
      }
      hull::P3 other = pts[0];
      bl = 0;
      for (const auto& p : pts) {
        const hull::I64 l = hull::dot(p - far, p - far);
        if (l > bl) {
          bl = l;
          other = p;
        }
      }
      const hull::P3 d = far - other;
      std::int64_t count = 0;
      for (Index z = lo.z; z <= hi.z; ++z)
        for (Index y = lo.y; y <= hi.y; ++y)
          for (Index x = lo.x; x <= hi.x; ++x) {
            const hull::P3 p{z, y, x};
            const hull::P3 r = p - other;
            if (!(hull::cross(d, r) == hull::P3{0, 0, 0})) continue;
            const hull::I64 t = hull::dot(d, r);
            if (t >= 0 && t <= hull::dot(d, d)) ++count;
          }
      return count;
    }
    // coplanar: project to the two axes least aligned with the normal
    const hull::I64 az = std::abs(n.x), ay = std::abs(n.y), ax = std::abs(n.z);
    // n components are in (z, y, x) slots named x/y/z in P3; pick the axis
    // with the largest |normal| component to drop
    int drop = 0;  // 0: drop z, 1: drop y, 2: drop x
    if (ay >= az && ay >= ax) drop = 1;
    else if (ax >= az && ax >= ay) drop = 2;
    std::vector<std::array<hull::I64, 2>> p2;
    for (const auto& p : pts) {
      if (drop == 0) p2.push_back({p.y, p.z});
      else if (drop == 1) p2.push_back({p.x, p.z});
      else p2.push_back({p.x, p.y});
    }
    const auto poly = hull::hull2d(std::move(p2));
    std::int64_t count = 0;
    const hull::I64 d0 = hull::dot(n, a);
    for (Index z = lo.z; z <= hi.z; ++z)
      for (Index y = lo.y; y <= hi.y; ++y)
        for (Index x = lo.x; x <= hi.x; ++x) {
          const hull::P3 p{z, y, x};
          if (hull::dot(n, p) != d0) continue;
          std::array<hull::I64, 2> q;
          if (drop == 0) q = {p.y, p.z};
          else if (drop == 1) q = {p.x, p.z};
          else q = {p.x, p.y};
          if (hull::in_poly(poly, q[0], q[1])) ++count;
        }
    return count;
  }

  std::int64_t count = 0;
  for (Index z = lo.z; z <= hi.z; ++z)
    for (Index y = lo.y; y <= hi.y; ++y)
      for (Index x = lo.x; x <= hi.x; ++x) {
        bool inside = true;
        for (const auto& f : faces)
          if (hull::dot(f.n, {z, y, x}) > f.d) {
            inside = false;
            break;
          }
        if (inside) ++count;
      }
  return count;
}

inline RegionProps region_properties(std::span<const Voxel> voxels,
                                     const VolumeMeta& meta) {
  RegionProps rp;
  if (voxels.empty()) return rp;
  const bool is_3d = meta.is_3d;
  const double voxel_measure =
      is_3d ? meta.spacing_z * meta.spacing_y * meta.spacing_x
            : meta.spacing_y * meta.spacing_x;
  const double n = static_cast<double>(voxels.size());
  rp.area = n * voxel_measure;

  // bounding box extent
  Voxel lo = voxels[0], hi = voxels[0];
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const Voxel& v : voxels) {
    lo.z = std::min(lo.z, v.z);
    lo.y = std::min(lo.y, v.y);
    lo.x = std::min(lo.x, v.x);
    hi.z = std::max(hi.z, v.z);
    hi.y = std::max(hi.y, v.y);
    hi.x = std::max(hi.x, v.x);
    mean += v.to_um(meta);
  }
  mean /= n;
  const double bbox =
      static_cast<double>((hi.z - lo.z + 1) * (hi.y - lo.y + 1) *
                          (hi.x - lo.x + 1));
  rp.extent = n / bbox;

  rp.solidity = n / static_cast<double>(
                        convex_hull_lattice_count(voxels, is_3d));

  // covariance in physical um with the unit-voxel spread on the diagonal
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const Voxel& v : voxels) {
    const Eigen::Vector3d d = v.to_um(meta) - mean;
    cov += d * d.transpose();
  }
  cov /= n;
  const Eigen::Vector3d sp = meta.spacing_zyx();
  for (int a = 0; a < 3; ++a) cov(a, a) += sp[a] * sp[a] / 12.0;

  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (is_3d) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d ev = es.eigenvalues();  // ascending
    rp.axis_length_min = 2.0 * std::sqrt(5.0 * std::max(0.0, ev[0]));
    rp.axis_length_maj = 2.0 * std::sqrt(5.0 * std::max(0.0, ev[2]));
    const double tr = cov.trace();
    Eigen::Vector3d inertia{tr - ev[0], tr - ev[1], tr - ev[2]};
    std::sort(inertia.data(), inertia.data() + 3);
    rp.inertia_eigs_sorted = {inertia[0], inertia[1], inertia[2]};
  } else {
    const Eigen::Matrix2d c2 = cov.bottomRightCorner<2, 2>();
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(c2);
    const Eigen::Vector2d ev = es.eigenvalues();
    rp.axis_length_min = 4.0 * std::sqrt(std::max(0.0, ev[0]));
    rp.axis_length_maj = 4.0 * std::sqrt(std::max(0.0, ev[1]));
    const double tr = c2.trace();
    rp.inertia_eigs_sorted = {std::min(tr - ev[0], tr - ev[1]), nan,
                              std::max(tr - ev[0], tr - ev[1])};
  }
  return rp;
}

}  // namespace otk

#endif  // OTK_REGIONPROPS_HPP
