/* otk/skeleton.hpp
 *
 * Topology-preserving thinning to single-voxel-wide skeletons, and the
 * junction-removal branch decomposition.
 *
 * Thinning deletes simple border points in six directional subpasses per
 * iteration (four in 2D), with sequential rechecking inside each subpass,
 * until stable. A point is simple iff removing it changes neither the
 * foreground (26-connectivity) nor the background (6-connectivity)
 * topology in its 3x3x3 neighborhood; endpoints (exactly one neighbor)
 * are kept so solids reduce to medial axes. 2D masks run as single-slice
 * volumes, where the same test reduces to (8,4) simplicity.
 */

#ifndef OTK_SKELETON_HPP
#define OTK_SKELETON_HPP

#include "otk/labeling.hpp"
#include "otk/morphology.hpp"
#include "otk/volume.hpp"

#include <array>
#include <cstdint>
#include <vector>

namespace otk {

namespace detail {

// Positions are 0..26 over the 3x3x3 cube, center = 13.
inline int nb_index(int dz, int dy, int dx) {
  return (dz + 1) * 9 + (dy + 1) * 3 + (dx + 1);
}

inline void gather_neighborhood(const Mask& m, Index z, Index y, Index x,
                                std::array<std::uint8_t, 27>& nb) {
  int i = 0;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx, ++i) {
        const Index cz = z + dz, cy = y + dy, cx = x + dx;
        nb[i] = m.in_bounds(cz, cy, cx) ? m(cz, cy, cx) : 0;
      }
}

// Number of 26-connected components of the foreground within the 26
// neighbors (center excluded).
inline int foreground_components26(const std::array<std::uint8_t, 27>& nb) {
  std::array<std::uint8_t, 27> seen{};
  int comps = 0;
  std::array<int, 27> stack;
  for (int start = 0; start < 27; ++start) {
    if (start == 13 || !nb[start] || seen[start]) continue;
    ++comps;
    int top = 0;
    stack[top++] = start;
    seen[start] = 1;
    while (top > 0) {
      const int cur = stack[--top];
      const int cz = cur / 9 - 1, cy = (cur / 3) % 3 - 1, cx = cur % 3 - 1;
      for (int dz = -1; dz <= 1; ++dz)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nz = cz + dz, ny = cy + dy, nx = cx + dx;
            if (nz < -1 || nz > 1 || ny < -1 || ny > 1 || nx < -1 || nx > 1)
              continue;
            const int ni = nb_index(nz, ny, nx);
            if (ni == 13 || seen[ni] || !nb[ni]) continue;
            seen[ni] = 1;
            stack[top++] = ni;
          }
    }
  }
  return comps;
}

// Number of 6-connected background components within the 18-neighborhood
// that touch a face neighbor of the center.
inline int background_components6(const std::array<std::uint8_t, 27>& nb) {
  auto in_n18 = [](int i) {
    if (i == 13) return false;
    const int dz = i / 9 - 1, dy = (i / 3) % 3 - 1, dx = i % 3 - 1;
    return std::abs(dz) + std::abs(dy) + std::abs(dx) <= 2;
  };
  static constexpr std::array<int, 6> faces = {4, 10, 12, 14, 16, 22};

  std::array<std::uint8_t, 27> seen{};
  int comps = 0;
  std::array<int, 27> stack;
  for (int f : faces) {
    if (nb[f] || seen[f]) continue;
    ++comps;
    int top = 0;
    stack[top++] = f;
    seen[f] = 1;
    while (top > 0) {
      const int cur = stack[--top];
      const int cz = cur / 9 - 1, cy = (cur / 3) % 3 - 1, cx = cur % 3 - 1;
      const std::array<std::array<int, 3>, 6> steps = {
          {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}}};
      for (const auto& s : steps) {
        const int nz = cz + s[0], ny = cy + s[1], nx = cx + s[2];
        if (nz < -1 || nz > 1 || ny < -1 || ny > 1 || nx < -1 || nx > 1)
          continue;
        const int ni = nb_index(nz, ny, nx);
        if (!in_n18(ni) || seen[ni] || nb[ni]) continue;
        seen[ni] = 1;
        stack[top++] = ni;
      }
    }
  }
  return comps;
}

}  // namespace detail

inline int count_neighbors_full(const Mask& m, Index z, Index y, Index x,
                                bool is_3d) {
  int n = 0;
  const Index zr = is_3d ? 1 : 0;
  for (Index dz = -zr; dz <= zr; ++dz)
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && dy == 0 && dx == 0) continue;
        if (m.in_bounds(z + dz, y + dy, x + dx) && m(z + dz, y + dy, x + dx))
          ++n;
      }
  return n;
}

// Deleting a simple point preserves both foreground and background topology
// (Malandain & Bertrand characterization for the (26, 6) connectivity pair).
inline bool is_simple_point(const Mask& m, Index z, Index y, Index x) {
  std::array<std::uint8_t, 27> nb;
  detail::gather_neighborhood(m, z, y, x, nb);
  if (detail::foreground_components26(nb) != 1) return false;
  return detail::background_components6(nb) == 1;
}

namespace detail {

// voxel participates in a fully-set 2x2 (2D) / 2x2x2 (3D) block
inline bool in_full_block(const Mask& m, Index z, Index y, Index x, bool is_3d) {
  const Index zr = is_3d ? 1 : 0;
  for (Index oz = -zr; oz <= 0; ++oz)
    for (Index oy = -1; oy <= 0; ++oy)
      for (Index ox = -1; ox <= 0; ++ox) {
        bool all = true;
        for (Index dz = 0; dz <= zr && all; ++dz)
          for (Index dy = 0; dy <= 1 && all; ++dy)
            for (Index dx = 0; dx <= 1 && all; ++dx) {
              const Index cz = z + oz + dz, cy = y + oy + dy, cx = x + ox + dx;
              all = m.in_bounds(cz, cy, cx) && m(cz, cy, cx);
            }
        if (all) return true;
      }
  return false;
}

// true when the block with the given min corner is fully set and none of
// its members is a simple point (a "locked" block: no topology-preserving
// deletion can ever thin it)
inline bool block_locked(const Mask& m, Index bz, Index by, Index bx,
                         bool is_3d) {
  const Index zr = is_3d ? 1 : 0;
  for (Index dz = 0; dz <= zr; ++dz)
    for (Index dy = 0; dy <= 1; ++dy)
      for (Index dx = 0; dx <= 1; ++dx) {
        const Index cz = bz + dz, cy = by + dy, cx = bx + dx;
        if (!m.in_bounds(cz, cy, cx) || !m(cz, cy, cx)) return false;
      }
  for (Index dz = 0; dz <= zr; ++dz)
    for (Index dy = 0; dy <= 1; ++dy)
      for (Index dx = 0; dx <= 1; ++dx)
        if (is_simple_point(m, bz + dz, by + dy, bx + dx)) return false;
  return true;
}

// A deletion is deferred when it would flip a nearby fully-set block from
// breakable to locked (diagonal arms pinning it). Blocks that are already
// locked in the bulk interior are ignored: erosion unlocks them later, and
// from then on this guard keeps them breakable until the block subpass
// thins them.
inline bool deletion_locks_block(Mask& m, const Voxel& q, bool is_3d) {
  const Index zr = is_3d ? 1 : 0;
  bool locks = false;
  for (Index oz = -2 * zr; oz <= zr && !locks; ++oz)
    for (Index oy = -2; oy <= 1 && !locks; ++oy)
      for (Index ox = -2; ox <= 1 && !locks; ++ox) {
        const Index bz = q.z + oz, by = q.y + oy, bx = q.x + ox;
        if (block_locked(m, bz, by, bx, is_3d)) continue;  // not our doing
        m(q) = 0;
        const bool locked_after = block_locked(m, bz, by, bx, is_3d);
        m(q) = 1;
        if (locked_after) locks = true;
      }
  return locks;
}

}  // namespace detail

inline Mask skeletonize(const Mask& mask, bool is_3d) {
  Mask out = mask;
  std::vector<Voxel> dirs;
  if (is_3d) dirs = {{-1, 0, 0}, {1, 0, 0}};
  dirs.insert(dirs.end(),
              {{0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}});

  std::vector<Voxel> candidates;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const Voxel& d : dirs) {
      candidates.clear();
      for (Index z = 0; z < out.nz(); ++z)
        for (Index y = 0; y < out.ny(); ++y)
          for (Index x = 0; x < out.nx(); ++x) {
            if (!out(z, y, x)) continue;
            const Index bz = z + d.z, by = y + d.y, bx = x + d.x;
            const bool border =
                !out.in_bounds(bz, by, bx) || !out(bz, by, bx);
            if (!border) continue;
            if (count_neighbors_full(out, z, y, x, is_3d) <= 1) continue;
            if (!is_simple_point(out, z, y, x)) continue;
            candidates.push_back({z, y, x});
          }
      // sequential recheck: earlier deletions in this subpass may have
      // made a candidate non-simple or an endpoint
      for (const Voxel& p : candidates) {
        if (count_neighbors_full(out, p.z, p.y, p.x, is_3d) <= 1) continue;
        if (!is_simple_point(out, p.z, p.y, p.x)) continue;
        if (detail::deletion_locks_block(out, p, is_3d)) continue;  // defer
        out(p) = 0;
        changed = true;
      }
    }

    // block-breaking subpass: thin remaining fully-set squares/cubes while
    // their members are still simple, so diagonal arms revealed later
    // cannot pin a block in place
    candidates.clear();
    for (Index z = 0; z < out.nz(); ++z)
      for (Index y = 0; y < out.ny(); ++y)
        for (Index x = 0; x < out.nx(); ++x) {
          if (!out(z, y, x)) continue;
          if (!detail::in_full_block(out, z, y, x, is_3d)) continue;
          if (count_neighbors_full(out, z, y, x, is_3d) <= 1) continue;
          if (!is_simple_point(out, z, y, x)) continue;
          candidates.push_back({z, y, x});
        }
    for (const Voxel& p : candidates) {
      if (!detail::in_full_block(out, p.z, p.y, p.x, is_3d)) continue;
      if (count_neighbors_full(out, p.z, p.y, p.x, is_3d) <= 1) continue;
      if (!is_simple_point(out, p.z, p.y, p.x)) continue;
      if (detail::deletion_locks_block(out, p, is_3d)) continue;
      out(p) = 0;
      changed = true;
    }
  }
  return out;
}

enum class SkelClass : std::uint8_t { LoneTip = 0, Tip = 1, Edge = 2, Junction = 3 };

inline SkelClass classify_by_degree(int n) {
  if (n == 0) return SkelClass::LoneTip;
  if (n == 1) return SkelClass::Tip;
  if (n == 2) return SkelClass::Edge;
  return SkelClass::Junction;
}

// Skeleton voxels in scan order with their class and branch id. Junction
// voxels (by original neighbor count) carry branch id 0; remaining voxels
// are classified after junction removal, so voxels that lost a junction
// neighbor become tips.
struct Skeleton {
  std::vector<Voxel> voxels;
  std::vector<SkelClass> cls;
  std::vector<std::uint32_t> branch_id;  // 0 = none
  std::uint32_t n_branches = 0;
  Index nz = 0, ny = 0, nx = 0;

  std::size_t size() const { return voxels.size(); }

  Mask to_mask() const {
    Mask m(nz, ny, nx, 0);
    for (const Voxel& v : voxels) m(v) = 1;
    return m;
  }
};

inline Skeleton classify_and_split_branches(const Mask& skel_mask, bool is_3d) {
  Skeleton sk;
  sk.nz = skel_mask.nz();
  sk.ny = skel_mask.ny();
  sk.nx = skel_mask.nx();

  // original classification decides which voxels are junctions
  Mask pruned = skel_mask;
  for (Index z = 0; z < skel_mask.nz(); ++z)
    for (Index y = 0; y < skel_mask.ny(); ++y)
      for (Index x = 0; x < skel_mask.nx(); ++x) {
        if (!skel_mask(z, y, x)) continue;
        const int n = count_neighbors_full(skel_mask, z, y, x, is_3d);
        if (classify_by_degree(n) == SkelClass::Junction) pruned(z, y, x) = 0;
      }

  const VolumeU32 branch_labels = label_components(pruned, is_3d);

  for (Index z = 0; z < skel_mask.nz(); ++z)
    for (Index y = 0; y < skel_mask.ny(); ++y)
      for (Index x = 0; x < skel_mask.nx(); ++x) {
        if (!skel_mask(z, y, x)) continue;
        sk.voxels.push_back({z, y, x});
        if (!pruned(z, y, x)) {
          sk.cls.push_back(SkelClass::Junction);
          sk.branch_id.push_back(0);
        } else {
          // re-classified degree within the pruned skeleton
          const int n = count_neighbors_full(pruned, z, y, x, is_3d);
          sk.cls.push_back(classify_by_degree(n));
          sk.branch_id.push_back(branch_labels(z, y, x));
        }
      }
  sk.n_branches = max_label(branch_labels);
  return sk;
}

}  // namespace otk

#endif  // OTK_SKELETON_HPP
