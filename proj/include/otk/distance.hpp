/* otk/distance.hpp
 *
 * Border distance transform via a k-d tree over the mask border, and the
 * nearest-skeleton branch adjacency map.
 *
 * The border is the one-voxel full-connectivity dilation of the mask minus
 * the mask, computed over a virtual one-voxel background pad so a border
 * exists even when the mask touches the grid edge. All distances are
 * Euclidean in physical micrometers.
 */

#ifndef OTK_DISTANCE_HPP
#define OTK_DISTANCE_HPP

#include "otk/kdtree.hpp"
#include "otk/morphology.hpp"
#include "otk/parallel.hpp"
#include "otk/skeleton.hpp"
#include "otk/volume.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace otk {

// Background voxels (including out-of-grid pad positions) adjacent to the
// mask under full connectivity, as physical um coordinates.
inline std::vector<Eigen::Vector3d> border_coordinates_um(const Mask& mask,
                                                          const VolumeMeta& meta) {
  const auto offs = neighbor_offsets(meta.is_3d, /*full=*/true);
  // padded flag grid for dedup; +1 offset on each axis
  Mask flag(mask.nz() + 2, mask.ny() + 2, mask.nx() + 2, 0);
  std::vector<Eigen::Vector3d> out;
  for (Index z = 0; z < mask.nz(); ++z)
    for (Index y = 0; y < mask.ny(); ++y)
      for (Index x = 0; x < mask.nx(); ++x) {
        if (!mask(z, y, x)) continue;
        for (const Voxel& o : offs) {
          const Index bz = z + o.z, by = y + o.y, bx = x + o.x;
          if (mask.in_bounds(bz, by, bx) && mask(bz, by, bx)) continue;
          std::uint8_t& seen = flag(bz + 1, by + 1, bx + 1);
          if (seen) continue;
          seen = 1;
          out.push_back(Voxel{bz, by, bx}.to_um(meta));
        }
      }
  return out;
}

// Micrometer distance to the nearest border voxel for every mask voxel;
// 0 outside the mask.
inline VolumeF distance_transform_kdtree(const Mask& mask, const VolumeMeta& meta,
                                         int threads = 1) {
  VolumeF dist(mask.nz(), mask.ny(), mask.nx(), 0.0f);
  const std::vector<Eigen::Vector3d> border = border_coordinates_um(mask, meta);
  if (border.empty()) return dist;  // empty mask
  const KdTree tree(border);

  std::vector<Index> fg;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask[static_cast<Index>(i)]) fg.push_back(static_cast<Index>(i));

  parallel_for(static_cast<std::int64_t>(fg.size()), threads, [&](std::int64_t k) {
    const Index i = fg[static_cast<std::size_t>(k)];
    const Eigen::Vector3d q = mask.unflat(i).to_um(meta);
    dist[i] = static_cast<float>(std::sqrt(tree.nearest(q).dist2));
  });
  return dist;
}

// Each mask voxel takes the branch id of its nearest branch-labeled
// skeleton voxel of the same organelle (distance ties -> lowest branch id,
// then scan order). Components whose skeleton carries no branch labels get
// a fresh branch id.
inline VolumeU32 assign_voxels_to_branches(const VolumeU32& organelle_labels,
                                           const Skeleton& skel,
                                           const VolumeMeta& meta,
                                           int threads = 1) {
  VolumeU32 out(organelle_labels.nz(), organelle_labels.ny(),
                organelle_labels.nx(), 0);
  const std::uint32_t n_organelles = max_label(organelle_labels);
  if (n_organelles == 0) return out;

  // group branch-labeled skeleton voxels by organelle
  std::vector<std::vector<Eigen::Vector3d>> pts(n_organelles + 1);
  std::vector<std::vector<std::uint32_t>> ranks(n_organelles + 1);
  for (std::size_t i = 0; i < skel.size(); ++i) {
    if (skel.branch_id[i] == 0) continue;
    const std::uint32_t org = organelle_labels(skel.voxels[i]);
    if (org == 0) continue;
    pts[org].push_back(skel.voxels[i].to_um(meta));
    ranks[org].push_back(skel.branch_id[i]);
  }

  std::vector<KdTree> trees(n_organelles + 1);
  std::uint32_t fresh = skel.n_branches;
  std::vector<std::uint32_t> fallback(n_organelles + 1, 0);
  for (std::uint32_t o = 1; o <= n_organelles; ++o) {
    if (pts[o].empty()) fallback[o] = ++fresh;
    else trees[o] = KdTree(pts[o]);
  }

  std::vector<Index> fg;
  for (std::size_t i = 0; i < organelle_labels.size(); ++i)
    if (organelle_labels[static_cast<Index>(i)]) fg.push_back(static_cast<Index>(i));

  parallel_for(static_cast<std::int64_t>(fg.size()), threads, [&](std::int64_t k) {
    const Index i = fg[static_cast<std::size_t>(k)];
    const std::uint32_t org = organelle_labels[i];
    if (fallback[org]) {
      out[i] = fallback[org];
      return;
    }
    const Eigen::Vector3d q = organelle_labels.unflat(i).to_um(meta);
    const KdTree::Hit hit = trees[org].nearest(q, ranks[org]);
    out[i] = ranks[org][hit.index];
  });
  return out;
}

}  // namespace otk

#endif  // OTK_DISTANCE_HPP
