/* otk/segment.hpp
 *
 * Hierarchical deconstruction of a preprocessed frame: semantic mask ->
 * organelle instances -> skeleton -> branches -> nodes, plus the border
 * distance field and the voxel->branch adjacency map.
 */

#ifndef OTK_SEGMENT_HPP
#define OTK_SEGMENT_HPP

#include "otk/distance.hpp"
#include "otk/frangi.hpp"
#include "otk/labeling.hpp"
#include "otk/skeleton.hpp"
#include "otk/threshold.hpp"

#include <iostream>

namespace otk {

// Minotri threshold of the nonzero preprocessed values, 3D hole filling,
// then binary opening.
inline Mask semantic_mask(const EnhancedFrame& pre) {
  const VolumeF& v = pre.values;
  Mask mask(v.nz(), v.ny(), v.nx(), 0);
  const std::vector<float> nz = nonzero_values(v);
  if (nz.empty()) {
    std::cerr << "[otk] warning: empty preprocessed frame; empty mask\n";
    return mask;
  }
  const double thr = minotri_threshold(nz);
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[static_cast<Index>(i)] > thr) mask[static_cast<Index>(i)] = 1;
  if (pre.meta.is_3d) mask = fill_holes_3d(mask);
  mask = binary_open(mask, pre.meta.is_3d);
  if (count_nonzero(mask) == 0)
    std::cerr << "[otk] warning: semantic mask is empty\n";
  return mask;
}

struct FrameHierarchy {
  Mask semantic;
  VolumeU32 organelle_labels;
  Skeleton skeleton;
  VolumeU32 branch_labels;  // adjacency map over the whole mask
  VolumeU32 node_labels;    // skeleton voxel i -> node id i+1
  VolumeF distance;         // border distance field (um)
};

inline FrameHierarchy build_hierarchy(const EnhancedFrame& pre,
                                      const VolumeMeta& meta, int threads = 1) {
  FrameHierarchy h;
  h.semantic = semantic_mask(pre);
  h.organelle_labels = label_components(h.semantic, meta.is_3d);
  const Mask skel_mask = skeletonize(h.semantic, meta.is_3d);
  h.skeleton = classify_and_split_branches(skel_mask, meta.is_3d);
  h.branch_labels =
      assign_voxels_to_branches(h.organelle_labels, h.skeleton, meta, threads);
  h.node_labels = VolumeU32(h.semantic.nz(), h.semantic.ny(), h.semantic.nx(), 0);
  for (std::size_t i = 0; i < h.skeleton.size(); ++i)
    h.node_labels(h.skeleton.voxels[i]) = static_cast<std::uint32_t>(i + 1);
  h.distance = distance_transform_kdtree(h.semantic, meta, threads);
  return h;
}

}  // namespace otk

#endif  // OTK_SEGMENT_HPP
