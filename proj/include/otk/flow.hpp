/* otk/flow.hpp
 *
 * Sub-voxel flow interpolation from marker linkages, and the flow-guided
 * label propagation that keeps instance labels consistent through time.
 *
 * Forward flow at frame t is anchored at the source markers of forward
 * linkages (t -> t+1); backward flow at frame t is anchored at the
 * destination markers of the (t-1 -> t) backward linkages with negated
 * vectors. A coordinate of interest gathers anchors within the maximum
 * travel distance and blends their vectors with weights
 * (1 - d/d_max) / (1 + shifted_cost), normalized; no anchors in range
 * yields a zero vector flagged unanchored.
 */

#ifndef OTK_FLOW_HPP
#define OTK_FLOW_HPP

#include "otk/kdtree.hpp"
#include "otk/linking.hpp"
#include "otk/parallel.hpp"
#include "otk/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <queue>
#include <vector>

namespace otk {

struct FlowAnchors {
  std::vector<Eigen::Vector3d> coords;   // anchor positions (um)
  std::vector<Eigen::Vector3d> vectors;  // displacement over one frame (um)
  std::vector<double> shifted_cost;      // cost - min finite cost, >= 0
  KdTree tree;

  bool empty() const { return coords.empty(); }
};

namespace detail {

inline double min_finite_cost(const std::vector<Linkage>& links) {
  double m = std::numeric_limits<double>::infinity();
  for (const Linkage& l : links)
    if (std::isfinite(l.cost)) m = std::min(m, l.cost);
  return std::isfinite(m) ? m : 0.0;
}

}  // namespace detail

// Anchors for interpolating frame-t motion toward t+1.
inline FlowAnchors forward_anchors(const std::vector<MocapMarker>& markers_t,
                                   const std::vector<MocapMarker>& markers_t1,
                                   const std::vector<Linkage>& links) {
  FlowAnchors a;
  const double shift = detail::min_finite_cost(links);
  for (const Linkage& l : links) {
    if (l.direction != LinkDirection::Forward) continue;
    a.coords.push_back(markers_t[l.src].coord_um);
    a.vectors.push_back(markers_t1[l.dst].coord_um - markers_t[l.src].coord_um);
    a.shifted_cost.push_back(l.cost - shift);
  }
  a.tree = KdTree(a.coords);
  return a;
}

// Anchors for interpolating frame-t motion back toward t-1, built from the
// (t-1 -> t) linkage set.
inline FlowAnchors backward_anchors(const std::vector<MocapMarker>& markers_prev,
                                    const std::vector<MocapMarker>& markers_t,
                                    const std::vector<Linkage>& links) {
  FlowAnchors a;
  const double shift = detail::min_finite_cost(links);
  for (const Linkage& l : links) {
    if (l.direction != LinkDirection::Backward) continue;
    a.coords.push_back(markers_t[l.dst].coord_um);
    a.vectors.push_back(markers_prev[l.src].coord_um - markers_t[l.dst].coord_um);
    a.shifted_cost.push_back(l.cost - shift);
  }
  a.tree = KdTree(a.coords);
  return a;
}

struct FlowSample {
  Eigen::Vector3d v = Eigen::Vector3d::Zero();  // um over one frame interval
  bool anchored = false;
};

inline FlowSample interpolate_flow_at(const FlowAnchors& anchors,
                                      const Eigen::Vector3d& coi,
                                      double max_dist_um) {
  FlowSample s;
  if (anchors.empty()) return s;
  const std::vector<int> near = anchors.tree.radius(coi, max_dist_um);
  double wsum = 0.0;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (int i : near) {
    const double d = (anchors.coords[i] - coi).norm();
    const double w =
        (1.0 - d / max_dist_um) / (1.0 + anchors.shifted_cost[i]);
    if (w <= 0.0) continue;
    wsum += w;
    acc += w * anchors.vectors[i];
  }
  if (wsum <= 0.0) return s;
  s.v = acc / wsum;
  s.anchored = true;
  return s;
}

inline std::vector<FlowSample> interpolate_flow(
    const FlowAnchors& anchors, const std::vector<Eigen::Vector3d>& cois,
    double max_dist_um, int threads = 1) {
  std::vector<FlowSample> out(cois.size());
  parallel_for(static_cast<std::int64_t>(cois.size()), threads,
               [&](std::int64_t i) {
                 out[static_cast<std::size_t>(i)] = interpolate_flow_at(
                     anchors, cois[static_cast<std::size_t>(i)], max_dist_um);
               });
  return out;
}

// Flow-guided label propagation from frame t to t+1; fragments keep their
// source label through fission and fusion events.
//
// 1. predict every labeled frame-t voxel forward and every frame-t+1 mask
//    voxel backward;
// 2. candidate matches both ways within the max travel distance;
// 3. assign by ascending match distance, one label per t+1 voxel;
// 4. leftover mask voxels take the nearest already-labeled voxel's label
//    within the max distance, repeated until the unlabeled count stops
//    shrinking.
inline VolumeU32 propagate_labels(const VolumeU32& labels_t, const Mask& mask_t1,
                                  const FlowAnchors& fwd, const FlowAnchors& bwd,
                                  const VolumeMeta& meta, double max_dist_um,
                                  int threads = 1) {
  VolumeU32 out(mask_t1.nz(), mask_t1.ny(), mask_t1.nx(), 0);

  std::vector<Index> src;  // labeled frame-t voxels
  for (std::size_t i = 0; i < labels_t.size(); ++i)
    if (labels_t[static_cast<Index>(i)]) src.push_back(static_cast<Index>(i));
  std::vector<Index> dst;  // frame-t+1 mask voxels
  for (std::size_t i = 0; i < mask_t1.size(); ++i)
    if (mask_t1[static_cast<Index>(i)]) dst.push_back(static_cast<Index>(i));
  if (src.empty() || dst.empty()) return out;

  std::vector<Eigen::Vector3d> src_um(src.size()), src_pred(src.size());
  parallel_for(static_cast<std::int64_t>(src.size()), threads, [&](std::int64_t k) {
    const Eigen::Vector3d p = labels_t.unflat(src[k]).to_um(meta);
    src_um[k] = p;
    src_pred[k] = p + interpolate_flow_at(fwd, p, max_dist_um).v;
  });
  std::vector<Eigen::Vector3d> dst_um(dst.size()), dst_pred(dst.size());
  parallel_for(static_cast<std::int64_t>(dst.size()), threads, [&](std::int64_t k) {
    const Eigen::Vector3d p = mask_t1.unflat(dst[k]).to_um(meta);
    dst_um[k] = p;
    dst_pred[k] = p + interpolate_flow_at(bwd, p, max_dist_um).v;
  });

  // candidate matches, pooled from both directions
  struct Match {
    double dist;
    std::uint32_t dst_idx;
    std::uint32_t src_idx;
    bool operator>(const Match& o) const {
      if (dist != o.dist) return dist > o.dist;
      if (dst_idx != o.dst_idx) return dst_idx > o.dst_idx;
      return src_idx > o.src_idx;
    }
  };
  std::vector<Match> matches;
  matches.reserve(src.size() + dst.size());

  {
    const KdTree tree_dst_pred(dst_pred);
    std::vector<Match> m1(src.size(), Match{-1.0, 0, 0});
    parallel_for(static_cast<std::int64_t>(src.size()), threads, [&](std::int64_t k) {
      const KdTree::Hit h = tree_dst_pred.nearest(src_um[k]);
      const double d = std::sqrt(h.dist2);
      if (d <= max_dist_um)
        m1[k] = Match{d, static_cast<std::uint32_t>(h.index),
                      static_cast<std::uint32_t>(k)};
    });
    for (const Match& m : m1)
      if (m.dist >= 0.0) matches.push_back(m);

    const KdTree tree_src_pred(src_pred);
    std::vector<Match> m2(dst.size(), Match{-1.0, 0, 0});
    parallel_for(static_cast<std::int64_t>(dst.size()), threads, [&](std::int64_t k) {
      const KdTree::Hit h = tree_src_pred.nearest(dst_um[k]);
      const double d = std::sqrt(h.dist2);
      if (d <= max_dist_um)
        m2[k] = Match{d, static_cast<std::uint32_t>(k),
                      static_cast<std::uint32_t>(h.index)};
    });
    for (const Match& m : m2)
      if (m.dist >= 0.0) matches.push_back(m);
  }

  std::priority_queue<Match, std::vector<Match>, std::greater<Match>> heap(
      std::greater<Match>(), std::move(matches));
  while (!heap.empty()) {
    const Match m = heap.top();
    heap.pop();
    std::uint32_t& cell = out[dst[m.dst_idx]];
    if (cell == 0) cell = labels_t[src[m.src_idx]];
  }

  // fill remaining mask voxels from their nearest labeled neighbor
  std::vector<std::size_t> unlabeled;
  for (std::size_t k = 0; k < dst.size(); ++k)
    if (out[dst[k]] == 0) unlabeled.push_back(k);

  while (!unlabeled.empty()) {
    std::vector<Eigen::Vector3d> labeled_um;
    std::vector<std::uint32_t> labeled_val;
    for (std::size_t k = 0; k < dst.size(); ++k)
      if (out[dst[k]] != 0) {
        labeled_um.push_back(dst_um[k]);
        labeled_val.push_back(out[dst[k]]);
      }
    if (labeled_um.empty()) break;
    const KdTree tree(labeled_um);

    std::vector<std::uint32_t> assign(unlabeled.size(), 0);
    parallel_for(static_cast<std::int64_t>(unlabeled.size()), threads,
                 [&](std::int64_t i) {
                   const std::size_t k = unlabeled[static_cast<std::size_t>(i)];
                   const KdTree::Hit h = tree.nearest(dst_um[k]);
                   if (std::sqrt(h.dist2) <= max_dist_um)
                     assign[static_cast<std::size_t>(i)] = labeled_val[h.index];
                 });

    std::vector<std::size_t> still;
    for (std::size_t i = 0; i < unlabeled.size(); ++i) {
      if (assign[i]) out[dst[unlabeled[i]]] = assign[i];
      else still.push_back(unlabeled[i]);
    }
    if (still.size() == unlabeled.size()) break;  // stabilized
    unlabeled.swap(still);
  }
  return out;
}

}  // namespace otk

#endif  // OTK_FLOW_HPP
