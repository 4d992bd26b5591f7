/* otk/multimesh.hpp
 *
 * Per-organelle multi-level mesh graphs over skeleton nodes. The base
 * graph links nodes within sqrt(3) voxel units (the 26-neighborhood);
 * jump distances are hop counts from a preferentially-tip start node, and
 * level L >= 1 links node pairs whose jump distances differ by exactly
 * 2^L and that are joined by a base-graph walk of 2^L unit-ascending
 * steps. Level 0 is the base adjacency itself.
 */

#ifndef OTK_MULTIMESH_HPP
#define OTK_MULTIMESH_HPP

#include "otk/feature_table.hpp"
#include "otk/kdtree.hpp"
#include "otk/segment.hpp"

#include <algorithm>
#include <cstdint>
#include <deque>
#include <set>
#include <vector>

namespace otk {

struct MeshLevel {
  int level = 0;
  std::vector<int> valid;                     // local node ids
  std::vector<std::pair<int, int>> edges;     // local node id pairs
};

struct MultiMesh {
  std::uint32_t organelle_label = 0;
  std::vector<std::size_t> nodes;  // global skeleton indices, ascending
  std::vector<std::vector<int>> adjacency;  // local ids, each list ascending
  int start = 0;
  std::vector<int> jump_dist;
  std::vector<MeshLevel> levels;
};

// 26-neighborhood adjacency via an inclusive sqrt(3) radius query in voxel
// units; self-edges excluded, neighbor lists ascending.
inline std::vector<std::vector<int>> neighbor_graph(
    const std::vector<Voxel>& voxels) {
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(voxels.size());
  for (const Voxel& v : voxels)
    pts.push_back({static_cast<double>(v.z), static_cast<double>(v.y),
                   static_cast<double>(v.x)});
  const KdTree tree(pts);
  std::vector<std::vector<int>> adj(voxels.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    for (int j : tree.radius2(pts[i], 3.0))
      if (j != static_cast<int>(i)) adj[i].push_back(j);
  }
  return adj;
}

// Lowest-id tip (single neighbor); closed networks fall back to node 0.
inline int select_start_node(const std::vector<std::vector<int>>& adj) {
  for (std::size_t i = 0; i < adj.size(); ++i)
    if (adj[i].size() == 1) return static_cast<int>(i);
  return 0;
}

// Breadth-order hop counts from the start node (-1 for unreachable nodes,
// which cannot occur for a connected component).
inline std::vector<int> jump_distances(const std::vector<std::vector<int>>& adj,
                                       int start) {
  std::vector<int> dist(adj.size(), -1);
  std::deque<int> queue;
  dist[start] = 0;
  queue.push_back(start);
  while (!queue.empty()) {
    const int cur = queue.front();
    queue.pop_front();
    for (int nb : adj[cur])
      if (dist[nb] < 0) {
        dist[nb] = dist[cur] + 1;
        queue.push_back(nb);
      }
  }
  return dist;
}

inline std::vector<MeshLevel> build_levels(
    const std::vector<std::vector<int>>& adj, const std::vector<int>& jump) {
  int max_jump = 0;
  for (int j : jump) max_jump = std::max(max_jump, j);
  int max_level = 0;
  while ((1 << (max_level + 1)) <= max_jump) ++max_level;

  std::vector<MeshLevel> levels;
  for (int L = 0; L <= max_level; ++L) {
    MeshLevel lvl;
    lvl.level = L;
    const int span = 1 << L;
    for (std::size_t i = 0; i < adj.size(); ++i)
      if (jump[i] % span == 0) lvl.valid.push_back(static_cast<int>(i));

    if (L == 0) {
      for (std::size_t i = 0; i < adj.size(); ++i)
        for (int nb : adj[i])
          if (static_cast<int>(i) < nb)
            lvl.edges.push_back({static_cast<int>(i), nb});
    } else {
      // BFS restricted to unit-ascending jump steps: a walk of 'span'
      // such steps ends at jump + span with strictly intermediate
      // interior jumps by construction
      for (int u : lvl.valid) {
        std::set<int> frontier = {u};
        for (int step = 0; step < span && !frontier.empty(); ++step) {
          std::set<int> next;
          for (int cur : frontier)
            for (int nb : adj[cur])
              if (jump[nb] == jump[cur] + 1) next.insert(nb);
          frontier.swap(next);
        }
        for (int v : frontier) lvl.edges.push_back({u, v});
      }
    }
    levels.push_back(std::move(lvl));
  }
  return levels;
}

inline MultiMesh build_multimesh(const std::vector<std::size_t>& skeleton_indices,
                                 const Skeleton& sk,
                                 std::uint32_t organelle_label) {
  MultiMesh mesh;
  mesh.organelle_label = organelle_label;
  mesh.nodes = skeleton_indices;
  std::vector<Voxel> voxels;
  voxels.reserve(skeleton_indices.size());
  for (std::size_t k : skeleton_indices) voxels.push_back(sk.voxels[k]);
  mesh.adjacency = neighbor_graph(voxels);
  mesh.start = select_start_node(mesh.adjacency);
  mesh.jump_dist = jump_distances(mesh.adjacency, mesh.start);
  mesh.levels = build_levels(mesh.adjacency, mesh.jump_dist);
  return mesh;
}

// One mesh per organelle with a nonempty skeleton, ascending label order.
inline std::vector<MultiMesh> build_frame_multimeshes(const FrameHierarchy& h) {
  const std::uint32_t n_orgs = max_label(h.organelle_labels);
  std::vector<std::vector<std::size_t>> groups(n_orgs + 1);
  for (std::size_t k = 0; k < h.skeleton.size(); ++k) {
    const std::uint32_t o = h.organelle_labels(h.skeleton.voxels[k]);
    if (o > 0) groups[o].push_back(k);
  }
  std::vector<MultiMesh> meshes;
  for (std::uint32_t o = 1; o <= n_orgs; ++o)
    if (!groups[o].empty()) meshes.push_back(build_multimesh(groups[o], h.skeleton, o));
  return meshes;
}

// Export tables: one node row per skeleton node with z-scored features
// pulled from the node feature table, and one edge row per (level, u, v)
// with global node ids.
struct MultimeshTables {
  FeatureTable nodes;
  FeatureTable edges;
};

inline MultimeshTables export_multimesh(
    const std::vector<MultiMesh>& meshes, const FeatureTable& node_features,
    const VolumeMeta& meta, const Skeleton& sk, int frame_index,
    const std::vector<std::string>& feature_columns = {
        "voxel_intensity_raw_mean", "voxel_structure_raw_mean",
        "voxel_lin_vel_mag_raw_mean", "voxel_ang_vel_mag_raw_mean"}) {
  MultimeshTables out;

  FeatureTable& nt = out.nodes;
  const int c_frame = nt.add_column("frame", FeatureTable::ColKind::Int);
  const int c_id = nt.add_column("node_id", FeatureTable::ColKind::Int);
  const int c_org = nt.add_column("organelle_label", FeatureTable::ColKind::Int);
  const int c_z = nt.add_column("z_um", FeatureTable::ColKind::Scalar);
  const int c_y = nt.add_column("y_um", FeatureTable::ColKind::Scalar);
  const int c_x = nt.add_column("x_um", FeatureTable::ColKind::Scalar);
  std::vector<int> feat_src, feat_dst;
  for (const std::string& name : feature_columns) {
    const int src = node_features.find(name);
    if (src < 0) continue;
    feat_src.push_back(src);
    feat_dst.push_back(nt.add_column(name, FeatureTable::ColKind::Scalar));
  }

  std::size_t total_nodes = 0;
  for (const MultiMesh& m : meshes) total_nodes += m.nodes.size();
  nt.add_rows(total_nodes);

  std::size_t row = 0;
  for (const MultiMesh& m : meshes)
    for (std::size_t local = 0; local < m.nodes.size(); ++local, ++row) {
      const std::size_t k = m.nodes[local];
      nt.set_int(row, c_frame, frame_index);
      nt.set_int(row, c_id, static_cast<std::int64_t>(k) + 1);
      nt.set_int(row, c_org, m.organelle_label);
      const Eigen::Vector3d p = sk.voxels[k].to_um(meta);
      nt.set_scalar(row, c_z, p[0]);
      nt.set_scalar(row, c_y, p[1]);
      nt.set_scalar(row, c_x, p[2]);
      for (std::size_t f = 0; f < feat_src.size(); ++f)
        nt.set_scalar(row, feat_dst[f], node_features.get_scalar(k, feat_src[f]));
    }

  // z-score the feature columns over the frame's exported nodes
  for (int c : feat_dst) {
    double sum = 0.0, sum2 = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < nt.rows(); ++r) {
      const double v = nt.get_scalar(r, c);
      if (std::isnan(v)) continue;
      sum += v;
      sum2 += v * v;
      ++n;
    }
    if (n == 0) continue;
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(0.0, sum2 / static_cast<double>(n) - mean * mean);
    const double inv_sd = var > 0.0 ? 1.0 / std::sqrt(var) : 0.0;
    for (std::size_t r = 0; r < nt.rows(); ++r) {
      const double v = nt.get_scalar(r, c);
      if (!std::isnan(v)) nt.set_scalar(r, c, (v - mean) * inv_sd);
    }
  }

  FeatureTable& et = out.edges;
  const int e_frame = et.add_column("frame", FeatureTable::ColKind::Int);
  const int e_level = et.add_column("level", FeatureTable::ColKind::Int);
  const int e_u = et.add_column("u", FeatureTable::ColKind::Int);
  const int e_v = et.add_column("v", FeatureTable::ColKind::Int);
  std::size_t total_edges = 0;
  for (const MultiMesh& m : meshes)
    for (const MeshLevel& l : m.levels) total_edges += l.edges.size();
  et.add_rows(total_edges);
  row = 0;
  for (const MultiMesh& m : meshes)
    for (const MeshLevel& l : m.levels)
      for (const auto& [u, v] : l.edges) {
        et.set_int(row, e_frame, frame_index);
        et.set_int(row, e_level, l.level);
        et.set_int(row, e_u, static_cast<std::int64_t>(m.nodes[u]) + 1);
        et.set_int(row, e_v, static_cast<std::int64_t>(m.nodes[v]) + 1);
        ++row;
      }
  return out;
}

}  // namespace otk

#endif  // OTK_MULTIMESH_HPP
