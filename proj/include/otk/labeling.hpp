/* otk/labeling.hpp
 *
 * Connected-component labeling on binary masks with full (26/8)
 * connectivity, two-pass union-find. Output labels are dense 1..K in
 * first-touch scan order, so labeling is deterministic and
 * translation-equivariant.
 */

#ifndef OTK_LABELING_HPP
#define OTK_LABELING_HPP

#include "otk/morphology.hpp"
#include "otk/volume.hpp"

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace otk {

class DisjointSet {
 public:
  explicit DisjointSet(std::size_t n) : parent_(n) {
    for (std::size_t i = 0; i < n; ++i) parent_[i] = static_cast<std::uint32_t>(i);
  }
  std::uint32_t find(std::uint32_t a) {
    std::uint32_t root = a;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[a] != root) {
      const std::uint32_t next = parent_[a];
      parent_[a] = root;
      a = next;
    }
    return root;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;  // keep the smaller provisional label as root
    else parent_[a] = b;
  }

 private:
  std::vector<std::uint32_t> parent_;
};

inline VolumeU32 label_components(const Mask& mask, bool is_3d) {
  VolumeU32 labels(mask.nz(), mask.ny(), mask.nx(), 0);
  // backward half of the full neighborhood (already-scanned voxels)
  std::vector<Voxel> prev;
  for (const Voxel& o : neighbor_offsets(is_3d, /*full=*/true))
    if (o.z < 0 || (o.z == 0 && (o.y < 0 || (o.y == 0 && o.x < 0))))
      prev.push_back(o);

  std::uint32_t next = 1;
  DisjointSet ds(mask.size() / 2 + 2);
  for (Index z = 0; z < mask.nz(); ++z)
    for (Index y = 0; y < mask.ny(); ++y)
      for (Index x = 0; x < mask.nx(); ++x) {
        if (!mask(z, y, x)) continue;
        std::uint32_t lab = 0;
        for (const Voxel& o : prev) {
          const Index pz = z + o.z, py = y + o.y, px = x + o.x;
          if (!mask.in_bounds(pz, py, px)) continue;
          const std::uint32_t nl = labels(pz, py, px);
          if (nl == 0) continue;
          if (lab == 0) lab = nl;
          else if (nl != lab) ds.unite(lab, nl);
        }
        if (lab == 0) lab = next++;
        labels(z, y, x) = lab;
      }

  // remap roots to dense 1..K in first-touch scan order
  std::unordered_map<std::uint32_t, std::uint32_t> dense;
  std::uint32_t k = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::uint32_t& l = labels[static_cast<Index>(i)];
    if (l == 0) continue;
    const std::uint32_t root = ds.find(l);
    auto [it, inserted] = dense.try_emplace(root, k + 1);
    if (inserted) ++k;
    l = it->second;
  }
  return labels;
}

inline std::uint32_t max_label(const VolumeU32& labels) {
  std::uint32_t m = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    m = std::max(m, labels[static_cast<Index>(i)]);
  return m;
}

}  // namespace otk

#endif  // OTK_LABELING_HPP
