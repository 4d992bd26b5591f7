/* otk/morphology.hpp
 *
 * Binary morphology on voxel grids: dilation/erosion/opening with a
 * radius-1 cross (6/4-connected) or full (26/8-connected) element, plus
 * boundary-flood hole filling for 3D masks.
 */

#ifndef OTK_MORPHOLOGY_HPP
#define OTK_MORPHOLOGY_HPP

#include "otk/volume.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace otk {

using Mask = Volume<std::uint8_t>;

inline Mask binary_dilate(const Mask& m, bool is_3d, bool full) {
  const auto offs = neighbor_offsets(is_3d, full);
  Mask out = m;
  for (Index z = 0; z < m.nz(); ++z)
    for (Index y = 0; y < m.ny(); ++y)
      for (Index x = 0; x < m.nx(); ++x) {
        if (m(z, y, x)) continue;
        for (const Voxel& o : offs) {
          const Index nz = z + o.z, ny = y + o.y, nx = x + o.x;
          if (m.in_bounds(nz, ny, nx) && m(nz, ny, nx)) {
            out(z, y, x) = 1;
            break;
          }
        }
      }
  return out;
}

// Erosion treats out-of-bounds as background, so voxels on the grid edge
// erode unless fully surrounded inside.
inline Mask binary_erode(const Mask& m, bool is_3d, bool full) {
  const auto offs = neighbor_offsets(is_3d, full);
  Mask out = m;
  for (Index z = 0; z < m.nz(); ++z)
    for (Index y = 0; y < m.ny(); ++y)
      for (Index x = 0; x < m.nx(); ++x) {
        if (!m(z, y, x)) continue;
        for (const Voxel& o : offs) {
          const Index nz = z + o.z, ny = y + o.y, nx = x + o.x;
          if (!m.in_bounds(nz, ny, nx) || !m(nz, ny, nx)) {
            out(z, y, x) = 0;
            break;
          }
        }
      }
  return out;
}

// Opening with the radius-1 cross: removes single-voxel specks and
// single-voxel bridges while minimally eroding object bodies.
inline Mask binary_open(const Mask& m, bool is_3d) {
  return binary_dilate(binary_erode(m, is_3d, /*full=*/false), is_3d,
                       /*full=*/false);
}

// Background components not 6-connected to the volume boundary become
// foreground. 3D only; 2D rings keep their cavities by design.
inline Mask fill_holes_3d(const Mask& m) {
  if (m.nz() < 2)
    throw std::invalid_argument("fill_holes_3d: expects a 3D mask");
  Mask reach(m.nz(), m.ny(), m.nx(), 0);
  std::vector<Voxel> stack;
  auto try_seed = [&](Index z, Index y, Index x) {
    if (!m(z, y, x) && !reach(z, y, x)) {
      reach(z, y, x) = 1;
      stack.push_back({z, y, x});
    }
  };
  for (Index z = 0; z < m.nz(); ++z)
    for (Index y = 0; y < m.ny(); ++y)
      for (Index x = 0; x < m.nx(); ++x)
        if (z == 0 || y == 0 || x == 0 || z == m.nz() - 1 || y == m.ny() - 1 ||
            x == m.nx() - 1)
          try_seed(z, y, x);

  const auto offs = neighbor_offsets(/*is_3d=*/true, /*full=*/false);
  while (!stack.empty()) {
    const Voxel v = stack.back();
    stack.pop_back();
    for (const Voxel& o : offs) {
      const Index nz = v.z + o.z, ny = v.y + o.y, nx = v.x + o.x;
      if (m.in_bounds(nz, ny, nx)) try_seed(nz, ny, nx);
    }
  }

  Mask out = m;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!m[static_cast<Index>(i)] && !reach[static_cast<Index>(i)])
      out[static_cast<Index>(i)] = 1;
  return out;
}

inline std::size_t count_nonzero(const Mask& m) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (m[static_cast<Index>(i)]) ++n;
  return n;
}

// Linear-interpolation percentile (q in [0, 100]) of the given samples.
inline double percentile(std::vector<float> values, double q) {
  if (values.empty())
    throw std::invalid_argument("percentile: empty input");
  std::sort(values.begin(), values.end());
  const double rank = q / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(rank);
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = rank - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

}  // namespace otk

#endif  // OTK_MORPHOLOGY_HPP
