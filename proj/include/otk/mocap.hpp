/* otk/mocap.hpp
 *
 * Motion-capture marker detection: multi-scale local maxima of the negated
 * LoG of the border distance field, constrained to the semantic mask, then
 * intensity-ranked proximity deduplication.
 */

#ifndef OTK_MOCAP_HPP
#define OTK_MOCAP_HPP

#include "otk/filters.hpp"
#include "otk/kdtree.hpp"
#include "otk/morphology.hpp"
#include "otk/scale_space.hpp"
#include "otk/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace otk {

struct MocapMarker {
  int frame_index = 0;
  Voxel coord;
  Eigen::Vector3d coord_um = Eigen::Vector3d::Zero();
  double radius_um = 0.0;   // border distance at the peak
  int scale_index = 0;      // lowest scale at which the peak was detected
};

inline double default_min_peak_dist_um(const VolumeMeta& meta) {
  return std::max(kMinRadiusUm, meta.spacing_x);
}

// Peaks of the distance field: per scale, voxels whose negated LoG value
// survives a maximum filter with footprint half-width max(1, round(sigma)).
// Plateau voxels all qualify; the first (lowest) scale claims a voxel.
inline std::vector<MocapMarker> detect_peaks(const VolumeF& dist,
                                             const ScaleSpace& scales,
                                             const Mask& mask,
                                             const VolumeMeta& meta,
                                             int frame_index = 0) {
  std::vector<MocapMarker> out;
  if (count_nonzero(mask) == 0) return out;

  Mask taken(dist.nz(), dist.ny(), dist.nx(), 0);
  for (int s = 0; s < scales.count(); ++s) {
    const double sigma = scales.sigmas_px[s];
    VolumeF response = log_filter(dist, sigma, meta);
    for (std::size_t i = 0; i < response.size(); ++i)
      response[static_cast<Index>(i)] = -response[static_cast<Index>(i)];
    const int half = std::max(1, static_cast<int>(std::lround(sigma)));
    const VolumeF filtered = max_filter(response, half, meta.is_3d);

    for (Index z = 0; z < dist.nz(); ++z)
      for (Index y = 0; y < dist.ny(); ++y)
        for (Index x = 0; x < dist.nx(); ++x) {
          if (!mask(z, y, x) || taken(z, y, x)) continue;
          if (filtered(z, y, x) != response(z, y, x)) continue;
          taken(z, y, x) = 1;
          MocapMarker m;
          m.frame_index = frame_index;
          m.coord = {z, y, x};
          m.coord_um = m.coord.to_um(meta);
          m.radius_um = dist(z, y, x);
          m.scale_index = s;
          out.push_back(m);
        }
  }
  return out;
}

// Greedy intensity-ranked deduplication: highest raw intensity first, a
// peak survives iff no already-accepted peak lies within min_dist_um.
// Intensity ties prefer the lower (z, y, x) coordinate.
inline std::vector<MocapMarker> dedupe_peaks(const std::vector<MocapMarker>& peaks,
                                             const VolumeF& raw,
                                             double min_dist_um) {
  std::vector<std::size_t> order(peaks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const float ia = raw(peaks[a].coord), ib = raw(peaks[b].coord);
    if (ia != ib) return ia > ib;
    return peaks[a].coord < peaks[b].coord;
  });

  std::vector<MocapMarker> kept;
  const double r2 = min_dist_um * min_dist_um;
  for (std::size_t idx : order) {
    const MocapMarker& p = peaks[idx];
    bool blocked = false;
    for (const MocapMarker& k : kept) {
      if ((k.coord_um - p.coord_um).squaredNorm() < r2) {
        blocked = true;
        break;
      }
    }
    if (!blocked) kept.push_back(p);
  }
  std::sort(kept.begin(), kept.end(),
            [](const MocapMarker& a, const MocapMarker& b) {
              return a.coord < b.coord;
            });
  return kept;
}

inline std::vector<MocapMarker> detect_markers(const VolumeF& dist,
                                               const ScaleSpace& scales,
                                               const Mask& mask,
                                               const VolumeF& raw,
                                               const VolumeMeta& meta,
                                               double min_dist_um,
                                               int frame_index = 0) {
  return dedupe_peaks(detect_peaks(dist, scales, mask, meta, frame_index), raw,
                      min_dist_um);
}

}  // namespace otk

#endif  // OTK_MOCAP_HPP
