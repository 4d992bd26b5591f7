/* otk/scale_space.hpp
 *
 * Metadata-driven scale selection. Radii of interest span from
 * max(0.20 um, pixel size) up to 1.0 um; sigmas are derived from the
 * pixel-unit radii with reduction factors 1/2 (min) and 1/3 (max), spread
 * over at most five evenly spaced values. Steps below the minimum step
 * size collapse onto their left neighbor, so coarse magnifications yield
 * fewer (possibly one) scales.
 */

#ifndef OTK_SCALE_SPACE_HPP
#define OTK_SCALE_SPACE_HPP

#include "otk/volume.hpp"

#include <cmath>
#include <iostream>
#include <stdexcept>
#include <vector>

namespace otk {

inline constexpr double kMinRadiusUm = 0.20;   // ~diffraction limit
inline constexpr double kMaxRadiusUm = 1.0;
inline constexpr int kNumScales = 5;
inline constexpr double kMinSigmaStepPx = 0.2;

struct ScaleSpace {
  std::vector<double> sigmas_px;  // ascending, in-plane sigmas (pixels)
  double z_ratio = 1.0;           // spacing_z / spacing_x

  int count() const { return static_cast<int>(sigmas_px.size()); }
};

inline ScaleSpace compute_scale_sigmas(const VolumeMeta& meta) {
  meta.validate();
  const double r_min_um = std::max(kMinRadiusUm, meta.spacing_x);
  const double r_max_um = kMaxRadiusUm;
  const double r_min_px = r_min_um / meta.spacing_x;
  const double r_max_px = r_max_um / meta.spacing_x;
  const double sigma_min = r_min_px / 2.0;
  const double sigma_max = r_max_px / 3.0;

  ScaleSpace ss;
  ss.z_ratio = meta.z_ratio();

  if (sigma_max <= sigma_min) {
    // coarse magnification: the range inverts or collapses
    ss.sigmas_px = {std::max(sigma_min, sigma_max)};
    std::cerr << "[otk] warning: degenerate scale range at spacing_x="
              << meta.spacing_x << " um; using single sigma "
              << ss.sigmas_px[0] << " px\n";
    return ss;
  }

  const double step = (sigma_max - sigma_min) / (kNumScales - 1);
  std::vector<double> raw(kNumScales);
  for (int i = 0; i < kNumScales; ++i) raw[i] = sigma_min + i * step;
  raw.back() = sigma_max;

  // collapse sub-step neighbors, dedup
  for (double s : raw) {
    if (ss.sigmas_px.empty() || s >= ss.sigmas_px.back() + kMinSigmaStepPx)
      ss.sigmas_px.push_back(s);
  }
  return ss;
}

// Per-axis sigma vector with equal physical extent on every axis.
// 3D order is (z, y, x); 2D returns (y, x).
inline std::vector<double> anisotropic_sigma_vector(double sigma_px,
                                                    const VolumeMeta& meta) {
  if (!(sigma_px > 0))
    throw std::invalid_argument("anisotropic_sigma_vector: sigma must be > 0");
  if (!meta.is_3d) return {sigma_px, sigma_px};
  return {sigma_px / meta.z_ratio(), sigma_px, sigma_px};
}

}  // namespace otk

#endif  // OTK_SCALE_SPACE_HPP
