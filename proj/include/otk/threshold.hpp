/* otk/threshold.hpp
 *
 * Histogram thresholds over a 256-bin histogram spanning [min, max] of the
 * samples: Otsu (maximum between-class variance), Triangle (maximum
 * perpendicular distance to the peak->far-end line), and their pointwise
 * minimum. The minimum of the two is the threshold used throughout the
 * pipeline for masks and for the scale-adaptive Frangi gamma.
 *
 * Conventions (deterministic by construction):
 *  - thresholds are bin edges: min + (k+1) * width for split/choice bin k
 *  - Otsu ties resolve to the lowest split bin
 *  - Triangle far end is the farther of the lowest/highest nonempty bins
 *    from the peak; equidistant ties resolve to the lower bin, and equal
 *    perpendicular distances resolve to the lower bin
 *  - constant input returns that constant
 */

#ifndef OTK_THRESHOLD_HPP
#define OTK_THRESHOLD_HPP

#include "otk/volume.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace otk {

inline constexpr int kThresholdBins = 256;

struct Histogram {
  std::vector<std::int64_t> counts;  // kThresholdBins entries
  double lo = 0.0;                   // value of the left edge of bin 0
  double width = 0.0;                // bin width; 0 for constant input
  std::int64_t total = 0;

  double bin_upper_edge(int b) const { return lo + (b + 1) * width; }
};

inline Histogram build_histogram(std::span<const float> values) {
  if (values.empty())
    throw std::invalid_argument("build_histogram: empty input");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (float v : values) {
    if (!std::isfinite(v))
      throw std::invalid_argument("build_histogram: non-finite sample");
    lo = std::min<double>(lo, v);
    hi = std::max<double>(hi, v);
  }
  Histogram h;
  h.counts.assign(kThresholdBins, 0);
  h.lo = lo;
  h.total = static_cast<std::int64_t>(values.size());
  if (hi == lo) {
    h.width = 0.0;
    h.counts[0] = h.total;
    return h;
  }
  h.width = (hi - lo) / kThresholdBins;
  const double scale = kThresholdBins / (hi - lo);
  for (float v : values) {
    int b = static_cast<int>((static_cast<double>(v) - lo) * scale);
    b = std::clamp(b, 0, kThresholdBins - 1);
    ++h.counts[b];
  }
  return h;
}

// Otsu 1979: pick the split k maximizing between-class variance of the two
// classes {bins <= k} and {bins > k}. Tied maxima (plateaus across empty
// bins) take the midpoint split, per the original method.
inline double otsu_threshold(std::span<const float> values) {
  const Histogram h = build_histogram(values);
  if (h.width == 0.0) return h.lo;  // constant input

  double total_mean = 0.0;
  for (int b = 0; b < kThresholdBins; ++b) total_mean += b * static_cast<double>(h.counts[b]);
  total_mean /= static_cast<double>(h.total);

  double w0 = 0.0, sum0 = 0.0;
  double best = -1.0;
  long best_sum = 0;
  long best_n = 0;
  for (int k = 0; k < kThresholdBins - 1; ++k) {
    w0 += static_cast<double>(h.counts[k]);
    sum0 += k * static_cast<double>(h.counts[k]);
    const double w1 = static_cast<double>(h.total) - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double mu0 = sum0 / w0;
    const double mu1 = (total_mean * static_cast<double>(h.total) - sum0) / w1;
    const double var_between = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var_between > best) {
      best = var_between;
      best_sum = k;
      best_n = 1;
    } else if (var_between == best) {
      best_sum += k;
      ++best_n;
    }
  }
  if (best < 0.0) return h.lo;  // single occupied bin
  return h.bin_upper_edge(static_cast<int>(best_sum / best_n));
}

// Zack 1977 triangle method over the same 256-bin histogram.
inline double triangle_threshold(std::span<const float> values) {
  const Histogram h = build_histogram(values);
  if (h.width == 0.0) return h.lo;

  int peak = 0;
  for (int b = 1; b < kThresholdBins; ++b)
    if (h.counts[b] > h.counts[peak]) peak = b;

  int lo_bin = 0;
  while (h.counts[lo_bin] == 0) ++lo_bin;
  int hi_bin = kThresholdBins - 1;
  while (h.counts[hi_bin] == 0) --hi_bin;
  if (lo_bin == hi_bin) return h.bin_upper_edge(lo_bin);

  // farther extreme from the peak; tie -> lower bin
  const int far = (peak - lo_bin >= hi_bin - peak) ? lo_bin : hi_bin;
  if (far == peak) return h.bin_upper_edge(peak);

  // maximize |cross| of (far - peak) with (b - peak); |far - peak| is a
  // constant factor so the perpendicular distance order is unchanged
  const double dx = static_cast<double>(far - peak);
  const double dy =
      static_cast<double>(h.counts[far]) - static_cast<double>(h.counts[peak]);
  const int step = far > peak ? 1 : -1;
  double best = -1.0;
  int best_b = peak;
  for (int b = peak + step; b != far; b += step) {
    const double cx = static_cast<double>(b - peak);
    const double cy =
        static_cast<double>(h.counts[b]) - static_cast<double>(h.counts[peak]);
    const double cross = std::abs(dx * cy - dy * cx);
    const bool better = cross > best || (cross == best && b < best_b);
    if (better) {
      best = cross;
      best_b = b;
    }
  }
  return h.bin_upper_edge(best_b);
}

inline double minotri_threshold(std::span<const float> values) {
  return std::min(otsu_threshold(values), triangle_threshold(values));
}

// Collects strictly positive samples; used by callers that threshold in
// "nonzero" mode (gamma selection, semantic mask).
inline std::vector<float> nonzero_values(const VolumeF& vol) {
  std::vector<float> out;
  out.reserve(vol.size() / 4);
  for (std::size_t i = 0; i < vol.size(); ++i) {
    const float v = vol[static_cast<Index>(i)];
    if (v > 0.0f) out.push_back(v);
  }
  return out;
}

// Intensity-weighted centroid in physical um, (z, y, x).
inline Eigen::Vector3d center_of_mass(const Frame& frame) {
  const VolumeF& v = frame.values;
  double wsum = 0.0;
  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  for (Index z = 0; z < v.nz(); ++z)
    for (Index y = 0; y < v.ny(); ++y)
      for (Index x = 0; x < v.nx(); ++x) {
        const double w = v(z, y, x);
        if (w == 0.0) continue;
        wsum += w;
        acc += w * Voxel{z, y, x}.to_um(frame.meta);
      }
  if (wsum <= 0.0)
    throw std::invalid_argument("center_of_mass: total intensity must be > 0");
  return acc / wsum;
}

}  // namespace otk

#endif  // OTK_THRESHOLD_HPP
