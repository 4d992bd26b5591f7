/* otk/filters.hpp
 *
 * Separable grid filters: Gaussian smoothing with per-axis anisotropy
 * correction, central-difference second derivatives, sigma^2-normalized
 * Laplacian of Gaussian, and a running maximum filter.
 *
 * Boundary handling is scipy-style 'reflect' (edge value duplicated:
 * d c b a | a b c d | d c b a) for convolutions; derivative stencils clamp
 * at the border, which coincides with reflect for radius-1 stencils.
 */

#ifndef OTK_FILTERS_HPP
#define OTK_FILTERS_HPP

#include "otk/scale_space.hpp"
#include "otk/volume.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace otk {

enum class Axis { Z = 0, Y = 1, X = 2 };

inline Index reflect_index(Index i, Index n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
  }
  return i;
}

// Sampled Gaussian, truncated at 4 sigma, normalized to unit mass.
inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = static_cast<int>(4.0 * sigma + 0.5);
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * (i * i) / (sigma * sigma));
    k[i + radius] = v;
    sum += v;
  }
  for (double& v : k) v /= sum;
  return k;
}

template <typename T>
void convolve_axis(Volume<T>& vol, Axis axis, const std::vector<double>& kernel) {
  const int radius = static_cast<int>(kernel.size() / 2);
  if (radius == 0) return;
  const Index nz = vol.nz(), ny = vol.ny(), nx = vol.nx();
  const Index n = axis == Axis::Z ? nz : axis == Axis::Y ? ny : nx;
  std::vector<double> line(n);

  auto run_line = [&](auto&& get, auto&& set) {
    for (Index i = 0; i < n; ++i) line[i] = get(i);
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (int k = -radius; k <= radius; ++k)
        acc += kernel[k + radius] * line[reflect_index(i + k, n)];
      set(i, static_cast<T>(acc));
    }
  };

  if (axis == Axis::X) {
    for (Index z = 0; z < nz; ++z)
      for (Index y = 0; y < ny; ++y)
        run_line([&](Index i) { return vol(z, y, i); },
                 [&](Index i, T v) { vol(z, y, i) = v; });
  } else if (axis == Axis::Y) {
    for (Index z = 0; z < nz; ++z)
      for (Index x = 0; x < nx; ++x)
        run_line([&](Index i) { return vol(z, i, x); },
                 [&](Index i, T v) { vol(z, i, x) = v; });
  } else {
    for (Index y = 0; y < ny; ++y)
      for (Index x = 0; x < nx; ++x)
        run_line([&](Index i) { return vol(i, y, x); },
                 [&](Index i, T v) { vol(i, y, x) = v; });
  }
}

// Gaussian smoothing with equal physical extent on all axes (the Z sigma is
// divided by the Z/X spacing ratio in 3D).
inline VolumeF gaussian_smooth(const VolumeF& vol, double sigma_px,
                               const VolumeMeta& meta) {
  auto sig = anisotropic_sigma_vector(sigma_px, meta);
  VolumeF out = vol;
  if (meta.is_3d) {
    convolve_axis(out, Axis::Z, gaussian_kernel(sig[0]));
    convolve_axis(out, Axis::Y, gaussian_kernel(sig[1]));
    convolve_axis(out, Axis::X, gaussian_kernel(sig[2]));
  } else {
    convolve_axis(out, Axis::Y, gaussian_kernel(sig[0]));
    convolve_axis(out, Axis::X, gaussian_kernel(sig[1]));
  }
  return out;
}

inline Frame gaussian_smooth(const Frame& frame, double sigma_px) {
  Frame out;
  out.meta = frame.meta;
  out.values = gaussian_smooth(frame.values, sigma_px, frame.meta);
  return out;
}

namespace detail {
inline Voxel axis_step(Axis a) {
  switch (a) {
    case Axis::Z: return {1, 0, 0};
    case Axis::Y: return {0, 1, 0};
    default: return {0, 0, 1};
  }
}
}  // namespace detail

// f_aa or f_ab by central differences in pixel units, clamped at borders.
inline float second_derivative_at(const VolumeF& v, Index z, Index y, Index x,
                                  Axis a, Axis b) {
  const Voxel da = detail::axis_step(a);
  const Voxel db = detail::axis_step(b);
  auto cl = [&](Index cz, Index cy, Index cx) -> float {
    cz = std::clamp<Index>(cz, 0, v.nz() - 1);
    cy = std::clamp<Index>(cy, 0, v.ny() - 1);
    cx = std::clamp<Index>(cx, 0, v.nx() - 1);
    return v(cz, cy, cx);
  };
  if (a == b) {
    return cl(z + da.z, y + da.y, x + da.x) - 2.0f * v(z, y, x) +
           cl(z - da.z, y - da.y, x - da.x);
  }
  const float pp = cl(z + da.z + db.z, y + da.y + db.y, x + da.x + db.x);
  const float pm = cl(z + da.z - db.z, y + da.y - db.y, x + da.x - db.x);
  const float mp = cl(z - da.z + db.z, y - da.y + db.y, x - da.x + db.x);
  const float mm = cl(z - da.z - db.z, y - da.y - db.y, x - da.x - db.x);
  return 0.25f * (pp - pm - mp + mm);
}

// sigma^2-normalized Laplacian of the Gaussian-smoothed grid.
inline VolumeF log_filter(const VolumeF& vol, double sigma_px,
                          const VolumeMeta& meta) {
  const VolumeF sm = gaussian_smooth(vol, sigma_px, meta);
  VolumeF out = vol.like();
  const float s2 = static_cast<float>(sigma_px * sigma_px);
  for (Index z = 0; z < vol.nz(); ++z)
    for (Index y = 0; y < vol.ny(); ++y)
      for (Index x = 0; x < vol.nx(); ++x) {
        float lap = second_derivative_at(sm, z, y, x, Axis::Y, Axis::Y) +
                    second_derivative_at(sm, z, y, x, Axis::X, Axis::X);
        if (meta.is_3d)
          lap += second_derivative_at(sm, z, y, x, Axis::Z, Axis::Z);
        out(z, y, x) = s2 * lap;
      }
  return out;
}

template <typename T>
void max_filter_axis(Volume<T>& vol, Axis axis, int half_width) {
  if (half_width <= 0) return;
  const Index nz = vol.nz(), ny = vol.ny(), nx = vol.nx();
  const Index n = axis == Axis::Z ? nz : axis == Axis::Y ? ny : nx;
  std::vector<T> line(n);

  auto run_line = [&](auto&& get, auto&& set) {
    for (Index i = 0; i < n; ++i) line[i] = get(i);
    for (Index i = 0; i < n; ++i) {
      const Index lo = std::max<Index>(0, i - half_width);
      const Index hi = std::min<Index>(n - 1, i + half_width);
      T m = line[lo];
      for (Index j = lo + 1; j <= hi; ++j) m = std::max(m, line[j]);
      set(i, m);
    }
  };

  if (axis == Axis::X) {
    for (Index z = 0; z < nz; ++z)
      for (Index y = 0; y < ny; ++y)
        run_line([&](Index i) { return vol(z, y, i); },
                 [&](Index i, T v) { vol(z, y, i) = v; });
  } else if (axis == Axis::Y) {
    for (Index z = 0; z < nz; ++z)
      for (Index x = 0; x < nx; ++x)
        run_line([&](Index i) { return vol(z, i, x); },
                 [&](Index i, T v) { vol(z, i, x) = v; });
  } else {
    for (Index y = 0; y < ny; ++y)
      for (Index x = 0; x < nx; ++x)
        run_line([&](Index i) { return vol(i, y, x); },
                 [&](Index i, T v) { vol(i, y, x) = v; });
  }
}

// Square (2D) / cube (3D) maximum filter of the given half-width, clamped
// at volume borders. Separable, so equal to the brute-force window max.
template <typename T>
Volume<T> max_filter(const Volume<T>& vol, int half_width, bool is_3d) {
  Volume<T> out = vol;
  max_filter_axis(out, Axis::X, half_width);
  max_filter_axis(out, Axis::Y, half_width);
  if (is_3d) max_filter_axis(out, Axis::Z, half_width);
  return out;
}

}  // namespace otk

#endif  // OTK_FILTERS_HPP
