/* otk/hessian.hpp
 *
 * Scale-normalized Hessian fields and chunked eigen-decomposition.
 *
 * Second derivatives are central differences on the Gaussian-smoothed grid,
 * multiplied by sigma^2 (gamma-normalized scale space). The Frobenius norm
 * of the rescaled Hessian gates which voxels get an eigen-solve: only
 * voxels whose norm exceeds the minotri threshold of the nonzero norms are
 * kept, which bounds both memory and compute on large volumes.
 */

#ifndef OTK_HESSIAN_HPP
#define OTK_HESSIAN_HPP

#include "otk/filters.hpp"
#include "otk/threshold.hpp"
#include "otk/volume.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

namespace otk {

struct HessianField {
  // 2D: yy, yx, xx; 3D: zz, zy, zx, yy, yx, xx
  std::vector<VolumeF> entries;
  VolumeF frobenius;        // S, per voxel
  Volume<std::uint8_t> mask;  // voxels retained for eigen-analysis
  bool is_3d = false;
};

// Hessian of an already-smoothed grid (the smoothing for gamma selection
// gets reused by the enhancement driver).
inline HessianField hessian_from_smoothed(const VolumeF& sm,
                                          const VolumeMeta& meta,
                                          double sigma_px) {
  const bool is_3d = meta.is_3d;
  const float s2 = static_cast<float>(sigma_px * sigma_px);

  HessianField f;
  f.is_3d = is_3d;
  const int n_entries = is_3d ? 6 : 3;
  f.entries.assign(n_entries, sm.like());
  f.frobenius = sm.like();
  f.mask = Volume<std::uint8_t>(sm.nz(), sm.ny(), sm.nx(), 0);

  const std::array<std::pair<Axis, Axis>, 6> pairs3 = {{{Axis::Z, Axis::Z},
                                                        {Axis::Z, Axis::Y},
                                                        {Axis::Z, Axis::X},
                                                        {Axis::Y, Axis::Y},
                                                        {Axis::Y, Axis::X},
                                                        {Axis::X, Axis::X}}};
  const std::array<std::pair<Axis, Axis>, 3> pairs2 = {
      {{Axis::Y, Axis::Y}, {Axis::Y, Axis::X}, {Axis::X, Axis::X}}};

  for (Index z = 0; z < sm.nz(); ++z)
    for (Index y = 0; y < sm.ny(); ++y)
      for (Index x = 0; x < sm.nx(); ++x) {
        double fro = 0.0;
        if (is_3d) {
          for (int e = 0; e < 6; ++e) {
            const float h =
                s2 * second_derivative_at(sm, z, y, x, pairs3[e].first,
                                          pairs3[e].second);
            f.entries[e](z, y, x) = h;
            const bool diag = pairs3[e].first == pairs3[e].second;
            fro += (diag ? 1.0 : 2.0) * static_cast<double>(h) * h;
          }
        } else {
          for (int e = 0; e < 3; ++e) {
            const float h =
                s2 * second_derivative_at(sm, z, y, x, pairs2[e].first,
                                          pairs2[e].second);
            f.entries[e](z, y, x) = h;
            const bool diag = pairs2[e].first == pairs2[e].second;
            fro += (diag ? 1.0 : 2.0) * static_cast<double>(h) * h;
          }
        }
        f.frobenius(z, y, x) = static_cast<float>(std::sqrt(fro));
      }

  const std::vector<float> nz_norms = nonzero_values(f.frobenius);
  if (nz_norms.empty()) return f;  // all-zero frame: empty mask
  const double thresh = minotri_threshold(nz_norms);
  for (std::size_t i = 0; i < f.frobenius.size(); ++i)
    if (f.frobenius[static_cast<Index>(i)] > thresh)
      f.mask[static_cast<Index>(i)] = 1;
  return f;
}

inline HessianField hessian_at_scale(const Frame& frame, double sigma_px) {
  const VolumeF sm = gaussian_smooth(frame.values, sigma_px, frame.meta);
  return hessian_from_smoothed(sm, frame.meta, sigma_px);
}

struct HessianEigens {
  std::vector<Index> voxels;              // flat indices of masked voxels
  std::vector<std::array<float, 3>> lam;  // |lam[0]| <= |lam[1]| <= |lam[2]|
  bool is_3d = false;
};

namespace detail {

inline std::array<float, 3> sort_by_abs(const Eigen::Vector3f& v, int n) {
  std::array<int, 3> idx = {0, 1, 2};
  // stable on |.| ties: keeps the solver's ascending-value order
  std::stable_sort(idx.begin(), idx.begin() + n, [&](int a, int b) {
    return std::abs(v[a]) < std::abs(v[b]);
  });
  std::array<float, 3> out = {0.0f, 0.0f, 0.0f};
  for (int i = 0; i < n; ++i) out[i] = v[idx[i]];
  return out;
}

}  // namespace detail

// Eigenvalues on masked voxels only, processed in bounded chunks. Chunking
// is a pure partition of the masked voxel list; every chunk size yields
// bitwise-identical results.
inline HessianEigens eigenvalues_chunked(const HessianField& f,
                                         std::size_t chunk_size) {
  if (chunk_size == 0) chunk_size = 1;
  HessianEigens out;
  out.is_3d = f.is_3d;
  for (std::size_t i = 0; i < f.mask.size(); ++i)
    if (f.mask[static_cast<Index>(i)]) out.voxels.push_back(static_cast<Index>(i));
  out.lam.resize(out.voxels.size());

  for (std::size_t start = 0; start < out.voxels.size(); start += chunk_size) {
    const std::size_t end = std::min(start + chunk_size, out.voxels.size());
    for (std::size_t k = start; k < end; ++k) {
      const Index i = out.voxels[k];
      if (f.is_3d) {
        Eigen::Matrix3f h;
        const float zz = f.entries[0][i], zy = f.entries[1][i],
                    zx = f.entries[2][i], yy = f.entries[3][i],
                    yx = f.entries[4][i], xx = f.entries[5][i];
        h << zz, zy, zx, zy, yy, yx, zx, yx, xx;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3f> es;
        es.computeDirect(h, Eigen::EigenvaluesOnly);
        Eigen::Vector3f ev = es.eigenvalues();
        out.lam[k] = detail::sort_by_abs(ev, 3);
      } else {
        Eigen::Matrix2f h;
        const float yy = f.entries[0][i], yx = f.entries[1][i],
                    xx = f.entries[2][i];
        h << yy, yx, yx, xx;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2f> es;
        es.computeDirect(h, Eigen::EigenvaluesOnly);
        Eigen::Vector3f ev;
        ev << es.eigenvalues()(0), es.eigenvalues()(1), 0.0f;
        out.lam[k] = detail::sort_by_abs(ev, 2);
      }
    }
  }
  return out;
}

}  // namespace otk

#endif  // OTK_HESSIAN_HPP
