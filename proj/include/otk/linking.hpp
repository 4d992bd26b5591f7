/* otk/linking.hpp
 *
 * Marker feature vectors and frame-to-frame linkage.
 *
 * Each marker gets a radius-sized bounding box; the stats vector holds the
 * mean and variance of the raw and preprocessed crops, and the Hu vector
 * holds the first six Hu invariants of each crop (2D) or of its xy/xz/yz
 * maximum projections (3D). The cost matrix (rows: markers at t+1, cols:
 * markers at t) sums three standardized terms: normalized speed, mean
 * absolute stats difference, and mean absolute Hu difference; entries
 * whose speed exceeds the maximum permissible speed are prohibited.
 * Assignment is bidirectional argmin, not a global matching, so 1-to-N
 * and N-to-1 links arise naturally.
 */

#ifndef OTK_LINKING_HPP
#define OTK_LINKING_HPP

#include "otk/hu_moments.hpp"
#include "otk/mocap.hpp"
#include "otk/volume.hpp"

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <vector>

namespace otk {

struct VoxelBox {
  Voxel lo;  // inclusive
  Voxel hi;  // exclusive
};

// Axis-aligned box of side 2*radius (converted per axis to voxels, so
// anisotropic Z uses fewer voxels), clamped to the grid, at least 1 voxel.
inline VoxelBox marker_bounding_box(const MocapMarker& m, const VolumeMeta& meta,
                                    Index nz, Index ny, Index nx) {
  const Eigen::Vector3d spacing = meta.spacing_zyx();
  const std::array<Index, 3> shape = {nz, ny, nx};
  const std::array<Index, 3> c = {m.coord.z, m.coord.y, m.coord.x};
  VoxelBox box;
  std::array<Index, 3> lo, hi;
  for (int a = 0; a < 3; ++a) {
    Index side = static_cast<Index>(std::lround(2.0 * m.radius_um / spacing[a]));
    side = std::max<Index>(1, side);
    lo[a] = c[a] - side / 2;
    hi[a] = lo[a] + side;
    lo[a] = std::clamp<Index>(lo[a], 0, shape[a] - 1);
    hi[a] = std::clamp<Index>(hi[a], lo[a] + 1, shape[a]);
  }
  if (!meta.is_3d) {
    lo[0] = 0;
    hi[0] = 1;
  }
  box.lo = {lo[0], lo[1], lo[2]};
  box.hi = {hi[0], hi[1], hi[2]};
  return box;
}

struct MarkerFeatures {
  std::array<double, 4> stats;  // mean raw, var raw, mean pre, var pre
  std::vector<double> hu;       // 12 (2D) or 36 (3D) signed-log values
};

namespace detail {

inline void crop_stats(const VolumeF& v, const VoxelBox& b, double& mean,
                       double& var) {
  double sum = 0.0, sum2 = 0.0;
  std::int64_t n = 0;
  for (Index z = b.lo.z; z < b.hi.z; ++z)
    for (Index y = b.lo.y; y < b.hi.y; ++y)
      for (Index x = b.lo.x; x < b.hi.x; ++x) {
        const double val = v(z, y, x);
        sum += val;
        sum2 += val * val;
        ++n;
      }
  mean = sum / static_cast<double>(n);
  var = sum2 / static_cast<double>(n) - mean * mean;
  if (var < 0.0) var = 0.0;
}

enum class Proj { XY, XZ, YZ };

inline std::vector<float> max_projection(const VolumeF& v, const VoxelBox& b,
                                         Proj p, int& ny, int& nx) {
  const Index sz = b.hi.z - b.lo.z, sy = b.hi.y - b.lo.y, sx = b.hi.x - b.lo.x;
  switch (p) {
    case Proj::XY: ny = static_cast<int>(sy); nx = static_cast<int>(sx); break;
    case Proj::XZ: ny = static_cast<int>(sz); nx = static_cast<int>(sx); break;
    case Proj::YZ: ny = static_cast<int>(sz); nx = static_cast<int>(sy); break;
  }
  std::vector<float> out(static_cast<std::size_t>(ny) * nx,
                         -std::numeric_limits<float>::infinity());
  for (Index z = b.lo.z; z < b.hi.z; ++z)
    for (Index y = b.lo.y; y < b.hi.y; ++y)
      for (Index x = b.lo.x; x < b.hi.x; ++x) {
        int py = 0, px = 0;
        switch (p) {
          case Proj::XY: py = static_cast<int>(y - b.lo.y); px = static_cast<int>(x - b.lo.x); break;
          case Proj::XZ: py = static_cast<int>(z - b.lo.z); px = static_cast<int>(x - b.lo.x); break;
          case Proj::YZ: py = static_cast<int>(z - b.lo.z); px = static_cast<int>(y - b.lo.y); break;
        }
        float& cell = out[static_cast<std::size_t>(py) * nx + px];
        cell = std::max(cell, v(z, y, x));
      }
  return out;
}

inline void append_hu(std::vector<double>& hu, const std::vector<float>& img,
                      int ny, int nx) {
  const auto phi = hu_moments_first6(img, ny, nx);
  hu.insert(hu.end(), phi.begin(), phi.end());
}

}  // namespace detail

inline MarkerFeatures marker_features(const MocapMarker& m, const Frame& raw,
                                      const VolumeF& preprocessed) {
  const VoxelBox box = marker_bounding_box(m, raw.meta, raw.values.nz(),
                                           raw.values.ny(), raw.values.nx());
  MarkerFeatures f;
  detail::crop_stats(raw.values, box, f.stats[0], f.stats[1]);
  detail::crop_stats(preprocessed, box, f.stats[2], f.stats[3]);

  using detail::Proj;
  int ny = 0, nx = 0;
  if (raw.meta.is_3d) {
    for (const VolumeF* img : {&raw.values, &preprocessed})
      for (Proj p : {Proj::XY, Proj::XZ, Proj::YZ}) {
        const auto proj = detail::max_projection(*img, box, p, ny, nx);
        detail::append_hu(f.hu, proj, ny, nx);
      }
  } else {
    for (const VolumeF* img : {&raw.values, &preprocessed}) {
      const auto proj = detail::max_projection(*img, box, Proj::XY, ny, nx);
      detail::append_hu(f.hu, proj, ny, nx);
    }
  }
  return f;
}

struct CostMatrix {
  // rows: markers at t+1; cols: markers at t; infinity = prohibited
  Eigen::MatrixXd cost;

  Index rows() const { return cost.rows(); }
  Index cols() const { return cost.cols(); }
  bool prohibited(Index r, Index c) const { return !std::isfinite(cost(r, c)); }
};

namespace detail {

// Standardize a term matrix over the finite-cost cells in place. Degenerate
// populations (n <= 1 or zero variance) map to all-zero, so they never
// poison the summed cost.
inline void zscore_over(Eigen::MatrixXd& term, const Eigen::MatrixXd& speed_norm) {
  double sum = 0.0, sum2 = 0.0;
  std::int64_t n = 0;
  for (Index r = 0; r < term.rows(); ++r)
    for (Index c = 0; c < term.cols(); ++c) {
      if (!std::isfinite(speed_norm(r, c))) continue;
      sum += term(r, c);
      sum2 += term(r, c) * term(r, c);
      ++n;
    }
  if (n <= 1) {
    term.setZero();
    return;
  }
  const double mean = sum / static_cast<double>(n);
  const double var = sum2 / static_cast<double>(n) - mean * mean;
  if (var <= 0.0) {
    term.setZero();
    return;
  }
  const double inv_sd = 1.0 / std::sqrt(var);
  for (Index r = 0; r < term.rows(); ++r)
    for (Index c = 0; c < term.cols(); ++c)
      term(r, c) = (term(r, c) - mean) * inv_sd;
}

}  // namespace detail

inline CostMatrix build_cost_matrix(const std::vector<MocapMarker>& markers_t,
                                    const std::vector<MocapMarker>& markers_t1,
                                    const std::vector<MarkerFeatures>& feats_t,
                                    const std::vector<MarkerFeatures>& feats_t1,
                                    const VolumeMeta& meta,
                                    double max_speed_um_s) {
  if (markers_t.empty() || markers_t1.empty())
    throw std::invalid_argument("build_cost_matrix: both marker sets must be nonempty");
  const Index nr = static_cast<Index>(markers_t1.size());
  const Index nc = static_cast<Index>(markers_t.size());
  const double inf = std::numeric_limits<double>::infinity();

  // normalized speed; prohibition happens here and only here
  Eigen::MatrixXd speed(nr, nc);
  for (Index r = 0; r < nr; ++r)
    for (Index c = 0; c < nc; ++c) {
      const double dist = (markers_t1[r].coord_um - markers_t[c].coord_um).norm();
      const double s = dist / meta.dt / max_speed_um_s;
      speed(r, c) = s > 1.0 ? inf : s;
    }

  Eigen::MatrixXd dist_term = speed;
  for (Index r = 0; r < nr; ++r)
    for (Index c = 0; c < nc; ++c)
      if (!std::isfinite(dist_term(r, c))) dist_term(r, c) = 0.0;
  detail::zscore_over(dist_term, speed);

  const std::size_t n_hu = feats_t.empty() ? 0 : feats_t[0].hu.size();
  Eigen::MatrixXd stats_term = Eigen::MatrixXd::Zero(nr, nc);
  Eigen::MatrixXd col(nr, nc);
  for (int k = 0; k < 4; ++k) {
    for (Index r = 0; r < nr; ++r)
      for (Index c = 0; c < nc; ++c)
        col(r, c) = std::abs(feats_t1[r].stats[k] - feats_t[c].stats[k]);
    detail::zscore_over(col, speed);
    stats_term += col;
  }
  stats_term /= 4.0;

  Eigen::MatrixXd hu_term = Eigen::MatrixXd::Zero(nr, nc);
  for (std::size_t k = 0; k < n_hu; ++k) {
    for (Index r = 0; r < nr; ++r)
      for (Index c = 0; c < nc; ++c)
        col(r, c) = std::abs(feats_t1[r].hu[k] - feats_t[c].hu[k]);
    detail::zscore_over(col, speed);
    hu_term += col;
  }
  if (n_hu > 0) hu_term /= static_cast<double>(n_hu);

  CostMatrix cm;
  cm.cost = Eigen::MatrixXd::Constant(nr, nc, inf);
  for (Index r = 0; r < nr; ++r)
    for (Index c = 0; c < nc; ++c)
      if (std::isfinite(speed(r, c)))
        cm.cost(r, c) = dist_term(r, c) + stats_term(r, c) + hu_term(r, c);
  return cm;
}

enum class LinkDirection : std::uint8_t { Forward = 0, Backward = 1 };

struct Linkage {
  int src = -1;  // marker index at t
  int dst = -1;  // marker index at t+1
  double cost = 0.0;
  LinkDirection direction = LinkDirection::Forward;
};

// Forward: every marker at t links to its cheapest marker at t+1; backward:
// every marker at t+1 links to its cheapest marker at t. Markers whose
// entries are all prohibited get no linkage. Ties take the lowest index.
inline std::vector<Linkage> assign_bidirectional(const CostMatrix& cm) {
  std::vector<Linkage> out;
  const Index nr = cm.rows(), nc = cm.cols();
  for (Index c = 0; c < nc; ++c) {
    Index best = -1;
    for (Index r = 0; r < nr; ++r) {
      if (cm.prohibited(r, c)) continue;
      if (best < 0 || cm.cost(r, c) < cm.cost(best, c)) best = r;
    }
    if (best >= 0)
      out.push_back({static_cast<int>(c), static_cast<int>(best),
                     cm.cost(best, c), LinkDirection::Forward});
  }
  for (Index r = 0; r < nr; ++r) {
    Index best = -1;
    for (Index c = 0; c < nc; ++c) {
      if (cm.prohibited(r, c)) continue;
      if (best < 0 || cm.cost(r, c) < cm.cost(r, best)) best = c;
    }
    if (best >= 0)
      out.push_back({static_cast<int>(best), static_cast<int>(r),
                     cm.cost(r, best), LinkDirection::Backward});
  }
  return out;
}

}  // namespace otk

#endif  // OTK_LINKING_HPP
