/* otk/volume.hpp
 *
 * Dense N-D scalar grids for 2D/3D microscopy frames. Volumes are stored
 * flat in (z, y, x) order with x fastest; 2D data is a single-slice volume
 * (nz == 1). Physical voxel spacings and the frame interval live in
 * VolumeMeta so every downstream computation can work in micrometers.
 */

#ifndef OTK_VOLUME_HPP
#define OTK_VOLUME_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace otk {

using Index = std::int64_t;

// Physical metadata for one dataset. dim_order uses axis labels from
// {T,C,Z,Y,X} at file level; per-frame metadata keeps only the spatial part.
struct VolumeMeta {
  std::string dim_order = "YX";
  double spacing_x = 1.0;  // um per voxel
  double spacing_y = 1.0;  // um per voxel
  double spacing_z = 1.0;  // um per voxel
  double dt = 1.0;         // seconds per frame
  bool is_3d = false;

  double z_ratio() const { return spacing_z / spacing_x; }

  // um per voxel along (z, y, x)
  Eigen::Vector3d spacing_zyx() const {
    return {spacing_z, spacing_y, spacing_x};
  }

  bool has_time() const { return dim_order.find('T') != std::string::npos; }

  void validate() const {
    if (!(spacing_x > 0) || !(spacing_y > 0) || !(spacing_z > 0))
      throw std::invalid_argument("VolumeMeta: spacings must be > 0");
    if (spacing_x != spacing_y)
      throw std::invalid_argument(
          "VolumeMeta: anisotropic in-plane spacing is not supported "
          "(spacing_x must equal spacing_y)");
    if (has_time() && !(dt > 0))
      throw std::invalid_argument("VolumeMeta: dt must be > 0 for temporal data");
  }
};

// Integer voxel coordinate, (z, y, x).
struct Voxel {
  Index z = 0, y = 0, x = 0;

  bool operator==(const Voxel&) const = default;
  bool operator<(const Voxel& o) const {
    if (z != o.z) return z < o.z;
    if (y != o.y) return y < o.y;
    return x < o.x;
  }

  Eigen::Vector3d to_um(const VolumeMeta& m) const {
    return {static_cast<double>(z) * m.spacing_z,
            static_cast<double>(y) * m.spacing_y,
            static_cast<double>(x) * m.spacing_x};
  }
};

template <typename T>
class Volume {
 public:
  Volume() = default;
  Volume(Index nz, Index ny, Index nx, T fill = T{})
      : nz_(nz), ny_(ny), nx_(nx),
        data_(static_cast<std::size_t>(nz * ny * nx), fill) {
    if (nz <= 0 || ny <= 0 || nx <= 0)
      throw std::invalid_argument("Volume: extents must be positive");
  }

  Index nz() const { return nz_; }
  Index ny() const { return ny_; }
  Index nx() const { return nx_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Volume& o) const {
    return nz_ == o.nz_ && ny_ == o.ny_ && nx_ == o.nx_;
  }

  Index flat(Index z, Index y, Index x) const {
    return (z * ny_ + y) * nx_ + x;
  }
  Index flat(const Voxel& v) const { return flat(v.z, v.y, v.x); }

  Voxel unflat(Index i) const {
    Voxel v;
    v.x = i % nx_;
    v.y = (i / nx_) % ny_;
    v.z = i / (nx_ * ny_);
    return v;
  }

  bool in_bounds(Index z, Index y, Index x) const {
    return z >= 0 && z < nz_ && y >= 0 && y < ny_ && x >= 0 && x < nx_;
  }
  bool in_bounds(const Voxel& v) const { return in_bounds(v.z, v.y, v.x); }

  T& operator()(Index z, Index y, Index x) { return data_[flat(z, y, x)]; }
  const T& operator()(Index z, Index y, Index x) const {
    return data_[flat(z, y, x)];
  }
  T& operator()(const Voxel& v) { return data_[flat(v)]; }
  const T& operator()(const Voxel& v) const { return data_[flat(v)]; }

  T& operator[](Index i) { return data_[static_cast<std::size_t>(i)]; }
  const T& operator[](Index i) const { return data_[static_cast<std::size_t>(i)]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  std::vector<T>& raw() { return data_; }
  const std::vector<T>& raw() const { return data_; }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Volume<U> cast() const {
    Volume<U> out(nz_, ny_, nx_);
    for (std::size_t i = 0; i < data_.size(); ++i)
      out[static_cast<Index>(i)] = static_cast<U>(data_[i]);
    return out;
  }

  Volume<T> like(T fill = T{}) const { return Volume<T>(nz_, ny_, nx_, fill); }

 private:
  Index nz_ = 0, ny_ = 0, nx_ = 0;
  std::vector<T> data_;
};

using VolumeF = Volume<float>;
using VolumeU8 = Volume<std::uint8_t>;
using VolumeU32 = Volume<std::uint32_t>;

// One timepoint of an acquisition: the raw intensity grid plus metadata.
struct Frame {
  VolumeF values;
  VolumeMeta meta;

  void validate() const {
    meta.validate();
    if (!meta.is_3d && values.nz() != 1)
      throw std::invalid_argument("Frame: 2D frame must have nz == 1");
    for (std::size_t i = 0; i < values.size(); ++i)
      if (!std::isfinite(values[static_cast<Index>(i)]))
        throw std::invalid_argument("Frame: values must be finite");
  }
};

// Neighborhood offsets. full=true gives 26 (3D) / 8 (2D) connectivity,
// full=false gives 6 / 4.
inline std::vector<Voxel> neighbor_offsets(bool is_3d, bool full) {
  std::vector<Voxel> offs;
  const Index zr = is_3d ? 1 : 0;
  for (Index dz = -zr; dz <= zr; ++dz)
    for (Index dy = -1; dy <= 1; ++dy)
      for (Index dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && dy == 0 && dx == 0) continue;
        const Index manhattan = std::abs(dz) + std::abs(dy) + std::abs(dx);
        if (!full && manhattan != 1) continue;
        offs.push_back({dz, dy, dx});
      }
  return offs;
}

}  // namespace otk

#endif  // OTK_VOLUME_HPP
