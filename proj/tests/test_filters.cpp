#include <doctest.h>

#include "otk/filters.hpp"

#include <cmath>
#include <random>
#include <vector>

using namespace otk;

namespace {

VolumeMeta meta2d() {
  VolumeMeta m;
  m.is_3d = false;
  return m;
}

VolumeMeta meta3d(double z_ratio = 1.0) {
  VolumeMeta m;
  m.is_3d = true;
  m.dim_order = "ZYX";
  m.spacing_x = m.spacing_y = 0.1;
  m.spacing_z = 0.1 * z_ratio;
  return m;
}

// Dense direct convolution oracle (2D, isotropic sigma, reflect boundary).
VolumeF dense_gaussian_2d(const VolumeF& in, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  VolumeF out(1, in.ny(), in.nx());
  for (Index y = 0; y < in.ny(); ++y)
    for (Index x = 0; x < in.nx(); ++x) {
      double acc = 0.0;
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
          acc += k[dy + r] * k[dx + r] *
                 in(0, reflect_index(y + dy, in.ny()),
                    reflect_index(x + dx, in.nx()));
      out(0, y, x) = static_cast<float>(acc);
    }
  return out;
}

// Fit a 1-D Gaussian sigma to a profile by second-moment matching.
double fitted_sigma(const std::vector<double>& profile) {
  double w = 0, m1 = 0;
  for (std::size_t i = 0; i < profile.size(); ++i) {
    w += profile[i];
    m1 += profile[i] * static_cast<double>(i);
  }
  m1 /= w;
  double m2 = 0;
  for (std::size_t i = 0; i < profile.size(); ++i)
    m2 += profile[i] * (i - m1) * (i - m1);
  return std::sqrt(m2 / w);
}

}  // namespace

TEST_CASE("gaussian: constant image is preserved") {
  Frame f;
  f.meta = meta2d();
  f.values = VolumeF(1, 16, 20, 3.5f);
  const Frame s = gaussian_smooth(f, 2.0);
  for (std::size_t i = 0; i < s.values.size(); ++i)
    CHECK(s.values[static_cast<Index>(i)] == doctest::Approx(3.5f).epsilon(1e-6));
}

TEST_CASE("gaussian: delta impulse matches dense convolution oracle, mass preserved") {
  Frame f;
  f.meta = meta2d();
  f.values = VolumeF(1, 21, 21, 0.0f);
  f.values(0, 10, 10) = 1.0f;
  const Frame s = gaussian_smooth(f, 1.0);
  const VolumeF oracle = dense_gaussian_2d(f.values, 1.0);

  double sum = 0.0;
  for (Index y = 0; y < 21; ++y)
    for (Index x = 0; x < 21; ++x) {
      CHECK(s.values(0, y, x) == doctest::Approx(oracle(0, y, x)).epsilon(1e-5));
      sum += s.values(0, y, x);
    }
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-4));
}

TEST_CASE("gaussian: random field matches dense oracle") {
  std::mt19937 rng(11);
  std::uniform_real_distribution<float> d(0.0f, 10.0f);
  Frame f;
  f.meta = meta2d();
  f.values = VolumeF(1, 15, 17);
  for (std::size_t i = 0; i < f.values.size(); ++i)
    f.values[static_cast<Index>(i)] = d(rng);
  const Frame s = gaussian_smooth(f, 1.7);
  const VolumeF oracle = dense_gaussian_2d(f.values, 1.7);
  for (Index y = 0; y < 15; ++y)
    for (Index x = 0; x < 17; ++x)
      CHECK(s.values(0, y, x) == doctest::Approx(oracle(0, y, x)).epsilon(1e-4));
}

TEST_CASE("gaussian: anisotropic 3D delta has Z profile narrowed by the spacing ratio") {
  Frame f;
  f.meta = meta3d(2.0);  // z voxels are 2x coarser
  f.values = VolumeF(41, 41, 41, 0.0f);
  f.values(20, 20, 20) = 1.0f;
  const Frame s = gaussian_smooth(f, 4.0);

  std::vector<double> zprof(41), xprof(41);
  for (Index i = 0; i < 41; ++i) {
    zprof[i] = s.values(i, 20, 20);
    xprof[i] = s.values(20, 20, i);
  }
  const double sz = fitted_sigma(zprof);
  const double sx = fitted_sigma(xprof);
  CHECK(sx == doctest::Approx(4.0).epsilon(0.02));
  CHECK(sz == doctest::Approx(2.0).epsilon(0.02));
}

TEST_CASE("log filter: constant frame gives zero") {
  VolumeF v(1, 10, 12, 4.2f);
  const VolumeF lg = log_filter(v, 1.5, meta2d());
  for (std::size_t i = 0; i < lg.size(); ++i)
    CHECK(lg[static_cast<Index>(i)] == doctest::Approx(0.0f).epsilon(1e-5));
}

TEST_CASE("log filter: negated response peaks at the center of a matched blob") {
  const double sigma = 2.0;
  VolumeF v(1, 31, 31, 0.0f);
  for (Index y = 0; y < 31; ++y)
    for (Index x = 0; x < 31; ++x) {
      const double r2 = (y - 15.0) * (y - 15.0) + (x - 15.0) * (x - 15.0);
      v(0, y, x) = static_cast<float>(std::exp(-r2 / (2 * sigma * sigma)));
    }
  const VolumeF lg = log_filter(v, sigma, meta2d());
  float best = -1e30f;
  Voxel best_at;
  for (Index y = 2; y < 29; ++y)
    for (Index x = 2; x < 29; ++x)
      if (-lg(0, y, x) > best) {
        best = -lg(0, y, x);
        best_at = {0, y, x};
      }
  CHECK(best_at.y == 15);
  CHECK(best_at.x == 15);
  CHECK(best > 0.0f);
}

TEST_CASE("log filter: linear ramp is ~zero in the interior") {
  VolumeF v(1, 20, 20);
  for (Index y = 0; y < 20; ++y)
    for (Index x = 0; x < 20; ++x) v(0, y, x) = static_cast<float>(2 * x + y);
  const VolumeF lg = log_filter(v, 1.0, meta2d());
  for (Index y = 6; y < 14; ++y)
    for (Index x = 6; x < 14; ++x)
      CHECK(std::abs(lg(0, y, x)) < 1e-3f);
}

TEST_CASE("max filter equals brute-force window maximum") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<float> d(0.0f, 1.0f);
  VolumeF v(6, 9, 8);
  for (std::size_t i = 0; i < v.size(); ++i) v[static_cast<Index>(i)] = d(rng);
  for (int h : {1, 2}) {
    const VolumeF mf = max_filter(v, h, true);
    for (Index z = 0; z < 6; ++z)
      for (Index y = 0; y < 9; ++y)
        for (Index x = 0; x < 8; ++x) {
          float m = -1e30f;
          for (Index dz = -h; dz <= h; ++dz)
            for (Index dy = -h; dy <= h; ++dy)
              for (Index dx = -h; dx <= h; ++dx) {
                if (!v.in_bounds(z + dz, y + dy, x + dx)) continue;
                m = std::max(m, v(z + dz, y + dy, x + dx));
              }
          CHECK(mf(z, y, x) == m);
        }
  }
}
