/* otk/hu_moments.hpp
 *
 * First six Hu moment invariants of a 2D intensity grid, mapped through a
 * signed log so the many-decade raw magnitudes become comparable. The
 * invariants are translation/rotation invariant by construction and scale
 * invariant through the normalized central moments.
 */

#ifndef OTK_HU_MOMENTS_HPP
#define OTK_HU_MOMENTS_HPP

#include <array>
#include <cmath>
#include <vector>

namespace otk {

inline double signed_log10(double x) {
  if (x == 0.0) return 0.0;
  const double s = x > 0.0 ? 1.0 : -1.0;
  return s * std::log10(std::abs(x) + 1e-30);
}

// Row-major 2D grid view used for moment computation.
struct Grid2d {
  const float* data = nullptr;
  int ny = 0;
  int nx = 0;
  float at(int y, int x) const { return data[y * nx + x]; }
};

// phi1..phi6, each signed-log scaled; all-zero input yields the zero vector.
inline std::array<double, 6> hu_moments_first6(const Grid2d& g) {
  double m00 = 0, m10 = 0, m01 = 0;
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) {
      const double v = g.at(y, x);
      m00 += v;
      m10 += v * x;
      m01 += v * y;
    }
  if (m00 == 0.0) return {0, 0, 0, 0, 0, 0};
  const double cx = m10 / m00, cy = m01 / m00;

  double mu20 = 0, mu02 = 0, mu11 = 0;
  double mu30 = 0, mu03 = 0, mu21 = 0, mu12 = 0;
  for (int y = 0; y < g.ny; ++y)
    for (int x = 0; x < g.nx; ++x) {
      const double v = g.at(y, x);
      if (v == 0.0) continue;
      const double dx = x - cx, dy = y - cy;
      mu20 += v * dx * dx;
      mu02 += v * dy * dy;
      mu11 += v * dx * dy;
      mu30 += v * dx * dx * dx;
      mu03 += v * dy * dy * dy;
      mu21 += v * dx * dx * dy;
      mu12 += v * dx * dy * dy;
    }

  const double n2 = std::pow(m00, 2.0);   // (p+q)/2 + 1 = 2 for p+q == 2
  const double n3 = std::pow(m00, 2.5);   // 2.5 for p+q == 3
  const double e20 = mu20 / n2, e02 = mu02 / n2, e11 = mu11 / n2;
  const double e30 = mu30 / n3, e03 = mu03 / n3, e21 = mu21 / n3,
               e12 = mu12 / n3;

  const double phi1 = e20 + e02;
  const double phi2 = (e20 - e02) * (e20 - e02) + 4.0 * e11 * e11;
  const double phi3 = (e30 - 3 * e12) * (e30 - 3 * e12) +
                      (3 * e21 - e03) * (3 * e21 - e03);
  const double phi4 =
      (e30 + e12) * (e30 + e12) + (e21 + e03) * (e21 + e03);
  const double phi5 =
      (e30 - 3 * e12) * (e30 + e12) *
          ((e30 + e12) * (e30 + e12) - 3 * (e21 + e03) * (e21 + e03)) +
      (3 * e21 - e03) * (e21 + e03) *
          (3 * (e30 + e12) * (e30 + e12) - (e21 + e03) * (e21 + e03));
  const double phi6 =
      (e20 - e02) * ((e30 + e12) * (e30 + e12) - (e21 + e03) * (e21 + e03)) +
      4.0 * e11 * (e30 + e12) * (e21 + e03);

  return {signed_log10(phi1), signed_log10(phi2), signed_log10(phi3),
          signed_log10(phi4), signed_log10(phi5), signed_log10(phi6)};
}

inline std::array<double, 6> hu_moments_first6(const std::vector<float>& values,
                                               int ny, int nx) {
  return hu_moments_first6(Grid2d{values.data(), ny, nx});
}

}  // namespace otk

#endif  // OTK_HU_MOMENTS_HPP
