#include <doctest.h>

#include "otk/morphology.hpp"

#include <random>
#include <vector>

using namespace otk;

namespace {

// Flood-fill oracle for hole filling: 6-connected background reachability
// from any boundary voxel.
Mask fill_oracle(const Mask& m) {
  Mask reach(m.nz(), m.ny(), m.nx(), 0);
  std::vector<Voxel> stack;
  for (Index z = 0; z < m.nz(); ++z)
    for (Index y = 0; y < m.ny(); ++y)
      for (Index x = 0; x < m.nx(); ++x) {
        const bool edge = z == 0 || y == 0 || x == 0 || z == m.nz() - 1 ||
                          y == m.ny() - 1 || x == m.nx() - 1;
        if (edge && !m(z, y, x) && !reach(z, y, x)) {
          reach(z, y, x) = 1;
          stack.push_back({z, y, x});
        }
      }
  const auto offs = neighbor_offsets(true, false);
  while (!stack.empty()) {
    const Voxel v = stack.back();
    stack.pop_back();
    for (const Voxel& o : offs) {
      const Index nz = v.z + o.z, ny = v.y + o.y, nx = v.x + o.x;
      if (m.in_bounds(nz, ny, nx) && !m(nz, ny, nx) && !reach(nz, ny, nx)) {
        reach(nz, ny, nx) = 1;
        stack.push_back({nz, ny, nx});
      }
    }
  }
  Mask out = m;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!m[static_cast<Index>(i)] && !reach[static_cast<Index>(i)])
      out[static_cast<Index>(i)] = 1;
  return out;
}

}  // namespace

TEST_CASE("opening removes single voxels and keeps slabs") {
  Mask m(1, 9, 9, 0);
  for (Index y = 2; y < 7; ++y)
    for (Index x = 2; x < 7; ++x) m(0, y, x) = 1;
  m(0, 0, 0) = 1;  // speck
  const Mask o = binary_open(m, false);
  CHECK(o(0, 0, 0) == 0);
  // 5x5 slab interior survives a radius-1 cross opening
  CHECK(o(0, 4, 4) == 1);
  CHECK(o(0, 3, 3) == 1);
}

TEST_CASE("dilate minus mask produces a hull of border voxels") {
  Mask m(1, 7, 7, 0);
  m(0, 3, 3) = 1;
  const Mask d = binary_dilate(m, false, true);
  int border = 0;
  for (std::size_t i = 0; i < d.size(); ++i)
    if (d[static_cast<Index>(i)] && !m[static_cast<Index>(i)]) ++border;
  CHECK(border == 8);
}

TEST_CASE("fill_holes_3d: solid cube unchanged, shell core filled, tunnel kept") {
  // solid cube
  Mask cube(7, 7, 7, 0);
  for (Index z = 1; z < 6; ++z)
    for (Index y = 1; y < 6; ++y)
      for (Index x = 1; x < 6; ++x) cube(z, y, x) = 1;
  Mask filled = fill_holes_3d(cube);
  for (std::size_t i = 0; i < cube.size(); ++i)
    CHECK(filled[static_cast<Index>(i)] == cube[static_cast<Index>(i)]);

  // 5^3 shell with hollow 3^3 core
  Mask shell(7, 7, 7, 0);
  for (Index z = 1; z < 6; ++z)
    for (Index y = 1; y < 6; ++y)
      for (Index x = 1; x < 6; ++x) shell(z, y, x) = 1;
  for (Index z = 2; z < 5; ++z)
    for (Index y = 2; y < 5; ++y)
      for (Index x = 2; x < 5; ++x) shell(z, y, x) = 0;
  filled = fill_holes_3d(shell);
  CHECK(filled(3, 3, 3) == 1);
  const Mask oracle = fill_oracle(shell);
  for (std::size_t i = 0; i < shell.size(); ++i)
    CHECK(filled[static_cast<Index>(i)] == oracle[static_cast<Index>(i)]);

  // tunnel through the cube: open at both ends, must not fill
  Mask tunnel = cube;
  for (Index z = 0; z < 7; ++z) tunnel(z, 3, 3) = 0;
  filled = fill_holes_3d(tunnel);
  CHECK(filled(3, 3, 3) == 0);
  const Mask oracle2 = fill_oracle(tunnel);
  for (std::size_t i = 0; i < tunnel.size(); ++i)
    CHECK(filled[static_cast<Index>(i)] == oracle2[static_cast<Index>(i)]);
}

TEST_CASE("fill_holes_3d matches flood oracle on random masks") {
  std::mt19937 rng(31);
  std::uniform_real_distribution<double> d(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Mask m(8, 8, 8, 0);
    for (std::size_t i = 0; i < m.size(); ++i)
      m[static_cast<Index>(i)] = d(rng) < 0.55 ? 1 : 0;
    const Mask a = fill_holes_3d(m);
    const Mask b = fill_oracle(m);
    for (std::size_t i = 0; i < m.size(); ++i)
      CHECK(a[static_cast<Index>(i)] == b[static_cast<Index>(i)]);
  }
}

TEST_CASE("percentile: linear interpolation semantics") {
  CHECK(percentile({1.0f, 2.0f, 3.0f, 4.0f, 5.0f}, 0.0) == doctest::Approx(1.0));
  CHECK(percentile({1.0f, 2.0f, 3.0f, 4.0f, 5.0f}, 100.0) == doctest::Approx(5.0));
  CHECK(percentile({1.0f, 2.0f, 3.0f, 4.0f, 5.0f}, 50.0) == doctest::Approx(3.0));
  CHECK(percentile({1.0f, 3.0f}, 25.0) == doctest::Approx(1.5));
  CHECK(percentile({7.0f}, 1.0) == doctest::Approx(7.0));
  CHECK_THROWS(percentile({}, 50.0));
}
