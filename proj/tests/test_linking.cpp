#include <doctest.h>

#include "otk/linking.hpp"

#include <cmath>
#include <vector>

using namespace otk;

namespace {

VolumeMeta meta2d(double sx = 0.1) {
  VolumeMeta m;
  m.is_3d = false;
  m.spacing_x = m.spacing_y = sx;
  m.dim_order = "TYX";
  m.dt = 1.0;
  return m;
}

VolumeMeta meta3d(double sx, double sz) {
  VolumeMeta m;
  m.is_3d = true;
  m.spacing_x = m.spacing_y = sx;
  m.spacing_z = sz;
  m.dim_order = "TZYX";
  m.dt = 1.0;
  return m;
}

MocapMarker marker_at(Voxel c, const VolumeMeta& meta, double radius) {
  MocapMarker m;
  m.coord = c;
  m.coord_um = c.to_um(meta);
  m.radius_um = radius;
  return m;
}

// markers placed on distinct blobs; features computed from simple frames
struct Scene {
  Frame raw;
  VolumeF pre;
  std::vector<MocapMarker> markers;
  std::vector<MarkerFeatures> feats;
};

Scene two_blob_scene(const VolumeMeta& meta, Index x0, Index x1, float offset) {
  Scene s;
  s.raw.meta = meta;
  s.raw.values = VolumeF(1, 24, 48, offset);
  // blob A: soft peak; blob B: bigger, dimmer
  for (Index y = 0; y < 24; ++y)
    for (Index x = 0; x < 48; ++x) {
      const double da = (y - 12.0) * (y - 12.0) + (x - double(x0)) * (x - double(x0));
      const double db = (y - 12.0) * (y - 12.0) + (x - double(x1)) * (x - double(x1));
      s.raw.values(0, y, x) += static_cast<float>(50.0 * std::exp(-da / 8.0) +
                                                  20.0 * std::exp(-db / 30.0));
    }
  s.pre = s.raw.values;
  s.markers.push_back(marker_at({0, 12, x0}, meta, 0.3));
  s.markers.push_back(marker_at({0, 12, x1}, meta, 0.5));
  for (const auto& m : s.markers)
    s.feats.push_back(marker_features(m, s.raw, s.pre));
  return s;
}

}  // namespace

TEST_CASE("bounding box: radius-to-voxel conversion and clamping") {
  VolumeMeta m2 = meta2d(0.1);
  const MocapMarker a = marker_at({0, 10, 10}, m2, 0.2);
  VoxelBox b = marker_bounding_box(a, m2, 1, 24, 24);
  CHECK(b.hi.y - b.lo.y == 4);
  CHECK(b.hi.x - b.lo.x == 4);
  CHECK(b.hi.z - b.lo.z == 1);

  // marker at the grid corner still has a nonempty box
  const MocapMarker c = marker_at({0, 0, 0}, m2, 0.2);
  b = marker_bounding_box(c, m2, 1, 24, 24);
  CHECK(b.lo.y == 0);
  CHECK(b.hi.y >= 1);
  CHECK(b.hi.x >= 1);

  // anisotropic 3D: 2 um box side -> 4 voxels along Z, 20 along X/Y
  VolumeMeta m3 = meta3d(0.1, 0.5);
  const MocapMarker d = marker_at({10, 30, 30}, m3, 1.0);
  b = marker_bounding_box(d, m3, 21, 64, 64);
  CHECK(b.hi.z - b.lo.z == 4);
  CHECK(b.hi.y - b.lo.y == 20);
  CHECK(b.hi.x - b.lo.x == 20);
}

TEST_CASE("marker features: constant crops and vector lengths") {
  VolumeMeta m2 = meta2d(0.1);
  Frame raw;
  raw.meta = m2;
  raw.values = VolumeF(1, 16, 16, 7.0f);
  VolumeF pre(1, 16, 16, 3.0f);
  const MocapMarker mk = marker_at({0, 8, 8}, m2, 0.3);
  const MarkerFeatures f = marker_features(mk, raw, pre);
  CHECK(f.stats[0] == doctest::Approx(7.0));
  CHECK(f.stats[1] == doctest::Approx(0.0));
  CHECK(f.stats[2] == doctest::Approx(3.0));
  CHECK(f.stats[3] == doctest::Approx(0.0));
  CHECK(f.hu.size() == 12);

  VolumeMeta m3 = meta3d(0.1, 0.2);
  Frame raw3;
  raw3.meta = m3;
  raw3.values = VolumeF(10, 16, 16, 1.0f);
  VolumeF pre3(10, 16, 16, 2.0f);
  const MocapMarker mk3 = marker_at({5, 8, 8}, m3, 0.3);
  const MarkerFeatures f3 = marker_features(mk3, raw3, pre3);
  CHECK(f3.hu.size() == 36);
}

TEST_CASE("identical scenes give zero feature distance") {
  const VolumeMeta meta = meta2d();
  const Scene a = two_blob_scene(meta, 12, 34, 0.0f);
  const Scene b = two_blob_scene(meta, 12, 34, 0.0f);
  for (int k = 0; k < 4; ++k)
    CHECK(a.feats[0].stats[k] == b.feats[0].stats[k]);
  for (std::size_t k = 0; k < a.feats[0].hu.size(); ++k)
    CHECK(a.feats[0].hu[k] == b.feats[0].hu[k]);
}

TEST_CASE("cost matrix: speed gate and degenerate 1x1 standardization") {
  const VolumeMeta meta = meta2d(0.1);  // dt 1 s
  const Scene s = two_blob_scene(meta, 12, 34, 0.0f);

  // one marker per frame, displaced 0.5 um with max speed 1 -> finite
  std::vector<MocapMarker> t0 = {s.markers[0]};
  std::vector<MocapMarker> t1 = {marker_at({0, 12, 17}, meta, 0.3)};  // +0.5 um
  std::vector<MarkerFeatures> f0 = {s.feats[0]};
  std::vector<MarkerFeatures> f1 = {s.feats[0]};
  CostMatrix cm = build_cost_matrix(t0, t1, f0, f1, meta, 1.0);
  REQUIRE(cm.rows() == 1);
  REQUIRE(cm.cols() == 1);
  CHECK_FALSE(cm.prohibited(0, 0));
  CHECK(cm.cost(0, 0) == doctest::Approx(0.0));  // single entry z-scores to 0

  // displacement 1.5 um exceeds the permissible travel -> prohibited
  std::vector<MocapMarker> t1far = {marker_at({0, 12, 27}, meta, 0.3)};
  cm = build_cost_matrix(t0, t1far, f0, f1, meta, 1.0);
  CHECK(cm.prohibited(0, 0));
}

TEST_CASE("bidirectional assignment: mutual, split, and empty cases") {
  CostMatrix cm;
  const double inf = std::numeric_limits<double>::infinity();

  // diagonal-dominant 2x2: two mutual pairs
  cm.cost = Eigen::MatrixXd(2, 2);
  cm.cost << 0.1, 5.0, 5.0, 0.2;
  auto links = assign_bidirectional(cm);
  REQUIRE(links.size() == 4);
  int fwd = 0, bwd = 0;
  for (const auto& l : links) {
    if (l.direction == LinkDirection::Forward) {
      ++fwd;
      CHECK(l.src == l.dst);
    } else {
      ++bwd;
      CHECK(l.src == l.dst);
    }
  }
  CHECK(fwd == 2);
  CHECK(bwd == 2);

  // split: one marker at t, two at t+1; both backward links point to it
  cm.cost = Eigen::MatrixXd(2, 1);
  cm.cost << 0.3, 0.4;
  links = assign_bidirectional(cm);
  int bwd_to_0 = 0;
  fwd = 0;
  for (const auto& l : links) {
    if (l.direction == LinkDirection::Backward) {
      CHECK(l.src == 0);
      ++bwd_to_0;
    } else {
      ++fwd;
      CHECK(l.dst == 0);  // forward takes the cheaper row
    }
  }
  CHECK(bwd_to_0 == 2);
  CHECK(fwd == 1);

  // all prohibited: no linkages
  cm.cost = Eigen::MatrixXd::Constant(2, 2, inf);
  CHECK(assign_bidirectional(cm).empty());
}

TEST_CASE("assignment recovers a rigid translation exactly") {
  const VolumeMeta meta = meta2d(0.1);
  const Scene t0 = two_blob_scene(meta, 12, 34, 0.0f);
  const Scene t1 = two_blob_scene(meta, 15, 37, 0.0f);  // +0.3 um shift

  const CostMatrix cm =
      build_cost_matrix(t0.markers, t1.markers, t0.feats, t1.feats, meta, 1.0);
  const auto links = assign_bidirectional(cm);
  REQUIRE(!links.empty());
  for (const auto& l : links) CHECK(l.src == l.dst);  // identity permutation
}

TEST_CASE("assignment is invariant under a global intensity offset") {
  const VolumeMeta meta = meta2d(0.1);
  const Scene a0 = two_blob_scene(meta, 12, 34, 0.0f);
  const Scene a1 = two_blob_scene(meta, 15, 37, 0.0f);
  const Scene b0 = two_blob_scene(meta, 12, 34, 25.0f);
  const Scene b1 = two_blob_scene(meta, 15, 37, 25.0f);

  const auto la = assign_bidirectional(
      build_cost_matrix(a0.markers, a1.markers, a0.feats, a1.feats, meta, 1.0));
  const auto lb = assign_bidirectional(
      build_cost_matrix(b0.markers, b1.markers, b0.feats, b1.feats, meta, 1.0));
  REQUIRE(la.size() == lb.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    CHECK(la[i].src == lb[i].src);
    CHECK(la[i].dst == lb[i].dst);
    CHECK(la[i].direction == lb[i].direction);
  }
}

TEST_CASE("prohibition depends only on displacement and dt") {
  const VolumeMeta meta = meta2d(0.1);
  const Scene s0 = two_blob_scene(meta, 12, 34, 0.0f);
  const Scene far = two_blob_scene(meta, 30, 44, 120.0f);  // features differ a lot
  const CostMatrix cm = build_cost_matrix(s0.markers, far.markers, s0.feats,
                                          far.feats, meta, 1.0);
  for (Index r = 0; r < cm.rows(); ++r)
    for (Index c = 0; c < cm.cols(); ++c) {
      const double dist =
          (far.markers[r].coord_um - s0.markers[c].coord_um).norm();
      CHECK(cm.prohibited(r, c) == (dist / meta.dt > 1.0));
    }
}
