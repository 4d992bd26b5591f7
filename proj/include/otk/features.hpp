/* otk/features.hpp
 *
 * Hierarchical feature extraction: per-voxel motility wrt its branch pivot
 * and the image center of mass, node flow statistics, branch skeleton
 * metrics, organelle region properties, and cross-level aggregation into
 * per-frame tables (voxels, nodes, branches, organelles, image).
 *
 * Null policy: boundary frames and undefined references produce NaN
 * scalars / empty vector cells, never zeros. Output column names follow
 * the pipeline's documented catalog (<feature>_raw, aggregates
 * <child>_<feature>_<stat>).
 */

#ifndef OTK_FEATURES_HPP
#define OTK_FEATURES_HPP

#include "otk/feature_table.hpp"
#include "otk/flow.hpp"
#include "otk/regionprops.hpp"
#include "otk/segment.hpp"
#include "otk/threshold.hpp"

#include <map>
#include <optional>

namespace otk {

// Everything feature extraction needs for one frame. Flow handles are null
// at temporal boundaries; com handles are null when the frame is empty.
struct FramePack {
  int frame_index = 0;
  const Frame* raw = nullptr;
  const VolumeF* pre = nullptr;
  const FrameHierarchy* hier = nullptr;
  const VolumeU32* reassigned_org = nullptr;     // may be null
  const VolumeU32* reassigned_branch = nullptr;  // may be null
  const FlowAnchors* fwd = nullptr;  // pair (t, t+1)
  const FlowAnchors* bwd = nullptr;  // pair (t-1, t)
  std::optional<Eigen::Vector3d> com, com_prev, com_next;
  double max_dist_um = 1.0;
};

struct FrameFeatures {
  FeatureTable voxels, nodes, branches, organelles, image;
};

namespace detail {

using OptVec = std::optional<Eigen::Vector3d>;

inline OptVec unit_of(const OptVec& v) {
  if (!v) return std::nullopt;
  const double n = v->norm();
  if (n <= 0.0) return std::nullopt;
  return *v / n;
}

inline std::optional<double> norm_of(const OptVec& v) {
  if (!v) return std::nullopt;
  return v->norm();
}

// angular velocity of v about the origin-anchored lever r
inline OptVec angular_rate(const OptVec& r, const OptVec& v) {
  if (!r || !v) return std::nullopt;
  const double r2 = r->squaredNorm();
  if (r2 <= 0.0) return std::nullopt;
  return Eigen::Vector3d(r->cross(*v) / r2);
}

// rotation vector taking a onto b over dt (axis * angle / dt)
inline OptVec rotation_between(const OptVec& a, const OptVec& b, double dt,
                               bool is_3d) {
  if (!a || !b) return std::nullopt;
  const double na = a->norm(), nb = b->norm();
  if (na < 1e-12 || nb < 1e-12) return std::nullopt;
  const Eigen::Vector3d c = a->cross(*b);
  const double dotab = a->dot(*b);
  const double angle = std::atan2(c.norm(), dotab);
  if (!is_3d) {
    // planar vectors: the rotation is the signed z component
    return Eigen::Vector3d(std::atan2(c[0], dotab) / dt, 0.0, 0.0);
  }
  const double cn = c.norm();
  if (cn < 1e-18) {
    if (dotab > 0.0) return Eigen::Vector3d::Zero();  // aligned, no rotation
    return std::nullopt;  // antiparallel: axis undefined
  }
  return Eigen::Vector3d(c / cn * angle / dt);
}

inline std::optional<double> cosine(const OptVec& v, const OptVec& r) {
  const OptVec uv = unit_of(v), ur = unit_of(r);
  if (!uv || !ur) return std::nullopt;
  return uv->dot(*ur);
}

inline std::optional<double> sub_rate(const std::optional<double>& b,
                                      const std::optional<double>& a,
                                      double dt) {
  if (!a || !b) return std::nullopt;
  return (*b - *a) / dt;
}

inline OptVec sub_rate(const OptVec& b, const OptVec& a, double dt) {
  if (!a || !b) return std::nullopt;
  return Eigen::Vector3d((*b - *a) / dt);
}

inline OptVec sub(const OptVec& a, const OptVec& b) {
  if (!a || !b) return std::nullopt;
  return Eigen::Vector3d(*a - *b);
}

struct VoxelColumns {
  int frame, z, y, x, organelle, branch;
  std::map<std::string, int> by_name;
};

}  // namespace detail

// Scalar voxel feature columns, in catalog order. All are aggregatable.
inline const std::vector<std::pair<const char*, bool>>& voxel_column_catalog() {
  // (name, is_vector)
  static const std::vector<std::pair<const char*, bool>> cols = {
      {"structure_raw", false},
      {"intensity_raw", false},
      {"lin_vel_rel_raw", true},
      {"lin_vel_mag_com_raw", false},
      {"lin_vel_orient_rel_raw", true},
      {"lin_vel_orient_com_raw", true},
      {"lin_vel_orient_raw", true},
      {"lin_vel_mag_rel_raw", false},
      {"lin_vel_mag_raw", false},
      {"lin_vel_com_raw", true},
      {"lin_vel_raw", true},
      {"lin_acc_rel_mag_raw", false},
      {"lin_acc_rel_raw", true},
      {"lin_acc_mag_raw", false},
      {"lin_acc_com_mag_raw", false},
      {"lin_acc_com_raw", true},
      {"lin_acc_raw", true},
      {"directionality_rel_raw", false},
      {"directionality_com_raw", false},
      {"directionality_acc_rel_raw", false},
      {"directionality_acc_com_raw", false},
      {"ang_vel_rel_raw", true},
      {"ang_vel_orient_rel_raw", true},
      {"ang_vel_orient_com_raw", true},
      {"ang_vel_orient_raw", true},
      {"ang_vel_mag_rel_raw", false},
      {"ang_vel_mag_com_raw", false},
      {"ang_vel_mag_raw", false},
      {"ang_vel_com_raw", true},
      {"ang_vel_raw", true},
      {"ang_acc_rel_mag_raw", false},
      {"ang_acc_rel_raw", true},
      {"ang_acc_mag_raw", false},
      {"ang_acc_com_mag_raw", false},
      {"ang_acc_com_raw", true},
      {"ang_acc_raw", true},
  };
  return cols;
}

inline FrameFeatures compute_frame_features(const FramePack& pack,
                                            int threads = 1) {
  const VolumeMeta& meta = pack.raw->meta;
  const bool is_3d = meta.is_3d;
  const double dt = meta.dt;
  const int vdim = is_3d ? 3 : 2;
  const FrameHierarchy& h = *pack.hier;
  const Mask& mask = h.semantic;

  FrameFeatures out;

  // ---- mask voxel list -------------------------------------------------
  std::vector<Voxel> fg;
  for (Index z = 0; z < mask.nz(); ++z)
    for (Index y = 0; y < mask.ny(); ++y)
      for (Index x = 0; x < mask.nx(); ++x)
        if (mask(z, y, x)) fg.push_back({z, y, x});
  const std::size_t n_vox = fg.size();

  std::vector<Eigen::Vector3d> fg_um(n_vox);
  for (std::size_t i = 0; i < n_vox; ++i) fg_um[i] = fg[i].to_um(meta);

  // ---- per-voxel flow samples ------------------------------------------
  using detail::OptVec;
  std::vector<OptVec> v12(n_vox), v01(n_vox);
  if (pack.fwd) {
    parallel_for(static_cast<std::int64_t>(n_vox), threads, [&](std::int64_t i) {
      v12[i] = interpolate_flow_at(*pack.fwd, fg_um[i], pack.max_dist_um).v / dt;
    });
  }
  if (pack.bwd) {
    parallel_for(static_cast<std::int64_t>(n_vox), threads, [&](std::int64_t i) {
      v01[i] = -interpolate_flow_at(*pack.bwd, fg_um[i], pack.max_dist_um).v / dt;
    });
  }

  // ---- branch pivots (argmin |v12| per branch, ties -> scan order) ------
  std::map<std::uint32_t, std::size_t> pivot_row;
  if (pack.fwd) {
    for (std::size_t i = 0; i < n_vox; ++i) {
      const std::uint32_t b = h.branch_labels(fg[i]);
      if (b == 0) continue;
      auto [it, inserted] = pivot_row.try_emplace(b, i);
      if (!inserted && v12[i]->norm() < v12[it->second]->norm()) it->second = i;
    }
  }

  // com reference velocities
  OptVec v_com12, v_com01;
  if (pack.com && pack.com_next)
    v_com12 = (*pack.com_next - *pack.com) / dt;
  if (pack.com && pack.com_prev)
    v_com01 = (*pack.com - *pack.com_prev) / dt;

  // ---- voxel table -------------------------------------------------------
  FeatureTable& vt = out.voxels;
  const int c_frame = vt.add_column("frame", FeatureTable::ColKind::Int);
  const int c_z = vt.add_column("z", FeatureTable::ColKind::Int);
  const int c_y = vt.add_column("y", FeatureTable::ColKind::Int);
  const int c_x = vt.add_column("x", FeatureTable::ColKind::Int);
  const int c_org = vt.add_column("organelle_label", FeatureTable::ColKind::Int);
  const int c_br = vt.add_column("branch_label", FeatureTable::ColKind::Int);
  std::map<std::string, int> vc;
  for (const auto& [name, is_vec] : voxel_column_catalog())
    vc[name] = vt.add_column(name,
                             is_vec ? FeatureTable::ColKind::Vector
                                    : FeatureTable::ColKind::Scalar,
                             /*aggregatable=*/!is_vec);
  vt.add_rows(n_vox);

  auto setv = [&](std::size_t r, int col, const OptVec& val) {
    if (val) vt.set_vector(r, col, *val, vdim);
  };
  auto setv_ang = [&](std::size_t r, int col, const OptVec& val) {
    if (!val) return;
    if (is_3d) vt.set_vector(r, col, *val, 3);
    else vt.set_vector1(r, col, (*val)[0]);  // planar: signed z component
  };
  auto sets = [&](std::size_t r, int col, const std::optional<double>& val) {
    if (val) vt.set_scalar(r, col, *val);
  };

  parallel_for(static_cast<std::int64_t>(n_vox), threads, [&](std::int64_t ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const Voxel& vox = fg[i];
    vt.set_int(i, c_frame, pack.frame_index);
    vt.set_int(i, c_z, vox.z);
    vt.set_int(i, c_y, vox.y);
    vt.set_int(i, c_x, vox.x);
    vt.set_int(i, c_org, h.organelle_labels(vox));
    const std::uint32_t branch = h.branch_labels(vox);
    vt.set_int(i, c_br, branch);

    vt.set_scalar(i, vc.at("structure_raw"), (*pack.pre)(vox));
    vt.set_scalar(i, vc.at("intensity_raw"), pack.raw->values(vox));

    const OptVec vel12 = v12[i], vel01 = v01[i];

    // no-reference linear kinematics
    setv(i, vc.at("lin_vel_raw"), vel12);
    sets(i, vc.at("lin_vel_mag_raw"), detail::norm_of(vel12));
    setv(i, vc.at("lin_vel_orient_raw"), detail::unit_of(vel12));
    const OptVec acc = detail::sub_rate(vel12, vel01, dt);
    setv(i, vc.at("lin_acc_raw"), acc);
    sets(i, vc.at("lin_acc_mag_raw"), detail::norm_of(acc));

    // branch pivot reference
    OptVec r_rel, vel12_rel, vel01_rel;
    if (branch != 0 && pivot_row.count(branch)) {
      const std::size_t p = pivot_row.at(branch);
      if (p != i) r_rel = fg_um[i] - fg_um[p];
      vel12_rel = detail::sub(vel12, v12[p]);
      vel01_rel = detail::sub(vel01, v01[p]);
    }
    setv(i, vc.at("lin_vel_rel_raw"), vel12_rel);
    sets(i, vc.at("lin_vel_mag_rel_raw"), detail::norm_of(vel12_rel));
    setv(i, vc.at("lin_vel_orient_rel_raw"), detail::unit_of(vel12_rel));
    const OptVec acc_rel = detail::sub_rate(vel12_rel, vel01_rel, dt);
    setv(i, vc.at("lin_acc_rel_raw"), acc_rel);
    sets(i, vc.at("lin_acc_rel_mag_raw"), detail::norm_of(acc_rel));
    sets(i, vc.at("directionality_rel_raw"), detail::cosine(vel12_rel, r_rel));
    sets(i, vc.at("directionality_acc_rel_raw"),
         detail::sub_rate(detail::cosine(vel12_rel, r_rel),
                          detail::cosine(vel01_rel, r_rel), dt));
    const OptVec w12_rel = detail::angular_rate(r_rel, vel12_rel);
    const OptVec w01_rel = detail::angular_rate(r_rel, vel01_rel);
    setv_ang(i, vc.at("ang_vel_rel_raw"), w12_rel);
    sets(i, vc.at("ang_vel_mag_rel_raw"), detail::norm_of(w12_rel));
    setv_ang(i, vc.at("ang_vel_orient_rel_raw"), detail::unit_of(w12_rel));
    const OptVec wacc_rel = detail::sub_rate(w12_rel, w01_rel, dt);
    setv_ang(i, vc.at("ang_acc_rel_raw"), wacc_rel);
    sets(i, vc.at("ang_acc_rel_mag_raw"), detail::norm_of(wacc_rel));

    // center-of-mass reference
    OptVec r_com;
    if (pack.com) r_com = fg_um[i] - *pack.com;
    const OptVec vel12_com = detail::sub(vel12, v_com12);
    const OptVec vel01_com = detail::sub(vel01, v_com01);
    setv(i, vc.at("lin_vel_com_raw"), vel12_com);
    sets(i, vc.at("lin_vel_mag_com_raw"), detail::norm_of(vel12_com));
    setv(i, vc.at("lin_vel_orient_com_raw"), detail::unit_of(vel12_com));
    const OptVec acc_com = detail::sub_rate(vel12_com, vel01_com, dt);
    setv(i, vc.at("lin_acc_com_raw"), acc_com);
    sets(i, vc.at("lin_acc_com_mag_raw"), detail::norm_of(acc_com));
    sets(i, vc.at("directionality_com_raw"), detail::cosine(vel12_com, r_com));
    sets(i, vc.at("directionality_acc_com_raw"),
         detail::sub_rate(detail::cosine(vel12_com, r_com),
                          detail::cosine(vel01_com, r_com), dt));
    const OptVec w12_com = detail::angular_rate(r_com, vel12_com);
    const OptVec w01_com = detail::angular_rate(r_com, vel01_com);
    setv_ang(i, vc.at("ang_vel_com_raw"), w12_com);
    sets(i, vc.at("ang_vel_mag_com_raw"), detail::norm_of(w12_com));
    setv_ang(i, vc.at("ang_vel_orient_com_raw"), detail::unit_of(w12_com));
    const OptVec wacc_com = detail::sub_rate(w12_com, w01_com, dt);
    setv_ang(i, vc.at("ang_acc_com_raw"), wacc_com);
    sets(i, vc.at("ang_acc_com_mag_raw"), detail::norm_of(wacc_com));

    // no-reference angular velocity: rotation taking v01 onto v12. Its rate
    // would need a third transition, so the no-reference angular
    // acceleration stays null.
    const OptVec w_raw = detail::rotation_between(vel01, vel12, dt, is_3d);
    setv_ang(i, vc.at("ang_vel_raw"), w_raw);
    sets(i, vc.at("ang_vel_mag_raw"), detail::norm_of(w_raw));
    setv_ang(i, vc.at("ang_vel_orient_raw"), detail::unit_of(w_raw));
  });

  // ---- node table --------------------------------------------------------
  const Skeleton& sk = h.skeleton;
  const std::size_t n_nodes = sk.size();
  FeatureTable& nt = out.nodes;
  const int nc_frame = nt.add_column("frame", FeatureTable::ColKind::Int);
  const int nc_id = nt.add_column("node_id", FeatureTable::ColKind::Int);
  const int nc_z = nt.add_column("z", FeatureTable::ColKind::Int);
  const int nc_y = nt.add_column("y", FeatureTable::ColKind::Int);
  const int nc_x = nt.add_column("x", FeatureTable::ColKind::Int);
  const int nc_org = nt.add_column("organelle_label", FeatureTable::ColKind::Int);
  const int nc_br = nt.add_column("branch_label", FeatureTable::ColKind::Int);
  const int nc_thick =
      nt.add_column("thickness_raw", FeatureTable::ColKind::Scalar, true);
  const int nc_ang_uni = nt.add_column("ang_direction_uniformity_raw",
                                       FeatureTable::ColKind::Scalar, true);
  const int nc_lin_uni = nt.add_column("lin_direction_uniformity_raw",
                                       FeatureTable::ColKind::Scalar, true);
  const int nc_ang_var = nt.add_column("ang_magnitude_variability_raw",
                                       FeatureTable::ColKind::Scalar, true);
  const int nc_lin_var = nt.add_column("lin_magnitude_variability_raw",
                                       FeatureTable::ColKind::Scalar, true);
  const int nc_verg =
      nt.add_column("vergere_raw", FeatureTable::ColKind::Scalar, true);
  const int nc_conv =
      nt.add_column("convergence_raw", FeatureTable::ColKind::Scalar, true);
  const int nc_div =
      nt.add_column("divergence_raw", FeatureTable::ColKind::Scalar, true);
  nt.add_rows(n_nodes);

  std::vector<std::vector<std::size_t>> node_members(n_nodes);
  {
    const KdTree fg_tree(fg_um);
    parallel_for(static_cast<std::int64_t>(n_nodes), threads, [&](std::int64_t k) {
      const Eigen::Vector3d c = sk.voxels[k].to_um(meta);
      const double radius = h.distance(sk.voxels[k]);
      for (int idx : fg_tree.radius(c, radius))
        node_members[k].push_back(static_cast<std::size_t>(idx));
    });
  }

  parallel_for(static_cast<std::int64_t>(n_nodes), threads, [&](std::int64_t k) {
    const Voxel& nv = sk.voxels[k];
    nt.set_int(k, nc_frame, pack.frame_index);
    nt.set_int(k, nc_id, static_cast<std::int64_t>(k) + 1);
    nt.set_int(k, nc_z, nv.z);
    nt.set_int(k, nc_y, nv.y);
    nt.set_int(k, nc_x, nv.x);
    nt.set_int(k, nc_org, h.organelle_labels(nv));
    nt.set_int(k, nc_br, sk.branch_id[k]);
    nt.set_scalar(k, nc_thick, 2.0 * h.distance(nv));

    const Eigen::Vector3d center = nv.to_um(meta);
    double conv_sum = 0.0, div_sum = 0.0;
    int conv_n = 0, div_n = 0;
    double lin_mag_sum = 0.0, lin_mag_sum2 = 0.0;
    int lin_mag_n = 0;
    double ang_mag_sum = 0.0, ang_mag_sum2 = 0.0;
    int ang_mag_n = 0;
    Eigen::Vector3d lin_dir_sum = Eigen::Vector3d::Zero();
    int lin_dir_n = 0;
    Eigen::Vector3d ang_dir_sum = Eigen::Vector3d::Zero();
    int ang_dir_n = 0;

    for (std::size_t m : node_members[k]) {
      const Eigen::Vector3d to_center = center - fg_um[m];
      const double d = to_center.norm();
      if (v01[m] && d > 0.0) {
        conv_sum += v01[m]->dot(to_center / d);
        ++conv_n;
      }
      if (v12[m] && d > 0.0) {
        div_sum += v12[m]->dot(-to_center / d);
        ++div_n;
      }
      if (v12[m]) {
        const double mag = v12[m]->norm();
        lin_mag_sum += mag;
        lin_mag_sum2 += mag * mag;
        ++lin_mag_n;
        if (mag > 0.0) {
          lin_dir_sum += *v12[m] / mag;
          ++lin_dir_n;
        }
      }
      const OptVec w = detail::rotation_between(v01[m], v12[m], dt, is_3d);
      if (w) {
        const double mag = w->norm();
        ang_mag_sum += mag;
        ang_mag_sum2 += mag * mag;
        ++ang_mag_n;
        if (mag > 0.0) {
          ang_dir_sum += *w / mag;
          ++ang_dir_n;
        }
      }
    }

    std::optional<double> convergence, divergence;
    if (pack.bwd && conv_n > 0) convergence = conv_sum / conv_n;
    if (pack.fwd && div_n > 0) divergence = div_sum / div_n;
    if (convergence) nt.set_scalar(k, nc_conv, *convergence);
    if (divergence) nt.set_scalar(k, nc_div, *divergence);
    if (convergence && divergence)
      nt.set_scalar(k, nc_verg, *divergence + *convergence);

    if (pack.fwd && lin_mag_n > 0) {
      const double mean = lin_mag_sum / lin_mag_n;
      nt.set_scalar(k, nc_lin_var,
                    std::sqrt(std::max(0.0, lin_mag_sum2 / lin_mag_n - mean * mean)));
    }
    if (pack.fwd && pack.bwd && ang_mag_n > 0) {
      const double mean = ang_mag_sum / ang_mag_n;
      nt.set_scalar(k, nc_ang_var,
                    std::sqrt(std::max(0.0, ang_mag_sum2 / ang_mag_n - mean * mean)));
    }
    // mean of the full pairwise dot matrix (diagonal included) = |sum u|^2/n^2
    if (lin_dir_n > 0)
      nt.set_scalar(k, nc_lin_uni,
                    lin_dir_sum.squaredNorm() / (double(lin_dir_n) * lin_dir_n));
    if (ang_dir_n > 0)
      nt.set_scalar(k, nc_ang_uni,
                    ang_dir_sum.squaredNorm() / (double(ang_dir_n) * ang_dir_n));
  });

  append_aggregates(nt, vt, "voxel", node_members);

  // ---- branch table -------------------------------------------------------
  std::uint32_t n_branches = 0;
  for (std::size_t i = 0; i < n_vox; ++i)
    n_branches = std::max(n_branches, h.branch_labels(fg[i]));

  std::vector<std::vector<std::size_t>> branch_voxels(n_branches);
  for (std::size_t i = 0; i < n_vox; ++i) {
    const std::uint32_t b = h.branch_labels(fg[i]);
    if (b > 0) branch_voxels[b - 1].push_back(i);
  }
  std::vector<std::vector<std::size_t>> branch_nodes(n_branches);
  for (std::size_t k = 0; k < n_nodes; ++k) {
    const std::uint32_t b = sk.branch_id[k];
    if (b > 0 && b <= n_branches) branch_nodes[b - 1].push_back(k);
  }

  FeatureTable& bt = out.branches;
  const int bc_frame = bt.add_column("frame", FeatureTable::ColKind::Int);
  const int bc_id = bt.add_column("branch_label", FeatureTable::ColKind::Int);
  const int bc_org = bt.add_column("organelle_label", FeatureTable::ColKind::Int);
  const int bc_reass =
      bt.add_column("reassigned_label_raw", FeatureTable::ColKind::Scalar);
  const int bc_len = bt.add_column("length_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_thick =
      bt.add_column("thickness_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_aspect =
      bt.add_column("aspect_ratio_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_tort =
      bt.add_column("tortuosity_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_area = bt.add_column("area_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_maj =
      bt.add_column("axis_length_maj_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_min =
      bt.add_column("axis_length_min_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_ext = bt.add_column("extent_raw", FeatureTable::ColKind::Scalar, true);
  const int bc_sol =
      bt.add_column("solidity_raw", FeatureTable::ColKind::Scalar, true);
  bt.add_rows(n_branches);

  auto mode_label = [](const VolumeU32* vol,
                       const std::vector<Voxel>& voxels) -> std::optional<double> {
    if (!vol) return std::nullopt;
    std::map<std::uint32_t, std::size_t> counts;
    for (const Voxel& v : voxels) {
      const std::uint32_t l = (*vol)(v);
      if (l) ++counts[l];
    }
    if (counts.empty()) return std::nullopt;
    std::uint32_t best = 0;
    std::size_t best_n = 0;
    for (const auto& [l, n] : counts)
      if (n > best_n) {  // map order makes ties resolve to the lowest label
        best = l;
        best_n = n;
      }
    return static_cast<double>(best);
  };

  parallel_for(static_cast<std::int64_t>(n_branches), threads, [&](std::int64_t bi) {
    const std::uint32_t b = static_cast<std::uint32_t>(bi) + 1;
    bt.set_int(bi, bc_frame, pack.frame_index);
    bt.set_int(bi, bc_id, b);
    if (branch_voxels[bi].empty()) return;

    std::vector<Voxel> mask_voxels;
    mask_voxels.reserve(branch_voxels[bi].size());
    for (std::size_t r : branch_voxels[bi]) mask_voxels.push_back(fg[r]);
    bt.set_int(bi, bc_org, h.organelle_labels(mask_voxels[0]));

    const RegionProps rp = region_properties(mask_voxels, meta);
    bt.set_scalar(bi, bc_area, rp.area);
    bt.set_scalar(bi, bc_maj, rp.axis_length_maj);
    bt.set_scalar(bi, bc_min, rp.axis_length_min);
    bt.set_scalar(bi, bc_ext, rp.extent);
    bt.set_scalar(bi, bc_sol, rp.solidity);

    const auto reass = mode_label(pack.reassigned_branch, mask_voxels);
    if (reass) bt.set_scalar(bi, bc_reass, *reass);

    // skeleton metrics need skeleton voxels
    const auto& nodes_here = branch_nodes[bi];
    if (nodes_here.empty()) return;

    double edge_sum = 0.0;
    std::vector<std::size_t> tips;
    double bd_sum = 0.0;
    for (std::size_t k : nodes_here) {
      const Voxel& a = sk.voxels[k];
      bd_sum += h.distance(a);
      if (sk.cls[k] == SkelClass::Tip || sk.cls[k] == SkelClass::LoneTip)
        tips.push_back(k);
      // intra-branch linkages: voxel pairs closer than 2 voxel units are
      // exactly the full-connectivity neighbors; count each pair once
      for (const Voxel& o : neighbor_offsets(is_3d, true)) {
        const Voxel nb{a.z + o.z, a.y + o.y, a.x + o.x};
        if (!h.node_labels.in_bounds(nb)) continue;
        const std::uint32_t nid = h.node_labels(nb);
        if (nid == 0 || sk.branch_id[nid - 1] != b) continue;
        if (nb < a) continue;  // lower-triangle only
        edge_sum += (nb.to_um(meta) - a.to_um(meta)).norm();
      }
    }

    double length;
    if (nodes_here.size() == 1) {
      length = 2.0 * h.distance(sk.voxels[nodes_here[0]]);
      bt.set_scalar(bi, bc_tort, 1.0);
    } else {
      double tip_bd = 0.0;
      for (std::size_t k : tips) tip_bd += h.distance(sk.voxels[k]);
      length = edge_sum + tip_bd;
      if (tips.size() == 2) {
        const double chord = (sk.voxels[tips[0]].to_um(meta) -
                              sk.voxels[tips[1]].to_um(meta))
                                 .norm();
        // the tip extensions stretch the numerator and the chord alike, so
        // straight branches stay at exactly 1
        bt.set_scalar(bi, bc_tort, length / (chord + tip_bd));
      }
      // cyclic branches (no tips) leave tortuosity null
    }
    bt.set_scalar(bi, bc_len, length);
    const double thickness = 2.0 * bd_sum / static_cast<double>(nodes_here.size());
    bt.set_scalar(bi, bc_thick, thickness);
    if (thickness > 0.0) bt.set_scalar(bi, bc_aspect, length / thickness);
  });

  append_aggregates(bt, vt, "voxel", branch_voxels);
  append_aggregates(bt, nt, "node", branch_nodes);

  // ---- organelle table ----------------------------------------------------
  const std::uint32_t n_orgs = max_label(h.organelle_labels);
  std::vector<std::vector<std::size_t>> org_voxels(n_orgs), org_nodes(n_orgs),
      org_branches(n_orgs);
  for (std::size_t i = 0; i < n_vox; ++i) {
    const std::uint32_t o = h.organelle_labels(fg[i]);
    if (o > 0) org_voxels[o - 1].push_back(i);
  }
  for (std::size_t k = 0; k < n_nodes; ++k) {
    const std::uint32_t o = h.organelle_labels(sk.voxels[k]);
    if (o > 0) org_nodes[o - 1].push_back(k);
  }
  for (std::uint32_t b = 1; b <= n_branches; ++b) {
    if (branch_voxels[b - 1].empty()) continue;
    const std::uint32_t o = h.organelle_labels(fg[branch_voxels[b - 1][0]]);
    if (o > 0) org_branches[o - 1].push_back(b - 1);
  }

  FeatureTable& ot = out.organelles;
  const int oc_frame = ot.add_column("frame", FeatureTable::ColKind::Int);
  const int oc_id = ot.add_column("organelle_label", FeatureTable::ColKind::Int);
  const int oc_reass =
      ot.add_column("reassigned_label_raw", FeatureTable::ColKind::Scalar);
  const int oc_area = ot.add_column("area_raw", FeatureTable::ColKind::Scalar, true);
  const int oc_maj =
      ot.add_column("axis_length_maj_raw", FeatureTable::ColKind::Scalar, true);
  const int oc_min =
      ot.add_column("axis_length_min_raw", FeatureTable::ColKind::Scalar, true);
  const int oc_ext = ot.add_column("extent_raw", FeatureTable::ColKind::Scalar, true);
  const int oc_sol =
      ot.add_column("solidity_raw", FeatureTable::ColKind::Scalar, true);
  const int oc_in_min = ot.add_column("inertia_tensor_eig_sorted_min_raw",
                                      FeatureTable::ColKind::Scalar, true);
  const int oc_in_mid = ot.add_column("inertia_tensor_eig_sorted_mid_raw",
                                      FeatureTable::ColKind::Scalar, true);
  const int oc_in_max = ot.add_column("inertia_tensor_eig_sorted_max_raw",
                                      FeatureTable::ColKind::Scalar, true);
  ot.add_rows(n_orgs);

  parallel_for(static_cast<std::int64_t>(n_orgs), threads, [&](std::int64_t oi) {
    ot.set_int(oi, oc_frame, pack.frame_index);
    ot.set_int(oi, oc_id, oi + 1);
    if (org_voxels[oi].empty()) return;
    std::vector<Voxel> voxels;
    voxels.reserve(org_voxels[oi].size());
    for (std::size_t r : org_voxels[oi]) voxels.push_back(fg[r]);
    const RegionProps rp = region_properties(voxels, meta);
    ot.set_scalar(oi, oc_area, rp.area);
    ot.set_scalar(oi, oc_maj, rp.axis_length_maj);
    ot.set_scalar(oi, oc_min, rp.axis_length_min);
    ot.set_scalar(oi, oc_ext, rp.extent);
    ot.set_scalar(oi, oc_sol, rp.solidity);
    ot.set_scalar(oi, oc_in_min, rp.inertia_eigs_sorted[0]);
    if (!std::isnan(rp.inertia_eigs_sorted[1]))
      ot.set_scalar(oi, oc_in_mid, rp.inertia_eigs_sorted[1]);
    ot.set_scalar(oi, oc_in_max, rp.inertia_eigs_sorted[2]);
    const auto reass = mode_label(pack.reassigned_org, voxels);
    if (reass) ot.set_scalar(oi, oc_reass, *reass);
  });

  append_aggregates(ot, vt, "voxel", org_voxels);
  append_aggregates(ot, nt, "node", org_nodes);
  append_aggregates(ot, bt, "branch", org_branches);

  // ---- image table ----------------------------------------------------------
  FeatureTable& it = out.image;
  const int ic_frame = it.add_column("frame", FeatureTable::ColKind::Int);
  it.add_rows(1);
  it.set_int(0, ic_frame, pack.frame_index);
  auto all_rows = [](std::size_t n) {
    std::vector<std::vector<std::size_t>> m(1);
    m[0].resize(n);
    for (std::size_t i = 0; i < n; ++i) m[0][i] = i;
    return m;
  };
  append_aggregates(it, vt, "voxel", all_rows(vt.rows()));
  append_aggregates(it, nt, "node", all_rows(nt.rows()));
  append_aggregates(it, bt, "branch", all_rows(bt.rows()));
  append_aggregates(it, ot, "organelle", all_rows(ot.rows()));

  return out;
}

}  // namespace otk

#endif  // OTK_FEATURES_HPP
