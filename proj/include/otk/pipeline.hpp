/* otk/pipeline.hpp
 *
 * End-to-end orchestration: TIFF ingestion driven by a sidecar/CLI
 * metadata config, per-frame enhancement and segmentation, marker
 * detection and linking, flow-guided label propagation, feature tables,
 * and multimesh export. Every stage persists its artifacts under the
 * output directory and can resume from the cached artifacts of earlier
 * stages; a manifest records the configuration, artifact list, and
 * per-stage wall times.
 */

#ifndef OTK_PIPELINE_HPP
#define OTK_PIPELINE_HPP

#include "otk/csv.hpp"
#include "otk/features.hpp"
#include "otk/mocap.hpp"
#include "otk/multimesh.hpp"
#include "otk/tiff.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace otk {

inline constexpr const char* kPipelineVersion = "0.1.0";

struct RunConfig {
  std::string input_path;
  std::string output_dir = "otk_out";
  std::string dim_order = "YX";  // over {T, C, Z, Y, X}, ending in YX
  double spacing_x = 1.0;        // um
  double spacing_y = -1.0;       // defaults to spacing_x
  double spacing_z = 1.0;        // um
  double dt = 1.0;               // s
  int channel = 0;
  double max_speed_um_s = 1.0;
  double min_peak_dist_um = -1.0;  // default: max(0.20, spacing_x)
  std::size_t eigen_chunk = kDefaultEigenChunk;
  int threads = 0;  // 0: OTK_THREADS env or hardware
  bool debug_scales = false;
  bool multimesh_jsonl = false;
  int size_t_axis = 0;  // optional explicit axis sizes (0 = infer)
  int size_c_axis = 0;
  int size_z_axis = 0;

  double spacing_y_resolved() const {
    return spacing_y > 0 ? spacing_y : spacing_x;
  }
  int threads_resolved() const {
    return threads > 0 ? threads : default_thread_count();
  }
  double min_peak_dist_resolved() const {
    return min_peak_dist_um > 0 ? min_peak_dist_um
                                : std::max(kMinRadiusUm, spacing_x);
  }

  void validate() const {
    if (dim_order.size() < 2 || dim_order.substr(dim_order.size() - 2) != "YX")
      throw std::invalid_argument("dim_order must end in YX: " + dim_order);
    for (char c : dim_order)
      if (std::string("TCZYX").find(c) == std::string::npos)
        throw std::invalid_argument("dim_order axis must be one of TCZYX");
    for (char c : std::string("TCZYX"))
      if (std::count(dim_order.begin(), dim_order.end(), c) > 1)
        throw std::invalid_argument("dim_order repeats an axis");
    if (spacing_x <= 0 || spacing_z <= 0)
      throw std::invalid_argument("spacings must be > 0");
    if (dt <= 0) throw std::invalid_argument("dt must be > 0");
    if (max_speed_um_s <= 0)
      throw std::invalid_argument("max_speed_um_s must be > 0");
  }
};

// Merge sidecar JSON (<input>.meta.json) under explicit CLI values; CLI
// wins wherever it was set.
inline void apply_sidecar(RunConfig& cfg) {
  const std::filesystem::path sidecar = cfg.input_path + ".meta.json";
  if (!std::filesystem::exists(sidecar)) return;
  std::ifstream is(sidecar);
  nlohmann::json j;
  is >> j;
  auto take_str = [&](const char* key, std::string& dst) {
    if (j.contains(key) && dst.empty()) dst = j[key].get<std::string>();
  };
  auto take_num = [&](const char* key, double& dst, double unset) {
    if (j.contains(key) && dst == unset) dst = j[key].get<double>();
  };
  auto take_int = [&](const char* key, int& dst, int unset) {
    if (j.contains(key) && dst == unset) dst = j[key].get<int>();
  };
  std::string dims;
  take_str("dim_order", dims);
  if (!dims.empty() && cfg.dim_order == "YX") cfg.dim_order = dims;
  take_num("spacing_x", cfg.spacing_x, 1.0);
  take_num("spacing_y", cfg.spacing_y, -1.0);
  take_num("spacing_z", cfg.spacing_z, 1.0);
  take_num("dt", cfg.dt, 1.0);
  take_int("channel", cfg.channel, 0);
  take_int("size_t", cfg.size_t_axis, 0);
  take_int("size_c", cfg.size_c_axis, 0);
  take_int("size_z", cfg.size_z_axis, 0);
}

inline VolumeMeta frame_meta(const RunConfig& cfg, bool is_3d) {
  VolumeMeta m;
  std::string order;
  for (char c : cfg.dim_order)
    if (c != 'C') order += c;
  m.dim_order = order;
  m.spacing_x = cfg.spacing_x;
  m.spacing_y = cfg.spacing_y_resolved();
  m.spacing_z = cfg.spacing_z;
  m.dt = cfg.dt;
  m.is_3d = is_3d;
  return m;
}

// TIFF stack -> per-timepoint frames, channel-sliced, float-widened.
inline std::vector<Frame> load_input(const RunConfig& cfg) {
  cfg.validate();
  const TiffStack stack = read_tiff(cfg.input_path);
  const std::size_t n_pages = stack.pages.size();
  const std::uint32_t width = stack.pages[0].width;
  const std::uint32_t height = stack.pages[0].height;
  for (const TiffPage& p : stack.pages)
    if (p.width != width || p.height != height)
      throw std::runtime_error("TIFF pages have inconsistent shapes");

  // validate the writer-side axes metadata when present; its sizes also
  // serve as defaults so our own stacks are self-describing
  std::map<char, int> desc_sizes;
  if (!stack.description.empty() &&
      stack.description.rfind("axes=", 0) == 0) {
    std::string axes = stack.description.substr(5);
    const auto semi = axes.find(';');
    std::string rest = semi == std::string::npos ? "" : axes.substr(semi + 1);
    axes = axes.substr(0, semi);
    std::stringstream ss(rest);
    std::string kv;
    while (std::getline(ss, kv, ';')) {
      const auto eq = kv.find('=');
      if (eq != std::string::npos && eq == 1)
        desc_sizes[kv[0]] = std::stoi(kv.substr(eq + 1));
    }
    if (axes != cfg.dim_order)
      throw std::runtime_error("dim_order '" + cfg.dim_order +
                               "' does not match the file's axes '" + axes + "'");
  }

  // sizes of the page-major axes (everything before YX)
  std::string page_axes = cfg.dim_order.substr(0, cfg.dim_order.size() - 2);
  std::map<char, std::size_t> sizes;
  for (char a : page_axes) {
    const int from_cfg = a == 'T'   ? cfg.size_t_axis
                         : a == 'C' ? cfg.size_c_axis
                                    : a == 'Z' ? cfg.size_z_axis : 0;
    if (from_cfg > 0) sizes[a] = static_cast<std::size_t>(from_cfg);
    else if (desc_sizes.count(a) && desc_sizes[a] > 0)
      sizes[a] = static_cast<std::size_t>(desc_sizes[a]);
  }
  std::size_t known = 1;
  int unknown = 0;
  char unknown_axis = 0;
  for (char a : page_axes) {
    if (sizes.count(a)) known *= sizes[a];
    else {
      ++unknown;
      unknown_axis = a;
    }
  }
  if (unknown > 1)
    throw std::runtime_error(
        "ambiguous page layout: specify sizes (size_t/size_c/size_z) for all "
        "but one of the axes " + page_axes);
  if (unknown == 1) {
    if (n_pages % known != 0)
      throw std::runtime_error("page count " + std::to_string(n_pages) +
                               " is not divisible by the given axis sizes");
    sizes[unknown_axis] = n_pages / known;
  } else if (known != n_pages) {
    throw std::runtime_error("axis sizes imply " + std::to_string(known) +
                             " pages but the file has " + std::to_string(n_pages));
  }
  if (page_axes.empty() && n_pages != 1)
    throw std::runtime_error("dim_order " + cfg.dim_order + " implies 1 page but the file has " +
                             std::to_string(n_pages));

  const std::size_t size_t_ = sizes.count('T') ? sizes['T'] : 1;
  const std::size_t size_c = sizes.count('C') ? sizes['C'] : 1;
  const std::size_t size_z = sizes.count('Z') ? sizes['Z'] : 1;
  if (cfg.channel < 0 || static_cast<std::size_t>(cfg.channel) >= size_c)
    throw std::runtime_error("channel index out of range");

  // page index for (t, c, z) following dim_order's page-major order
  auto page_index = [&](std::size_t t, std::size_t c, std::size_t z) {
    std::size_t idx = 0;
    for (char a : page_axes) {
      const std::size_t extent = a == 'T' ? size_t_ : a == 'C' ? size_c : size_z;
      const std::size_t val = a == 'T' ? t : a == 'C' ? c : z;
      idx = idx * extent + val;
    }
    return idx;
  };

  const bool is_3d = size_z > 1;
  const VolumeMeta meta = frame_meta(cfg, is_3d);
  meta.validate();

  std::vector<Frame> frames;
  for (std::size_t t = 0; t < size_t_; ++t) {
    Frame f;
    f.meta = meta;
    f.values = VolumeF(static_cast<Index>(size_z), height, width);
    for (std::size_t z = 0; z < size_z; ++z) {
      const TiffPage& p =
          stack.pages[page_index(t, static_cast<std::size_t>(cfg.channel), z)];
      std::copy(p.as_float.begin(), p.as_float.end(),
                f.values.data() + static_cast<std::size_t>(z) * height * width);
    }
    f.validate();
    frames.push_back(std::move(f));
  }
  if (frames.size() == 1 && cfg.dim_order.find('T') != std::string::npos)
    std::cerr << "[otk] note: single timepoint; temporal stages are no-ops\n";
  return frames;
}

// ---------------------------------------------------------------------------

namespace pipelinedet {

inline std::string frame_tag(int t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d", t);
  return buf;
}

inline std::string axes_description(const VolumeMeta& meta, Index nz) {
  std::ostringstream ss;
  ss << "axes=" << (meta.is_3d ? "ZYX" : "YX");
  if (meta.is_3d) ss << ";Z=" << nz;
  return ss.str();
}

}  // namespace pipelinedet

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    out_ = std::filesystem::path(cfg_.output_dir);
    preflight();
  }

  // stage order for --from
  static const std::vector<std::string>& stage_names() {
    static const std::vector<std::string> names = {
        "enhance", "segment", "mocap", "link", "flow", "features", "multimesh"};
    return names;
  }

  void run_all(const std::string& from = {}) {
    int start = 0;
    if (!from.empty()) {
      const auto& names = stage_names();
      const auto it = std::find(names.begin(), names.end(), from);
      if (it == names.end())
        throw std::invalid_argument("unknown stage: " + from);
      start = static_cast<int>(it - names.begin());
    }
    if (start <= 0) guarded("enhance", [&] { run_enhance(); });
    if (start <= 1) guarded("segment", [&] { run_segment(); });
    if (start <= 2) guarded("mocap", [&] { run_mocap(); });
    if (start <= 3) guarded("link", [&] { run_link(); });
    if (start <= 4) guarded("flow", [&] { run_flow(); });
    if (start <= 5) guarded("features", [&] { run_features(); });
    if (start <= 6) guarded("multimesh", [&] { run_multimesh(); });
    write_manifest();
  }

  void run_stage(const std::string& name) {
    if (name == "run") {
      run_all();
      return;
    }
    guarded(name, [&] {
      if (name == "enhance") run_enhance();
      else if (name == "segment") run_segment();
      else if (name == "mocap") run_mocap();
      else if (name == "link") run_link();
      else if (name == "flow") run_flow();
      else if (name == "features") run_features();
      else if (name == "multimesh") run_multimesh();
      else throw std::invalid_argument("unknown stage");
    });
    write_manifest();
  }

  // ---- stages -------------------------------------------------------------

  void run_enhance() {
    const auto t0 = now();
    ensure_frames();
    scales_ = compute_scale_sigmas(frames_[0].meta);
    enhanced_.assign(frames_.size(), {});
    const int threads = cfg_.threads_resolved();
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      frame_guard(t, [&] {
        std::vector<VolumeF> per_scale;
        enhanced_[t] = enhance_frame(frames_[t], scales_, cfg_.eigen_chunk, threads,
                                     cfg_.debug_scales ? &per_scale : nullptr);
        write_volume_f32(subdir("preprocessed") / tif(t), enhanced_[t].values);
        write_winning_scale(subdir("winning_scale") / tif(t),
                            enhanced_[t].winning_scale);
        if (cfg_.debug_scales)
          for (std::size_t s = 0; s < per_scale.size(); ++s)
            write_volume_f32(subdir("scales") /
                                 (pipelinedet::frame_tag(static_cast<int>(t)) +
                                  "_scale" + std::to_string(s) + ".tif"),
                             per_scale[s]);
      });
    }
    record_stage("enhance", t0);
  }

  void run_segment() {
    const auto t0 = now();
    ensure_enhanced();
    hier_.assign(enhanced_.size(), {});
    const int threads = cfg_.threads_resolved();
    for (std::size_t t = 0; t < enhanced_.size(); ++t) {
      frame_guard(t, [&] {
        hier_[t] = build_hierarchy(enhanced_[t], meta(), threads);
        write_mask(subdir("semantic") / tif(t), hier_[t].semantic);
        write_volume_u32(subdir("organelle_labels") / tif(t), hier_[t].organelle_labels);
        write_volume_u32(subdir("branch_labels") / tif(t), hier_[t].branch_labels);
        write_volume_u32(subdir("node_labels") / tif(t), hier_[t].node_labels);
        write_volume_f32(subdir("distance") / tif(t), hier_[t].distance);
      });
    }
    record_stage("segment", t0);
  }

  void run_mocap() {
    const auto t0 = now();
    ensure_frames();
    ensure_scales();
    ensure_hierarchy();
    markers_.assign(frames_.size(), {});
    for (std::size_t t = 0; t < frames_.size(); ++t)
      markers_[t] = detect_markers(hier_[t].distance, scales_, hier_[t].semantic,
                                   frames_[t].values, meta(),
                                   cfg_.min_peak_dist_resolved(),
                                   static_cast<int>(t));
    write_markers_csv();
    record_stage("mocap", t0);
  }

  void run_link() {
    const auto t0 = now();
    ensure_frames();
    ensure_enhanced();
    ensure_markers();
    linkages_.assign(n_pairs(), {});
    for (std::size_t t = 0; t + 1 < frames_.size(); ++t) {
      if (markers_[t].empty() || markers_[t + 1].empty()) continue;
      std::vector<MarkerFeatures> f0, f1;
      for (const MocapMarker& m : markers_[t])
        f0.push_back(marker_features(m, frames_[t], enhanced_[t].values));
      for (const MocapMarker& m : markers_[t + 1])
        f1.push_back(marker_features(m, frames_[t + 1], enhanced_[t + 1].values));
      const CostMatrix cm = build_cost_matrix(markers_[t], markers_[t + 1], f0,
                                              f1, meta(), cfg_.max_speed_um_s);
      linkages_[t] = assign_bidirectional(cm);
    }
    write_linkages_csv();
    record_stage("link", t0);
  }

  void run_flow() {
    const auto t0 = now();
    ensure_markers();
    ensure_linkages();
    ensure_hierarchy();
    const int threads = cfg_.threads_resolved();
    const double max_dist = cfg_.max_speed_um_s * meta().dt;

    // reassigned labels: frame 0 keeps its own labels, then chained
    // propagation through every adjacent pair
    reassigned_org_.assign(n_frames(), {});
    reassigned_branch_.assign(n_frames(), {});
    reassigned_org_[0] = hier_[0].organelle_labels;
    reassigned_branch_[0] = hier_[0].branch_labels;
    for (std::size_t t = 0; t + 1 < n_frames(); ++t) {
      const FlowAnchors fwd = pair_forward_anchors(t);
      const FlowAnchors bwd = pair_backward_anchors(t);
      reassigned_org_[t + 1] =
          propagate_labels(reassigned_org_[t], hier_[t + 1].semantic, fwd, bwd,
                           meta(), max_dist, threads);
      reassigned_branch_[t + 1] =
          propagate_labels(reassigned_branch_[t], hier_[t + 1].semantic, fwd,
                           bwd, meta(), max_dist, threads);
    }
    for (std::size_t t = 0; t < n_frames(); ++t) {
      write_volume_u32(subdir("reassigned_organelle") / tif(t), reassigned_org_[t]);
      write_volume_u32(subdir("reassigned_branch") / tif(t), reassigned_branch_[t]);
    }

    // tracks: one per frame-0 marker, hopping through forward flow
    FeatureTable tracks;
    const int tc_id = tracks.add_column("track_id", FeatureTable::ColKind::Int);
    const int tc_frame = tracks.add_column("frame", FeatureTable::ColKind::Int);
    const int tc_z = tracks.add_column("z_um", FeatureTable::ColKind::Scalar);
    const int tc_y = tracks.add_column("y_um", FeatureTable::ColKind::Scalar);
    const int tc_x = tracks.add_column("x_um", FeatureTable::ColKind::Scalar);
    const int tc_anch = tracks.add_column("anchored_flag", FeatureTable::ColKind::Int);
    if (!markers_.empty()) {
      std::vector<Eigen::Vector3d> pos;
      for (const MocapMarker& m : markers_[0]) pos.push_back(m.coord_um);
      std::vector<int> anchored(pos.size(), 1);
      for (std::size_t t = 0; t < n_frames(); ++t) {
        const std::size_t base = tracks.rows();
        tracks.add_rows(pos.size());
        for (std::size_t i = 0; i < pos.size(); ++i) {
          tracks.set_int(base + i, tc_id, static_cast<std::int64_t>(i));
          tracks.set_int(base + i, tc_frame, static_cast<std::int64_t>(t));
          tracks.set_scalar(base + i, tc_z, pos[i][0]);
          tracks.set_scalar(base + i, tc_y, pos[i][1]);
          tracks.set_scalar(base + i, tc_x, pos[i][2]);
          tracks.set_int(base + i, tc_anch, anchored[i]);
        }
        if (t + 1 < n_frames()) {
          const FlowAnchors fwd = pair_forward_anchors(t);
          for (std::size_t i = 0; i < pos.size(); ++i) {
            const FlowSample s = interpolate_flow_at(fwd, pos[i], max_dist);
            pos[i] += s.v;
            anchored[i] = s.anchored ? 1 : 0;
          }
        }
      }
    }
    write_csv_file((out_ / "tracks.csv").string(), tracks);
    artifacts_.push_back("tracks.csv");
    record_stage("flow", t0);
  }

  void run_features() {
    const auto t0 = now();
    ensure_frames();
    ensure_enhanced();
    ensure_hierarchy();
    ensure_markers();
    ensure_linkages();
    ensure_reassigned();
    const int threads = cfg_.threads_resolved();
    const double max_dist = cfg_.max_speed_um_s * meta().dt;

    std::vector<std::optional<Eigen::Vector3d>> coms(n_frames());
    for (std::size_t t = 0; t < n_frames(); ++t) {
      try {
        coms[t] = center_of_mass(frames_[t]);
      } catch (const std::invalid_argument&) {
        coms[t] = std::nullopt;
      }
    }

    frame_features_.clear();
    for (std::size_t t = 0; t < n_frames(); ++t) {
      FlowAnchors fwd, bwd;
      FramePack pack;
      pack.frame_index = static_cast<int>(t);
      pack.raw = &frames_[t];
      pack.pre = &enhanced_[t].values;
      pack.hier = &hier_[t];
      pack.reassigned_org = reassigned_org_.empty() ? nullptr : &reassigned_org_[t];
      pack.reassigned_branch =
          reassigned_branch_.empty() ? nullptr : &reassigned_branch_[t];
      if (t + 1 < n_frames()) {
        fwd = pair_forward_anchors(t);
        pack.fwd = &fwd;
      }
      if (t > 0) {
        bwd = pair_backward_anchors(t - 1);
        pack.bwd = &bwd;
      }
      pack.com = coms[t];
      if (t > 0) pack.com_prev = coms[t - 1];
      if (t + 1 < n_frames()) pack.com_next = coms[t + 1];
      pack.max_dist_um = max_dist;
      frame_features_.push_back(compute_frame_features(pack, threads));
    }

    auto collect = [&](auto proj, const std::string& filename) {
      std::vector<FeatureTable> tables;
      for (const FrameFeatures& ff : frame_features_) tables.push_back(proj(ff));
      write_csv_file((out_ / filename).string(), tables);
      artifacts_.push_back(filename);
    };
    collect([](const FrameFeatures& f) { return f.voxels; }, "features_voxels.csv");
    collect([](const FrameFeatures& f) { return f.nodes; }, "features_nodes.csv");
    collect([](const FrameFeatures& f) { return f.branches; }, "features_branches.csv");
    collect([](const FrameFeatures& f) { return f.organelles; },
            "features_organelles.csv");
    collect([](const FrameFeatures& f) { return f.image; }, "features_image.csv");
    record_stage("features", t0);
  }

  void run_multimesh() {
    const auto t0 = now();
    ensure_hierarchy();
    if (frame_features_.empty()) run_features();
    for (std::size_t t = 0; t < n_frames(); ++t) {
      const std::vector<MultiMesh> meshes = build_frame_multimeshes(hier_[t]);
      const MultimeshTables tables =
          export_multimesh(meshes, frame_features_[t].nodes, meta(),
                           hier_[t].skeleton, static_cast<int>(t));
      const std::string tag = pipelinedet::frame_tag(static_cast<int>(t));
      write_csv_file((subdir("multimesh") / ("nodes_" + tag + ".csv")).string(),
                     tables.nodes);
      write_csv_file((subdir("multimesh") / ("edges_" + tag + ".csv")).string(),
                     tables.edges);
      artifacts_.push_back("multimesh/nodes_" + tag + ".csv");
      artifacts_.push_back("multimesh/edges_" + tag + ".csv");
      if (cfg_.multimesh_jsonl) {
        write_jsonl_file((subdir("multimesh") / ("nodes_" + tag + ".jsonl")).string(),
                         tables.nodes);
        write_jsonl_file((subdir("multimesh") / ("edges_" + tag + ".jsonl")).string(),
                         tables.edges);
        artifacts_.push_back("multimesh/nodes_" + tag + ".jsonl");
        artifacts_.push_back("multimesh/edges_" + tag + ".jsonl");
      }
    }
    record_stage("multimesh", t0);
  }

  void write_manifest() {
    artifacts_.push_back("manifest.json");
    nlohmann::json j;
    j["version"] = kPipelineVersion;
    j["config"] = {{"input", cfg_.input_path},
                   {"output_dir", cfg_.output_dir},
                   {"dim_order", cfg_.dim_order},
                   {"spacing_x", cfg_.spacing_x},
                   {"spacing_y", cfg_.spacing_y_resolved()},
                   {"spacing_z", cfg_.spacing_z},
                   {"dt", cfg_.dt},
                   {"channel", cfg_.channel},
                   {"max_speed_um_s", cfg_.max_speed_um_s},
                   {"min_peak_dist_um", cfg_.min_peak_dist_resolved()},
                   {"eigen_chunk", cfg_.eigen_chunk},
                   {"threads", cfg_.threads_resolved()}};
    j["stage_seconds"] = stage_seconds_;
    std::sort(artifacts_.begin(), artifacts_.end());
    artifacts_.erase(std::unique(artifacts_.begin(), artifacts_.end()),
                     artifacts_.end());
    j["artifacts"] = artifacts_;
    std::ofstream os(out_ / "manifest.json");
    os << j.dump(2) << "\n";
  }

  // accessors used by tests
  const std::vector<Frame>& frames() { ensure_frames(); return frames_; }
  const std::vector<FrameHierarchy>& hierarchy() { ensure_hierarchy(); return hier_; }
  const std::vector<std::vector<MocapMarker>>& markers() { ensure_markers(); return markers_; }

 private:
  using Clock = std::chrono::steady_clock;
  static Clock::time_point now() { return Clock::now(); }

  template <typename Fn>
  void guarded(const std::string& stage, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("stage '" + stage + "' failed: " + e.what());
    }
  }

  template <typename Fn>
  void frame_guard(std::size_t t, Fn&& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(t) + ": " + e.what());
    }
  }

  void record_stage(const std::string& name, Clock::time_point t0) {
    const double secs =
        std::chrono::duration<double>(now() - t0).count();
    stage_seconds_[name] = secs;
  }

  void preflight() {
    std::filesystem::create_directories(out_);
    const auto probe = out_ / ".otk_write_probe";
    std::ofstream os(probe);
    if (!os) throw std::runtime_error("output directory is not writable: " +
                                      out_.string());
    os.close();
    std::filesystem::remove(probe);
  }

  std::size_t n_frames() const { return hier_.empty() ? frames_.size() : hier_.size(); }
  std::size_t n_pairs() const { return n_frames() > 0 ? n_frames() - 1 : 0; }
  const VolumeMeta& meta() {
    ensure_frames();
    return frames_[0].meta;
  }

  std::filesystem::path subdir(const std::string& name) {
    const auto dir = out_ / name;
    std::filesystem::create_directories(dir);
    return dir;
  }
  static std::string tif(std::size_t t) {
    return pipelinedet::frame_tag(static_cast<int>(t)) + ".tif";
  }

  // ---- artifact io --------------------------------------------------------

  void write_volume_f32(const std::filesystem::path& path, const VolumeF& v) {
    const auto desc = pipelinedet::axes_description(meta(), v.nz());
    write_tiff_f32(path.string(), static_cast<std::uint32_t>(v.nx()),
                   static_cast<std::uint32_t>(v.ny()),
                   static_cast<std::size_t>(v.nz()),
                   [&](std::size_t z) { return v.data() + z * v.ny() * v.nx(); },
                   desc);
    note_artifact(path);
  }
  void write_volume_u32(const std::filesystem::path& path, const VolumeU32& v) {
    const auto desc = pipelinedet::axes_description(meta(), v.nz());
    write_tiff_u32(path.string(), static_cast<std::uint32_t>(v.nx()),
                   static_cast<std::uint32_t>(v.ny()),
                   static_cast<std::size_t>(v.nz()),
                   [&](std::size_t z) { return v.data() + z * v.ny() * v.nx(); },
                   desc);
    note_artifact(path);
  }
  void write_mask(const std::filesystem::path& path, const Mask& m) {
    write_volume_u32(path, m.cast<std::uint32_t>());
  }
  void write_winning_scale(const std::filesystem::path& path,
                           const Volume<std::int32_t>& w) {
    // sentinel -1 exports as 0; winners export 1-based
    VolumeU32 out(w.nz(), w.ny(), w.nx(), 0);
    for (std::size_t i = 0; i < w.size(); ++i) {
      const std::int32_t v = w[static_cast<Index>(i)];
      out[static_cast<Index>(i)] = v == kNoWinningScale ? 0u
                                                        : static_cast<std::uint32_t>(v + 1);
    }
    write_volume_u32(path, out);
  }

  VolumeF read_volume_f32(const std::filesystem::path& path) {
    const TiffStack s = read_tiff(path.string());
    VolumeF v(static_cast<Index>(s.pages.size()), s.pages[0].height,
              s.pages[0].width);
    for (std::size_t z = 0; z < s.pages.size(); ++z)
      std::copy(s.pages[z].as_float.begin(), s.pages[z].as_float.end(),
                v.data() + z * v.ny() * v.nx());
    return v;
  }
  VolumeU32 read_volume_u32(const std::filesystem::path& path) {
    const TiffStack s = read_tiff(path.string());
    VolumeU32 v(static_cast<Index>(s.pages.size()), s.pages[0].height,
                s.pages[0].width);
    for (std::size_t z = 0; z < s.pages.size(); ++z) {
      if (!s.pages[z].is_u32)
        throw std::runtime_error("expected uint32 TIFF: " + path.string());
      std::copy(s.pages[z].as_u32.begin(), s.pages[z].as_u32.end(),
                v.data() + z * v.ny() * v.nx());
    }
    return v;
  }

  void note_artifact(const std::filesystem::path& path) {
    artifacts_.push_back(
        std::filesystem::relative(path, out_).generic_string());
  }

  void write_markers_csv() {
    FeatureTable t;
    const int c_frame = t.add_column("frame", FeatureTable::ColKind::Int);
    const int c_z = t.add_column("z", FeatureTable::ColKind::Int);
    const int c_y = t.add_column("y", FeatureTable::ColKind::Int);
    const int c_x = t.add_column("x", FeatureTable::ColKind::Int);
    const int c_zu = t.add_column("z_um", FeatureTable::ColKind::Scalar);
    const int c_yu = t.add_column("y_um", FeatureTable::ColKind::Scalar);
    const int c_xu = t.add_column("x_um", FeatureTable::ColKind::Scalar);
    const int c_r = t.add_column("radius_um", FeatureTable::ColKind::Scalar);
    const int c_s = t.add_column("scale_index", FeatureTable::ColKind::Int);
    for (std::size_t f = 0; f < markers_.size(); ++f)
      for (const MocapMarker& m : markers_[f]) {
        const std::size_t r = t.rows();
        t.add_rows(1);
        t.set_int(r, c_frame, m.frame_index);
        t.set_int(r, c_z, m.coord.z);
        t.set_int(r, c_y, m.coord.y);
        t.set_int(r, c_x, m.coord.x);
        t.set_scalar(r, c_zu, m.coord_um[0]);
        t.set_scalar(r, c_yu, m.coord_um[1]);
        t.set_scalar(r, c_xu, m.coord_um[2]);
        t.set_scalar(r, c_r, m.radius_um);
        t.set_int(r, c_s, m.scale_index);
      }
    write_csv_file((out_ / "markers.csv").string(), t);
    artifacts_.push_back("markers.csv");
  }

  void write_linkages_csv() {
    FeatureTable t;
    const int c_f = t.add_column("frame_t", FeatureTable::ColKind::Int);
    const int c_src = t.add_column("src_id", FeatureTable::ColKind::Int);
    const int c_dst = t.add_column("dst_id", FeatureTable::ColKind::Int);
    const int c_cost = t.add_column("cost", FeatureTable::ColKind::Scalar);
    const int c_dir = t.add_column("direction", FeatureTable::ColKind::Int);
    for (std::size_t f = 0; f < linkages_.size(); ++f)
      for (const Linkage& l : linkages_[f]) {
        const std::size_t r = t.rows();
        t.add_rows(1);
        t.set_int(r, c_f, static_cast<std::int64_t>(f));
        t.set_int(r, c_src, l.src);
        t.set_int(r, c_dst, l.dst);
        t.set_scalar(r, c_cost, l.cost);
        t.set_int(r, c_dir, l.direction == LinkDirection::Forward ? 0 : 1);
      }
    write_csv_file((out_ / "linkages.csv").string(), t);
    artifacts_.push_back("linkages.csv");
  }

  // ---- cache loading -------------------------------------------------------

  void ensure_frames() {
    if (frames_.empty()) frames_ = load_input(cfg_);
  }

  void ensure_scales() {
    if (scales_.count() == 0) {
      ensure_frames();
      scales_ = compute_scale_sigmas(frames_[0].meta);
    }
  }

  void ensure_enhanced() {
    if (!enhanced_.empty()) return;
    ensure_frames();
    ensure_scales();
    enhanced_.assign(frames_.size(), {});
    bool cached = true;
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      const auto vpath = out_ / "preprocessed" / tif(t);
      const auto wpath = out_ / "winning_scale" / tif(t);
      if (!std::filesystem::exists(vpath) || !std::filesystem::exists(wpath)) {
        cached = false;
        break;
      }
      enhanced_[t].meta = frames_[t].meta;
      enhanced_[t].values = read_volume_f32(vpath);
      const VolumeU32 w = read_volume_u32(wpath);
      enhanced_[t].winning_scale =
          Volume<std::int32_t>(w.nz(), w.ny(), w.nx(), kNoWinningScale);
      for (std::size_t i = 0; i < w.size(); ++i)
        if (w[static_cast<Index>(i)] != 0)
          enhanced_[t].winning_scale[static_cast<Index>(i)] =
              static_cast<std::int32_t>(w[static_cast<Index>(i)]) - 1;
    }
    if (!cached) run_enhance();
  }

  void ensure_hierarchy() {
    if (!hier_.empty()) return;
    ensure_frames();
    hier_.assign(frames_.size(), {});
    bool cached = true;
    for (std::size_t t = 0; t < frames_.size() && cached; ++t) {
      for (const char* dir : {"semantic", "organelle_labels", "branch_labels",
                              "node_labels", "distance"})
        if (!std::filesystem::exists(out_ / dir / tif(t))) {
          cached = false;
          break;
        }
    }
    if (!cached) {
      run_segment();
      return;
    }
    for (std::size_t t = 0; t < frames_.size(); ++t) {
      FrameHierarchy& h = hier_[t];
      const VolumeU32 sem = read_volume_u32(out_ / "semantic" / tif(t));
      h.semantic = Mask(sem.nz(), sem.ny(), sem.nx(), 0);
      for (std::size_t i = 0; i < sem.size(); ++i)
        h.semantic[static_cast<Index>(i)] = sem[static_cast<Index>(i)] ? 1 : 0;
      h.organelle_labels = read_volume_u32(out_ / "organelle_labels" / tif(t));
      h.branch_labels = read_volume_u32(out_ / "branch_labels" / tif(t));
      h.node_labels = read_volume_u32(out_ / "node_labels" / tif(t));
      h.distance = read_volume_f32(out_ / "distance" / tif(t));
      // skeleton classes/branches are a deterministic function of the
      // skeleton mask, so rebuild them instead of persisting a new format
      Mask skm(h.node_labels.nz(), h.node_labels.ny(), h.node_labels.nx(), 0);
      for (std::size_t i = 0; i < h.node_labels.size(); ++i)
        skm[static_cast<Index>(i)] = h.node_labels[static_cast<Index>(i)] ? 1 : 0;
      h.skeleton = classify_and_split_branches(skm, meta().is_3d);
    }
  }

  void ensure_markers() {
    if (!markers_.empty()) return;
    ensure_frames();
    const auto path = out_ / "markers.csv";
    if (!std::filesystem::exists(path)) {
      run_mocap();
      return;
    }
    markers_.assign(frames_.size(), {});
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      MocapMarker m;
      m.frame_index = std::stoi(cells[0]);
      m.coord = {std::stoll(cells[1]), std::stoll(cells[2]), std::stoll(cells[3])};
      m.coord_um = {std::stod(cells[4]), std::stod(cells[5]), std::stod(cells[6])};
      m.radius_um = std::stod(cells[7]);
      m.scale_index = std::stoi(cells[8]);
      markers_[static_cast<std::size_t>(m.frame_index)].push_back(m);
    }
  }

  void ensure_linkages() {
    if (!linkages_.empty() || n_pairs() == 0) return;
    const auto path = out_ / "linkages.csv";
    if (!std::filesystem::exists(path)) {
      run_link();
      return;
    }
    linkages_.assign(n_pairs(), {});
    std::ifstream is(path);
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      Linkage l;
      const std::size_t f = std::stoul(cells[0]);
      l.src = std::stoi(cells[1]);
      l.dst = std::stoi(cells[2]);
      l.cost = std::stod(cells[3]);
      l.direction = cells[4] == "0" ? LinkDirection::Forward : LinkDirection::Backward;
      linkages_[f].push_back(l);
    }
  }

  void ensure_reassigned() {
    if (!reassigned_org_.empty()) return;
    ensure_hierarchy();
    bool cached = true;
    for (std::size_t t = 0; t < n_frames() && cached; ++t)
      for (const char* dir : {"reassigned_organelle", "reassigned_branch"})
        if (!std::filesystem::exists(out_ / dir / tif(t))) cached = false;
    if (!cached) {
      run_flow();
      return;
    }
    reassigned_org_.assign(n_frames(), {});
    reassigned_branch_.assign(n_frames(), {});
    for (std::size_t t = 0; t < n_frames(); ++t) {
      reassigned_org_[t] = read_volume_u32(out_ / "reassigned_organelle" / tif(t));
      reassigned_branch_[t] = read_volume_u32(out_ / "reassigned_branch" / tif(t));
    }
  }

  FlowAnchors pair_forward_anchors(std::size_t t) {
    ensure_markers();
    ensure_linkages();
    if (t >= linkages_.size()) return {};
    return forward_anchors(markers_[t], markers_[t + 1], linkages_[t]);
  }
  FlowAnchors pair_backward_anchors(std::size_t t) {
    ensure_markers();
    ensure_linkages();
    if (t >= linkages_.size()) return {};
    return backward_anchors(markers_[t], markers_[t + 1], linkages_[t]);
  }

  RunConfig cfg_;
  std::filesystem::path out_;
  std::vector<Frame> frames_;
  ScaleSpace scales_;
  std::vector<EnhancedFrame> enhanced_;
  std::vector<FrameHierarchy> hier_;
  std::vector<std::vector<MocapMarker>> markers_;
  std::vector<std::vector<Linkage>> linkages_;
  std::vector<VolumeU32> reassigned_org_, reassigned_branch_;
  std::vector<FrameFeatures> frame_features_;
  std::map<std::string, double> stage_seconds_;
  std::vector<std::string> artifacts_;
};

}  // namespace otk

#endif  // OTK_PIPELINE_HPP
