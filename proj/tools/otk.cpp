// otk command-line interface. One subcommand per pipeline stage plus `run`
// for the whole pipeline; metadata comes from flags or a sidecar
// <input>.meta.json. See README.md for usage and output layout.

#include "otk/pipeline.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"organelle segmentation, tracking and feature extraction"};
  app.require_subcommand(1);

  otk::RunConfig cfg;
  std::string from_stage;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("input", cfg.input_path, "input TIFF stack")->required();
    sub->add_option("-o,--output", cfg.output_dir, "output directory");
    sub->add_option("--dim-order", cfg.dim_order,
                    "axis order over T,C,Z,Y,X (ends in YX)");
    sub->add_option("--spacing-x", cfg.spacing_x, "um per voxel in X");
    sub->add_option("--spacing-y", cfg.spacing_y, "um per voxel in Y (default: X)");
    sub->add_option("--spacing-z", cfg.spacing_z, "um per voxel in Z");
    sub->add_option("--dt", cfg.dt, "seconds per frame");
    sub->add_option("--channel", cfg.channel, "channel index when C present");
    sub->add_option("--max-speed", cfg.max_speed_um_s,
                    "maximum tracking speed (um/s)");
    sub->add_option("--min-peak-dist", cfg.min_peak_dist_um,
                    "marker deduplication distance (um)");
    sub->add_option("--eigen-chunk", cfg.eigen_chunk,
                    "voxels per eigen-solve chunk");
    sub->add_option("--threads", cfg.threads,
                    "worker threads (default: OTK_THREADS or hardware)");
    sub->add_option("--size-t", cfg.size_t_axis, "timepoints (when not inferable)");
    sub->add_option("--size-c", cfg.size_c_axis, "channels (when not inferable)");
    sub->add_option("--size-z", cfg.size_z_axis, "slices (when not inferable)");
    sub->add_flag("--debug-scales", cfg.debug_scales,
                  "write per-scale response volumes");
    sub->add_flag("--multimesh-jsonl", cfg.multimesh_jsonl,
                  "also write multimesh tables as JSON lines");
  };

  std::vector<std::pair<std::string, CLI::App*>> stages;
  for (const std::string& name : otk::Pipeline::stage_names()) {
    CLI::App* sub = app.add_subcommand(name, name + " stage");
    add_common(sub);
    stages.emplace_back(name, sub);
  }
  CLI::App* run = app.add_subcommand("run", "run the full pipeline");
  add_common(run);
  run->add_option("--from", from_stage,
                  "resume from this stage using cached artifacts");

  CLI11_PARSE(app, argc, argv);

  try {
    otk::apply_sidecar(cfg);
    otk::Pipeline pipeline(cfg);
    if (run->parsed()) {
      pipeline.run_all(from_stage);
    } else {
      for (const auto& [name, sub] : stages)
        if (sub->parsed()) pipeline.run_stage(name);
    }
  } catch (const std::exception& e) {
    std::cerr << "otk: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
