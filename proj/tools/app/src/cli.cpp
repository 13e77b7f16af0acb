// Copyright 2026 The GPM Authors
// SPDX-License-Identifier: Apache-2.0

#include "gpm_app/cli.hpp"

#include <CLI11.hpp>
#include <csignal>
#include <iostream>
#include <json.hpp>

#include "gpm/error.hpp"
#include "gpm/synthetic.hpp"
#include "gpm_app/http_service.hpp"
#include "gpm_app/repository.hpp"
#include "gpm_app/stroke_json.hpp"

namespace gpm::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string read_text(const fs::path& p) {
  const auto bytes = read_file_bytes(p);
  return {bytes.begin(), bytes.end()};
}

void write_text(const fs::path& p, std::string_view text) {
  write_file_bytes(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

// A stack argument is either an ingested id or a manifest path (ingested on the fly).
std::string resolve_stack(StackRepository& repo, const std::string& arg) {
  if (repo.contains(arg)) return arg;
  if (fs::is_regular_file(arg)) return repo.ingest(arg);
  throw NotFound("no stack '" + arg + "' in " + repo.root().string() + " and no such manifest file");
}

LabelGrid read_labels_for(const FeatureStack& stack, const fs::path& path) {
  const LabelGrid labels = read_label_png(path);
  const auto& seg = stack.manifest().segmentation_layer();
  if (labels.width != seg.feat_width || labels.height != seg.feat_height) {
    throw Error(ErrorCode::kShapeMismatch, path.string() + " is " + std::to_string(labels.width) + "x" +
                                               std::to_string(labels.height) + ", segmentation grid is " +
                                               std::to_string(seg.feat_width) + "x" +
                                               std::to_string(seg.feat_height));
  }
  for (int l : labels.cells) {
    if (l >= stack.n_images()) throw Error(ErrorCode::kInvalidArgument, "label " + std::to_string(l) + " out of range");
  }
  return labels;
}

json params_json(const GraphCutParams& p) { return {{"C", p.C}, {"lambda", p.lambda}, {"sigma", p.sigma}}; }

HttpService* g_service = nullptr;

void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graph-cut compositing of generated image stacks", "gpm"};
  app.require_subcommand(1);

  std::string data_dir = default_data_dir().string();
  std::string config_path;
  app.add_option("--data-dir", data_dir, "Data root (default: $GPM_DATA_DIR or ./gpm-data)");
  app.add_option("--config", config_path, "Engine config file (key = value)")->check(CLI::ExistingFile);

  std::string manifest, stack_arg, strokes_path, out_path, labels_path, blended_path, addr = "127.0.0.1:8080";
  int base = 0;
  SyntheticOptions synth;

  auto* ingest = app.add_subcommand("ingest", "Validate a stack and copy it into the data root");
  ingest->add_option("manifest", manifest, "manifest.json of the stack")->required();

  auto* segment_cmd = app.add_subcommand("segment", "Solve the label map for a stroke file");
  segment_cmd->add_option("--stack", stack_arg, "Stack id or manifest path")->required();
  segment_cmd->add_option("--strokes", strokes_path, "Stroke JSON")->required();
  segment_cmd->add_option("--out", out_path, "Output directory")->required();

  auto* export_cmd = app.add_subcommand("export", "Write a composite bundle for a label map");
  export_cmd->add_option("--stack", stack_arg, "Stack id or manifest path")->required();
  export_cmd->add_option("--labels", labels_path, "Label PNG on the segmentation grid")->required();
  export_cmd->add_option("--out", out_path, "Output directory")->required();
  export_cmd->add_option("--base", base, "Base image index");

  auto* metrics_cmd = app.add_subcommand("metrics", "Seam and fidelity metrics of a blended image");
  metrics_cmd->add_option("--stack", stack_arg, "Stack id or manifest path")->required();
  metrics_cmd->add_option("--labels", labels_path, "Label PNG on the segmentation grid")->required();
  metrics_cmd->add_option("--blended", blended_path, "Blended PNG")->required();
  metrics_cmd->add_option("--out", out_path, "Also write the report to this file");

  auto* poisson_cmd = app.add_subcommand("poisson", "Gradient-domain blend of the hard composite");
  poisson_cmd->add_option("--stack", stack_arg, "Stack id or manifest path")->required();
  poisson_cmd->add_option("--labels", labels_path, "Label PNG on the segmentation grid")->required();
  poisson_cmd->add_option("--out", out_path, "Output PNG")->required();
  poisson_cmd->add_option("--base", base, "Base image index");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--addr", addr, "host:port to bind");

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic stack for demos and tests");
  synth_cmd->add_option("--out", out_path, "Output directory")->required();
  synth_cmd->add_option("--images", synth.n_images, "Number of images")->check(CLI::Range(1, 64));
  synth_cmd->add_option("--width", synth.width, "Width in pixels (multiple of 16)");
  synth_cmd->add_option("--height", synth.height, "Height in pixels (multiple of 16)");
  synth_cmd->add_option("--seed", synth.seed, "Random seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    EngineConfig config = config_path.empty() ? EngineConfig{} : load_config(config_path);

    if (*synth_cmd) {
      if (synth.width % 16 != 0 || synth.height % 16 != 0 || synth.width <= 0 || synth.height <= 0) {
        err << "error: --width and --height must be positive multiples of 16\n";
        return kExitUsage;
      }
      out << write_synthetic_stack(synth, out_path).string() << "\n";
      return kExitOk;
    }

    StackRepository repo(data_dir, config);

    if (*ingest) {
      out << repo.ingest(manifest) << "\n";
      return kExitOk;
    }

    if (*serve_cmd) {
      const auto [host, port] = parse_address(addr);
      HttpService service(repo);
      const int bound = service.bind(host, port);
      if (bound < 0) {
        err << "error: cannot bind " << addr << "\n";
        return kExitData;
      }
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      out << "listening on " << host << ":" << bound << std::endl;
      service.listen();
      g_service = nullptr;
      return kExitOk;
    }

    const std::string id = resolve_stack(repo, stack_arg);
    const auto stack = repo.stack(id);

    if (*segment_cmd) {
      const StrokeSet strokes = parse_stroke_set(read_text(strokes_path));
      validate_strokes(strokes, stack->n_images(), stack->width(), stack->height());
      double pca_ms = 0;
      const auto feats = repo.features(id, &pca_ms);
      Segmentation seg = segment_reduced(*feats, stack->width(), stack->height(), strokes, config.params);
      seg.timing.pca_ms = pca_ms;
      const auto comp = pixel_composite(*stack, seg.labels.labels);
      fs::create_directories(out_path);
      write_label_png(fs::path(out_path) / "labels.png", seg.labels.labels);
      write_png(fs::path(out_path) / "preview.png", comp.image);
      const auto seam = seam_report(comp.image, stack->images(), comp.fullres_labels);
      char hash[17];
      std::snprintf(hash, sizeof(hash), "%016llx",
                    static_cast<unsigned long long>(label_map_hash(seg.labels.labels)));
      const json report = {
          {"stack_id", id},
          {"base_index", strokes.base_index},
          {"n_strokes", strokes.strokes.size()},
          {"grid", {{"width", seg.labels.labels.width}, {"height", seg.labels.labels.height}}},
          {"energy", seg.labels.energy},
          {"label_map_hash", hash},
          {"params", params_json(config.params)},
          {"feature_selection", config.selection.key()},
          {"sg", {{"score", seam.sg_score},
                  {"stack_min", seam.stack_min},
                  {"stack_avg", seam.stack_avg},
                  {"stack_max", seam.stack_max},
                  {"empty_seam", seam.empty_seam}}},
          {"timing_ms", {{"pca", seg.timing.pca_ms},
                         {"rasterize", seg.timing.rasterize_ms},
                         {"energy", seg.timing.energy_ms},
                         {"solve", seg.timing.solve_ms}}}};
      write_text(fs::path(out_path) / "report.json", report.dump(2) + "\n");
      out << (fs::path(out_path) / "labels.png").string() << "\n";
      return kExitOk;
    }

    const LabelGrid labels = read_labels_for(*stack, labels_path);
    if ((*export_cmd || *poisson_cmd) && (base < 0 || base >= stack->n_images())) {
      err << "error: --base " << base << " out of range [0, " << stack->n_images() << ")\n";
      return kExitUsage;
    }

    if (*export_cmd) {
      export_bundle(*stack, labels, {id, base, config.params, config.selection.key()}, out_path);
      out << out_path << "\n";
      return kExitOk;
    }

    if (*metrics_cmd) {
      const auto comp = pixel_composite(*stack, labels);
      const Image8 blended = read_png(blended_path);
      if (!blended.same_size(comp.image)) throw Error(ErrorCode::kImageSizeMismatch, blended_path);
      const std::string text = metrics_to_json(evaluate(blended, stack->images(), comp.fullres_labels));
      if (!out_path.empty()) write_text(out_path, text + "\n");
      out << text << "\n";
      return kExitOk;
    }

    if (*poisson_cmd) {
      const auto comp = pixel_composite(*stack, labels);
      const auto result = poisson_blend(comp, stack->images(), base);
      if (result.fell_back) err << "warning: " << result.warning << "\n";
      write_png(out_path, result.image);
      out << out_path << "\n";
      return kExitOk;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const NotFound& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace gpm::app
