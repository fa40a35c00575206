#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "dopt/adjoint.hpp"
#include "dopt/config_io.hpp"
#include "dopt/dataset.hpp"
#include "dopt/error.hpp"
#include "dopt/image_io.hpp"
#include "dopt/lens_opt.hpp"
#include "dopt/parallel.hpp"
#include "dopt/presets.hpp"
#include "dopt/rng.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dopt;

namespace {

constexpr const char* kVersion = "0.1.0";
constexpr const char* kChannelNames[3] = {"R", "G", "B"};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct Globals {
  std::string config_path;
  std::string preset_name;
  std::string out = "out";
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  bool debug_masks = false;
};

class Run {
public:
  Run(std::string subcommand, const Globals& g) : out_(g.out) {
    manifest_["subcommand"] = std::move(subcommand);
    manifest_["version"] = kVersion;
    manifest_["started"] = utc_now();
    manifest_["seed"] = g.seed ? json(*g.seed) : json(nullptr);
    manifest_["threads"] = thread_count();
    std::error_code ec;
    fs::create_directories(out_, ec);
    if (ec) throw IoError("cannot create output directory '" + out_.string() + "': " + ec.message());
  }

  fs::path path(const std::string& rel) {
    const fs::path p = out_ / rel;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    outputs_.push_back(rel);
    return p;
  }

  void write_json(const std::string& rel, const json& doc) {
    std::ofstream f(path(rel));
    f << doc.dump(2) << "\n";
    if (!f) throw IoError("cannot write '" + (out_ / rel).string() + "'");
  }

  json& manifest() { return manifest_; }

  void finish() {
    outputs_.push_back("manifest.json");
    manifest_["finished"] = utc_now();
    manifest_["outputs"] = outputs_;
    std::ofstream f(out_ / "manifest.json");
    f << manifest_.dump(2) << "\n";
    if (!f) throw IoError("cannot write '" + (out_ / "manifest.json").string() + "'");
  }

private:
  fs::path out_;
  json manifest_;
  std::vector<std::string> outputs_;
};

ProjectConfig resolve_config(const Globals& g) {
  json doc = json::object();
  if (!g.config_path.empty()) {
    std::ifstream in(g.config_path);
    if (!in) throw IoError("cannot open config '" + g.config_path + "'");
    try {
      in >> doc;
    } catch (const json::exception& e) {
      throw ConfigError("config '" + g.config_path + "' is not valid JSON: " + e.what());
    }
  }
  if (!g.preset_name.empty()) doc["preset"] = g.preset_name;
  return parse_config(doc);
}

std::string slice_name(std::size_t j, std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "psf_j%02zu_%s.pfm", j, kChannelNames[c]);
  return buf;
}

// Tiles J rows x 3 channels; each tile scaled by its own max.
ByteImage montage(const PSFStack& stack) {
  const std::size_t p = stack.slices.front().rows();
  const std::size_t J = stack.depth_count();
  ColorImage img(J * p, 3 * p);
  for (std::size_t j = 0; j < J; ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      const RealArray& s = stack.at(j, c);
      const double peak = *std::max_element(s.begin(), s.end());
      for (std::size_t r = 0; r < p; ++r) {
        for (std::size_t q = 0; q < p; ++q) {
          img.channels[c](j * p + r, c * p + q) = peak > 0 ? s(r, q) / peak : 0.0;
        }
      }
    }
  }
  return srgb_encode(img);
}

json write_stack(Run& run, const PSFStack& stack, const std::string& prefix) {
  json files = json::array();
  for (std::size_t j = 0; j < stack.depth_count(); ++j) {
    for (std::size_t c = 0; c < 3; ++c) {
      const std::string rel = prefix + slice_name(j, c);
      io::write_pfm(run.path(rel), stack.at(j, c));
      files.push_back({{"file", rel}, {"depth_index", j}, {"channel", kChannelNames[c]},
                       {"depth", stack.depths[j]}, {"wavelength", stack.wavelengths[c]}});
    }
  }
  io::write_png_rgb8(run.path(prefix + "montage.png"), montage(stack));
  return {{"depths", stack.depths},
          {"wavelengths", stack.wavelengths},
          {"pitch", stack.pitch},
          {"slices", files}};
}

int cmd_psf(const Globals& g) {
  const ProjectConfig cfg = resolve_config(g);
  Run run("psf", g);
  run.manifest()["config"] = to_json(cfg);
  const PSFStack stack = psf_stack(cfg.optics);
  run.manifest()["stack"] = write_stack(run, stack, "");
  run.finish();
  return 0;
}

struct RenderArgs {
  std::string rgb;
  std::string depth;
  std::string depth_format = "pfm";
  double depth_scale = 1.0;
};

int cmd_render(const Globals& g, const RenderArgs& a) {
  const ProjectConfig cfg = resolve_config(g);
  DepthFormat fmt;
  if (a.depth_format == "png16") {
    fmt.kind = DepthFormat::Kind::kPng16;
    fmt.scale = a.depth_scale;
  } else if (a.depth_format != "pfm") {
    throw ConfigError("depth format must be pfm or png16");
  }
  const RgbdSample sample = load_rgbd(a.rgb, a.depth, fmt);
  Run run("render", g);
  run.manifest()["config"] = to_json(cfg);
  run.manifest()["inputs"] = {{"rgb", a.rgb}, {"depth", a.depth},
                              {"depth_format", a.depth_format}, {"depth_scale", fmt.scale}};

  const LayerMasks masks = soften_masks(
      quantize_depth(sample.depth, inverse_edges_for(cfg.optics)), cfg.render.mask_sigma);
  const PSFStack stack = psf_stack(cfg.optics);
  const SensorImage out = render(sample.rgb, masks, stack);
  io::write_pfm(run.path("sensor.pfm"), out);
  io::write_png_rgb8(run.path("sensor.png"), srgb_encode(out));
  if (g.debug_masks) {
    for (std::size_t j = 0; j < masks.layers.size(); ++j) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "masks/mask_j%02zu.pfm", j);
      io::write_pfm(run.path(buf), masks.layers[j]);
    }
  }
  run.finish();
  return 0;
}

struct OptimizeArgs {
  std::string init = "defocus";
  std::size_t iters = 500;
  double lr = 1e-3;
  bool coarse_to_fine = false;
  std::size_t snapshot_interval = 50;
};

json history_json(const OptimizeResult& r) {
  json snaps = json::array();
  for (const auto& [it, p] : r.history.snapshots) snaps.push_back({{"iteration", it}, {"params", p}});
  return {{"loss", r.history.loss},
          {"ncc", r.history.ncc},
          {"concentration", r.history.concentration},
          {"snapshots", snaps},
          {"seed", r.history.seed},
          {"wall_seconds", r.history.wall_seconds},
          {"initial_loss", r.initial_loss},
          {"best_loss", r.best_loss},
          {"best_iteration", r.best_iteration}};
}

int cmd_optimize(const Globals& g, const OptimizeArgs& a) {
  if (!g.seed) throw ConfigError("optimize requires --seed");
  const ProjectConfig cfg = resolve_config(g);
  const InitPreset init = parse_init_preset(a.init);
  OptimizeOptions opt;
  opt.iterations = a.iters;
  opt.seed = *g.seed;
  opt.adam.learning_rate = a.lr;
  opt.coarse_to_fine = a.coarse_to_fine;
  opt.snapshot_interval = a.snapshot_interval;
  if (!(a.lr > 0)) throw ConfigError("--lr must be positive");

  Run run("optimize", g);
  run.manifest()["config"] = to_json(cfg);
  run.manifest()["optimizer"] = {{"init", to_string(init)},     {"iterations", opt.iterations},
                                 {"learning_rate", a.lr},       {"beta1", opt.adam.beta1},
                                 {"beta2", opt.adam.beta2},     {"epsilon", opt.adam.epsilon},
                                 {"param_scale", opt.param_scale},
                                 {"init_jitter", opt.init_jitter},
                                 {"coarse_to_fine", opt.coarse_to_fine}};
  OptimizeResult r;
  try {
    r = optimize(cfg.optics, cfg.objective, init, opt);
  } catch (const OptimizationAborted& e) {
    run.write_json("abort_state.json", {{"iteration", e.iteration()},
                                        {"params", e.params()},
                                        {"step", e.state().step},
                                        {"m", e.state().m},
                                        {"v", e.state().v},
                                        {"message", e.what()}});
    run.finish();
    throw;
  }
  run.write_json("params.json", {{"init", to_string(init)},
                                 {"params", r.best_params},
                                 {"element", element_to_json(r.best_config.element)},
                                 {"best_loss", r.best_loss},
                                 {"best_iteration", r.best_iteration},
                                 {"initial_loss", r.initial_loss}});
  run.write_json("history.json", history_json(r));
  {
    std::ofstream csv(run.path("loss.csv"));
    csv << "iteration,loss,ncc,concentration\n";
    csv.precision(17);
    for (std::size_t i = 0; i < r.history.loss.size(); ++i) {
      csv << i << "," << r.history.loss[i] << "," << r.history.ncc[i] << ","
          << r.history.concentration[i] << "\n";
    }
  }
  run.manifest()["before"] = write_stack(run, psf_stack(r.initial_config), "before/");
  run.manifest()["after"] = write_stack(run, psf_stack(r.best_config), "after/");
  run.finish();
  return 0;
}

struct GradcheckArgs {
  std::string element = "freeform";
  double step = 1e-10;
  double threshold = 1e-4;
  double magnitude = 1e-6;
};

int cmd_gradcheck(const Globals& g, const GradcheckArgs& a) {
  const ProjectConfig cfg = resolve_config(g);
  OpticalConfig oc = cfg.optics;
  const std::uint64_t seed = g.seed.value_or(0);
  if (a.element == "freeform" || a.element == "annular") {
    oc = apply_init(oc, a.element == "freeform" ? InitPreset::kDefocus : InitPreset::kAnnular);
    SplitMix64 rng(seed);
    auto p = element_params(oc.element);
    for (auto& v : p) v = a.magnitude * (2.0 * rng.uniform() - 1.0);
    oc.element = with_element_params(oc.element, p);
  } else if (a.element != "config") {
    throw ConfigError("--element must be freeform, annular or config");
  }
  if (element_param_count(oc.element) == 0) {
    throw ConfigError("gradcheck needs a freeform or annular element");
  }
  if (!(a.step > 0.0)) throw ConfigError("--step must be positive");

  Run run("gradcheck", g);
  ProjectConfig echoed = cfg;
  echoed.optics = oc;
  run.manifest()["config"] = to_json(echoed);

  const auto t0 = std::chrono::steady_clock::now();
  const ObjectiveEvaluation ev = evaluate_objective(oc, cfg.objective);
  auto loss = [&](std::span<const double> p) {
    OpticalConfig c = oc;
    c.element = with_element_params(c.element, p);
    return discriminability_loss(psf_stack(c), cfg.objective).total;
  };
  const FdReport rep =
      finite_difference_check(loss, element_params(oc.element), ev.grad.values, a.step);
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  json entries = json::array();
  for (std::size_t m = 0; m < rep.entries.size(); ++m) {
    const FdEntry& e = rep.entries[m];
    entries.push_back({{"index", m},
                       {"analytic", e.analytic},
                       {"numeric", e.numeric},
                       {"rel_error", e.rel_error},
                       {"pass", e.rel_error < a.threshold}});
  }
  const bool pass = rep.max_rel_error < a.threshold;
  const json report = {{"element", a.element},
                       {"loss", ev.loss.total},
                       {"step", a.step},
                       {"threshold", a.threshold},
                       {"max_rel_error", rep.max_rel_error},
                       {"pass", pass},
                       {"seconds", seconds},
                       {"parameters", entries}};
  run.write_json("gradcheck.json", report);
  run.finish();
  std::cout << report.dump(2) << "\n";
  return pass ? 0 : 3;
}

struct DatasetArgs {
  std::size_t count = 2000;
  std::size_t height = 128;
  std::size_t width = 128;
};

int cmd_dataset(const Globals& g, const DatasetArgs& a) {
  if (!g.seed) throw ConfigError("dataset requires --seed");
  RectanglesParams p;
  p.samples = a.count;
  p.height = a.height;
  p.width = a.width;
  p.seed = *g.seed;
  p.validate();
  Run run("dataset", g);
  std::vector<json> entries(p.samples);
  parallel_for(p.samples, [&](std::size_t i) {
    entries[i] = save_sample(generate_rectangles(p, i), g.out);
  });
  for (const auto& e : entries) {
    run.path(e["rgb"].get<std::string>());
    run.path(e["depth"].get<std::string>());
  }
  run.manifest()["params"] = to_json(p);
  run.manifest()["count"] = p.samples;
  run.manifest()["formats"] = {{"rgb", "png8-srgb"}, {"depth", "pfm-meters"}};
  run.manifest()["samples"] = entries;
  run.finish();
  return 0;
}

int error_exit(const char* type, int code, const std::string& message) {
  std::cerr << json{{"error", {{"type", type}, {"exit_code", code}, {"message", message}}}}.dump()
            << std::endl;
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera optics simulation, rendering and lens optimization"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kVersion);

  Globals g;
  app.add_option("--config", g.config_path, "JSON config file");
  app.add_option("--preset", g.preset_name, "base preset, e.g. nyu-defocus");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "RNG seed (required by optimize and dataset)");
  app.add_option("--threads", g.threads, "worker threads (overrides DOPT_THREADS)");
  app.add_flag("--debug-masks", g.debug_masks, "render: also write the layer masks");

  auto* psf = app.add_subcommand("psf", "write the PSF stack of a config");

  RenderArgs ra;
  auto* rnd = app.add_subcommand("render", "simulate a sensor image from RGB + depth");
  rnd->add_option("--rgb", ra.rgb, "all-in-focus sRGB PNG")->required();
  rnd->add_option("--depth", ra.depth, "depth map (PFM in meters, or 16-bit PNG)")->required();
  rnd->add_option("--depth-format", ra.depth_format, "pfm or png16")->capture_default_str();
  rnd->add_option("--depth-scale", ra.depth_scale, "meters per png16 unit")->capture_default_str();

  OptimizeArgs oa;
  auto* opt = app.add_subcommand("optimize", "optimize the lens element");
  opt->add_option("--init", oa.init, "defocus, astigmatism or annular")->capture_default_str();
  opt->add_option("--iters", oa.iters, "iterations")->capture_default_str();
  opt->add_option("--lr", oa.lr, "Adam learning rate (units of 1 um of sag)")->capture_default_str();
  opt->add_flag("--coarse-to-fine", oa.coarse_to_fine, "first half at J/2 bins");
  opt->add_option("--snapshot-interval", oa.snapshot_interval)->capture_default_str();

  GradcheckArgs ga;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic and finite-difference gradients");
  gc->add_option("--element", ga.element, "freeform, annular or config")->capture_default_str();
  gc->add_option("--step", ga.step, "finite-difference step (m of sag)")->capture_default_str();
  gc->add_option("--threshold", ga.threshold, "max relative error")->capture_default_str();
  gc->add_option("--magnitude", ga.magnitude, "random parameter magnitude (m)")
      ->capture_default_str();

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "generate the rectangles dataset");
  ds->add_option("--count", da.count, "samples")->capture_default_str();
  ds->add_option("--height", da.height)->capture_default_str();
  ds->add_option("--width", da.width)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : error_exit("usage_error", 2, e.what());
  }

  try {
    if (g.threads > 0) set_thread_count(g.threads);
    if (psf->parsed()) return cmd_psf(g);
    if (rnd->parsed()) return cmd_render(g, ra);
    if (opt->parsed()) return cmd_optimize(g, oa);
    if (gc->parsed()) return cmd_gradcheck(g, ga);
    if (ds->parsed()) return cmd_dataset(g, da);
  } catch (const ConfigError& e) {
    return error_exit("config_error", 2, e.what());
  } catch (const NumericalError& e) {
    return error_exit("numerical_error", 3, e.what());
  } catch (const IoError& e) {
    return error_exit("io_error", 4, e.what());
  } catch (const fs::filesystem_error& e) {
    return error_exit("io_error", 4, e.what());
  } catch (const std::exception& e) {
    return error_exit("internal_error", 1, e.what());
  }
  return 2;
}
