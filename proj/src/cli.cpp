#include "slf/cli/cli.hpp"

#include "slf/lf/io.hpp"
#include "slf/net/model_io.hpp"
#include "slf/synth/scene.hpp"
#include "slf/train/trainer.hpp"
#include "slf/util/parallel.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <iostream>
#include <random>
#include <stdexcept>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace slf::cli {

namespace fs = std::filesystem;
using nlohmann::json;

ApertureMask mask_by_name(const std::string& name, int grid_rows, int grid_cols, int radius) {
  if (name == "dense") return dense_mask(grid_rows, grid_cols);
  if (name == "circular241") return circular_mask(grid_rows, grid_cols);
  if (name == "rhombus4") return input_view_selection(InputConfig::four_rhombus, grid_rows, grid_cols, radius);
  if (name == "rect4") return input_view_selection(InputConfig::four_rect, grid_rows, grid_cols, radius);
  if (name == "horizontal2") return input_view_selection(InputConfig::two_horizontal, grid_rows, grid_cols, radius);
  if (name == "eight") return input_view_selection(InputConfig::eight, grid_rows, grid_cols, radius);
  throw std::invalid_argument("unknown mask: " + name);
}

Image refocus_classical(const LightField& lf, const ApertureMask& mask, double pixels, int crop) {
  return refocus_shift_average(lf, mask, FocusParameter(pixels), crop).image;
}

Image refocus_net(const net::RefocusNet<float>& model, const LightField& lf, double pixels, int crop) {
  const net::NetworkConfig& c = model.config();
  const ApertureMask mask = input_view_selection(c.input_config, lf.grid_rows(), lf.grid_cols(), c.input_radius);
  return slf::crop(net::run_network(model, shifted_views(lf, mask, FocusParameter(pixels))), crop);
}

namespace {

const std::vector<std::string> kMasks = {"dense", "circular241", "rhombus4", "rect4", "horizontal2", "eight"};

/// Copies `value` into `target` when the option was given on the command line or in the config file.
template <typename T, typename U>
void apply(const CLI::Option* opt, const T& value, U& target) {
  if (opt->count() > 0) target = static_cast<U>(value);
}

struct GenArgs {
  fs::path out;
  std::string profile = "full";
  std::uint64_t seed = 0;
  int n_train = 0, n_val = 0, n_test = 0, height = 0, width = 0, min_layers = 0, max_layers = 0, patch = 0;
  CLI::Option *o_seed, *o_train, *o_val, *o_test, *o_h, *o_w, *o_min, *o_max, *o_patch;
};

struct RenderArgs {
  fs::path out;
  std::uint64_t seed = 0;
  Index height = 128, width = 192;
  int grid = synth::kGroundTruthGrid;
  double disparity = 0;
  int min_layers = 2, max_layers = 5;
  CLI::Option* o_disparity;
};

struct RefocusArgs {
  fs::path lf, out, checkpoint;
  double pixels = 0;
  std::string mask = "dense";
  int crop = kDefaultCropMargin;
};

struct TrainArgs {
  fs::path data, out;
  std::string profile = "full";
  int epochs = 0, batch = 0, patches = 0, patch = 0, eval_every = 0, decay_epochs = 0, depth = 0, width = 0;
  double lr = 0, decay = 0, noise_min = 0, noise_max = 0;
  std::uint64_t seed = 0;
  std::vector<double> val_focus;
  std::string variant, input;
  CLI::Option *o_epochs, *o_batch, *o_patches, *o_patch, *o_eval, *o_decay_epochs, *o_depth, *o_width, *o_lr,
      *o_decay, *o_nmin, *o_nmax, *o_seed, *o_val_focus, *o_variant, *o_input;
};

struct EvalArgs {
  fs::path checkpoint, data, out;
  std::string split = "test";
  std::vector<double> sigmas = {0.0};
  std::vector<double> focus;
  double rescale = 1.0;
  std::uint64_t seed = 0;
};

struct ServeArgs {
  fs::path checkpoint, lf, viewer;
  std::string host = "127.0.0.1";
  int port = 8080;
  int crop = kDefaultCropMargin;
};

int cmd_gen(const GenArgs& a, std::ostream& out) {
  synth::DatasetSpec spec;
  if (a.profile == "desk") spec = synth::DatasetSpec::desk();
  if (a.profile == "tiny") spec = synth::DatasetSpec::tiny();
  apply(a.o_seed, a.seed, spec.seed);
  apply(a.o_train, a.n_train, spec.n_train);
  apply(a.o_val, a.n_val, spec.n_val);
  apply(a.o_test, a.n_test, spec.n_test);
  apply(a.o_h, a.height, spec.height);
  apply(a.o_w, a.width, spec.width);
  apply(a.o_min, a.min_layers, spec.min_layers);
  apply(a.o_max, a.max_layers, spec.max_layers);
  apply(a.o_patch, a.patch, spec.patch_size);
  spec.validate();
  synth::generate_dataset(spec, a.out);
  out << "train " << spec.n_train << "  val " << spec.n_val << "  test " << spec.n_test << "  (" << spec.height
      << "x" << spec.width << ", " << spec.focus.size() << " focus values) -> " << a.out.string() << "\n";
  return kSuccess;
}

int cmd_render(const RenderArgs& a, std::ostream& out) {
  if (a.height < 1 || a.width < 1 || a.grid < 1) throw std::invalid_argument("render: sizes must be positive");
  synth::LayeredScene scene;
  if (a.o_disparity->count() > 0) {
    std::mt19937_64 rng(a.seed);
    scene = synth::single_layer_scene(synth::make_texture(a.height, a.width, rng), a.disparity);
  } else {
    synth::SceneParams p;
    p.height = a.height;
    p.width = a.width;
    p.min_layers = a.min_layers;
    p.max_layers = a.max_layers;
    scene = synth::generate_scene(p, a.seed);
  }
  save_light_field(a.out, synth::render_lightfield(scene, a.grid, a.grid));
  out << a.grid << "x" << a.grid << " views of " << a.height << "x" << a.width << " -> " << a.out.string() << "\n";
  return kSuccess;
}

int cmd_refocus(const RefocusArgs& a, std::ostream& out) {
  const LightField lf = load_light_field(a.lf);
  Image img;
  if (!a.checkpoint.empty()) {
    img = refocus_net(net::load_model(a.checkpoint).model, lf, a.pixels, a.crop);
  } else {
    img = refocus_classical(lf, mask_by_name(a.mask, lf.grid_rows(), lf.grid_cols()), a.pixels, a.crop);
  }
  save_png(a.out, img);
  out << img.height() << "x" << img.width() << " -> " << a.out.string() << "\n";
  return kSuccess;
}

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const synth::Dataset ds = synth::load_dataset(a.data);
  train::TrainConfig cfg = a.profile == "desk" ? train::TrainConfig::desk() : train::TrainConfig();
  cfg.focus = ds.spec.focus;
  cfg.noise_sigma = ds.spec.noise_sigma;
  net::NetworkConfig network;
  if (a.profile == "desk") network.width = 32;
  apply(a.o_epochs, a.epochs, cfg.epochs);
  apply(a.o_batch, a.batch, cfg.batch_size);
  apply(a.o_patches, a.patches, cfg.patches_per_epoch);
  apply(a.o_patch, a.patch, cfg.patch_size);
  apply(a.o_eval, a.eval_every, cfg.eval_every);
  apply(a.o_decay_epochs, a.decay_epochs, cfg.lr_decay_epochs);
  apply(a.o_lr, a.lr, cfg.learning_rate);
  apply(a.o_decay, a.decay, cfg.lr_decay_rate);
  apply(a.o_nmin, a.noise_min, cfg.noise_sigma.lo);
  apply(a.o_nmax, a.noise_max, cfg.noise_sigma.hi);
  apply(a.o_seed, a.seed, cfg.seed);
  apply(a.o_val_focus, a.val_focus, cfg.val_focus);
  if (a.o_input->count() > 0)
    network = net::NetworkConfig::for_input(input_config_from_string(a.input), network.depth, network.width);
  apply(a.o_depth, a.depth, network.depth);
  apply(a.o_width, a.width, network.width);
  if (a.o_variant->count() > 0) network.variant = net::variant_from_string(a.variant);
  network.input_radius = ds.spec.input_radius;
  cfg.checkpoint_dir = a.out;
  cfg.validate();
  network.validate();

  fs::create_directories(a.out);
  write_file(a.out / "train_config.json",
             json{{"train", cfg.to_json()}, {"network", network.to_json()}, {"data", a.data.string()}}.dump(2) + "\n");
  out << "training " << net::parameter_count(network) << " parameters, " << cfg.epochs << " epochs of "
      << cfg.steps_per_epoch() << " steps\n";
  const train::TrainResult r =
      train::train(ds, cfg, network, [&](const train::EpochRecord& e) { out << e.to_json().dump() << std::endl; });
  out << "best epoch " << r.best_epoch;
  if (std::isfinite(r.best_val_psnr)) out << " (val psnr " << r.best_val_psnr << ")";
  out << " -> " << (a.out / "best.ckpt").string() << "\n";
  return kSuccess;
}

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const net::LoadedModel loaded = net::load_model(a.checkpoint);
  const synth::Dataset ds = synth::load_dataset(a.data);
  train::EvalOptions opt;
  opt.sigmas = a.sigmas;
  opt.focus = a.focus;
  opt.rescale = a.rescale;
  opt.seed = a.seed;
  const auto rows = train::evaluate(loaded.model, ds, ds.split(a.split), opt);

  char line[160];
  out << "sigma    net_psnr  net_ssim  naive_psnr  naive_ssim  size\n";
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-7.3f  %8.3f  %8.4f  %10.3f  %10.4f  %ldx%ld\n", r.sigma, r.psnr, r.ssim,
                  r.naive_psnr, r.naive_ssim, static_cast<long>(r.height), static_cast<long>(r.width));
    out << line;
  }
  for (const auto& r : rows) err << "sigma " << r.sigma << ": " << r.seconds * 1000 << " ms per image\n";
  if (!a.out.empty()) {
    const json j{{"checkpoint", a.checkpoint.filename().string()},
                 {"split", a.split},
                 {"rescale", a.rescale},
                 {"seed", a.seed},
                 {"rows", train::eval_table_json(rows)}};
    write_file(a.out, j.dump(2) + "\n");
  }
  return kSuccess;
}

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  std::optional<net::RefocusNet<float>> model;
  if (!a.checkpoint.empty()) model = net::load_model(a.checkpoint).model;
  const RefocusService service(load_light_field(a.lf), std::move(model), a.crop);
  httplib::Server server;
  const int threads = worker_threads();
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  install_routes(server, service, a.viewer);
  int port = a.port;
  if (port == 0) {
    port = server.bind_to_any_port(a.host);
    if (port < 0) throw std::runtime_error("serve: cannot bind " + a.host);
  } else if (!server.bind_to_port(a.host, port)) {
    throw std::runtime_error("serve: cannot bind " + a.host + ":" + std::to_string(port));
  }
  out << "listening on http://" << a.host << ":" << port << std::endl;
  if (!server.listen_after_bind()) throw std::runtime_error("serve: server stopped with an error");
  return kSuccess;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
#if defined(__GLIBC__)
  // per-step tensors stay in the heap instead of being mapped and unmapped each step
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, -1);
#endif
  CLI::App app{"Sparse light field refocusing"};
  app.set_config("--config", "", "TOML or INI file; command-line flags take precedence");
  app.require_subcommand(1);

  GenArgs g;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic dataset");
  gen->add_option("--out", g.out, "Output directory")->required();
  gen->add_option("--profile", g.profile, "Base configuration")->check(CLI::IsMember({"full", "desk", "tiny"}));
  g.o_seed = gen->add_option("--seed", g.seed);
  g.o_train = gen->add_option("--n-train", g.n_train);
  g.o_val = gen->add_option("--n-val", g.n_val);
  g.o_test = gen->add_option("--n-test", g.n_test);
  g.o_h = gen->add_option("--height", g.height);
  g.o_w = gen->add_option("--width", g.width);
  g.o_min = gen->add_option("--min-layers", g.min_layers);
  g.o_max = gen->add_option("--max-layers", g.max_layers);
  g.o_patch = gen->add_option("--patch-size", g.patch);

  RenderArgs rd;
  auto* render = app.add_subcommand("render", "Render the full light field of one synthetic scene");
  render->add_option("--out", rd.out, "Output light field directory")->required();
  render->add_option("--seed", rd.seed);
  render->add_option("--height", rd.height);
  render->add_option("--width", rd.width);
  render->add_option("--grid", rd.grid, "Angular grid size");
  rd.o_disparity = render->add_option("--disparity", rd.disparity, "Single textured plane at this disparity");
  render->add_option("--min-layers", rd.min_layers);
  render->add_option("--max-layers", rd.max_layers);

  RefocusArgs rf;
  auto* refocus = app.add_subcommand("refocus", "Refocus a light field to one focus value");
  refocus->add_option("--lf", rf.lf, "Light field directory")->required()->check(CLI::ExistingDirectory);
  refocus->add_option("--pixels", rf.pixels, "Focus parameter in pixels per view")->required();
  refocus->add_option("--mask", rf.mask, "Views to average")->check(CLI::IsMember(kMasks));
  refocus->add_option("--crop", rf.crop, "Border removed on each side");
  refocus->add_option("--checkpoint", rf.checkpoint, "Use the network instead of averaging")
      ->check(CLI::ExistingFile);
  refocus->add_option("--out", rf.out, "Output PNG")->required();

  TrainArgs t;
  auto* trn = app.add_subcommand("train", "Train a refocusing network");
  trn->add_option("--data", t.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  trn->add_option("--out", t.out, "Checkpoint directory")->required();
  trn->add_option("--profile", t.profile)->check(CLI::IsMember({"full", "desk"}));
  t.o_epochs = trn->add_option("--epochs", t.epochs);
  t.o_batch = trn->add_option("--batch-size", t.batch);
  t.o_patches = trn->add_option("--patches-per-epoch", t.patches);
  t.o_patch = trn->add_option("--patch-size", t.patch);
  t.o_eval = trn->add_option("--eval-every", t.eval_every);
  t.o_lr = trn->add_option("--lr", t.lr);
  t.o_decay = trn->add_option("--lr-decay-rate", t.decay);
  t.o_decay_epochs = trn->add_option("--lr-decay-epochs", t.decay_epochs);
  t.o_nmin = trn->add_option("--noise-min", t.noise_min);
  t.o_nmax = trn->add_option("--noise-max", t.noise_max);
  t.o_seed = trn->add_option("--seed", t.seed);
  t.o_val_focus = trn->add_option("--val-focus", t.val_focus, "Validation focus values");
  t.o_depth = trn->add_option("--depth", t.depth);
  t.o_width = trn->add_option("--width", t.width);
  t.o_variant = trn->add_option("--variant", t.variant)
                    ->check(CLI::IsMember({"final", "variant1", "variant2", "no_skip"}));
  t.o_input = trn->add_option("--input", t.input)
                  ->check(CLI::IsMember({"two_horizontal", "four_rect", "four_rhombus", "eight"}));

  EvalArgs e;
  auto* ev = app.add_subcommand("eval", "Score a checkpoint against the dense ground truth");
  ev->add_option("--checkpoint", e.checkpoint)->required()->check(CLI::ExistingFile);
  ev->add_option("--data", e.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--split", e.split)->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_option("--sigma", e.sigmas, "Input noise level; repeatable")->take_all();
  ev->add_option("--focus", e.focus, "Focus values; default every 4th grid value");
  ev->add_option("--rescale", e.rescale, "Spatial scale applied to the inputs");
  ev->add_option("--seed", e.seed);
  ev->add_option("--out", e.out, "Write the table as JSON");

  ServeArgs s;
  auto* serve = app.add_subcommand("serve", "HTTP refocus service");
  serve->add_option("--lf", s.lf, "Light field directory")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--checkpoint", s.checkpoint)->check(CLI::ExistingFile);
  serve->add_option("--host", s.host);
  serve->add_option("--port", s.port, "0 picks a free port");
  serve->add_option("--crop", s.crop);
  serve->add_option("--viewer", s.viewer, "Static viewer bundle served at /")->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    return app.exit(ex, out, err) == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*gen) return cmd_gen(g, out);
    if (*render) return cmd_render(rd, out);
    if (*refocus) return cmd_refocus(rf, out);
    if (*trn) return cmd_train(t, out);
    if (*ev) return cmd_eval(e, out, err);
    if (*serve) return cmd_serve(s, out);
  } catch (const std::invalid_argument& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const std::domain_error& ex) {
    err << "error: " << ex.what() << "\n";
    return kUsageError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kRuntimeError;
  }
  return kUsageError;
}

}  // namespace slf::cli
