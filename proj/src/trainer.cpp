#include "slf/train/trainer.hpp"

#include "slf/lf/io.hpp"
#include "slf/metrics/metrics.hpp"
#include "slf/net/model_io.hpp"
#include "slf/util/parallel.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace slf::train {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Stream : std::uint64_t { kInit = 1, kScene, kFocus, kSigma, kNoise, kPosition, kEval };

ApertureMask mask_for(const NetworkConfig& net, const LightField& lf) {
  return input_view_selection(net.input_config, lf.grid_rows(), lf.grid_cols(), net.input_radius);
}

void require_views(const synth::SceneRecord& r, const ApertureMask& mask) {
  for (const ViewIndex& v : mask.views())
    if (!r.views.has_view(v))
      throw std::runtime_error("scene " + r.name + " does not store view (" + std::to_string(v.u) + ", " +
                               std::to_string(v.v) + ") required by the input configuration");
}

void require_on_grid(const synth::Dataset& ds, const std::vector<double>& focus, const char* what) {
  for (double p : focus)
    if (ds.spec.focus.index_of(p) < 0)
      throw std::invalid_argument(std::string(what) + ": focus value " + std::to_string(p) +
                                  " is not on the dataset grid");
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

TrainConfig TrainConfig::desk() {
  TrainConfig c;
  c.epochs = 30;
  c.patches_per_epoch = 960;
  c.patch_size = 48;
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train: epochs must be positive");
  if (batch_size < 1) throw std::invalid_argument("train: batch size must be positive");
  if (patches_per_epoch < batch_size || patches_per_epoch % batch_size != 0)
    throw std::invalid_argument("train: patches_per_epoch must be a positive multiple of batch_size");
  if (patch_size < 1) throw std::invalid_argument("train: patch size must be positive");
  focus.validate();
  if (noise_sigma.lo < 0 || noise_sigma.hi < noise_sigma.lo)
    throw std::invalid_argument("train: noise range must satisfy 0 <= lo <= hi");
  if (eval_every < 1) throw std::invalid_argument("train: eval_every must be positive");
  if (learning_rate < 0) throw std::invalid_argument("train: learning rate must be non-negative");
  if (!(lr_decay_rate > 0) || lr_decay_epochs < 1) throw std::invalid_argument("train: invalid learning-rate decay");
}

json TrainConfig::to_json() const {
  return {
      {"epochs", epochs},
      {"batch_size", batch_size},
      {"patches_per_epoch", patches_per_epoch},
      {"patch_size", patch_size},
      {"focus_range", {{"lo", focus.lo}, {"hi", focus.hi}, {"step", focus.step}}},
      {"noise_sigma_range", {noise_sigma.lo, noise_sigma.hi}},
      {"seed", seed},
      {"eval_every", eval_every},
      {"learning_rate", learning_rate},
      {"lr_decay_rate", lr_decay_rate},
      {"lr_decay_epochs", lr_decay_epochs},
      {"val_focus", val_focus},
  };
}

TrainConfig TrainConfig::from_json(const json& j) {
  TrainConfig c;
  c.epochs = j.at("epochs").get<int>();
  c.batch_size = j.at("batch_size").get<int>();
  c.patches_per_epoch = j.at("patches_per_epoch").get<int>();
  c.patch_size = j.at("patch_size").get<int>();
  c.focus.lo = j.at("focus_range").at("lo").get<double>();
  c.focus.hi = j.at("focus_range").at("hi").get<double>();
  c.focus.step = j.at("focus_range").at("step").get<double>();
  c.noise_sigma.lo = j.at("noise_sigma_range").at(0).get<double>();
  c.noise_sigma.hi = j.at("noise_sigma_range").at(1).get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.eval_every = j.at("eval_every").get<int>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.lr_decay_rate = j.at("lr_decay_rate").get<double>();
  c.lr_decay_epochs = j.at("lr_decay_epochs").get<int>();
  c.val_focus = j.at("val_focus").get<std::vector<double>>();
  return c;
}

json EpochRecord::to_json() const {
  return {{"epoch", epoch},
          {"step", step},
          {"train_l1", train_l1},
          {"val_psnr", optional_json(val_psnr)},
          {"val_ssim", optional_json(val_ssim)},
          {"lr", lr}};
}

BatchSampler::BatchSampler(const synth::Dataset& dataset, const TrainConfig& config, const ApertureMask& input_mask)
    : dataset_(dataset),
      config_(config),
      mask_(input_mask),
      focus_(config.focus.values()),
      scene_rng_(synth::derive_seed(config.seed, kScene)),
      focus_rng_(synth::derive_seed(config.seed, kFocus)),
      sigma_rng_(synth::derive_seed(config.seed, kSigma)),
      noise_rng_(synth::derive_seed(config.seed, kNoise)),
      position_rng_(synth::derive_seed(config.seed, kPosition)) {
  if (dataset_.train.empty()) throw std::invalid_argument("train: dataset has no training scenes");
  require_on_grid(dataset_, focus_, "train");
  for (const auto& r : dataset_.train) require_views(r, mask_);
  const Index th = dataset_.spec.height - 2 * dataset_.spec.crop_margin;
  const Index tw = dataset_.spec.width - 2 * dataset_.spec.crop_margin;
  if (config_.patch_size > th || config_.patch_size > tw)
    throw std::invalid_argument("train: patch size " + std::to_string(config_.patch_size) +
                                " exceeds the cropped image size");
}

Batch BatchSampler::next() {
  const Index p = config_.patch_size;
  const Index views = mask_.count();
  const int m = dataset_.spec.crop_margin;
  Batch batch;
  batch.input = Tensor<float>(nn::Shape{config_.batch_size, 3 * views, p, p});
  batch.target = Tensor<float>(nn::Shape{config_.batch_size, 3, p, p});

  std::uniform_int_distribution<int> scene_dist(0, static_cast<int>(dataset_.train.size()) - 1);
  std::uniform_int_distribution<std::size_t> focus_dist(0, focus_.size() - 1);
  std::uniform_real_distribution<double> sigma_dist(config_.noise_sigma.lo, config_.noise_sigma.hi);
  const Index th = dataset_.spec.height - 2 * m;
  const Index tw = dataset_.spec.width - 2 * m;
  std::uniform_int_distribution<Index> top_dist(0, th - p), left_dist(0, tw - p);
  Plane<double> scratch;

  for (int b = 0; b < config_.batch_size; ++b) {
    SampleInfo s;
    s.scene = scene_dist(scene_rng_);
    s.pixels = focus_[focus_dist(focus_rng_)];
    s.noise_sigma = config_.noise_sigma.hi > config_.noise_sigma.lo ? sigma_dist(sigma_rng_) : config_.noise_sigma.lo;
    s.top = top_dist(position_rng_);
    s.left = left_dist(position_rng_);
    const synth::SceneRecord& rec = dataset_.train[static_cast<std::size_t>(s.scene)];

    const Image target = rec.load_target(s.pixels);
    if (target.height() != th || target.width() != tw)
      throw std::runtime_error("train: target of " + rec.name + " has unexpected size");
    if (scratch.rows() != rec.views.height() || scratch.cols() != rec.views.width())
      scratch.setZero(rec.views.height(), rec.views.width());

    auto in = batch.input.item(b);
    std::normal_distribution<double> noise(0.0, s.noise_sigma > 0 ? s.noise_sigma : 1.0);
    const Index row0 = s.top + m;
    for (Index v = 0; v < views; ++v) {
      const ViewIndex vi = mask_.views()[static_cast<std::size_t>(v)];
      const Shift shift = view_shift(vi, rec.views.center(), s.pixels);
      for (int c = 0; c < 3; ++c) {
        // only the patch rows are resampled; equal to the rows of shifted_views
        scratch.middleRows(row0, p).setZero();
        accumulate_shifted_plane(rec.views.view(vi)[c], -shift.dy, -shift.dx, scratch, row0, row0 + p);
        const auto& plane = scratch;
        auto row = in.row(3 * v + c);
        for (Index y = 0; y < p; ++y) {
          for (Index x = 0; x < p; ++x) {
            double val = plane(s.top + m + y, s.left + m + x);
            if (s.noise_sigma > 0) val = std::clamp(val + noise(noise_rng_), 0.0, 1.0);
            row[y * p + x] = static_cast<float>(val);
          }
        }
      }
    }
    auto out = batch.target.item(b);
    for (int c = 0; c < 3; ++c)
      for (Index y = 0; y < p; ++y)
        for (Index x = 0; x < p; ++x) out(c, y * p + x) = static_cast<float>(target[c](s.top + y, s.left + x));
    batch.samples.push_back(s);
  }
  return batch;
}

ValidationScore validate_model(const RefocusNet<float>& model, const std::vector<synth::SceneRecord>& scenes,
                               const std::vector<double>& focus, int crop_margin) {
  if (scenes.empty() || focus.empty()) throw std::invalid_argument("validate: nothing to evaluate");
  const std::size_t n = scenes.size() * focus.size();
  std::vector<ValidationScore> scores(n);
  parallel_for(n, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const synth::SceneRecord& rec = scenes[k / focus.size()];
      const double pixels = focus[k % focus.size()];
      const ApertureMask mask = mask_for(model.config(), rec.views);
      require_views(rec, mask);
      const Image out = crop(net::run_network(model, shifted_views(rec.views, mask, FocusParameter(pixels))),
                             crop_margin);
      const Image target = rec.load_target(pixels);
      scores[k] = {metrics::psnr(out, target), metrics::ssim(out, target)};
    }
  });
  ValidationScore mean;
  for (const auto& s : scores) {
    mean.psnr += s.psnr;
    mean.ssim += s.ssim;
  }
  mean.psnr /= static_cast<double>(n);
  mean.ssim /= static_cast<double>(n);
  return mean;
}

TrainResult train(const synth::Dataset& dataset, const TrainConfig& config, const NetworkConfig& network,
                  const ProgressFn& progress) {
  config.validate();
  network.validate();
  if (dataset.train.empty()) throw std::invalid_argument("train: dataset has no training scenes");
  const ApertureMask mask = mask_for(network, dataset.train.front().views);
  if (3 * mask.count() != network.in_channels)
    throw std::invalid_argument("train: network expects " + std::to_string(network.in_channels) +
                                " input channels but the input configuration gives " +
                                std::to_string(3 * mask.count()));
  const bool has_val = !dataset.val.empty();
  if (has_val) require_on_grid(dataset, config.val_focus, "validation");

  BatchSampler sampler(dataset, config, mask);
  std::mt19937_64 init_rng(synth::derive_seed(config.seed, kInit));
  RefocusNet<float> model(network, init_rng);
  auto params = model.parameters();
  nn::AdamState<float> adam;
  adam.lr_schedule = {config.learning_rate, config.lr_decay_rate, config.decay_steps(), true};
  adam.init(params);

  const bool write = !config.checkpoint_dir.empty();
  std::ofstream log_file;
  if (write) {
    fs::create_directories(config.checkpoint_dir);
    log_file.open(config.checkpoint_dir / "metrics.jsonl", std::ios::binary | std::ios::trunc);
    if (!log_file) throw std::runtime_error("train: cannot write " + (config.checkpoint_dir / "metrics.jsonl").string());
  }

  TrainResult result;
  result.best_val_psnr = -std::numeric_limits<double>::infinity();
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double loss_sum = 0;
    double lr = 0;
    for (int s = 0; s < config.steps_per_epoch(); ++s) {
      const Batch batch = sampler.next();
      RefocusNet<float>::Cache cache;
      const Tensor<float> pred = model.forward(batch.input, cache);
      const nn::LossResult<float> loss = nn::l1_loss(pred, batch.target);
      model.zero_grad();
      model.backward(cache, loss.grad, false);
      lr = adam.lr_schedule.at(adam.step);
      nn::adam_step<float>(params, adam);
      loss_sum += loss.loss;
      result.step_losses.push_back(loss.loss);
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.step = adam.step;
    rec.train_l1 = loss_sum / config.steps_per_epoch();
    rec.lr = lr;
    const bool eval_now = epoch % config.eval_every == 0 || epoch == config.epochs;
    if (has_val && eval_now) {
      const ValidationScore v = validate_model(model, dataset.val, config.val_focus, dataset.spec.crop_margin);
      rec.val_psnr = v.psnr;
      rec.val_ssim = v.ssim;
      if (v.psnr > result.best_val_psnr) {
        result.best_val_psnr = v.psnr;
        result.best_epoch = epoch;
        result.best = model;
        if (write) net::save_model(config.checkpoint_dir / "best.ckpt", model);
      }
    }
    result.log.push_back(rec);
    if (write) {
      log_file << rec.to_json().dump() << "\n";
      log_file.flush();
    }
    if (progress) progress(rec);
  }

  result.last = model;
  if (!has_val) {
    result.best = model;
    result.best_epoch = config.epochs;
    if (write) net::save_model(config.checkpoint_dir / "best.ckpt", model);
  }
  if (write) net::save_model(config.checkpoint_dir / "last.ckpt", model, &adam);
  return result;
}

std::vector<EvalRow> evaluate(const RefocusNet<float>& model, const synth::Dataset& dataset,
                              const std::vector<synth::SceneRecord>& scenes, const EvalOptions& options) {
  if (!(options.rescale > 0)) throw std::invalid_argument("eval: rescale factor must be positive");
  std::vector<EvalRow> rows;
  if (options.sigmas.empty()) return rows;
  if (scenes.empty()) throw std::invalid_argument("eval: no scenes to evaluate");
  for (double s : options.sigmas)
    if (!(s >= 0)) throw std::invalid_argument("eval: noise sigma must be non-negative");

  std::vector<double> focus = options.focus;
  if (focus.empty()) {
    const auto grid = dataset.spec.focus.values();
    for (std::size_t k = 0; k < grid.size(); k += 4) focus.push_back(grid[k]);
  }
  require_on_grid(dataset, focus, "eval");

  const ApertureMask mask = mask_for(model.config(), scenes.front().views);
  if (3 * mask.count() != model.config().in_channels)
    throw std::invalid_argument("eval: checkpoint input configuration does not match its channel count");
  for (const auto& r : scenes) require_views(r, mask);

  const int m = dataset.spec.crop_margin;
  const double f = options.rescale;
  std::vector<LightField> fields;
  for (const auto& r : scenes) {
    if (f == 1.0) {
      fields.push_back(r.views);
      continue;
    }
    const RescaleGeometry g = rescale_geometry(r.views.height(), r.views.width(), f);
    LightField lf(r.views.grid_rows(), r.views.grid_cols(), g.height, g.width);
    for (const ViewIndex& v : mask.views()) lf.set_view(v, rescale_image(r.views.view(v), f));
    fields.push_back(std::move(lf));
  }

  struct Score {
    double psnr, ssim, naive_psnr, naive_ssim, seconds;
    Index height, width;
  };
  const std::size_t n = scenes.size() * focus.size();
  for (std::size_t si = 0; si < options.sigmas.size(); ++si) {
    const double sigma = options.sigmas[si];
    std::vector<Score> scores(n);
    parallel_for(n, [&](std::size_t b, std::size_t e) {
      for (std::size_t k = b; k < e; ++k) {
        const std::size_t ri = k / focus.size();
        const double pixels = focus[k % focus.size()];
        std::mt19937_64 rng(synth::derive_seed(synth::derive_seed(options.seed, kEval + si), k));
        std::vector<Image> inputs = shifted_views(fields[ri], mask, FocusParameter(pixels * f));
        for (Image& img : inputs) synth::add_gaussian_noise(img, sigma, rng);

        const metrics::Stopwatch sw;
        const Image out = crop(net::run_network(model, inputs), m);
        const double seconds = sw.seconds();
        const Image naive = crop(average(inputs), m);

        Image target = scenes[ri].load_target(pixels);
        if (f != 1.0) {
          const RescaleGeometry g = rescale_geometry(scenes[ri].views.height(), scenes[ri].views.width(), f);
          const double y0 = (m + 0.5) * g.step_y - 0.5 - m;
          const double x0 = (m + 0.5) * g.step_x - 0.5 - m;
          target = resample_grid(target, out.height(), out.width(), y0, x0, g.step_y, g.step_x);
        }
        scores[k] = {metrics::psnr(out, target), metrics::ssim(out, target), metrics::psnr(naive, target),
                     metrics::ssim(naive, target), seconds, out.height(), out.width()};
      }
    });
    EvalRow row;
    row.sigma = sigma;
    row.height = scores.front().height;
    row.width = scores.front().width;
    for (const Score& s : scores) {
      row.psnr += s.psnr;
      row.ssim += s.ssim;
      row.naive_psnr += s.naive_psnr;
      row.naive_ssim += s.naive_ssim;
      row.seconds += s.seconds;
    }
    const double dn = static_cast<double>(n);
    row.psnr /= dn;
    row.ssim /= dn;
    row.naive_psnr /= dn;
    row.naive_ssim /= dn;
    row.seconds /= dn;
    rows.push_back(row);
  }
  return rows;
}

json eval_table_json(const std::vector<EvalRow>& rows) {
  json out = json::array();
  for (const EvalRow& r : rows)
    out.push_back({{"sigma", r.sigma},
                   {"psnr", r.psnr},
                   {"ssim", r.ssim},
                   {"naive_psnr", r.naive_psnr},
                   {"naive_ssim", r.naive_ssim},
                   {"height", r.height},
                   {"width", r.width}});
  return out;
}

}  // namespace slf::train
