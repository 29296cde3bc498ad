// Acceptance suite: one PASS/FAIL line per criterion. The training criteria
// run the real CLI commands at desk scale and take several hours on one core.

#include "slf/cli/cli.hpp"
#include "slf/lf/io.hpp"
#include "slf/metrics/metrics.hpp"
#include "slf/net/refocusnet.hpp"
#include "slf/nn/grad_check.hpp"
#include "slf/synth/scene.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <sstream>

using namespace slf;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Plane<double> crop_plane(const Plane<double>& p) { return p.block(6, 6, p.rows() - 12, p.cols() - 12); }

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = read_file(e.path());
  return out;
}

// Artifacts produced through the CLI, created once per process.
class Workspace {
 public:
  explicit Workspace(fs::path dir) : dir_(std::move(dir)) {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }

  const fs::path& dir() const { return dir_; }

  fs::path dataset(const std::string& name) {
    const fs::path out = dir_ / name;
    if (done_.insert(out.string()).second)
      cli({"gen", "--profile", "desk", "--seed", "7", "--out", out.string()});
    return out;
  }

  /// Desk training of width 32 with seed and extra flags; returns the run directory.
  fs::path training(const std::string& name, int seed, const std::vector<std::string>& extra = {}) {
    const fs::path out = dir_ / "runs" / name;
    if (done_.insert(out.string()).second) {
      std::vector<std::string> args = {"train",   "--data", dataset("desk_a").string(), "--out", out.string(),
                                       "--profile", "desk", "--seed", std::to_string(seed)};
      args.insert(args.end(), extra.begin(), extra.end());
      const metrics::Stopwatch sw;
      cli(args);
      train_seconds_[name] = sw.seconds();
    }
    return out;
  }

  double train_seconds(const std::string& name) const { return train_seconds_.at(name); }

  fs::path evaluation(const std::string& name) {
    const fs::path out = dir_ / (name + ".json");
    if (done_.insert(out.string()).second)
      cli({"eval", "--checkpoint", (training("final_s1", 1) / "best.ckpt").string(), "--data",
           dataset("desk_a").string(), "--sigma", "0", "0.02", "0.04", "0.08", "0.12", "--seed", "0", "--out",
           out.string()});
    return out;
  }

 private:
  void cli(std::vector<std::string> args) {
    args.insert(args.begin(), "slf");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    if (code != 0) throw std::runtime_error(args[1] + " exited with " + std::to_string(code) + ": " + err.str());
  }

  fs::path dir_;
  std::set<std::string> done_;
  std::map<std::string, double> train_seconds_;
};

template <typename Scalar>
nn::Tensor<Scalar> random_tensor(const nn::Shape& shape, std::uint64_t seed, double lo = 0, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  nn::Tensor<Scalar> t(shape);
  for (Index k = 0; k < t.size(); ++k) t.data()[k] = static_cast<Scalar>(u(rng));
  return t;
}

Outcome focus_algebra() {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  double worst = 0;
  int n = 0;
  while (n < 1000) {
    const double p = u(rng);
    if (std::abs(1 - p) < 1e-3) continue;
    const long double expected = 1.0L / (1.0L - static_cast<long double>(p));
    const double rel = static_cast<double>(std::abs((pixels_to_alpha(p) - expected) / expected));
    const double rel_param = static_cast<double>(std::abs((FocusParameter(p).alpha() - expected) / expected));
    worst = std::max({worst, rel, rel_param});
    ++n;
  }
  bool pole = false;
  try {
    FocusParameter bad(1.0);
  } catch (const std::domain_error&) {
    pole = true;
  }
  return {worst < 1e-12 && pole, "max rel err " + fmt("%.2e", worst) + " over 1000 values, pixels=1 " +
                                     (pole ? "rejected" : "accepted")};
}

Outcome classical_oracle() {
  const ApertureMask circ = circular_mask(17, 17);
  const double disparities[] = {-2.0, -1.0, 0.0, 2.0};
  double worst = 0;
  for (int s = 0; s < 20; ++s) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(1000 + s));
    const double d = disparities[s % 4];
    const LightField dense = synth::render_views(synth::single_layer_scene(synth::make_texture(96, 128, rng), d), circ);
    const RefocusedImage r = refocus_shift_average(dense, circ, FocusParameter(d), 0);
    const Index m = static_cast<Index>(8 * std::abs(d)) + 1;
    worst = std::max(worst, max_abs_diff(crop(r.image, m), crop(dense.view({8, 8}), m)));
  }
  return {worst < 1e-6, "20 scenes, max abs err " + fmt("%.2e", worst)};
}

Outcome ghosting_ladder() {
  const ApertureMask rh = input_view_selection(InputConfig::four_rhombus, 17, 17);
  const ApertureMask nine = strided_mask(17, 17, 2);
  const ApertureMask circ = circular_mask(17, 17);
  synth::SceneParams params;
  params.height = 96;
  params.width = 128;
  params.min_layers = 2;
  params.max_layers = 2;
  double sum_rh = 0, sum_nine = 0, sum_circ = 0;
  int scenes = 0, ordered = 0;
  for (std::uint64_t seed = 200; scenes < 10; ++seed) {
    const synth::LayeredScene scene = synth::generate_scene(params, seed);
    const synth::Layer& back = scene.layers[0];
    const synth::Layer& front = scene.layers[1];
    if (front.disparity == 1.0 || front.disparity == back.disparity) continue;
    const Plane<double> region = (crop_plane(front.alpha) == 0).cast<double>();
    if (region.sum() < 100) continue;
    const LightField dense = synth::render_lightfield(scene, 17, 17);
    const FocusParameter focus(front.disparity);
    const Image gt = synth::ground_truth_refocus(dense, focus).image;
    const double p_rh = metrics::psnr_masked(refocus_shift_average(dense, rh, focus).image, gt, region);
    const double p_nine = metrics::psnr_masked(refocus_shift_average(dense, nine, focus).image, gt, region);
    const double p_circ = metrics::psnr_masked(refocus_shift_average(dense, circ, focus).image, gt, region);
    if (p_rh < p_nine && p_nine < p_circ) ++ordered;
    sum_rh += p_rh;
    sum_nine += p_nine;
    sum_circ += p_circ;
    ++scenes;
  }
  const double gap = (sum_circ - sum_rh) / scenes;
  return {ordered == scenes && gap >= 3.0,
          std::to_string(ordered) + "/10 strictly increasing; mean PSNR rhombus4 " + fmt("%.2f", sum_rh / scenes) +
              ", 9x9 " + fmt("%.2f", sum_nine / scenes) + ", circular241 " + fmt("%.2f", sum_circ / scenes) +
              " dB"};
}

Outcome gradient_suite() {
  using nn::Shape;
  using nn::Tensor;
  std::vector<std::pair<std::string, nn::GradCheckReport>> reports;

  {
    auto x = random_tensor<double>(Shape{2, 3, 6, 5}, 1);
    nn::Conv2D<double> l(3, 4);
    l.weight = random_tensor<double>(l.weight.shape(), 2, -0.5, 0.5);
    l.bias = random_tensor<double>(l.bias.shape(), 3, -0.5, 0.5);
    const auto w = random_tensor<double>(Shape{2, 4, 6, 5}, 4, -1, 1);
    std::function<double(bool)> obj = [&](bool grads) {
      if (grads) {
        const auto g = nn::conv2d_backward(w, x, l);
        x.grad() = g.input.data();
        l.weight.grad() = g.weight.data();
        l.bias.grad() = g.bias.data();
      }
      return nn::conv2d_forward(x, l).data().dot(w.data());
    };
    Tensor<double>* params[] = {&x, &l.weight, &l.bias};
    reports.emplace_back("conv2d", nn::grad_check<double>(obj, params));
  }
  {
    auto x = random_tensor<double>(Shape{1, 2, 10, 12}, 5, -1, 1);
    for (Index k = 0; k < x.size(); ++k)
      if (std::abs(x.data()[k]) < 1e-3) x.data()[k] = 0.5;
    const auto w = random_tensor<double>(x.shape(), 6, -1, 1);
    std::function<double(bool)> obj = [&](bool grads) {
      if (grads) x.grad() = nn::relu_backward(w, x).data();
      return nn::relu_forward(x).data().dot(w.data());
    };
    Tensor<double>* params[] = {&x};
    reports.emplace_back("relu", nn::grad_check<double>(obj, params));
  }
  {
    auto p = random_tensor<double>(Shape{1, 3, 6, 6}, 7);
    const auto t = random_tensor<double>(p.shape(), 8);
    for (Index k = 0; k < p.size(); ++k)
      if (std::abs(p.data()[k] - t.data()[k]) < 1e-3) p.data()[k] += 0.01;
    std::function<double(bool)> obj = [&](bool grads) {
      const auto r = nn::l1_loss(p, t);
      if (grads) p.grad() = r.grad.data();
      return r.loss;
    };
    Tensor<double>* params[] = {&p};
    reports.emplace_back("l1", nn::grad_check<double>(obj, params));
  }
  for (const net::Variant v :
       {net::Variant::final_net, net::Variant::variant1, net::Variant::variant2, net::Variant::no_skip}) {
    net::NetworkConfig c = net::NetworkConfig::for_input(InputConfig::four_rhombus, 3, 8);
    c.variant = v;
    std::mt19937_64 rng(9);
    net::RefocusNet<double> m(c, rng);
    for (Tensor<double>* p : m.parameters())
      if (p->rank() == 1) p->data() = random_tensor<double>(p->shape(), 10, -0.1, 0.1).data();
    auto x = random_tensor<double>(Shape{1, 12, 8, 8}, 11);
    const auto w = random_tensor<double>(Shape{1, 3, 8, 8}, 12, -1, 1);
    std::function<double(bool)> obj = [&](bool grads) {
      net::RefocusNet<double>::Cache cache;
      const auto out = m.forward(x, cache);
      if (grads) {
        m.zero_grad();
        x.grad() = m.backward(cache, w).data();
      }
      return out.data().dot(w.data());
    };
    std::vector<Tensor<double>*> params = m.parameters();
    params.push_back(&x);
    reports.emplace_back("refocusnet/" + net::to_string(v), nn::grad_check<double>(obj, params));
  }

  bool pass = true;
  std::string detail;
  for (const auto& [name, r] : reports) {
    pass = pass && r.max_rel_error < 1e-4 && r.checked > 0;
    detail += (detail.empty() ? "" : ", ") + name + " " + fmt("%.1e", r.max_rel_error);
  }
  return {pass, "max rel err: " + detail};
}

Outcome parameter_budget() {
  const net::NetworkConfig def;
  std::mt19937_64 rng(0);
  const std::int64_t built = net::RefocusNet<float>(def, rng).parameter_count();
  const std::int64_t closed = net::parameter_count(def);
  const double rel = std::abs(static_cast<double>(built) - 235000.0) / 235000.0;
  return {built == closed && rel <= 0.10, std::to_string(built) + " parameters (width " + std::to_string(def.width) +
                                              "), " + fmt("%+.1f%%", 100.0 * (built - 235000.0) / 235000.0) +
                                              " from 235000"};
}

json eval_rows(Workspace& ws) { return json::parse(read_file(ws.evaluation("eval_a"))).at("rows"); }

Outcome desk_training(Workspace& ws) {
  ws.training("final_s1", 1);
  const double seconds = ws.train_seconds("final_s1");
  const json rows = eval_rows(ws);
  double gap0 = -1e9, gap8 = -1e9;
  for (const auto& r : rows) {
    const double gap = r.at("psnr").get<double>() - r.at("naive_psnr").get<double>();
    if (r.at("sigma") == 0.0) gap0 = gap;
    if (r.at("sigma") == 0.08) gap8 = gap;
  }
  return {seconds < 900 && gap0 >= 1 && gap8 >= 3,
          "train " + fmt("%.0f", seconds) + " s; net - naive " + fmt("%+.2f", gap0) + " dB at sigma 0, " +
              fmt("%+.2f", gap8) + " dB at sigma 0.08"};
}

Outcome noise_monotonicity(Workspace& ws) {
  const json rows = eval_rows(ws);
  int inversions = 0;
  double worst = 0;
  std::string detail = "psnr";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    detail += " " + fmt("%.2f", rows[i].at("psnr").get<double>());
    if (i == 0) continue;
    const double rise = rows[i].at("psnr").get<double>() - rows[i - 1].at("psnr").get<double>();
    if (rise > 0) {
      ++inversions;
      worst = std::max(worst, rise);
    }
  }
  return {rows.size() == 5 && (inversions == 0 || (inversions == 1 && worst <= 0.1)),
          detail + " for sigma 0..0.12; " + std::to_string(inversions) + " inversions"};
}

double best_val_psnr(const fs::path& run) {
  std::istringstream lines(read_file(run / "metrics.jsonl"));
  double best = -std::numeric_limits<double>::infinity();
  for (std::string line; std::getline(lines, line);) {
    const json j = json::parse(line);
    if (j.at("val_psnr").is_number()) best = std::max(best, j.at("val_psnr").get<double>());
  }
  return best;
}

Outcome ablations(Workspace& ws) {
  const int seeds[] = {1, 2, 3};
  std::map<std::string, std::vector<double>> val;
  for (int s : seeds) {
    const std::string suffix = "_s" + std::to_string(s);
    // seed 1 of the default configuration doubles as the determinism rerun
    val["final"].push_back(best_val_psnr(ws.training((s == 1 ? "final_s1_again" : "final" + suffix), s)));
    val["depth3"].push_back(best_val_psnr(ws.training("depth3" + suffix, s, {"--depth", "3"})));
    val["no_skip"].push_back(best_val_psnr(ws.training("no_skip" + suffix, s, {"--variant", "no_skip"})));
    val["eight"].push_back(best_val_psnr(ws.training("eight" + suffix, s, {"--input", "eight"})));
  }
  auto mean = [](const std::vector<double>& v) { return (v[0] + v[1] + v[2]) / 3.0; };
  const double a = mean(val["final"]) - mean(val["depth3"]);
  const double b = mean(val["final"]) - mean(val["no_skip"]);
  const double c = mean(val["eight"]) - mean(val["final"]);
  std::string detail = "depth7-depth3 " + fmt("%+.2f", a) + ", final-no_skip " + fmt("%+.2f", b) +
                       ", eight-rhombus4 " + fmt("%+.2f", c) + " dB (mean val psnr over 3 seeds:";
  for (const auto& [k, v] : val) detail += " " + k + " " + fmt("%.2f", mean(v));
  return {a >= -0.2 && b >= 1.0 && c >= -0.2, detail + ")"};
}

Outcome determinism(Workspace& ws) {
  const bool gen_same = tree(ws.dataset("desk_a")) == tree(ws.dataset("desk_b"));
  const bool train_same = tree(ws.training("final_s1", 1)) == tree(ws.training("final_s1_again", 1));
  const bool eval_same = read_file(ws.evaluation("eval_a")) == read_file(ws.evaluation("eval_b"));
  auto word = [](bool b) { return b ? "identical" : "DIFFERENT"; };
  return {gen_same && train_same && eval_same, std::string("gen ") + word(gen_same) + ", train " +
                                                   word(train_same) + ", eval " + word(eval_same)};
}

Image formula_a(Index h, Index w) {
  Image img(h, w);
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < h; ++y)
      for (Index x = 0; x < w; ++x)
        img[c](y, x) = 0.5 + 0.35 * std::sin(0.31 * y + 0.17 * x + 1.3 * c) * std::cos(0.23 * x - 0.11 * y * c);
  return img;
}

Image formula_b(const Image& a) {
  Image img(a.height(), a.width());
  for (int c = 0; c < 3; ++c)
    for (Index y = 0; y < a.height(); ++y)
      for (Index x = 0; x < a.width(); ++x)
        img[c](y, x) = std::clamp(a[c](y, x) + 0.1 * std::sin(0.085 * y * x + c), 0.0, 1.0);
  return img;
}

Outcome metric_examples(Workspace& ws) {
  const Image a = formula_a(24, 31), b = formula_b(a);
  std::mt19937_64 rng(3);
  const Image tex = synth::make_texture(64, 80, rng);
  const bool self = metrics::ssim(a, a) == 1.0 && metrics::ssim(tex, tex) == 1.0 &&
                    std::isinf(metrics::psnr(tex, tex));
  // scikit-image 0.25.2 structural_similarity(gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
  // data_range=1, channel_axis=2)
  // and peak_signal_noise_ratio(data_range=1) on the same formula images
  const bool frozen = std::abs(metrics::ssim(a, b) - 0.80269547741793401) < 1e-10 &&
                      std::abs(metrics::psnr(a, b) - 23.000179148448552) < 1e-10;
  const bool trivial = std::abs(metrics::psnr(Image::constant(8, 8, 0.5), Image::constant(8, 8, 0.6)) - 20.0) < 1e-9;

  const ApertureMask rh = input_view_selection(InputConfig::four_rhombus, 17, 17);
  const LightField lf = synth::render_views(synth::single_layer_scene(synth::make_texture(128, 192, rng), 0.5), rh);
  const Image r = refocus_shift_average(lf, rh, FocusParameter(0.5)).image;
  bool cropped = r.height() == 128 - 12 && r.width() == 192 - 12;
  std::string detail = "ssim(a,a)=1 exact, frozen psnr/ssim within 1e-10, refocus output " +
                       std::to_string(r.height()) + "x" + std::to_string(r.width());
  if (fs::exists(ws.dir() / "eval_a.json")) {
    const json row = eval_rows(ws).at(0);
    cropped = cropped && row.at("height") == 116 && row.at("width") == 180;
    detail += ", eval scored " + row.at("height").dump() + "x" + row.at("width").dump();
  }
  return {self && frozen && trivial && cropped, detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance suite"};
  fs::path work = fs::temp_directory_path() / "slf_acceptance";
  std::vector<int> only;
  app.add_option("--work", work, "Scratch directory (erased at start)");
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  Workspace ws(work);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"focus algebra", focus_algebra},
      {"classical refocus oracle", classical_oracle},
      {"ghosting ladder", ghosting_ladder},
      {"gradient suite", gradient_suite},
      {"parameter budget", parameter_budget},
      {"desk training", [&] { return desk_training(ws); }},
      {"noise monotonicity", [&] { return noise_monotonicity(ws); }},
      {"ablation directions", [&] { return ablations(ws); }},
      {"determinism", [&] { return determinism(ws); }},
      {"metrics", [&] { return metric_examples(ws); }},
  };

  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    const metrics::Stopwatch sw;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    ++ran;
    if (!o.pass) ++failed;
    std::printf("%s %2d  %-26s %s  [%.1f s]\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(),
                o.detail.c_str(), sw.seconds());
    std::fflush(stdout);
  }
  std::printf("%d/%d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
