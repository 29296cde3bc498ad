#include "slf/synth/dataset.hpp"

#include "slf/lf/io.hpp"
#include "slf/util/parallel.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace slf::synth {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

double snap(double v) {
  const double r = std::round(v * 1e6) / 1e6;
  return r + 0.0;  // no negative zero
}

std::string scene_name(int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "scene_%04d", index);
  return buf;
}

}  // namespace

std::vector<double> FocusRange::values() const {
  validate();
  std::vector<double> out;
  const long long n = std::llround((hi - lo) / step) + 1;
  for (long long k = 0; k < n; ++k) {
    const double v = snap(lo + static_cast<double>(k) * step);
    if (v != 1.0) out.push_back(v);
  }
  return out;
}

int FocusRange::size() const { return static_cast<int>(values().size()); }

int FocusRange::index_of(double pixels) const {
  if (!std::isfinite(pixels)) return -1;
  const std::vector<double> grid = values();
  for (std::size_t k = 0; k < grid.size(); ++k)
    if (std::abs(grid[k] - pixels) <= 1e-6) return static_cast<int>(k);
  return -1;
}

void FocusRange::validate() const {
  if (!(step > 0) || !(hi >= lo)) throw std::invalid_argument("focus range: need step > 0 and hi >= lo");
  const double n = (hi - lo) / step;
  if (std::abs(n - std::round(n)) > 1e-9) throw std::invalid_argument("focus range: step must divide the range");
}

DatasetSpec DatasetSpec::desk() {
  DatasetSpec s;
  s.n_train = 24;
  s.n_val = 4;
  s.n_test = 4;
  s.patch_size = 48;
  s.height = 128;
  s.width = 192;
  return s;
}

DatasetSpec DatasetSpec::tiny() {
  DatasetSpec s;
  s.n_train = 3;
  s.n_val = 1;
  s.n_test = 1;
  s.patch_size = 24;
  s.height = 64;
  s.width = 80;
  return s;
}

void DatasetSpec::validate() const {
  if (n_train < 1) throw std::invalid_argument("dataset: n_train must be at least 1");
  if (n_val < 0 || n_test < 0) throw std::invalid_argument("dataset: split sizes must be non-negative");
  if (angular != kGroundTruthGrid) throw std::invalid_argument("dataset: ground truth requires a 17x17 grid");
  focus.validate();
  if (noise_sigma.lo < 0 || noise_sigma.hi < noise_sigma.lo)
    throw std::invalid_argument("dataset: noise range must satisfy 0 <= lo <= hi");
  if (height - 2 * crop_margin < patch_size || width - 2 * crop_margin < patch_size)
    throw std::invalid_argument("dataset: images too small for the patch size after cropping");
  if (min_layers < 1 || max_layers < min_layers) throw std::invalid_argument("dataset: invalid layer range");
}

json DatasetSpec::to_json() const {
  return {
      {"n_train", n_train},
      {"n_val", n_val},
      {"n_test", n_test},
      {"angular", angular},
      {"focus_range", {{"lo", focus.lo}, {"hi", focus.hi}, {"step", focus.step}}},
      {"noise_sigma_range", {noise_sigma.lo, noise_sigma.hi}},
      {"patch_size", patch_size},
      {"height", height},
      {"width", width},
      {"input_radius", input_radius},
      {"crop_margin", crop_margin},
      {"min_layers", min_layers},
      {"max_layers", max_layers},
      {"seed", seed},
  };
}

DatasetSpec DatasetSpec::from_json(const json& j) {
  DatasetSpec s;
  s.n_train = j.at("n_train").get<int>();
  s.n_val = j.at("n_val").get<int>();
  s.n_test = j.at("n_test").get<int>();
  s.angular = j.at("angular").get<int>();
  s.focus.lo = j.at("focus_range").at("lo").get<double>();
  s.focus.hi = j.at("focus_range").at("hi").get<double>();
  s.focus.step = j.at("focus_range").at("step").get<double>();
  s.noise_sigma.lo = j.at("noise_sigma_range").at(0).get<double>();
  s.noise_sigma.hi = j.at("noise_sigma_range").at(1).get<double>();
  s.patch_size = j.at("patch_size").get<int>();
  s.height = j.at("height").get<Index>();
  s.width = j.at("width").get<Index>();
  s.input_radius = j.at("input_radius").get<int>();
  s.crop_margin = j.at("crop_margin").get<int>();
  s.min_layers = j.at("min_layers").get<int>();
  s.max_layers = j.at("max_layers").get<int>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

ApertureMask stored_view_mask(int angular, int radius) {
  return input_view_selection(InputConfig::eight, angular, angular, radius)
      .united(input_view_selection(InputConfig::two_horizontal, angular, angular, radius));
}

void add_gaussian_noise(Image& img, double sigma, std::mt19937_64& rng) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
  if (sigma == 0) return;
  std::normal_distribution<double> n(0.0, sigma);
  for (auto& c : img.channels) {
    for (Index k = 0; k < c.size(); ++k) c.data()[k] += n(rng);
  }
  clamp01_inplace(img);
}

TrainingExample make_training_example(const LightField& views, const Image& target, const FocusParameter& focus,
                                      const ApertureMask& input_mask, double noise_sigma, std::mt19937_64& rng,
                                      int crop_margin) {
  if (noise_sigma < 0) throw std::invalid_argument("make_training_example: noise sigma must be non-negative");
  if (target.height() != views.height() - 2 * crop_margin || target.width() != views.width() - 2 * crop_margin)
    throw std::invalid_argument("make_training_example: target does not match the cropped view size");
  TrainingExample ex;
  ex.inputs = shifted_views(views, input_mask, focus);
  for (Image& img : ex.inputs) add_gaussian_noise(img, noise_sigma, rng);
  ex.target = target;
  ex.crop_margin = crop_margin;
  ex.pixels = focus.pixels();
  ex.noise_sigma = noise_sigma;
  return ex;
}

TrainingExample make_training_example(const LayeredScene& scene, const FocusParameter& focus,
                                      const ApertureMask& input_mask, double noise_sigma, std::mt19937_64& rng,
                                      int crop_margin) {
  const LightField views = render_views(scene, input_mask);
  const Image target = ground_truth_refocus(scene, focus, crop_margin).image;
  return make_training_example(views, target, focus, input_mask, noise_sigma, rng, crop_margin);
}

Patch extract_patch(const TrainingExample& example, Index top, Index left, int patch_size) {
  Patch p;
  p.top = top;
  p.left = left;
  p.target = window(example.target, top, left, patch_size, patch_size);
  const Index m = example.crop_margin;
  for (const Image& view : example.inputs)
    for (int c = 0; c < 3; ++c) p.input.push_back(view[c].block(top + m, left + m, patch_size, patch_size));
  return p;
}

std::vector<Patch> sample_patches(const TrainingExample& example, int patch_size, int count, std::mt19937_64& rng) {
  if (patch_size < 1) throw std::invalid_argument("sample_patches: patch size must be positive");
  const Index th = example.target.height();
  const Index tw = example.target.width();
  if (th < patch_size || tw < patch_size) throw std::invalid_argument("sample_patches: image smaller than patch");
  std::uniform_int_distribution<Index> top(0, th - patch_size);
  std::uniform_int_distribution<Index> left(0, tw - patch_size);
  std::vector<Patch> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  for (int k = 0; k < count; ++k) {
    const Index t = top(rng);
    const Index l = left(rng);
    out.push_back(extract_patch(example, t, l, patch_size));
  }
  return out;
}

std::string target_file_name(double pixels) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "target_%+.2f.png", pixels + 0.0);
  return buf;
}

fs::path SceneRecord::target_path(double pixels) const { return dir / target_file_name(pixels); }

Image SceneRecord::load_target(double pixels) const { return load_png(target_path(pixels)); }

const std::vector<SceneRecord>& Dataset::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  if (name == "test") return test;
  throw std::invalid_argument("unknown split '" + name + "'");
}

void generate_dataset(const DatasetSpec& spec, const fs::path& root) {
  spec.validate();
  fs::create_directories(root);

  struct Entry {
    std::string name;
    std::string split;
  };
  std::vector<Entry> entries;
  json splits = {{"train", json::array()}, {"val", json::array()}, {"test", json::array()}};
  int index = 0;
  for (const auto& [split, n] : {std::pair<std::string, int>{"train", spec.n_train}, {"val", spec.n_val},
                                 {"test", spec.n_test}}) {
    for (int k = 0; k < n; ++k) {
      entries.push_back({scene_name(index++), split});
      splits[split].push_back(entries.back().name);
    }
  }

  const std::vector<double> focus = spec.focus.values();
  const ApertureMask stored = stored_view_mask(spec.angular, spec.input_radius);
  const ApertureMask aperture = circular_mask(spec.angular, spec.angular);
  SceneParams params;
  params.height = spec.height;
  params.width = spec.width;
  params.min_layers = spec.min_layers;
  params.max_layers = spec.max_layers;

  // Each scene depends only on its own derived seed, so any schedule gives
  // the same files.
  parallel_for(entries.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const std::uint64_t seed = derive_seed(spec.seed, i);
      const LayeredScene scene = generate_scene(params, seed);
      const LightField dense = render_views(scene, aperture);
      const fs::path dir = root / entries[i].name;

      LightField sparse(spec.angular, spec.angular, spec.height, spec.width);
      for (const ViewIndex& vi : stored.views()) sparse.set_view(vi, dense.view(vi));
      save_light_field(dir / "views", sparse);

      json layers = json::array();
      for (const Layer& l : scene.layers) layers.push_back({{"disparity", l.disparity}});
      for (double p : focus)
        save_png(dir / target_file_name(p), refocus_shift_average(dense, aperture, FocusParameter(p),
                                                                  spec.crop_margin)
                                                .image);
      const json example = {
          {"name", entries[i].name},
          {"split", entries[i].split},
          {"scene_seed", seed},
          {"focus_pixels", focus},
          {"noise_sigma", 0.0},
          {"noise_sigma_range", {spec.noise_sigma.lo, spec.noise_sigma.hi}},
          {"crop_margin", spec.crop_margin},
          {"layers", layers},
      };
      write_file(dir / "example.json", example.dump(2) + "\n");
    }
  });

  json stored_views = json::array();
  for (const ViewIndex& vi : stored.views()) stored_views.push_back({vi.u, vi.v});
  const json manifest = {
      {"format", "slf-dataset"},
      {"version", 1},
      {"spec", spec.to_json()},
      {"splits", splits},
      {"stored_views", stored_views},
      {"focus_values", focus},
  };
  write_file(root / "dataset.json", manifest.dump(2) + "\n");
}

std::vector<std::string> validate_dataset_json(const json& j) {
  std::vector<std::string> problems;
  auto require = [&](const json& obj, const std::string& key, bool (json::*is)() const noexcept,
                     const std::string& where) {
    if (!obj.is_object() || !obj.contains(key)) {
      problems.push_back(where + ": missing '" + key + "'");
      return false;
    }
    if (!(obj.at(key).*is)()) {
      problems.push_back(where + ": '" + key + "' has the wrong type");
      return false;
    }
    return true;
  };
  if (!j.is_object()) return {"top level is not an object"};
  if (require(j, "format", &json::is_string, "dataset") && j.at("format") != "slf-dataset")
    problems.push_back("dataset: format must be 'slf-dataset'");
  require(j, "version", &json::is_number_integer, "dataset");
  if (require(j, "spec", &json::is_object, "dataset")) {
    const json& s = j.at("spec");
    for (const char* k : {"n_train", "n_val", "n_test", "angular", "patch_size", "height", "width", "input_radius",
                          "crop_margin", "min_layers", "max_layers"})
      require(s, k, &json::is_number_integer, "spec");
    require(s, "seed", &json::is_number_unsigned, "spec");
    if (require(s, "focus_range", &json::is_object, "spec"))
      for (const char* k : {"lo", "hi", "step"}) require(s.at("focus_range"), k, &json::is_number, "focus_range");
    if (require(s, "noise_sigma_range", &json::is_array, "spec") && s.at("noise_sigma_range").size() != 2)
      problems.push_back("spec: noise_sigma_range must have two entries");
  }
  if (require(j, "splits", &json::is_object, "dataset")) {
    for (const char* k : {"train", "val", "test"}) {
      if (!require(j.at("splits"), k, &json::is_array, "splits")) continue;
      for (const auto& n : j.at("splits").at(k))
        if (!n.is_string()) problems.push_back(std::string("splits.") + k + ": entries must be strings");
    }
    if (problems.empty()) {
      const json& s = j.at("spec");
      if (j.at("splits").at("train").size() != s.at("n_train").get<std::size_t>() ||
          j.at("splits").at("val").size() != s.at("n_val").get<std::size_t>() ||
          j.at("splits").at("test").size() != s.at("n_test").get<std::size_t>())
        problems.push_back("splits: sizes disagree with spec");
    }
  }
  if (require(j, "stored_views", &json::is_array, "dataset"))
    for (const auto& v : j.at("stored_views"))
      if (!v.is_array() || v.size() != 2) problems.push_back("stored_views: entries must be [u, v] pairs");
  if (require(j, "focus_values", &json::is_array, "dataset"))
    for (const auto& v : j.at("focus_values"))
      if (!v.is_number()) problems.push_back("focus_values: entries must be numbers");
  return problems;
}

Dataset load_dataset(const fs::path& root) {
  const fs::path manifest_path = root / "dataset.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("dataset: missing " + manifest_path.string());
  const json j = json::parse(read_file(manifest_path));
  const auto problems = validate_dataset_json(j);
  if (!problems.empty()) throw std::runtime_error("dataset: invalid dataset.json: " + problems.front());

  Dataset ds;
  ds.root = root;
  ds.spec = DatasetSpec::from_json(j.at("spec"));
  for (const char* split : {"train", "val", "test"}) {
    std::vector<SceneRecord>& out = split == std::string("train") ? ds.train
                                    : split == std::string("val") ? ds.val
                                                                  : ds.test;
    for (const auto& n : j.at("splits").at(split)) {
      SceneRecord r;
      r.name = n.get<std::string>();
      r.dir = root / r.name;
      const json ex = json::parse(read_file(r.dir / "example.json"));
      r.seed = ex.at("scene_seed").get<std::uint64_t>();
      r.focus_values = ex.at("focus_pixels").get<std::vector<double>>();
      r.views = load_light_field(r.dir / "views");
      out.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace slf::synth
