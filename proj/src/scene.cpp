#include "slf/synth/scene.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slf::synth {

std::vector<double> SceneParams::default_disparities() {
  std::vector<double> d;
  for (int k = -6; k <= 5; ++k) d.push_back(k * 0.25);
  return d;
}

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

double smooth(double t) { return t * t * (3 - 2 * t); }

// One octave of value noise: a random lattice with spacing `cell`,
// interpolated with smoothstep weights.
void add_value_noise(Plane<double>& out, double cell, double amplitude, std::mt19937_64& rng) {
  const Index h = out.rows();
  const Index w = out.cols();
  const Index gh = static_cast<Index>(std::ceil(h / cell)) + 2;
  const Index gw = static_cast<Index>(std::ceil(w / cell)) + 2;
  Plane<double> lattice(gh, gw);
  for (Index i = 0; i < lattice.size(); ++i) lattice.data()[i] = uniform(rng, -1, 1);
  for (Index y = 0; y < h; ++y) {
    const double gy = y / cell;
    const Index y0 = static_cast<Index>(gy);
    const double ty = smooth(gy - y0);
    for (Index x = 0; x < w; ++x) {
      const double gx = x / cell;
      const Index x0 = static_cast<Index>(gx);
      const double tx = smooth(gx - x0);
      const double top = (1 - tx) * lattice(y0, x0) + tx * lattice(y0, x0 + 1);
      const double bot = (1 - tx) * lattice(y0 + 1, x0) + tx * lattice(y0 + 1, x0 + 1);
      out(y, x) += amplitude * ((1 - ty) * top + ty * bot);
    }
  }
}

struct Color {
  double r, g, b;
};

Color random_color(std::mt19937_64& rng) { return {uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9), uniform(rng, 0.1, 0.9)}; }

void paint(Image& img, Index y, Index x, const Color& c) {
  img[0](y, x) = c.r;
  img[1](y, x) = c.g;
  img[2](y, x) = c.b;
}

void paint_rect(Image& img, double cy, double cx, double hh, double hw, const Color& c) {
  const Index y0 = std::max<Index>(0, static_cast<Index>(std::floor(cy - hh)));
  const Index y1 = std::min<Index>(img.height(), static_cast<Index>(std::ceil(cy + hh)));
  const Index x0 = std::max<Index>(0, static_cast<Index>(std::floor(cx - hw)));
  const Index x1 = std::min<Index>(img.width(), static_cast<Index>(std::ceil(cx + hw)));
  for (Index y = y0; y < y1; ++y)
    for (Index x = x0; x < x1; ++x) paint(img, y, x, c);
}

bool inside_ellipse(double y, double x, double cy, double cx, double ry, double rx) {
  const double a = (y - cy) / ry;
  const double b = (x - cx) / rx;
  return a * a + b * b <= 1.0;
}

void paint_ellipse(Image& img, double cy, double cx, double ry, double rx, const Color& c) {
  for (Index y = 0; y < img.height(); ++y)
    for (Index x = 0; x < img.width(); ++x)
      if (inside_ellipse(y + 0.5, x + 0.5, cy, cx, ry, rx)) paint(img, y, x, c);
}

// A short row of thin strokes, loosely resembling a line of text.
void paint_glyph_row(Image& img, std::mt19937_64& rng) {
  const Color ink = random_color(rng);
  double x = uniform(rng, 0, static_cast<double>(img.width()));
  const double y = uniform(rng, 0, static_cast<double>(img.height()));
  const double glyph_h = uniform(rng, 4, 9);
  const int n = uniform_int(rng, 3, 8);
  for (int k = 0; k < n; ++k) {
    const bool vertical = uniform_int(rng, 0, 2) != 0;
    if (vertical)
      paint_rect(img, y, x, glyph_h / 2, 0.75, ink);
    else
      paint_rect(img, y + uniform(rng, -glyph_h / 2, glyph_h / 2), x + 1.5, 0.75, 2.0, ink);
    x += uniform(rng, 3, 6);
  }
}

}  // namespace

Image make_texture(Index height, Index width, std::mt19937_64& rng) {
  if (height < 1 || width < 1) throw std::invalid_argument("make_texture: empty size");
  Image img(height, width);
  const double base_cell = std::max<double>(8.0, std::min(height, width) / 3.0);
  for (int c = 0; c < 3; ++c) {
    const double center = uniform(rng, 0.3, 0.7);
    double cell = base_cell;
    double amp = 0.22;
    for (int octave = 0; octave < 4; ++octave) {
      add_value_noise(img[c], cell, amp, rng);
      cell /= 2;
      amp /= 2;
    }
    img[c] += center;
  }

  const int shapes = uniform_int(rng, 2, 6);
  for (int k = 0; k < shapes; ++k) {
    const Color col = random_color(rng);
    const double cy = uniform(rng, 0, static_cast<double>(height));
    const double cx = uniform(rng, 0, static_cast<double>(width));
    const double ry = uniform(rng, 3, std::max(4.0, height / 6.0));
    const double rx = uniform(rng, 3, std::max(4.0, width / 6.0));
    if (uniform_int(rng, 0, 1) == 0)
      paint_rect(img, cy, cx, ry, rx, col);
    else
      paint_ellipse(img, cy, cx, ry, rx, col);
  }
  const int glyph_rows = uniform_int(rng, 0, 4);
  for (int k = 0; k < glyph_rows; ++k) paint_glyph_row(img, rng);

  for (auto& c : img.channels) c = c.max(0.1).min(0.9);
  return img;
}

LayeredScene generate_scene(const SceneParams& params, std::uint64_t seed) {
  if (params.min_layers < 1 || params.max_layers < params.min_layers)
    throw std::invalid_argument("generate_scene: invalid layer count range");
  if (static_cast<int>(params.disparities.size()) < params.max_layers)
    throw std::invalid_argument("generate_scene: fewer candidate disparities than layers");
  std::mt19937_64 rng(seed);
  const Index h = params.height;
  const Index w = params.width;

  const int n_layers = uniform_int(rng, params.min_layers, params.max_layers);
  std::vector<double> pool = params.disparities;
  std::shuffle(pool.begin(), pool.end(), rng);
  std::vector<double> disparities(pool.begin(), pool.begin() + n_layers);
  std::sort(disparities.begin(), disparities.end());

  LayeredScene scene;
  scene.height = h;
  scene.width = w;
  scene.seed = seed;
  for (int l = 0; l < n_layers; ++l) {
    Layer layer;
    layer.texture = make_texture(h, w, rng);
    layer.disparity = disparities[static_cast<std::size_t>(l)];
    layer.alpha = Plane<double>::Zero(h, w);
    if (l == 0) {
      layer.alpha.setOnes();
    } else {
      const int blobs = uniform_int(rng, 1, 3);
      for (int b = 0; b < blobs; ++b) {
        const double cy = uniform(rng, 0.15 * h, 0.85 * h);
        const double cx = uniform(rng, 0.15 * w, 0.85 * w);
        const double ry = uniform(rng, 0.08 * h, 0.25 * h);
        const double rx = uniform(rng, 0.08 * w, 0.25 * w);
        const bool ellipse = uniform_int(rng, 0, 1) == 1;
        for (Index y = 0; y < h; ++y)
          for (Index x = 0; x < w; ++x) {
            const bool in = ellipse ? inside_ellipse(y + 0.5, x + 0.5, cy, cx, ry, rx)
                                    : std::abs(y + 0.5 - cy) <= ry && std::abs(x + 0.5 - cx) <= rx;
            if (in) layer.alpha(y, x) = 1.0;
          }
      }
    }
    scene.layers.push_back(std::move(layer));
  }
  return scene;
}

LayeredScene single_layer_scene(Image texture, double disparity) {
  LayeredScene scene;
  scene.height = texture.height();
  scene.width = texture.width();
  Layer layer;
  layer.alpha = Plane<double>::Ones(scene.height, scene.width);
  layer.texture = std::move(texture);
  layer.disparity = disparity;
  scene.layers.push_back(std::move(layer));
  return scene;
}

LayeredScene two_layer_scene(Image back, Image front, Plane<double> front_alpha, double back_disparity,
                             double front_disparity) {
  if (!same_shape(back, front) || front_alpha.rows() != back.height() || front_alpha.cols() != back.width())
    throw std::invalid_argument("two_layer_scene: layer shape mismatch");
  LayeredScene scene = single_layer_scene(std::move(back), back_disparity);
  Layer layer;
  layer.texture = std::move(front);
  layer.alpha = std::move(front_alpha);
  layer.disparity = front_disparity;
  scene.layers.push_back(std::move(layer));
  return scene;
}

Image render_view(const LayeredScene& scene, ViewIndex view, AngularCenter center) {
  if (scene.layers.empty()) throw std::invalid_argument("render_view: scene has no layers");
  const Index h = scene.height;
  const Index w = scene.width;
  Image out(h, w);
  for (const Layer& layer : scene.layers) {
    const Shift s = view_shift(view, center, layer.disparity);
    Image premultiplied = layer.texture;
    for (auto& c : premultiplied.channels) c *= layer.alpha;
    const Image color = shift_image(premultiplied, s.dy, s.dx);
    const Plane<double> a = shift_plane(layer.alpha, s.dy, s.dx);
    for (int c = 0; c < 3; ++c) out[c] = color[c] + (1.0 - a) * out[c];
  }
  clamp01_inplace(out);
  return out;
}

LightField render_views(const LayeredScene& scene, const ApertureMask& mask) {
  LightField lf(mask.grid_rows(), mask.grid_cols(), scene.height, scene.width);
  for (const ViewIndex& vi : mask.views()) lf.set_view(vi, render_view(scene, vi, lf.center()));
  return lf;
}

LightField render_lightfield(const LayeredScene& scene, int grid_rows, int grid_cols) {
  return render_views(scene, dense_mask(grid_rows, grid_cols));
}

RefocusedImage ground_truth_refocus(const LightField& dense, const FocusParameter& focus, int crop_margin) {
  return refocus_shift_average(dense, circular_mask(dense.grid_rows(), dense.grid_cols()), focus, crop_margin);
}

RefocusedImage ground_truth_refocus(const LayeredScene& scene, const FocusParameter& focus, int crop_margin) {
  const ApertureMask mask = circular_mask(kGroundTruthGrid, kGroundTruthGrid);
  return refocus_shift_average(render_views(scene, mask), mask, focus, crop_margin);
}

}  // namespace slf::synth
