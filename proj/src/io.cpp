#include "slf/lf/io.hpp"

#include <json.hpp>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace slf {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint8_t to_byte(double value) {
  const double q = std::floor(std::clamp(value, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(std::clamp(q, 0.0, 255.0));
}

namespace {

void png_append(png_structp png, png_bytep data, png_size_t length) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + length);
}

void png_flush_noop(png_structp) {}

[[noreturn]] void png_fail(png_structp, png_const_charp msg) { throw std::runtime_error(std::string("png: ") + msg); }

void png_warn(png_structp, png_const_charp) {}

Image from_rgb8(const std::vector<std::uint8_t>& pixels, Index h, Index w) {
  Image img(h, w);
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) img[c](y, x) = pixels[static_cast<std::size_t>((y * w + x) * 3 + c)] / 255.0;
  return img;
}

Image decode_with(png_image& image) {
  image.format = PNG_FORMAT_RGB;
  const Index h = image.height;
  const Index w = image.width;
  std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw std::runtime_error("png: " + msg);
  }
  return from_rgb8(pixels, h, w);
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
  if (img.empty()) throw std::invalid_argument("encode_png: empty image");
  const Index h = img.height();
  const Index w = img.width();
  std::vector<std::uint8_t> rows(static_cast<std::size_t>(h * w * 3));
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) rows[static_cast<std::size_t>((y * w + x) * 3 + c)] = to_byte(img[c](y, x));

  std::vector<std::uint8_t> out;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw std::runtime_error("png: cannot create write struct");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw std::runtime_error("png: cannot create info struct");
  }
  try {
    png_set_write_fn(png, &out, png_append, png_flush_noop);
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (Index y = 0; y < h; ++y) png_write_row(png, rows.data() + y * w * 3);
    png_write_end(png, nullptr);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
  png_destroy_write_struct(&png, &info);
  return out;
}

void save_png(const fs::path& path, const Image& img) {
  const auto bytes = encode_png(img);
  write_file(path, std::string(bytes.begin(), bytes.end()));
}

Image load_png(const fs::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw std::runtime_error("png: cannot read " + path.string() + ": " + image.message);
  return decode_with(image);
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw std::runtime_error(std::string("png: cannot decode buffer: ") + image.message);
  return decode_with(image);
}

std::string view_file_name(ViewIndex i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "view_%02d_%02d.png", i.u, i.v);
  return buf;
}

void save_light_field(const fs::path& dir, const LightField& lf) {
  fs::create_directories(dir);
  json views = json::array();
  for (const ViewIndex& vi : lf.present_views()) {
    views.push_back({vi.u, vi.v});
    save_png(dir / view_file_name(vi), lf.view(vi));
  }
  json manifest = {
      {"grid_rows", lf.grid_rows()},
      {"grid_cols", lf.grid_cols()},
      {"height", lf.height()},
      {"width", lf.width()},
      {"color_space", "srgb8"},
      {"view_pattern", "view_{u:02}_{v:02}.png"},
      {"views", views},
  };
  write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

LightField load_light_field(const fs::path& dir) {
  const fs::path manifest_path = dir / "manifest.json";
  if (!fs::exists(manifest_path)) throw std::runtime_error("light field: missing " + manifest_path.string());
  const json m = json::parse(read_file(manifest_path));
  if (m.value("color_space", std::string("srgb8")) != "srgb8")
    throw std::runtime_error("light field: unsupported color space");
  LightField lf(m.at("grid_rows").get<int>(), m.at("grid_cols").get<int>(), m.at("height").get<Index>(),
                m.at("width").get<Index>());
  std::vector<ViewIndex> present;
  if (m.contains("views")) {
    for (const auto& e : m.at("views")) present.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  } else {
    for (int u = 0; u < lf.grid_rows(); ++u)
      for (int v = 0; v < lf.grid_cols(); ++v) present.push_back({u, v});
  }
  for (const ViewIndex& vi : present) lf.set_view(vi, load_png(dir / view_file_name(vi)));
  return lf;
}

void write_file(const fs::path& path, const std::string& contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!f) throw std::runtime_error("write failed: " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace slf
