#pragma once

#include "slf/lf/light_field.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace slf {

/// Quantizes [0,1] to 8 bits, rounding half up.
std::uint8_t to_byte(double value);

/// 8-bit RGB PNG, no interlace, fixed compression settings so equal images
/// always encode to equal bytes.
std::vector<std::uint8_t> encode_png(const Image& img);
void save_png(const std::filesystem::path& path, const Image& img);
/// Any PNG libpng can read, converted to RGB and scaled by 1/255.
Image load_png(const std::filesystem::path& path);
Image decode_png(const std::vector<std::uint8_t>& bytes);

/// File name of a view inside a container: view_{u:02}_{v:02}.png.
std::string view_file_name(ViewIndex i);

/// Light field container: `manifest.json` plus one PNG per present view.
void save_light_field(const std::filesystem::path& dir, const LightField& lf);
LightField load_light_field(const std::filesystem::path& dir);

/// Writes bytes to a file, creating parent directories.
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string read_file(const std::filesystem::path& path);

}  // namespace slf
