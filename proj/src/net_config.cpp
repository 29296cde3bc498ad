#include "slf/net/config.hpp"

#include <stdexcept>

namespace slf::net {

using nlohmann::json;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::final_net: return "final";
    case Variant::variant1: return "variant1";
    case Variant::variant2: return "variant2";
    case Variant::no_skip: return "no_skip";
  }
  throw std::invalid_argument("unknown variant");
}

Variant variant_from_string(const std::string& s) {
  if (s == "final") return Variant::final_net;
  if (s == "variant1") return Variant::variant1;
  if (s == "variant2") return Variant::variant2;
  if (s == "no_skip") return Variant::no_skip;
  throw std::invalid_argument("unknown network variant '" + s + "'");
}

NetworkConfig NetworkConfig::for_input(InputConfig input, int depth, int width) {
  NetworkConfig c;
  c.depth = depth;
  c.width = width;
  c.input_config = input;
  c.in_channels = 3 * view_count(input);
  return c;
}

void NetworkConfig::validate_topology() const {
  if (depth < 1) throw std::invalid_argument("network: depth must be at least 1");
  if (width < 1) throw std::invalid_argument("network: width must be at least 1");
  if (in_channels < 3 || in_channels % 3 != 0) throw std::invalid_argument("network: in_channels must be 3 x views");
}

void NetworkConfig::validate() const {
  validate_topology();
  if (in_channels != 3 * view_count(input_config))
    throw std::invalid_argument("network: in_channels does not match input configuration " +
                                slf::to_string(input_config));
  if (input_radius < 1) throw std::invalid_argument("network: input radius must be positive");
}

json NetworkConfig::to_json() const {
  return {
      {"depth", depth},
      {"width", width},
      {"in_channels", in_channels},
      {"variant", to_string(variant)},
      {"input_config", slf::to_string(input_config)},
      {"input_radius", input_radius},
  };
}

std::string NetworkConfig::canonical_text() const { return to_json().dump(); }

NetworkConfig NetworkConfig::from_json(const json& j) {
  NetworkConfig c;
  c.depth = j.at("depth").get<int>();
  c.width = j.at("width").get<int>();
  c.in_channels = j.at("in_channels").get<int>();
  c.variant = variant_from_string(j.at("variant").get<std::string>());
  c.input_config = input_config_from_string(j.at("input_config").get<std::string>());
  c.input_radius = j.value("input_radius", 2);
  c.validate();
  return c;
}

std::int64_t parameter_count(const NetworkConfig& c) {
  c.validate_topology();
  auto conv = [](std::int64_t in, std::int64_t out) { return in * out * 9 + out; };
  const std::int64_t w = c.width, in = c.in_channels;
  std::int64_t n = conv(in, w) + (c.depth - 1) * conv(w, w);
  if (c.variant == Variant::no_skip) return n + conv(w, 3);
  n += c.depth * conv(w, in);
  if (c.variant != Variant::variant2) n += conv(in, 3);
  return n;
}

int receptive_radius(const NetworkConfig& c) {
  // trajectory A, then the residual conv and/or the head conv
  switch (c.variant) {
    case Variant::final_net:
    case Variant::variant1: return c.depth + 2;
    case Variant::variant2:
    case Variant::no_skip: return c.depth + 1;
  }
  return c.depth + 2;
}

}  // namespace slf::net
