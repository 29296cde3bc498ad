#pragma once

#include "slf/lf/light_field.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace slf::net {

enum class Variant {
  final_net,  ///< view_average(R) + conv3x3(R)
  variant1,   ///< view_average(input) + conv3x3(R)
  variant2,   ///< view_average(R)
  no_skip,    ///< conv3x3 on the last trajectory-A feature map
};

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct NetworkConfig {
  int depth = 7;
  int width = 58;
  int in_channels = 12;
  Variant variant = Variant::final_net;
  InputConfig input_config = InputConfig::four_rhombus;
  int input_radius = 2;

  /// Default topology with channel counts matching `input`.
  static NetworkConfig for_input(InputConfig input, int depth = 7, int width = 58);

  void validate() const;
  /// Depth, width and channel checks only, without the input configuration.
  void validate_topology() const;
  int input_views() const { return in_channels / 3; }
  /// Canonical single-line JSON with sorted keys; embedded in checkpoints.
  std::string canonical_text() const;
  nlohmann::json to_json() const;
  static NetworkConfig from_json(const nlohmann::json& j);

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// Closed-form weight + bias count of the topology.
std::int64_t parameter_count(const NetworkConfig& config);

/// Receptive-field radius of one output pixel, in pixels.
int receptive_radius(const NetworkConfig& config);

}  // namespace slf::net
