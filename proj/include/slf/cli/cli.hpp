#pragma once

#include "slf/net/refocusnet.hpp"
#include "slf/synth/dataset.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace slf::cli {

enum ExitCode : int { kSuccess = 0, kUsageError = 1, kRuntimeError = 2 };

/// Entry point of the `slf` binary. Subcommands: gen, render, refocus, train,
/// eval, serve.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Mask names accepted by `refocus --mask`.
ApertureMask mask_by_name(const std::string& name, int grid_rows, int grid_cols, int radius = 2);

/// Classical shift-and-average refocus, cropped.
Image refocus_classical(const LightField& lf, const ApertureMask& mask, double pixels, int crop);
/// Network refocus on the checkpoint's input views, clamped and cropped.
Image refocus_net(const net::RefocusNet<float>& model, const LightField& lf, double pixels, int crop);

enum class Method { net, classical4, dense };
std::string to_string(Method m);
std::optional<Method> method_from_string(const std::string& s);

/// Parses a decimal number without locale dependence; nullopt on trailing garbage.
std::optional<double> parse_number(const std::string& s);

/// Request handling of `serve`, independent of the transport.
class RefocusService {
 public:
  RefocusService(LightField lf, std::optional<net::RefocusNet<float>> model, int crop = kDefaultCropMargin,
                 synth::FocusRange grid = {});

  std::vector<Method> methods() const;
  nlohmann::json meta() const;
  /// PNG bytes; throws std::invalid_argument for off-grid pixels or an
  /// unavailable method.
  std::vector<std::uint8_t> render(double pixels, Method method) const;

 private:
  LightField lf_;
  std::optional<net::RefocusNet<float>> model_;
  int crop_;
  synth::FocusRange grid_;
  bool has_rhombus_ = false;
  bool has_dense_ = false;
};

/// Registers GET /meta, /refocus and /. With an empty `viewer_dir`, / serves a
/// minimal built-in page.
void install_routes(httplib::Server& server, const RefocusService& service, const std::filesystem::path& viewer_dir);

}  // namespace slf::cli
