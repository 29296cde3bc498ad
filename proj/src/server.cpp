#include "slf/cli/cli.hpp"
#include "slf/lf/io.hpp"

#include <httplib.h>

#include <charconv>
#include <stdexcept>

namespace slf::cli {

namespace {

const char* const kIndexPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>slf</title></head>
<body>
<h1>slf refocus server</h1>
<ul>
<li><a href="/meta">/meta</a></li>
<li><a href="/refocus?pixels=0.00&amp;method=classical4">/refocus?pixels=0.00&amp;method=classical4</a></li>
</ul>
</body></html>
)";

bool has_views(const LightField& lf, const ApertureMask& mask) {
  for (const ViewIndex& v : mask.views())
    if (!lf.has_view(v)) return false;
  return true;
}

void bad_request(httplib::Response& res, const std::string& message) {
  res.status = 400;
  res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

}  // namespace

std::string to_string(Method m) {
  switch (m) {
    case Method::net: return "net";
    case Method::classical4: return "classical4";
    case Method::dense: return "dense";
  }
  throw std::invalid_argument("unknown method");
}

std::optional<Method> method_from_string(const std::string& s) {
  for (Method m : {Method::net, Method::classical4, Method::dense})
    if (to_string(m) == s) return m;
  return std::nullopt;
}

std::optional<double> parse_number(const std::string& s) {
  const char* begin = s.data();
  const char* end = begin + s.size();
  if (begin != end && *begin == '+') ++begin;
  double v = 0;
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || begin == end) return std::nullopt;
  return v;
}

RefocusService::RefocusService(LightField lf, std::optional<net::RefocusNet<float>> model, int crop,
                               synth::FocusRange grid)
    : lf_(std::move(lf)), model_(std::move(model)), crop_(crop), grid_(grid) {
  grid_.validate();
  if (crop_ < 0 || 2 * crop_ >= lf_.height() || 2 * crop_ >= lf_.width())
    throw std::invalid_argument("serve: crop margin too large for the light field");
  const int rows = lf_.grid_rows(), cols = lf_.grid_cols();
  try {
    has_rhombus_ = has_views(lf_, input_view_selection(InputConfig::four_rhombus, rows, cols));
  } catch (const std::invalid_argument&) {
    has_rhombus_ = false;
  }
  try {
    has_dense_ = has_views(lf_, circular_mask(rows, cols));
  } catch (const std::invalid_argument&) {
    has_dense_ = false;
  }
  if (model_) {
    const net::NetworkConfig& c = model_->config();
    if (!has_views(lf_, input_view_selection(c.input_config, rows, cols, c.input_radius)))
      throw std::invalid_argument("serve: light field lacks the views the checkpoint expects");
  }
}

std::vector<Method> RefocusService::methods() const {
  std::vector<Method> out;
  if (model_) out.push_back(Method::net);
  if (has_rhombus_) out.push_back(Method::classical4);
  if (has_dense_) out.push_back(Method::dense);
  return out;
}

nlohmann::json RefocusService::meta() const {
  nlohmann::json methods = nlohmann::json::array();
  for (Method m : this->methods()) methods.push_back(to_string(m));
  return {{"focus_min", grid_.lo},
          {"focus_max", grid_.hi},
          {"focus_step", grid_.step},
          {"focus_excluded", {1.0}},
          {"width", lf_.width() - 2 * crop_},
          {"height", lf_.height() - 2 * crop_},
          {"crop", crop_},
          {"methods", methods}};
}

std::vector<std::uint8_t> RefocusService::render(double pixels, Method method) const {
  const int k = grid_.index_of(pixels);
  if (k < 0) throw std::invalid_argument("pixels " + std::to_string(pixels) + " is not on the focus grid");
  const double p = grid_.values()[static_cast<std::size_t>(k)];
  const int rows = lf_.grid_rows(), cols = lf_.grid_cols();
  switch (method) {
    case Method::net:
      if (!model_) throw std::invalid_argument("method net needs a checkpoint");
      return encode_png(refocus_net(*model_, lf_, p, crop_));
    case Method::classical4:
      if (!has_rhombus_) throw std::invalid_argument("light field lacks the rhombus views");
      return encode_png(refocus_classical(lf_, input_view_selection(InputConfig::four_rhombus, rows, cols), p, crop_));
    case Method::dense:
      if (!has_dense_) throw std::invalid_argument("dense light field not available");
      return encode_png(refocus_classical(lf_, circular_mask(rows, cols), p, crop_));
  }
  throw std::invalid_argument("unknown method");
}

void install_routes(httplib::Server& server, const RefocusService& service, const std::filesystem::path& viewer_dir) {
  server.Get("/meta", [&service](const httplib::Request&, httplib::Response& res) {
    res.set_content(service.meta().dump(), "application/json");
  });

  server.Get("/refocus", [&service](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("pixels")) return bad_request(res, "missing parameter: pixels");
    const std::optional<double> pixels = parse_number(req.get_param_value("pixels"));
    if (!pixels) return bad_request(res, "pixels is not a number");
    const std::string name = req.has_param("method") ? req.get_param_value("method") : "net";
    const std::optional<Method> method = method_from_string(name);
    if (!method) return bad_request(res, "unknown method: " + name);
    try {
      const std::vector<std::uint8_t> png = service.render(*pixels, *method);
      res.set_header("Cache-Control", "public, max-age=86400");
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const std::invalid_argument& e) {
      bad_request(res, e.what());
    } catch (const std::domain_error& e) {
      bad_request(res, e.what());
    }
  });

  if (!viewer_dir.empty()) {
    if (!server.set_mount_point("/", viewer_dir.string()))
      throw std::runtime_error("serve: viewer directory not found: " + viewer_dir.string());
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kIndexPage, "text/html; charset=utf-8");
    });
  }
}

}  // namespace slf::cli
