#include "lvic/imagery.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace lvic {

bool depth_valid(float d) { return std::isfinite(d) && d > 0.0f; }

namespace {

void check_bounds(double u, double v, int width, int height, const char* what) {
  if (!(u >= 0.0 && u < width && v >= 0.0 && v < height)) {
    throw std::out_of_range(std::string(what) + ": query (" + std::to_string(u) + ", " +
                            std::to_string(v) + ") outside " + std::to_string(width) + "x" +
                            std::to_string(height));
  }
}

// lerp form keeps constant fields exact: a + t*(b-a) == a when a == b.
double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

std::optional<double> sample_depth(const DepthMap& m, double u, double v) {
  check_bounds(u, v, m.width, m.height, "sample_depth");

  const double x = u - 0.5;
  const double y = v - 0.5;
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const double tx = x - xf;
  const double ty = y - yf;
  const int x0 = std::clamp(static_cast<int>(xf), 0, m.width - 1);
  const int x1 = std::clamp(static_cast<int>(xf) + 1, 0, m.width - 1);
  const int y0 = std::clamp(static_cast<int>(yf), 0, m.height - 1);
  const int y1 = std::clamp(static_cast<int>(yf) + 1, 0, m.height - 1);

  const float v00 = m.at(y0, x0);
  const float v01 = m.at(y0, x1);
  const float v10 = m.at(y1, x0);
  const float v11 = m.at(y1, x1);

  if (depth_valid(v00) && depth_valid(v01) && depth_valid(v10) && depth_valid(v11)) {
    const double top = lerp(v00, v01, tx);
    const double bottom = lerp(v10, v11, tx);
    return lerp(top, bottom, ty);
  }

  // Nearest pixel center to (u, v).
  const int nx = std::clamp(static_cast<int>(std::floor(u)), 0, m.width - 1);
  const int ny = std::clamp(static_cast<int>(std::floor(v)), 0, m.height - 1);
  const float nearest = m.at(ny, nx);
  if (depth_valid(nearest)) {
    return static_cast<double>(nearest);
  }
  return std::nullopt;
}

void sample_feature(const FeatureMap& m, double u, double v, std::span<float> out) {
  check_bounds(u, v, m.grid_w * static_cast<double>(m.stride),
               m.grid_h * static_cast<double>(m.stride), "sample_feature");
  if (static_cast<int>(out.size()) != m.d) {
    throw std::invalid_argument("sample_feature: output span size " +
                                std::to_string(out.size()) + " != d " + std::to_string(m.d));
  }
  const int col = std::min(static_cast<int>(u / m.stride), m.grid_w - 1);
  const int row = std::min(static_cast<int>(v / m.stride), m.grid_h - 1);
  for (int k = 0; k < m.d; ++k) {
    out[k] = m.at(k, row, col);
  }
}

std::vector<float> sample_feature(const FeatureMap& m, double u, double v) {
  std::vector<float> out(static_cast<size_t>(m.d));
  sample_feature(m, u, v, out);
  return out;
}

}  // namespace lvic
