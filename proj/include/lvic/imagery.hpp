#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace lvic {

// Dense metric depth, one f32 per pixel, row-major. Entries that are
// non-finite or <= 0 are invalid. Value at integer index (row i, col j) sits
// at continuous pixel coordinate (u, v) = (j + 0.5, i + 0.5); all sampling
// math depends on this pixel-center convention.
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // height * width

  float at(int row, int col) const { return values[static_cast<size_t>(row) * width + col]; }
  float& at(int row, int col) { return values[static_cast<size_t>(row) * width + col]; }
};

bool depth_valid(float d);  // finite and > 0

// Strided texture features: d planes of grid_h x grid_w, plane-major. The
// vector at grid cell (r, c) summarizes the stride x stride pixel patch with
// top-left pixel (c * stride, r * stride).
struct FeatureMap {
  int d = 0;
  int stride = 1;
  int grid_h = 0;
  int grid_w = 0;
  std::vector<float> values;  // d * grid_h * grid_w

  float at(int channel, int row, int col) const {
    return values[(static_cast<size_t>(channel) * grid_h + row) * grid_w + col];
  }
  float& at(int channel, int row, int col) {
    return values[(static_cast<size_t>(channel) * grid_h + row) * grid_w + col];
  }
};

// Bilinear interpolation of the four surrounding pixel centers. If any
// contributing pixel is invalid, falls back to the nearest pixel; if that is
// also invalid, returns nullopt. (u, v) must be in bounds for the map;
// out-of-bounds queries throw std::out_of_range.
std::optional<double> sample_depth(const DepthMap& m, double u, double v);

// Nearest-patch lookup: copies the feature column at grid cell
// (floor(v / stride), floor(u / stride)) into `out` (size d). Out-of-bounds
// (u, v) throws std::out_of_range.
void sample_feature(const FeatureMap& m, double u, double v, std::span<float> out);

std::vector<float> sample_feature(const FeatureMap& m, double u, double v);

}  // namespace lvic
