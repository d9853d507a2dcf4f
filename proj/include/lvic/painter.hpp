#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "lvic/geometry.hpp"
#include "lvic/imagery.hpp"

namespace lvic {

// Raw LiDAR sweep: n points x c channels, row-major f32. Channels 0..2 are
// x, y, z in meters in the LiDAR frame; any further channels (intensity,
// ring index, ...) are carried through untouched.
struct PointCloud {
  int64_t n = 0;
  int c = 0;
  std::vector<float> values;  // n * c

  std::span<const float> row(int64_t i) const {
    return {values.data() + i * c, static_cast<size_t>(c)};
  }
};

// Painted channel block layout appended to each point:
//   [u, v, z_c, delta_z, texture_0 .. texture_{d-1}]
// so the painted cloud has c + 3 + 1 + d channels in total.
struct PaintLayout {
  int d = 0;

  int total_painted() const { return 4 + d; }

  static constexpr int U = 0;
  static constexpr int V = 1;
  static constexpr int Z_C = 2;
  static constexpr int DELTA_Z = 3;
  static constexpr int TEXTURE = 4;
};

// Sentinel for every painted channel of a point no camera could image.
inline constexpr float UNPAINTED = -1.0f;

struct PaintedCloud {
  int64_t n = 0;
  int c = 0;
  int d = 0;
  std::vector<float> values;           // n * (c + 4 + d)
  std::vector<int32_t> camera_ids;     // -1 where unpainted

  int channels() const { return c + 4 + d; }
  std::span<const float> row(int64_t i) const {
    return {values.data() + i * channels(), static_cast<size_t>(channels())};
  }
};

// Signed depth-discrepancy confidence cue: positive means the LiDAR point is
// farther than the visually estimated surface at its pixel (occluded or
// mismatched).
double depth_discrepancy(double z_lidar, double z_camera);

// One camera in which a point images: its pixel, the point's depth along
// that camera's z-axis, the sampled visual depth (nullopt when invalid), and
// the camera's principal point for the no-depth fallback.
struct CameraCandidate {
  int camera_id = 0;
  double u = 0.0;
  double v = 0.0;
  double z_lidar = 0.0;
  std::optional<double> z_camera;
  double cx = 0.0;
  double cy = 0.0;
};

// Among candidates with a valid visual depth, pick minimal |z_lidar -
// z_camera|; if none has one, pick minimal squared pixel distance to the
// principal point. Ties break to the lowest camera_id. candidates must be
// non-empty and sorted by camera_id.
int choose_camera(std::span<const CameraCandidate> candidates);

struct PaintedBlock {
  std::vector<float> values;        // 4 + d painted channels
  std::optional<int> camera_id;
};

// Paints a single LiDAR-frame point: project into every camera, keep the
// candidates that land in bounds in front of the lens, pick a winner and
// sample its depth and texture. No candidate at all yields an all -1 block.
// A winner whose depth pixel is invalid keeps (u, v) and texture but gets
// z_c = -1 and delta_z = -1.
PaintedBlock paint_point(const Eigen::Vector3d& p, const CameraRig& rig,
                         std::span<const DepthMap> depths, std::span<const FeatureMap> feats,
                         const PaintLayout& layout);

// Full-cloud painting. Row i of the output is the original c channels of
// point i followed by its painted block. Degenerate points never fail; they
// become padded rows. Throws ConfigError before touching any point when the
// rig, maps and layout disagree.
//
// Work may be partitioned across `threads` workers (0 = hardware
// concurrency); each output row is written by exactly one worker and the
// result is bit-identical for every thread count.
PaintedCloud paint_cloud(const PointCloud& cloud, const CameraRig& rig,
                         std::span<const DepthMap> depths, std::span<const FeatureMap> feats,
                         const PaintLayout& layout, int threads = 0);

}  // namespace lvic
