#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lvic/geometry.hpp"
#include "lvic/imagery.hpp"
#include "lvic/painter.hpp"

namespace lvic {

struct NoiseLevel {
  double rot_deg = 0.0;
  double trans_m = 0.0;
};

// Synthetic scene knobs. Every output derived from a config is a pure
// function of (config, seed).
struct SceneConfig {
  uint64_t seed = 1;
  int64_t n_points = 50000;
  int channels = 5;  // x, y, z + pass-through extras
  int n_cameras = 6;
  double extent_m = 40.0;         // terrain side length, centered on origin
  int terrain_cells = 3;          // height grid cells per side; 0 = free-space points
  double terrain_amplitude_m = 0.5;
  int occluder_count = 0;         // floating square panels above the terrain
  double occluder_size_m = 3.0;
  int image_width = 1600;
  int image_height = 900;
  int feature_dim = 16;
  int feature_stride = 4;
  std::vector<NoiseLevel> noise_schedule = {{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}, {2.0, 0.0}};
  double exceed_threshold_m = 0.5;
  double min_visible_frac = 0.10;  // per camera, of all points
  int max_rig_retries = 20;
  int threads = 0;
};

// A planar triangle used both as renderable surface and as the analytic
// ground truth the z-buffer is checked against.
struct Triangle {
  Eigen::Vector3d a, b, c;
};

// Ground-truth scene: the depth maps are rendered from the cloud splats plus
// the surface triangles with the ground-truth rig, so painting with zero
// calibration noise leaves |delta_z| at rendering-quantization level.
struct SynthScene {
  PointCloud cloud;
  CameraRig rig;
  std::vector<DepthMap> depth_maps;
  std::vector<FeatureMap> feature_maps;
  std::vector<Triangle> surfaces;   // terrain + occluders
};

// Deterministic in cfg.seed. Re-samples the camera ring (bounded retries)
// until every camera images at least min_visible_frac of the points; throws
// GenerationError when that cannot be met.
SynthScene generate_scene(const SceneConfig& cfg);

// z-buffer render: analytic ray/triangle depth per pixel plus 1-pixel point
// splats, keeping the nearest hit. Pixels nothing covers are -1 (invalid).
DepthMap render_depth_map(const Camera& camera, std::span<const float> points, int point_channels,
                          std::span<const Triangle> surfaces);

// Deterministic position-encoding pattern: channel k at grid (r, c) is
// sin(k + 0.1 r + 0.01 c). Gives texture sampling a closed-form oracle.
FeatureMap make_pattern_feature_map(int d, int stride, int width, int height);

// Composes a rotation of exactly rot_deg about a uniformly random axis and a
// translation of norm exactly trans_m onto t (noise applied on the camera
// side). Result is still a valid rigid transform.
SE3Transform perturb_extrinsics(const SE3Transform& t, double rot_deg, double trans_m,
                                uint64_t seed);

struct ExperimentRow {
  double noise_rot_deg = 0.0;
  double noise_trans_m = 0.0;
  double mean_abs_dz = 0.0;   // over painted points with a valid depth sample
  double exceed_frac = 0.0;   // painted points with |dz| > threshold or no valid depth
  double painted_frac = 0.0;
};

struct ExperimentReport {
  std::vector<ExperimentRow> rows;

  // UTF-8 CSV with header noise_rot_deg,noise_trans_m,mean_abs_dz,exceed_frac,painted_frac.
  std::string to_csv() const;
};

// Paints the scene with ground-truth maps but a perturbed rig, one row per
// noise level. The schedule must have at least two levels and include a
// zero level.
ExperimentReport miscalibration_experiment(const SceneConfig& cfg);

// Same, reusing an already generated scene (saves re-rendering).
ExperimentReport miscalibration_experiment(const SceneConfig& cfg, const SynthScene& scene);

}  // namespace lvic
