#include "lvic/synth.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "lvic/errors.hpp"
#include "test_util.hpp"

using namespace lvic;

namespace {

// Small, fast scene used by most tests here.
SceneConfig small_config() {
  SceneConfig cfg;
  cfg.seed = 7;
  cfg.n_points = 4000;
  cfg.channels = 4;
  cfg.n_cameras = 2;
  cfg.extent_m = 20.0;
  cfg.terrain_cells = 3;
  cfg.terrain_amplitude_m = 0.5;
  cfg.image_width = 320;
  cfg.image_height = 180;
  cfg.feature_dim = 4;
  cfg.feature_stride = 4;
  return cfg;
}

Camera axis_camera() {
  Camera cam;
  cam.id = 0;
  cam.intrinsics = {10.0, 10.0, 5.5, 5.5, 11, 11};
  return cam;
}

std::vector<float> xyz(std::initializer_list<Eigen::Vector3d> pts) {
  std::vector<float> out;
  for (const Eigen::Vector3d& p : pts) {
    out.push_back(static_cast<float>(p.x()));
    out.push_back(static_cast<float>(p.y()));
    out.push_back(static_cast<float>(p.z()));
  }
  return out;
}

}  // namespace

TEST(PatternFeatureMap, MatchesClosedForm) {
  const FeatureMap m = make_pattern_feature_map(5, 4, 1600, 900);
  EXPECT_EQ(m.grid_w, 400);
  EXPECT_EQ(m.grid_h, 225);
  EXPECT_EQ(m.values.size(), static_cast<size_t>(5) * 400 * 225);
  for (int k = 0; k < 5; ++k) {
    for (int r : {0, 7, 224}) {
      for (int c : {0, 99, 399}) {
        EXPECT_EQ(m.at(k, r, c), static_cast<float>(std::sin(k + 0.1 * r + 0.01 * c)));
      }
    }
  }
  // Ragged right edge: 10 px at stride 4 still gets a third column.
  EXPECT_EQ(make_pattern_feature_map(1, 4, 10, 8).grid_w, 3);
  EXPECT_THROW(make_pattern_feature_map(0, 4, 16, 16), ConfigError);
  EXPECT_THROW(make_pattern_feature_map(1, 0, 16, 16), ConfigError);
}

TEST(PerturbExtrinsics, ZeroNoiseIsBitExactIdentity) {
  Rng rng(71);
  const SE3Transform t{test::random_rotation(rng), {1.5, -2.0, 0.25}};
  const SE3Transform out = perturb_extrinsics(t, 0.0, 0.0, 99);
  EXPECT_TRUE((out.rotation.array() == t.rotation.array()).all());
  EXPECT_TRUE((out.translation.array() == t.translation.array()).all());
}

TEST(PerturbExtrinsics, StaysRigidOverManyDraws) {
  Rng rng(72);
  const SE3Transform t{test::random_rotation(rng), {0.3, 0.1, -0.7}};
  for (int i = 0; i < 1000; ++i) {
    const SE3Transform out =
        perturb_extrinsics(t, rng.uniform(0.1, 5.0), rng.uniform(0.0, 1.0), rng.next_u64());
    ASSERT_TRUE(is_orthonormal(out.rotation, 1e-9)) << "draw " << i;
    ASSERT_TRUE(out.translation.allFinite());
  }
}

TEST(PerturbExtrinsics, AppliesTheExactRequestedMagnitudes) {
  Rng rng(73);
  const SE3Transform t{test::random_rotation(rng), {2.0, -1.0, 0.5}};
  for (int i = 0; i < 50; ++i) {
    const double deg = rng.uniform(0.1, 10.0);
    const double trans = rng.uniform(0.01, 2.0);
    const SE3Transform out = perturb_extrinsics(t, deg, trans, rng.next_u64());
    const Eigen::Matrix3d noise = out.rotation * t.rotation.transpose();
    const double angle_deg =
        std::acos(std::clamp(0.5 * (noise.trace() - 1.0), -1.0, 1.0)) * 180.0 / std::numbers::pi;
    EXPECT_NEAR(angle_deg, deg, 1e-6);
    EXPECT_NEAR((out.translation - noise * t.translation).norm(), trans, 1e-9);
  }
}

TEST(PerturbExtrinsics, HalfTurnTwiceWithSameSeedComesBack) {
  Rng rng(74);
  const SE3Transform t{test::random_rotation(rng), {1.0, 2.0, 3.0}};
  const uint64_t seed = 4242;
  const SE3Transform once = perturb_extrinsics(t, 180.0, 0.0, seed);
  const SE3Transform twice = perturb_extrinsics(once, 180.0, 0.0, seed);
  EXPECT_LT((twice.rotation - t.rotation).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_LT((twice.translation - t.translation).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(RenderDepthMap, OpticalAxisSplatStoresTheRange) {
  const Camera cam = axis_camera();
  const std::vector<float> pts = xyz({{0.0, 0.0, 7.25}});
  const DepthMap m = render_depth_map(cam, pts, 3, {});
  EXPECT_EQ(m.at(5, 5), 7.25f);
  int invalid = 0;
  for (float v : m.values) {
    invalid += (v == -1.0f);
  }
  EXPECT_EQ(invalid, 11 * 11 - 1);
}

TEST(RenderDepthMap, NearestSplatWinsThePixel) {
  const Camera cam = axis_camera();
  for (const auto& pts :
       {xyz({{0, 0, 5}, {0, 0, 3}}), xyz({{0, 0, 3}, {0, 0, 5}})}) {
    const DepthMap m = render_depth_map(cam, pts, 3, {});
    EXPECT_EQ(m.at(5, 5), 3.0f);
  }
}

TEST(RenderDepthMap, PointsBehindTheCameraAreDropped) {
  const Camera cam = axis_camera();
  const DepthMap m = render_depth_map(cam, xyz({{0, 0, -4}, {0, 0, 0}}), 3, {});
  for (float v : m.values) {
    EXPECT_EQ(v, -1.0f);
  }
}

TEST(RenderDepthMap, TriangleDepthIsTheRayParameter) {
  const Camera cam = axis_camera();
  const std::vector<Triangle> tris = {{{-20, -20, 9}, {20, -20, 9}, {-20, 20, 9}},
                                      {{20, -20, 9}, {20, 20, 9}, {-20, 20, 9}}};
  const DepthMap m = render_depth_map(cam, {}, 3, tris);
  // Center ray is the optical axis: depth exactly the plane height.
  EXPECT_NEAR(m.at(5, 5), 9.0, 1e-6);
  // Off-center pixels still store z-depth (plane z = 9), not euclidean range.
  for (int i = 0; i < 11; ++i) {
    for (int j = 0; j < 11; ++j) {
      ASSERT_NEAR(m.at(i, j), 9.0, 1e-5) << i << "," << j;
    }
  }
}

TEST(RenderDepthMap, SurfacesAndSplatsShareOneZBuffer) {
  const Camera cam = axis_camera();
  const std::vector<Triangle> tris = {{{-20, -20, 4}, {20, -20, 4}, {-20, 20, 4}},
                                      {{20, -20, 4}, {20, 20, 4}, {-20, 20, 4}}};
  // A splat behind the surface loses; one in front wins.
  const DepthMap behind = render_depth_map(cam, xyz({{0, 0, 9}}), 3, tris);
  EXPECT_NEAR(behind.at(5, 5), 4.0, 1e-6);
  const DepthMap front = render_depth_map(cam, xyz({{0, 0, 2}}), 3, tris);
  EXPECT_EQ(front.at(5, 5), 2.0f);
}

TEST(RenderDepthMap, EmptySceneIsAllInvalid) {
  const DepthMap m = render_depth_map(axis_camera(), {}, 3, {});
  for (float v : m.values) {
    EXPECT_EQ(v, -1.0f);
  }
}

TEST(RenderDepthMap, RejectsMalformedPointBuffers) {
  const std::vector<float> pts = {1, 2, 3, 4};
  EXPECT_THROW(render_depth_map(axis_camera(), pts, 3, {}), ConfigError);
  EXPECT_THROW(render_depth_map(axis_camera(), pts, 2, {}), ConfigError);
}

TEST(GenerateScene, DeterministicInSeed) {
  const SceneConfig cfg = small_config();
  const SynthScene a = generate_scene(cfg);
  const SynthScene b = generate_scene(cfg);
  ASSERT_EQ(a.cloud.values, b.cloud.values);
  ASSERT_EQ(a.surfaces.size(), b.surfaces.size());
  ASSERT_EQ(a.rig.cameras.size(), b.rig.cameras.size());
  for (size_t i = 0; i < a.rig.cameras.size(); ++i) {
    EXPECT_TRUE((a.rig.cameras[i].extrinsics.rotation.array() ==
                 b.rig.cameras[i].extrinsics.rotation.array())
                    .all());
    EXPECT_TRUE((a.rig.cameras[i].extrinsics.translation.array() ==
                 b.rig.cameras[i].extrinsics.translation.array())
                    .all());
  }
  for (size_t i = 0; i < a.depth_maps.size(); ++i) {
    EXPECT_EQ(a.depth_maps[i].values, b.depth_maps[i].values);
  }

  SceneConfig other = cfg;
  other.seed = 8;
  EXPECT_NE(generate_scene(other).cloud.values, a.cloud.values);
}

TEST(GenerateScene, HonorsShapeAndBounds) {
  const SceneConfig cfg = small_config();
  const SynthScene scene = generate_scene(cfg);

  ASSERT_EQ(scene.cloud.n, cfg.n_points);
  ASSERT_EQ(scene.cloud.c, cfg.channels);
  ASSERT_EQ(static_cast<int>(scene.rig.cameras.size()), cfg.n_cameras);
  ASSERT_EQ(scene.depth_maps.size(), scene.rig.cameras.size());
  ASSERT_EQ(scene.feature_maps.size(), scene.rig.cameras.size());
  // 3x3 terrain cells, two triangles each.
  EXPECT_EQ(scene.surfaces.size(), 18u);
  for (const DepthMap& dm : scene.depth_maps) {
    EXPECT_EQ(dm.width, cfg.image_width);
    EXPECT_EQ(dm.height, cfg.image_height);
  }
  for (const FeatureMap& fm : scene.feature_maps) {
    EXPECT_EQ(fm.d, cfg.feature_dim);
    EXPECT_EQ(fm.stride, cfg.feature_stride);
  }
  validate_rig(scene.rig);

  for (int64_t i = 0; i < scene.cloud.n; ++i) {
    const auto row = scene.cloud.row(i);
    ASSERT_LE(std::abs(row[0]), 0.5f * static_cast<float>(cfg.extent_m));
    ASSERT_LE(std::abs(row[1]), 0.5f * static_cast<float>(cfg.extent_m));
    ASSERT_LE(std::abs(row[2]), static_cast<float>(cfg.terrain_amplitude_m) * 1.0001f);
    ASSERT_GE(row[3], 0.0f);
    ASSERT_LT(row[3], 1.0f);
  }
}

TEST(GenerateScene, EveryCameraSeesEnoughPoints) {
  const SceneConfig cfg = small_config();
  const SynthScene scene = generate_scene(cfg);
  for (const Camera& cam : scene.rig.cameras) {
    int64_t visible = 0;
    for (int64_t i = 0; i < scene.cloud.n; ++i) {
      const auto row = scene.cloud.row(i);
      const auto px =
          project(cam.intrinsics, transform_point(cam.extrinsics, {row[0], row[1], row[2]}));
      visible += (px && in_bounds(px->u, px->v, cam.intrinsics));
    }
    EXPECT_GE(static_cast<double>(visible) / scene.cloud.n, cfg.min_visible_frac)
        << "camera " << cam.id;
  }
}

// With the true rig, every point's own splat went into the z-buffer, so the
// rendered depth at its pixel can never sit behind the point itself.
TEST(GenerateScene, RenderedDepthNeverExceedsPointDepth) {
  const SceneConfig cfg = small_config();
  const SynthScene scene = generate_scene(cfg);
  for (const Camera& cam : scene.rig.cameras) {
    const DepthMap& dm = scene.depth_maps[cam.id];
    for (int64_t i = 0; i < scene.cloud.n; ++i) {
      const auto row = scene.cloud.row(i);
      const Eigen::Vector3d p_cam = transform_point(cam.extrinsics, {row[0], row[1], row[2]});
      const auto px = project(cam.intrinsics, p_cam);
      if (!px || !in_bounds(px->u, px->v, cam.intrinsics)) {
        continue;
      }
      const float splat = static_cast<float>(p_cam.z());
      const float stored = dm.at(static_cast<int>(px->v), static_cast<int>(px->u));
      ASSERT_NE(stored, -1.0f);
      ASSERT_LE(stored, splat);
    }
  }
}

TEST(GenerateScene, VolumeModeDepthsEqualBruteForceSplatBuffer) {
  SceneConfig cfg = small_config();
  cfg.terrain_cells = 0;  // free-space slab, splats are the only geometry
  const SynthScene scene = generate_scene(cfg);
  ASSERT_TRUE(scene.surfaces.empty());

  for (const Camera& cam : scene.rig.cameras) {
    std::vector<float> buf(static_cast<size_t>(cfg.image_width) * cfg.image_height,
                           std::numeric_limits<float>::infinity());
    for (int64_t i = 0; i < scene.cloud.n; ++i) {
      const auto row = scene.cloud.row(i);
      const Eigen::Vector3d p_cam = transform_point(cam.extrinsics, {row[0], row[1], row[2]});
      const auto px = project(cam.intrinsics, p_cam);
      if (!px || !in_bounds(px->u, px->v, cam.intrinsics)) {
        continue;
      }
      float& cell = buf[static_cast<size_t>(static_cast<int>(px->v)) * cfg.image_width +
                        static_cast<int>(px->u)];
      cell = std::min(cell, static_cast<float>(p_cam.z()));
    }
    const DepthMap& dm = scene.depth_maps[cam.id];
    for (size_t i = 0; i < buf.size(); ++i) {
      const float want = std::isinf(buf[i]) ? -1.0f : buf[i];
      ASSERT_EQ(dm.values[i], want) << "camera " << cam.id << " pixel " << i;
    }
  }
}

TEST(GenerateScene, OccludersCutIntoTheDepthMaps) {
  SceneConfig cfg = small_config();
  const SynthScene plain = generate_scene(cfg);
  cfg.occluder_count = 4;
  const SynthScene occluded = generate_scene(cfg);
  ASSERT_EQ(occluded.surfaces.size(), plain.surfaces.size() + 8);

  // Terrain z stays within +-amplitude but occluders float well above it, so
  // an occluder hit is any valid pixel whose world-space height clears the
  // terrain band. At least some pixels must see one.
  int64_t differing = 0;
  for (const Camera& cam : occluded.rig.cameras) {
    const DepthMap& dm = occluded.depth_maps[cam.id];
    for (int i = 0; i < dm.height; ++i) {
      for (int j = 0; j < dm.width; ++j) {
        const float z = dm.at(i, j);
        if (z <= 0.0f) {
          continue;
        }
        const Eigen::Vector3d p_world =
            transform_point(cam.extrinsics.inverse(),
                            unproject(cam.intrinsics, j + 0.5, i + 0.5, z));
        if (p_world.z() > cfg.terrain_amplitude_m + 0.1) {
          ++differing;
        }
      }
    }
  }
  EXPECT_GT(differing, 0);
}

TEST(GenerateScene, ImpossibleVisibilityTargetThrows) {
  SceneConfig cfg = small_config();
  cfg.min_visible_frac = 1.0;
  cfg.max_rig_retries = 2;
  try {
    generate_scene(cfg);
    FAIL() << "expected GenerationError";
  } catch (const GenerationError& e) {
    EXPECT_NE(std::string(e.what()).find("camera placement"), std::string::npos);
  }
}

TEST(GenerateScene, RejectsBadConfigs) {
  const auto expect_bad = [](auto mutate) {
    SceneConfig cfg = small_config();
    mutate(cfg);
    EXPECT_THROW(generate_scene(cfg), ConfigError);
  };
  expect_bad([](SceneConfig& c) { c.n_points = 0; });
  expect_bad([](SceneConfig& c) { c.channels = 2; });
  expect_bad([](SceneConfig& c) { c.n_cameras = 0; });
  expect_bad([](SceneConfig& c) { c.extent_m = 0.0; });
  expect_bad([](SceneConfig& c) { c.terrain_cells = -1; });
  expect_bad([](SceneConfig& c) { c.image_width = 1; });
  expect_bad([](SceneConfig& c) { c.feature_dim = 0; });
  expect_bad([](SceneConfig& c) { c.feature_stride = 0; });
  expect_bad([](SceneConfig& c) { c.max_rig_retries = 0; });
  expect_bad([](SceneConfig& c) { c.exceed_threshold_m = 0.0; });
  expect_bad([](SceneConfig& c) { c.min_visible_frac = 1.5; });
}

TEST(Experiment, RowsFollowTheScheduleAndCsvIsWellFormed) {
  SceneConfig cfg = small_config();
  cfg.noise_schedule = {{0.0, 0.0}, {0.5, 0.0}, {2.0, 0.0}};
  const ExperimentReport report = miscalibration_experiment(cfg);

  ASSERT_EQ(report.rows.size(), 3u);
  for (size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(report.rows[i].noise_rot_deg, cfg.noise_schedule[i].rot_deg);
    EXPECT_EQ(report.rows[i].noise_trans_m, cfg.noise_schedule[i].trans_m);
    EXPECT_GT(report.rows[i].painted_frac, 0.0);
    EXPECT_LE(report.rows[i].painted_frac, 1.0);
  }
  // The calibrated baseline is quantization-level; gross noise is not.
  EXPECT_LT(report.rows[0].mean_abs_dz, 0.02);
  EXPECT_LT(report.rows[0].mean_abs_dz, report.rows[2].mean_abs_dz);
  EXPECT_LT(report.rows[0].exceed_frac, 0.05);

  const std::string csv = report.to_csv();
  const std::string header = "noise_rot_deg,noise_trans_m,mean_abs_dz,exceed_frac,painted_frac\n";
  ASSERT_EQ(csv.substr(0, header.size()), header);
  int lines = 0;
  for (char ch : csv) {
    lines += (ch == '\n');
  }
  EXPECT_EQ(lines, 4);
}

TEST(Experiment, SharedSceneOverloadMatchesFreshRun) {
  SceneConfig cfg = small_config();
  cfg.n_points = 1500;
  cfg.noise_schedule = {{0.0, 0.0}, {1.0, 0.05}};
  const ExperimentReport fresh = miscalibration_experiment(cfg);
  const ExperimentReport reused = miscalibration_experiment(cfg, generate_scene(cfg));
  ASSERT_EQ(fresh.rows.size(), reused.rows.size());
  for (size_t i = 0; i < fresh.rows.size(); ++i) {
    EXPECT_EQ(fresh.rows[i].mean_abs_dz, reused.rows[i].mean_abs_dz);
    EXPECT_EQ(fresh.rows[i].exceed_frac, reused.rows[i].exceed_frac);
    EXPECT_EQ(fresh.rows[i].painted_frac, reused.rows[i].painted_frac);
  }
}

TEST(Experiment, RejectsDegenerateSchedules) {
  SceneConfig cfg = small_config();
  cfg.n_points = 100;
  cfg.noise_schedule = {{0.0, 0.0}};
  EXPECT_THROW(miscalibration_experiment(cfg), ConfigError);
  cfg.noise_schedule = {{0.5, 0.0}, {1.0, 0.0}};
  EXPECT_THROW(miscalibration_experiment(cfg), ConfigError);
}
