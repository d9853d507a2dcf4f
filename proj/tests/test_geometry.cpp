#include "lvic/geometry.hpp"

#include <Eigen/Geometry>
#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "lvic/errors.hpp"
#include "test_util.hpp"

using namespace lvic;

namespace {

CameraIntrinsics basic_intrinsics() {
  CameraIntrinsics k;
  k.fx = 1000.0;
  k.fy = 1000.0;
  k.cx = 800.0;
  k.cy = 450.0;
  k.width = 1600;
  k.height = 900;
  return k;
}

}  // namespace

TEST(SE3Transform, QuarterTurnAboutZ) {
  SE3Transform t;
  t.rotation = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d q = transform_point(t, {1.0, 0.0, 0.0});
  EXPECT_NEAR(q.x(), 0.0, 1e-15);
  EXPECT_NEAR(q.y(), 1.0, 1e-15);
  EXPECT_NEAR(q.z(), 0.0, 1e-15);
}

TEST(SE3Transform, InverseUndoesTransform) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    SE3Transform t;
    t.rotation = test::random_rotation(rng);
    t.translation = 5.0 * test::random_unit(rng);
    const SE3Transform inv = t.inverse();
    const Eigen::Vector3d p = 20.0 * test::random_unit(rng);
    EXPECT_LT((transform_point(inv, transform_point(t, p)) - p).norm(), 1e-12);
  }
}

TEST(SE3Transform, ComposeAppliesRightThenLeft) {
  Rng rng(12);
  SE3Transform a, b;
  a.rotation = test::random_rotation(rng);
  a.translation = test::random_unit(rng);
  b.rotation = test::random_rotation(rng);
  b.translation = 3.0 * test::random_unit(rng);
  const Eigen::Vector3d p = 7.0 * test::random_unit(rng);
  const Eigen::Vector3d direct = transform_point(a, transform_point(b, p));
  EXPECT_LT((transform_point(a.compose(b), p) - direct).norm(), 1e-12);
}

TEST(Orthonormality, AcceptsRotationsRejectsEverythingElse) {
  Rng rng(13);
  EXPECT_TRUE(is_orthonormal(Eigen::Matrix3d::Identity(), 1e-12));
  EXPECT_TRUE(is_orthonormal(test::random_rotation(rng), 1e-9));
  EXPECT_FALSE(is_orthonormal(2.0 * Eigen::Matrix3d::Identity(), 1e-9));
  Eigen::Matrix3d reflection = Eigen::Matrix3d::Identity();
  reflection(2, 2) = -1.0;  // orthogonal but det -1
  EXPECT_FALSE(is_orthonormal(reflection, 1e-9));
  Eigen::Matrix3d sheared = test::random_rotation(rng);
  sheared(0, 1) += 1e-3;
  EXPECT_FALSE(is_orthonormal(sheared, 1e-6));
}

TEST(Projection, KnownPinholeValues) {
  const CameraIntrinsics k = basic_intrinsics();
  const auto px = project(k, {1.0, 0.0, 10.0});
  ASSERT_TRUE(px.has_value());
  EXPECT_DOUBLE_EQ(px->u, 900.0);
  EXPECT_DOUBLE_EQ(px->v, 450.0);
}

TEST(Projection, BehindCameraYieldsNothing) {
  const CameraIntrinsics k = basic_intrinsics();
  EXPECT_FALSE(project(k, {0.0, 0.0, 0.0}).has_value());
  EXPECT_FALSE(project(k, {1.0, 1.0, -5.0}).has_value());
  EXPECT_FALSE(project(k, {0.0, 0.0, Z_EPSILON}).has_value());
  EXPECT_TRUE(project(k, {0.0, 0.0, 1e-5}).has_value());
}

TEST(Projection, UnprojectInverts) {
  Rng rng(14);
  const CameraIntrinsics k = basic_intrinsics();
  for (int trial = 0; trial < 100; ++trial) {
    const double z = rng.uniform(0.1, 100.0);
    const Eigen::Vector3d p(rng.uniform(-0.6, 0.6) * z, rng.uniform(-0.4, 0.4) * z, z);
    const auto px = project(k, p);
    ASSERT_TRUE(px.has_value());
    EXPECT_LT((unproject(k, px->u, px->v, z) - p).norm(), 1e-10);
  }
}

// Independent check against the 3x4 homogeneous projection matrix
// K [R | t] applied to (x, y, z, 1) with a final perspective divide.
TEST(Projection, MatchesHomogeneousMatrixOracle) {
  Rng rng(15);
  for (int trial = 0; trial < 500; ++trial) {
    const Camera cam = test::random_camera(rng, 0, 1920, 1080);
    Eigen::Matrix3d K = Eigen::Matrix3d::Zero();
    K(0, 0) = cam.intrinsics.fx;
    K(1, 1) = cam.intrinsics.fy;
    K(0, 2) = cam.intrinsics.cx;
    K(1, 2) = cam.intrinsics.cy;
    K(2, 2) = 1.0;
    Eigen::Matrix<double, 3, 4> Rt;
    Rt.leftCols<3>() = cam.extrinsics.rotation;
    Rt.col(3) = cam.extrinsics.translation;
    const Eigen::Matrix<double, 3, 4> P = K * Rt;

    // Sample a point guaranteed in front of the lens.
    const double z = rng.uniform(0.5, 120.0);
    const Eigen::Vector3d p_cam(rng.uniform(-0.5, 0.5) * z, rng.uniform(-0.5, 0.5) * z, z);
    const Eigen::Vector3d p_lidar = transform_point(cam.extrinsics.inverse(), p_cam);

    const Eigen::Vector4d h(p_lidar.x(), p_lidar.y(), p_lidar.z(), 1.0);
    const Eigen::Vector3d uvw = P * h;
    const auto px = project(cam.intrinsics, transform_point(cam.extrinsics, p_lidar));
    ASSERT_TRUE(px.has_value());
    EXPECT_NEAR(px->u, uvw.x() / uvw.z(), 1e-9);
    EXPECT_NEAR(px->v, uvw.y() / uvw.z(), 1e-9);
  }
}

TEST(Bounds, HalfOpenImageRectangle) {
  const CameraIntrinsics k = basic_intrinsics();
  EXPECT_TRUE(in_bounds(0.0, 0.0, k));
  EXPECT_TRUE(in_bounds(1599.999, 899.999, k));
  EXPECT_FALSE(in_bounds(1600.0, 100.0, k));
  EXPECT_FALSE(in_bounds(100.0, 900.0, k));
  EXPECT_FALSE(in_bounds(-1e-9, 100.0, k));
}

TEST(RigValidation, AcceptsWellFormedRig) {
  Rng rng(16);
  const CameraRig rig = test::random_rig(rng, 4, 640, 480);
  EXPECT_NO_THROW(validate_rig(rig));
}

TEST(RigValidation, RejectsBrokenRigs) {
  Rng rng(17);
  CameraRig rig = test::random_rig(rng, 2, 640, 480);

  CameraRig gap = rig;
  gap.cameras[1].id = 2;
  EXPECT_THROW(validate_rig(gap), CalibrationError);

  CameraRig bad_rot = rig;
  bad_rot.cameras[0].extrinsics.rotation *= 1.001;
  EXPECT_THROW(validate_rig(bad_rot), CalibrationError);

  CameraRig bad_fx = rig;
  bad_fx.cameras[1].intrinsics.fx = 0.0;
  EXPECT_THROW(validate_rig(bad_fx), CalibrationError);

  CameraRig bad_pp = rig;
  bad_pp.cameras[0].intrinsics.cx = 9999.0;
  EXPECT_THROW(validate_rig(bad_pp), CalibrationError);
}

TEST(RigValidation, RotationToleranceIsCallerChoice) {
  Rng rng(18);
  CameraRig rig = test::random_rig(rng, 1, 640, 480);
  rig.cameras[0].extrinsics.rotation(0, 1) += 1e-8;
  EXPECT_THROW(validate_rig(rig, 1e-9), CalibrationError);
  EXPECT_NO_THROW(validate_rig(rig, 1e-6));
}
