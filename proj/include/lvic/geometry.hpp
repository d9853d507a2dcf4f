#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

namespace lvic {

// Points at or behind this camera-plane depth cannot image.
inline constexpr double Z_EPSILON = 1e-6;

// Rigid transform p_out = R * p_in + t.
//
// Used throughout as the LiDAR-frame -> camera-frame extrinsics. All math is
// double precision; immutable value type, safe to share across threads.
struct SE3Transform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  // Inverse transform: p = R^T * (q - t).
  SE3Transform inverse() const;

  // Composition: (a.compose(b))(p) == a(b(p)).
  SE3Transform compose(const SE3Transform& other) const;
};

// max(|R^T R - I|) and |det(R) - 1| both within `tol`.
bool is_orthonormal(const Eigen::Matrix3d& rotation, double tol);

Eigen::Vector3d transform_point(const SE3Transform& t, const Eigen::Vector3d& p);

// Pinhole parameters. Camera frame is z-forward, x-right, y-down; pixel
// origin at the top-left corner, u along width.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
};

struct PixelCoord {
  double u = 0.0;
  double v = 0.0;
};

// Perspective projection of a camera-frame point. Returns nullopt
// (BehindCamera) when z <= Z_EPSILON; that is a value, not a fault.
std::optional<PixelCoord> project(const CameraIntrinsics& k, const Eigen::Vector3d& p_cam);

// Ray through pixel (u, v) evaluated at camera depth z.
Eigen::Vector3d unproject(const CameraIntrinsics& k, double u, double v, double depth);

// true iff 0 <= u < width and 0 <= v < height.
bool in_bounds(double u, double v, const CameraIntrinsics& k);

struct Camera {
  int id = 0;
  CameraIntrinsics intrinsics;
  SE3Transform extrinsics;  // LiDAR frame -> camera frame
};

// Ordered multi-camera container; ids must be unique and contiguous from 0.
struct CameraRig {
  std::vector<Camera> cameras;
};

// Throws CalibrationError on invariant violations: non-contiguous ids,
// non-orthonormal rotations (at `rotation_tol`), or bad intrinsics.
void validate_rig(const CameraRig& rig, double rotation_tol = 1e-9);

}  // namespace lvic
