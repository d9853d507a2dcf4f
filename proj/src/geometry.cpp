#include "lvic/geometry.hpp"

#include <Eigen/LU>
#include <cmath>
#include <string>

#include "lvic/errors.hpp"

namespace lvic {

SE3Transform SE3Transform::inverse() const {
  SE3Transform inv;
  inv.rotation = rotation.transpose();
  inv.translation = -(inv.rotation * translation);
  return inv;
}

SE3Transform SE3Transform::compose(const SE3Transform& other) const {
  SE3Transform out;
  out.rotation = rotation * other.rotation;
  out.translation = rotation * other.translation + translation;
  return out;
}

bool is_orthonormal(const Eigen::Matrix3d& rotation, double tol) {
  const Eigen::Matrix3d gram = rotation.transpose() * rotation;
  const double err = (gram - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return err <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

Eigen::Vector3d transform_point(const SE3Transform& t, const Eigen::Vector3d& p) {
  return t.rotation * p + t.translation;
}

std::optional<PixelCoord> project(const CameraIntrinsics& k, const Eigen::Vector3d& p_cam) {
  const double z = p_cam.z();
  if (!(z > Z_EPSILON)) {
    return std::nullopt;
  }
  return PixelCoord{k.fx * p_cam.x() / z + k.cx, k.fy * p_cam.y() / z + k.cy};
}

Eigen::Vector3d unproject(const CameraIntrinsics& k, double u, double v, double depth) {
  return {(u - k.cx) / k.fx * depth, (v - k.cy) / k.fy * depth, depth};
}

bool in_bounds(double u, double v, const CameraIntrinsics& k) {
  return u >= 0.0 && u < static_cast<double>(k.width) && v >= 0.0 &&
         v < static_cast<double>(k.height);
}

void validate_rig(const CameraRig& rig, double rotation_tol) {
  for (size_t i = 0; i < rig.cameras.size(); ++i) {
    const Camera& cam = rig.cameras[i];
    const std::string tag = "camera " + std::to_string(cam.id);
    if (cam.id != static_cast<int>(i)) {
      throw CalibrationError("camera ids must be contiguous from 0, got id " +
                             std::to_string(cam.id) + " at position " + std::to_string(i));
    }
    const CameraIntrinsics& k = cam.intrinsics;
    if (k.width <= 0 || k.height <= 0) {
      throw CalibrationError(tag + ": width/height must be positive");
    }
    if (!(k.fx > 0.0) || !(k.fy > 0.0)) {
      throw CalibrationError(tag + ": fx/fy must be positive");
    }
    if (!(k.cx >= 0.0 && k.cx < k.width) || !(k.cy >= 0.0 && k.cy < k.height)) {
      throw CalibrationError(tag + ": principal point outside image");
    }
    if (!is_orthonormal(cam.extrinsics.rotation, rotation_tol)) {
      throw CalibrationError(tag + ": rotation is not orthonormal");
    }
  }
}

}  // namespace lvic
