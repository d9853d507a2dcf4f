#include "lvic/painter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lvic/errors.hpp"
#include "lvic/parallel.hpp"

namespace lvic {

double depth_discrepancy(double z_lidar, double z_camera) { return z_lidar - z_camera; }

int choose_camera(std::span<const CameraCandidate> candidates) {
  int best = -1;
  double best_abs_dz = 0.0;
  for (const CameraCandidate& cand : candidates) {
    if (!cand.z_camera) {
      continue;
    }
    const double abs_dz = std::abs(cand.z_lidar - *cand.z_camera);
    if (best < 0 || abs_dz < best_abs_dz) {
      best = cand.camera_id;
      best_abs_dz = abs_dz;
    }
  }
  if (best >= 0) {
    return best;
  }
  // No candidate has visual depth support: fall back to image centrality.
  double best_dist = 0.0;
  for (const CameraCandidate& cand : candidates) {
    const double du = cand.u - cand.cx;
    const double dv = cand.v - cand.cy;
    const double dist = du * du + dv * dv;
    if (best < 0 || dist < best_dist) {
      best = cand.camera_id;
      best_dist = dist;
    }
  }
  return best;
}

namespace {

// Writes the 4 + d painted channels for one point. Shared by paint_point and
// paint_cloud so both produce identical bits.
void paint_point_into(const Eigen::Vector3d& p, const CameraRig& rig,
                      std::span<const DepthMap> depths, std::span<const FeatureMap> feats,
                      const PaintLayout& layout, std::span<float> out, int32_t& camera_id) {
  CameraCandidate stack[8];
  std::vector<CameraCandidate> heap;
  const size_t n_cams = rig.cameras.size();
  CameraCandidate* cands = stack;
  if (n_cams > 8) {
    heap.resize(n_cams);
    cands = heap.data();
  }
  size_t n_cand = 0;

  for (const Camera& cam : rig.cameras) {
    const Eigen::Vector3d p_cam = transform_point(cam.extrinsics, p);
    const std::optional<PixelCoord> px = project(cam.intrinsics, p_cam);
    if (!px || !in_bounds(px->u, px->v, cam.intrinsics)) {
      continue;
    }
    CameraCandidate& cand = cands[n_cand++];
    cand.camera_id = cam.id;
    cand.u = px->u;
    cand.v = px->v;
    cand.z_lidar = p_cam.z();
    cand.z_camera = sample_depth(depths[cam.id], px->u, px->v);
    cand.cx = cam.intrinsics.cx;
    cand.cy = cam.intrinsics.cy;
  }

  if (n_cand == 0) {
    std::fill(out.begin(), out.end(), UNPAINTED);
    camera_id = -1;
    return;
  }

  const int winner = choose_camera({cands, n_cand});
  const CameraCandidate* cand = cands;
  while (cand->camera_id != winner) {
    ++cand;
  }

  out[PaintLayout::U] = static_cast<float>(cand->u);
  out[PaintLayout::V] = static_cast<float>(cand->v);
  if (cand->z_camera) {
    out[PaintLayout::Z_C] = static_cast<float>(*cand->z_camera);
    out[PaintLayout::DELTA_Z] =
        static_cast<float>(depth_discrepancy(cand->z_lidar, *cand->z_camera));
  } else {
    out[PaintLayout::Z_C] = UNPAINTED;
    out[PaintLayout::DELTA_Z] = UNPAINTED;
  }
  sample_feature(feats[winner], cand->u, cand->v, out.subspan(PaintLayout::TEXTURE));
  camera_id = winner;
}

void check_config(const CameraRig& rig, std::span<const DepthMap> depths,
                  std::span<const FeatureMap> feats, const PaintLayout& layout) {
  if (layout.d < 0) {
    throw ConfigError("paint: texture dimension must be >= 0, got " + std::to_string(layout.d));
  }
  if (depths.size() != rig.cameras.size() || feats.size() != rig.cameras.size()) {
    throw ConfigError("paint: rig has " + std::to_string(rig.cameras.size()) + " cameras but " +
                      std::to_string(depths.size()) + " depth maps and " +
                      std::to_string(feats.size()) + " feature maps were supplied");
  }
  for (size_t i = 0; i < rig.cameras.size(); ++i) {
    if (rig.cameras[i].id != static_cast<int>(i)) {
      throw ConfigError("paint: camera ids must be contiguous from 0 to align with the maps");
    }
  }
  for (const Camera& cam : rig.cameras) {
    const std::string tag = "camera " + std::to_string(cam.id);
    const DepthMap& dm = depths[cam.id];
    if (dm.width != cam.intrinsics.width || dm.height != cam.intrinsics.height) {
      throw ConfigError("paint: " + tag + " depth map is " + std::to_string(dm.width) + "x" +
                        std::to_string(dm.height) + ", intrinsics say " +
                        std::to_string(cam.intrinsics.width) + "x" +
                        std::to_string(cam.intrinsics.height));
    }
    const FeatureMap& fm = feats[cam.id];
    if (fm.d != layout.d) {
      throw ConfigError("paint: " + tag + " feature map has d=" + std::to_string(fm.d) +
                        ", layout wants d=" + std::to_string(layout.d));
    }
    if (fm.stride < 1) {
      throw ConfigError("paint: " + tag + " feature map stride must be >= 1");
    }
    const int want_gw = (cam.intrinsics.width + fm.stride - 1) / fm.stride;
    const int want_gh = (cam.intrinsics.height + fm.stride - 1) / fm.stride;
    if (fm.grid_w != want_gw || fm.grid_h != want_gh) {
      throw ConfigError("paint: " + tag + " feature grid is " + std::to_string(fm.grid_w) + "x" +
                        std::to_string(fm.grid_h) + ", expected " + std::to_string(want_gw) +
                        "x" + std::to_string(want_gh) + " for stride " +
                        std::to_string(fm.stride));
    }
  }
}

}  // namespace

PaintedBlock paint_point(const Eigen::Vector3d& p, const CameraRig& rig,
                         std::span<const DepthMap> depths, std::span<const FeatureMap> feats,
                         const PaintLayout& layout) {
  check_config(rig, depths, feats, layout);
  PaintedBlock block;
  block.values.resize(static_cast<size_t>(layout.total_painted()));
  int32_t camera_id = -1;
  paint_point_into(p, rig, depths, feats, layout, block.values, camera_id);
  if (camera_id >= 0) {
    block.camera_id = camera_id;
  }
  return block;
}

PaintedCloud paint_cloud(const PointCloud& cloud, const CameraRig& rig,
                         std::span<const DepthMap> depths, std::span<const FeatureMap> feats,
                         const PaintLayout& layout, int threads) {
  if (cloud.c < 3) {
    throw ConfigError("paint: point cloud needs at least 3 channels, got " +
                      std::to_string(cloud.c));
  }
  check_config(rig, depths, feats, layout);

  PaintedCloud out;
  out.n = cloud.n;
  out.c = cloud.c;
  out.d = layout.d;
  const int out_ch = out.channels();
  out.values.resize(static_cast<size_t>(cloud.n) * out_ch);
  out.camera_ids.assign(static_cast<size_t>(cloud.n), -1);

  parallel_chunks(cloud.n, threads, [&](int64_t begin, int64_t end) {
    for (int64_t i = begin; i < end; ++i) {
      const float* src = cloud.values.data() + i * cloud.c;
      float* dst = out.values.data() + i * out_ch;
      std::copy(src, src + cloud.c, dst);
      const Eigen::Vector3d p(src[0], src[1], src[2]);
      paint_point_into(p, rig, depths, feats, layout,
                       {dst + cloud.c, static_cast<size_t>(layout.total_painted())},
                       out.camera_ids[i]);
    }
  });
  return out;
}

}  // namespace lvic
