#pragma once

#include <vector>

#include "core/camera.hpp"
#include "core/gaussian.hpp"
#include "core/rasterizer.hpp"

namespace splatprint {

struct TrainConfig {
  double lambda_ssim = 0.2;
  int iters = 2000;
  double lr_means = 0.02;
  double lr_scales = 0.005;
  double lr_rotations = 0.002;
  double lr_opacities = 0.05;
  double lr_colors = 0.02;
  double lr_pose = 1e-4;
  bool refine_poses = true;
  // Adaptive density control; off by default for sparse-view fitting from a
  // dense fused cloud.
  bool densify = false;
  int densify_interval = 200;
  int densify_until = 1500;
  double densify_grad_threshold = 2e-7;
  double densify_size_mm = 0.8;  // split above, clone below
  double prune_opacity = 0.005;
  Vec3 background{0.0, 0.0, 0.0};
  uint64_t seed = 0;
};

struct TraceRow {
  int iter = 0;
  double l1 = 0.0, dssim = 0.0, total = 0.0, psnr = 0.0;
};

struct TrainResult {
  GaussianCloud cloud;
  std::vector<Sim3Transform> poses;  // refined world_from_camera per view
  std::vector<TraceRow> trace;
};

// Round-robin Adam over the views; optional clone/split/prune density control.
// Deterministic for a fixed config. Throws NonFiniteLoss on divergence.
TrainResult train(const GaussianCloud& init, const std::vector<CameraView>& views,
                  const TrainConfig& cfg);

}  // namespace splatprint
