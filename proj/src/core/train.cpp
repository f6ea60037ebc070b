#include "core/train.hpp"

#include <algorithm>
#include <cmath>

#include "core/errors.hpp"
#include "core/metrics.hpp"
#include "core/rng.hpp"

namespace splatprint {

namespace {

constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;

struct Adam {
  std::vector<double> m, v;
  void init(size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  double step(size_t i, double g, double lr, double bc1, double bc2) {
    m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * g;
    v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * g * g;
    return lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + kEps);
  }
};

struct Optimizer {
  Adam means, scales, rots, opac, colors, pose;
  int t = 0;
  void init(size_t n, size_t n_views) {
    means.init(3 * n);
    scales.init(3 * n);
    rots.init(3 * n);
    opac.init(n);
    colors.init(3 * n);
    pose.init(6 * n_views);
    t = 0;
  }
};

}  // namespace

TrainResult train(const GaussianCloud& init, const std::vector<CameraView>& views,
                  const TrainConfig& cfg) {
  require(!views.empty(), ErrorCode::InvalidArgument, "training needs at least one view");
  require(cfg.lambda_ssim >= 0.0 && cfg.lambda_ssim <= 1.0, ErrorCode::InvalidArgument,
          "lambda_ssim must be in [0, 1]");
  require(cfg.iters >= 0, ErrorCode::InvalidArgument, "iteration count cannot be negative");
  require(!init.gaussians.empty(), ErrorCode::EmptyCloud, "initial cloud is empty");

  TrainResult out;
  out.cloud = init;
  for (const auto& v : views) out.poses.push_back(v.world_from_camera);
  if (cfg.iters == 0) return out;

  Optimizer opt;
  opt.init(out.cloud.size(), views.size());

  // Densification bookkeeping.
  std::vector<double> grad_acc(out.cloud.size(), 0.0);
  std::vector<int> grad_cnt(out.cloud.size(), 0);
  Rng densify_rng = make_rng(cfg.seed, 0x5134u);

  RenderGrads grads;
  ImageBuffer rendered;
  for (int it = 0; it < cfg.iters; ++it) {
    int vi = it % static_cast<int>(views.size());
    CameraView view = views[vi];
    view.world_from_camera = out.poses[vi];

    LossParts lp = render_backward(out.cloud, view, views[vi].image, cfg.lambda_ssim,
                                   cfg.background, &grads, &rendered);
    require(std::isfinite(lp.total), ErrorCode::NonFiniteLoss, "training loss diverged");
    out.trace.push_back({it, lp.l1, lp.dssim, lp.total, psnr(rendered, views[vi].image)});

    ++opt.t;
    double bc1 = 1.0 - std::pow(kBeta1, opt.t);
    double bc2 = 1.0 - std::pow(kBeta2, opt.t);
    for (size_t g = 0; g < out.cloud.size(); ++g) {
      Gaussian3D& gs = out.cloud.gaussians[g];
      gs.mean.x -= opt.means.step(3 * g + 0, grads.mean[g].x, cfg.lr_means, bc1, bc2);
      gs.mean.y -= opt.means.step(3 * g + 1, grads.mean[g].y, cfg.lr_means, bc1, bc2);
      gs.mean.z -= opt.means.step(3 * g + 2, grads.mean[g].z, cfg.lr_means, bc1, bc2);
      gs.log_scales.x -= opt.scales.step(3 * g + 0, grads.log_scales[g].x, cfg.lr_scales, bc1, bc2);
      gs.log_scales.y -= opt.scales.step(3 * g + 1, grads.log_scales[g].y, cfg.lr_scales, bc1, bc2);
      gs.log_scales.z -= opt.scales.step(3 * g + 2, grads.log_scales[g].z, cfg.lr_scales, bc1, bc2);
      Vec3 w{opt.rots.step(3 * g + 0, grads.rotation[g].x, cfg.lr_rotations, bc1, bc2),
             opt.rots.step(3 * g + 1, grads.rotation[g].y, cfg.lr_rotations, bc1, bc2),
             opt.rots.step(3 * g + 2, grads.rotation[g].z, cfg.lr_rotations, bc1, bc2)};
      gs.rotation = Rotation::exp(-w) * gs.rotation;
      gs.opacity_logit -= opt.opac.step(g, grads.opacity_logit[g], cfg.lr_opacities, bc1, bc2);
      gs.color_logits.x -= opt.colors.step(3 * g + 0, grads.color_logits[g].x, cfg.lr_colors, bc1, bc2);
      gs.color_logits.y -= opt.colors.step(3 * g + 1, grads.color_logits[g].y, cfg.lr_colors, bc1, bc2);
      gs.color_logits.z -= opt.colors.step(3 * g + 2, grads.color_logits[g].z, cfg.lr_colors, bc1, bc2);
      // Clamp scales away from degeneracy.
      gs.log_scales.x = std::clamp(gs.log_scales.x, -9.0, 3.0);
      gs.log_scales.y = std::clamp(gs.log_scales.y, -9.0, 3.0);
      gs.log_scales.z = std::clamp(gs.log_scales.z, -9.0, 3.0);
    }
    if (cfg.refine_poses) {
      size_t base = 6 * static_cast<size_t>(vi);
      Vec3 omega{opt.pose.step(base + 0, grads.cam_omega.x, cfg.lr_pose, bc1, bc2),
                 opt.pose.step(base + 1, grads.cam_omega.y, cfg.lr_pose, bc1, bc2),
                 opt.pose.step(base + 2, grads.cam_omega.z, cfg.lr_pose, bc1, bc2)};
      Vec3 delta{opt.pose.step(base + 3, grads.cam_delta.x, cfg.lr_pose, bc1, bc2),
                 opt.pose.step(base + 4, grads.cam_delta.y, cfg.lr_pose, bc1, bc2),
                 opt.pose.step(base + 5, grads.cam_delta.z, cfg.lr_pose, bc1, bc2)};
      Sim3Transform& p = out.poses[vi];
      // Right-perturbation convention matching the rasterizer gradients.
      Rotation r = p.rotation * Rotation::exp(-omega);
      Vec3 t = p.translation - p.rotation.apply(delta);
      out.poses[vi] = Sim3Transform::rigid(r, t);
    }

    if (cfg.densify) {
      for (size_t g = 0; g < out.cloud.size(); ++g) {
        if (grads.touched[g] > 0) {
          grad_acc[g] += grads.mean2d_norm[g];
          grad_cnt[g] += 1;
        }
      }
      if ((it + 1) % cfg.densify_interval == 0 && it + 1 <= cfg.densify_until) {
        GaussianCloud next;
        std::uniform_real_distribution<double> unit(-1.0, 1.0);
        for (size_t g = 0; g < out.cloud.size(); ++g) {
          const Gaussian3D& gs = out.cloud.gaussians[g];
          if (gs.opacity() < cfg.prune_opacity) continue;  // prune
          double avg = grad_cnt[g] > 0 ? grad_acc[g] / grad_cnt[g] : 0.0;
          Vec3 sc = gs.scales();
          double s_max = std::max({sc.x, sc.y, sc.z});
          if (avg > cfg.densify_grad_threshold && s_max > cfg.densify_size_mm) {
            // Split: two children along the largest axis, scales shrunk.
            int axis = sc.x >= sc.y && sc.x >= sc.z ? 0 : (sc.y >= sc.z ? 1 : 2);
            Vec3 dir = gs.rotation.matrix().col(axis);
            for (int child = 0; child < 2; ++child) {
              Gaussian3D c = gs;
              double off = (child == 0 ? 1.0 : -1.0) * 0.6 * s_max;
              c.mean = gs.mean + off * dir;
              c.log_scales = gs.log_scales - Vec3{std::log(1.6), std::log(1.6), std::log(1.6)};
              next.gaussians.push_back(c);
              next.source_ids.push_back(out.cloud.source_ids[g]);
            }
          } else if (avg > cfg.densify_grad_threshold) {
            // Clone with a small jitter so the pair can separate.
            Gaussian3D c = gs;
            Vec3 jitter{unit(densify_rng), unit(densify_rng), unit(densify_rng)};
            c.mean = gs.mean + 0.3 * s_max * jitter;
            next.gaussians.push_back(gs);
            next.source_ids.push_back(out.cloud.source_ids[g]);
            next.gaussians.push_back(c);
            next.source_ids.push_back(out.cloud.source_ids[g]);
          } else {
            next.gaussians.push_back(gs);
            next.source_ids.push_back(out.cloud.source_ids[g]);
          }
        }
        require(!next.gaussians.empty(), ErrorCode::EmptyCloud,
                "density control pruned every gaussian");
        out.cloud = std::move(next);
        opt.init(out.cloud.size(), views.size());
        grad_acc.assign(out.cloud.size(), 0.0);
        grad_cnt.assign(out.cloud.size(), 0);
      }
    }
  }
  return out;
}

}  // namespace splatprint
