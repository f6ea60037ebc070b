#include "splatprint/splatprint.h"

#include <cstring>
#include <filesystem>
#include <memory>
#include <string>

#include "core/errors.hpp"
#include "core/io_formats.hpp"
#include "core/metrics.hpp"
#include "core/pairwise.hpp"
#include "core/pipeline.hpp"
#include "core/rasterizer.hpp"
#include "core/scene.hpp"

namespace {

using namespace splatprint;

thread_local std::string g_last_error;

sp_status map_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return SP_ERR_INVALID_ARGUMENT;
    case ErrorCode::InvalidConfig: return SP_ERR_INVALID_CONFIG;
    case ErrorCode::Io: return SP_ERR_IO;
    case ErrorCode::MalformedFile: return SP_ERR_MALFORMED_FILE;
    case ErrorCode::IndexOutOfRange: return SP_ERR_INDEX_OUT_OF_RANGE;
    case ErrorCode::NonPositiveDepth:
    case ErrorCode::DegeneratePointmap:
    case ErrorCode::DegenerateCorrespondences: return SP_ERR_DEGENERATE_INPUT;
    case ErrorCode::DisconnectedGraph: return SP_ERR_DISCONNECTED_GRAPH;
    case ErrorCode::NonFiniteObjective:
    case ErrorCode::SingularCovariance:
    case ErrorCode::NonFiniteLoss: return SP_ERR_NUMERIC;
    case ErrorCode::DimensionMismatch: return SP_ERR_DIMENSION_MISMATCH;
    case ErrorCode::EmptyCloud:
    case ErrorCode::AllPruned:
    case ErrorCode::NoViews:
    case ErrorCode::EmptySet:
    case ErrorCode::NoSharedMinutiae:
    case ErrorCode::EmptyOverlap:
    case ErrorCode::InvalidCount: return SP_ERR_EMPTY_RESULT;
    case ErrorCode::StageFailed: return SP_ERR_STAGE_FAILED;
  }
  return SP_ERR_UNKNOWN;
}

template <typename Fn>
sp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return map_code(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SP_ERR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return SP_ERR_UNKNOWN;
  }
}

sp_sim3 to_c(const Sim3Transform& t) {
  sp_sim3 out;
  out.scale = t.scale;
  out.quat_wxyz[0] = t.rotation.w;
  out.quat_wxyz[1] = t.rotation.x;
  out.quat_wxyz[2] = t.rotation.y;
  out.quat_wxyz[3] = t.rotation.z;
  out.translation[0] = t.translation.x;
  out.translation[1] = t.translation.y;
  out.translation[2] = t.translation.z;
  return out;
}

}  // namespace

struct sp_scene {
  splatprint::FingerScene scene;
};

struct sp_pipeline {
  splatprint::Config config;
  std::unique_ptr<splatprint::Pipeline> impl;

  splatprint::Pipeline& materialize() {
    if (!impl) {
      impl = std::make_unique<splatprint::Pipeline>(
          splatprint::RunConfig::from_config(config));
    }
    return *impl;
  }
};

extern "C" {

const char* sp_status_name(sp_status status) {
  switch (status) {
    case SP_OK: return "ok";
    case SP_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case SP_ERR_INVALID_CONFIG: return "invalid_config";
    case SP_ERR_IO: return "io";
    case SP_ERR_MALFORMED_FILE: return "malformed_file";
    case SP_ERR_INDEX_OUT_OF_RANGE: return "index_out_of_range";
    case SP_ERR_DEGENERATE_INPUT: return "degenerate_input";
    case SP_ERR_DISCONNECTED_GRAPH: return "disconnected_graph";
    case SP_ERR_EMPTY_RESULT: return "empty_result";
    case SP_ERR_NUMERIC: return "numeric";
    case SP_ERR_DIMENSION_MISMATCH: return "dimension_mismatch";
    case SP_ERR_STAGE_FAILED: return "stage_failed";
    case SP_ERR_UNKNOWN: break;
  }
  return "unknown";
}

const char* sp_last_error(void) { return g_last_error.c_str(); }

const char* sp_version(void) { return "splatprint 1.0.0"; }

sp_status sp_scene_create(const char* config_path, sp_scene** out) {
  return guarded([&] {
    require(config_path && out, ErrorCode::InvalidArgument, "null argument");
    Config cfg = Config::parse_file(config_path);
    *out = new sp_scene{FingerScene::generate(SceneConfig::from_config(cfg))};
  });
}

sp_status sp_scene_create_default(uint64_t seed, sp_scene** out) {
  return guarded([&] {
    require(out, ErrorCode::InvalidArgument, "null argument");
    SceneConfig cfg;
    cfg.seed = seed;
    *out = new sp_scene{FingerScene::generate(cfg)};
  });
}

void sp_scene_destroy(sp_scene* scene) { delete scene; }

int sp_scene_view_count(const sp_scene* scene) {
  return scene ? scene->scene.view_count() : 0;
}

int sp_scene_minutiae_count(const sp_scene* scene) {
  return scene ? static_cast<int>(scene->scene.minutiae().size()) : 0;
}

sp_status sp_scene_view_pose(const sp_scene* scene, int view, sp_sim3* out) {
  return guarded([&] {
    require(scene && out, ErrorCode::InvalidArgument, "null argument");
    *out = to_c(scene->scene.view(view).world_from_camera);
  });
}

sp_status sp_scene_export(const sp_scene* scene, const char* out_dir) {
  return guarded([&] {
    require(scene && out_dir, ErrorCode::InvalidArgument, "null argument");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorCode::Io, std::string("cannot create directory: ") + out_dir);
    std::filesystem::path dir(out_dir);
    export_scene(scene->scene, (dir / "scene_surface.ply").string(),
                 (dir / "scene_meta.json").string());
    for (int v = 0; v < scene->scene.view_count(); ++v) {
      write_ppm(scene->scene.view(v).image,
                (dir / ("view_" + std::to_string(v) + ".ppm")).string());
      write_pgm_mask(scene->scene.view(v).mask,
                     (dir / ("mask_" + std::to_string(v) + ".pgm")).string());
    }
  });
}

sp_status sp_align_pair(const sp_scene* scene, int view_a, int view_b, double noise_sigma_mm,
                        uint64_t noise_seed, sp_pair_result* out) {
  return guarded([&] {
    require(scene && out, ErrorCode::InvalidArgument, "null argument");
    const FingerScene& sc = scene->scene;
    NoiseConfig noise;
    noise.sigma_mm = noise_sigma_mm;
    noise.seed = noise_seed;
    Pointmap self_b = sc.oracle_pointmap(view_b, view_b, noise);
    Pointmap cross = sc.oracle_pointmap(view_b, view_a, noise);
    PairAlignment pa = align_views(self_b, cross);  // frame b -> frame a
    out->transform = to_c(pa.transform);
    out->weighted_residual = pa.weighted_residual;
    out->inlier_weight_sum = pa.inlier_weight_sum;
    Pointmap self_a = sc.oracle_pointmap(view_a, view_a, noise);
    out->focal_a = recover_focal(self_a, sc.view(view_a).intrinsics.cx,
                                 sc.view(view_a).intrinsics.cy);
    out->focal_b = recover_focal(self_b, sc.view(view_b).intrinsics.cx,
                                 sc.view(view_b).intrinsics.cy);
  });
}

sp_status sp_eval_registration(const sp_scene* scene, int view_a, int view_b,
                               double noise_sigma_mm, uint64_t noise_seed, sp_reg_report* out) {
  return guarded([&] {
    require(scene && out, ErrorCode::InvalidArgument, "null argument");
    const FingerScene& sc = scene->scene;
    NoiseConfig noise;
    noise.sigma_mm = noise_sigma_mm;
    noise.seed = noise_seed;
    Pointmap self_a = sc.oracle_pointmap(view_a, view_a, noise);
    Pointmap self_b = sc.oracle_pointmap(view_b, view_b, noise);
    Pointmap cross_b_in_a = sc.oracle_pointmap(view_b, view_a, noise);
    PairAlignment pa = align_views(self_b, cross_b_in_a);  // frame b -> frame a
    Sim3Transform b_from_a = sim3_inverse(pa.transform);
    MinutiaPairSet rec_pairs =
        register_and_project(self_a, sc.view(view_a), sc.view(view_b), b_from_a);
    MinutiaPairSet oracle_pairs = register_and_project(self_a, sc.view(view_a), sc.view(view_b),
                                                       sc.relative_pose(view_a, view_b));
    out->d_recovered_px = registration_distance(rec_pairs);
    out->d_oracle_px = registration_distance(oracle_pairs);
    out->d_baseline2d_px = baseline_2d_similarity_distance(sc.view(view_a), sc.view(view_b));
    out->shared_minutiae = static_cast<int>(rec_pairs.size());
  });
}

sp_status sp_pipeline_create(const char* run_config_path, sp_pipeline** out) {
  return guarded([&] {
    require(run_config_path && out, ErrorCode::InvalidArgument, "null argument");
    auto* p = new sp_pipeline;
    p->config = Config::parse_file(run_config_path);
    *out = p;
  });
}

sp_status sp_pipeline_create_for_scene(const char* scene_config_path, const char* out_dir,
                                       sp_pipeline** out) {
  return guarded([&] {
    require(scene_config_path && out_dir && out, ErrorCode::InvalidArgument, "null argument");
    auto* p = new sp_pipeline;
    p->config = Config::parse_string("", "<defaults>");
    p->config.set("run.scene", scene_config_path);
    p->config.set("run.out", out_dir);
    *out = p;
  });
}

void sp_pipeline_destroy(sp_pipeline* pipeline) { delete pipeline; }

sp_status sp_pipeline_set(sp_pipeline* pipeline, const char* key, const char* value) {
  return guarded([&] {
    require(pipeline && key && value, ErrorCode::InvalidArgument, "null argument");
    require(!pipeline->impl, ErrorCode::InvalidArgument,
            "configuration is frozen once stages have run");
    pipeline->config.set(key, value);
  });
}

sp_status sp_pipeline_run(sp_pipeline* pipeline, const char* last_stage) {
  return guarded([&] {
    require(pipeline, ErrorCode::InvalidArgument, "null argument");
    pipeline->materialize().run_through(last_stage ? last_stage : "eval");
  });
}

sp_status sp_pipeline_load_checkpoint(sp_pipeline* pipeline, const char* ply_path) {
  return guarded([&] {
    require(pipeline && ply_path, ErrorCode::InvalidArgument, "null argument");
    pipeline->materialize().load_checkpoint_for_segment(ply_path);
  });
}

sp_status sp_pipeline_metric(const sp_pipeline* pipeline, const char* key, double* out) {
  return guarded([&] {
    require(pipeline && key && out, ErrorCode::InvalidArgument, "null argument");
    require(pipeline->impl != nullptr, ErrorCode::InvalidArgument, "pipeline has not run");
    *out = pipeline->impl->metric(key);
  });
}

sp_status sp_pipeline_manifest_path(const sp_pipeline* pipeline, char* buffer,
                                    size_t buffer_size) {
  return guarded([&] {
    require(pipeline && buffer && buffer_size > 0, ErrorCode::InvalidArgument, "null argument");
    require(pipeline->impl != nullptr, ErrorCode::InvalidArgument, "pipeline has not run");
    std::string path = pipeline->impl->manifest_path();
    require(path.size() + 1 <= buffer_size, ErrorCode::InvalidArgument, "buffer too small");
    std::memcpy(buffer, path.c_str(), path.size() + 1);
  });
}

int sp_pipeline_gaussian_count(const sp_pipeline* pipeline) {
  return pipeline && pipeline->impl ? pipeline->impl->gaussian_count() : 0;
}

sp_status sp_pipeline_view_pose(const sp_pipeline* pipeline, int view, sp_sim3* out) {
  return guarded([&] {
    require(pipeline && out, ErrorCode::InvalidArgument, "null argument");
    require(pipeline->impl != nullptr, ErrorCode::InvalidArgument, "pipeline has not run");
    *out = to_c(pipeline->impl->recon_view_pose(view));
  });
}

sp_status sp_render_checkpoint(const sp_scene* scene, const char* ckpt_ply, int novel_frames,
                               const char* out_dir) {
  return guarded([&] {
    require(scene && ckpt_ply && out_dir, ErrorCode::InvalidArgument, "null argument");
    require(novel_frames >= 0, ErrorCode::InvalidArgument, "novel_frames cannot be negative");
    Checkpoint ckpt = load_checkpoint(ckpt_ply);
    require(!ckpt.poses.empty(), ErrorCode::MalformedFile, "checkpoint has no cameras");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    require(!ec, ErrorCode::Io, std::string("cannot create directory: ") + out_dir);
    std::filesystem::path dir(out_dir);

    if (novel_frames == 0) {
      for (size_t v = 0; v < ckpt.poses.size(); ++v) {
        CameraView cam;
        cam.intrinsics = ckpt.intrinsics[v];
        cam.world_from_camera = ckpt.poses[v];
        ImageBuffer img = render(ckpt.cloud, cam, Vec3{});
        write_ppm(img, (dir / ("render_" + std::to_string(v) + ".ppm")).string());
      }
      return;
    }
    require(ckpt.poses.size() >= 3, ErrorCode::InvalidArgument,
            "novel-view rendering needs left/center/right cameras");
    auto poses = novel_view_poses(ckpt.poses.front(), ckpt.poses[ckpt.poses.size() / 2],
                                  ckpt.poses.back(), novel_frames);
    for (size_t k = 0; k < poses.size(); ++k) {
      CameraView cam;
      cam.intrinsics = ckpt.intrinsics.front();
      cam.world_from_camera = poses[k];
      ImageBuffer img = render(ckpt.cloud, cam, Vec3{});
      write_ppm(img, (dir / ("novel_" + std::to_string(k) + ".ppm")).string());
    }
  });
}

}  // extern "C"
