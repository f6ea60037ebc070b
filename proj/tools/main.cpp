// splatprint CLI: drives the reconstruction pipeline through the shared
// library's C API. Exit codes: 0 success, 2 config error, 3 stage failure.

#include <CLI11.hpp>

#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "splatprint/splatprint.h"

namespace {

int exit_code_for(sp_status status) {
  switch (status) {
    case SP_OK: return 0;
    case SP_ERR_INVALID_CONFIG:
    case SP_ERR_INVALID_ARGUMENT: return 2;
    default: return 3;
  }
}

int fail(sp_status status) {
  std::fprintf(stderr, "error (%s): %s\n", sp_status_name(status), sp_last_error());
  return exit_code_for(status);
}

struct SceneHandle {
  sp_scene* ptr = nullptr;
  ~SceneHandle() { sp_scene_destroy(ptr); }
};

struct PipelineHandle {
  sp_pipeline* ptr = nullptr;
  ~PipelineHandle() { sp_pipeline_destroy(ptr); }
};

void print_sim3(const sp_sim3& t) {
  std::printf("scale        %.9g\n", t.scale);
  std::printf("quat_wxyz    %.9g %.9g %.9g %.9g\n", t.quat_wxyz[0], t.quat_wxyz[1],
              t.quat_wxyz[2], t.quat_wxyz[3]);
  std::printf("translation  %.9g %.9g %.9g\n", t.translation[0], t.translation[1],
              t.translation[2]);
}

// Shared pipeline knobs; forwarded as config overrides.
struct PipeArgs {
  std::string scene, out = "out";
  double noise = 0.0;
  long seed = -1;
  int align_iters = -1;
  int train_iters = -1;
  double theta_keep = -1.0;

  sp_status apply(sp_pipeline* p) const {
    sp_status s = SP_OK;
    auto set = [&](const char* k, const std::string& v) {
      if (s == SP_OK) s = sp_pipeline_set(p, k, v.c_str());
    };
    if (noise > 0.0) set("noise.sigma_mm", std::to_string(noise));
    if (seed >= 0) set("run.seed", std::to_string(seed));
    if (align_iters >= 1) set("align.iters", std::to_string(align_iters));
    if (train_iters >= 0) set("train.iters", std::to_string(train_iters));
    if (theta_keep >= 0.0) set("segment.theta_keep", std::to_string(theta_keep));
    return s;
  }
};

void add_pipe_options(CLI::App* cmd, PipeArgs& args, bool with_segment = false) {
  cmd->add_option("--scene", args.scene, "scene config file")->required();
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--noise", args.noise, "pointmap noise sigma (mm)");
  cmd->add_option("--seed", args.seed, "run seed");
  cmd->add_option("--iters", args.align_iters, "global alignment iterations");
  cmd->add_option("--train-iters", args.train_iters, "3DGS training iterations");
  if (with_segment) cmd->add_option("--theta-keep", args.theta_keep, "segment keep threshold");
}

int run_pipeline_to(const PipeArgs& args, const char* stage,
                    const std::vector<std::string>& metrics_to_print) {
  PipelineHandle p;
  sp_status s = sp_pipeline_create_for_scene(args.scene.c_str(), args.out.c_str(), &p.ptr);
  if (s != SP_OK) return fail(s);
  if ((s = args.apply(p.ptr)) != SP_OK) return fail(s);
  if ((s = sp_pipeline_run(p.ptr, stage)) != SP_OK) return fail(s);
  for (const auto& key : metrics_to_print) {
    double v;
    if (sp_pipeline_metric(p.ptr, key.c_str(), &v) == SP_OK)
      std::printf("%-32s %.9g\n", key.c_str(), v);
  }
  char buf[4096];
  if (sp_pipeline_manifest_path(p.ptr, buf, sizeof(buf)) == SP_OK)
    std::printf("manifest: %s\n", buf);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"splatprint: contactless fingerprint 3D reconstruction pipeline"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "generate a synthetic finger scene and export it");
  std::string gen_scene, gen_out = "out";
  long gen_seed = -1;
  gen->add_option("--config", gen_scene, "scene config file (omit for defaults)");
  gen->add_option("--out", gen_out, "output directory");
  gen->add_option("--seed", gen_seed, "seed for the default scene");

  // align-pair
  auto* ap = app.add_subcommand("align-pair", "recover the scaled relative pose of two views");
  std::string ap_scene;
  std::vector<int> ap_views{0, 1};
  double ap_noise = 0.0;
  long ap_seed = 0;
  std::string ap_dump;
  ap->add_option("--scene", ap_scene, "scene config file")->required();
  ap->add_option("--views", ap_views, "two view indices")->expected(2);
  ap->add_option("--noise", ap_noise, "pointmap noise sigma (mm)");
  ap->add_option("--seed", ap_seed, "noise seed");
  ap->add_option("--dump-ply", ap_dump, "directory for scene artifacts");

  // align-global
  PipeArgs ag_args;
  auto* ag = app.add_subcommand("align-global", "global alignment and fused point cloud");
  add_pipe_options(ag, ag_args);

  // train
  PipeArgs tr_args;
  auto* tr = app.add_subcommand("train", "3DGS training on the fused cloud");
  add_pipe_options(tr, tr_args);

  // segment
  PipeArgs seg_args;
  auto* seg = app.add_subcommand("segment", "mask-vote cleanup of a trained checkpoint");
  add_pipe_options(seg, seg_args, true);
  std::string seg_ckpt;
  seg->add_option("--ckpt", seg_ckpt, "checkpoint to clean (defaults to the run's own)");

  // render
  auto* rd = app.add_subcommand("render", "render a checkpoint (training or novel views)");
  std::string rd_scene, rd_ckpt, rd_out = "out";
  int rd_novel = 0;
  rd->add_option("--scene", rd_scene, "scene config file")->required();
  rd->add_option("--ckpt", rd_ckpt, "checkpoint PLY")->required();
  rd->add_option("--novel", rd_novel, "novel frame count (0: training views)");
  rd->add_option("--out", rd_out, "output directory");

  // eval-reg
  auto* er = app.add_subcommand("eval-reg", "minutiae registration distance for a pair");
  std::string er_scene;
  std::vector<int> er_views{0, 2};
  double er_noise = 0.0;
  long er_seed = 0;
  er->add_option("--scene", er_scene, "scene config file")->required();
  er->add_option("--views", er_views, "two view indices")->expected(2);
  er->add_option("--noise", er_noise, "pointmap noise sigma (mm)");
  er->add_option("--seed", er_seed, "noise seed");

  // eval-depth / eval-nvs
  PipeArgs ed_args;
  auto* ed = app.add_subcommand("eval-depth", "weighted depth error of the reconstruction");
  add_pipe_options(ed, ed_args);
  PipeArgs en_args;
  auto* en = app.add_subcommand("eval-nvs", "novel-view synthesis quality (12-frame protocol)");
  add_pipe_options(en, en_args);

  // run
  auto* rn = app.add_subcommand("run", "full pipeline from a run config");
  std::string rn_config;
  rn->add_option("--config", rn_config, "run config file")->required();

  CLI11_PARSE(app, argc, argv);

  if (gen->parsed()) {
    SceneHandle scene;
    sp_status s = gen_scene.empty()
                      ? sp_scene_create_default(gen_seed >= 0 ? gen_seed : 7, &scene.ptr)
                      : sp_scene_create(gen_scene.c_str(), &scene.ptr);
    if (s != SP_OK) return fail(s);
    if ((s = sp_scene_export(scene.ptr, gen_out.c_str())) != SP_OK) return fail(s);
    std::printf("views     %d\nminutiae  %d\nexported  %s\n", sp_scene_view_count(scene.ptr),
                sp_scene_minutiae_count(scene.ptr), gen_out.c_str());
    return 0;
  }

  if (ap->parsed()) {
    SceneHandle scene;
    sp_status s = sp_scene_create(ap_scene.c_str(), &scene.ptr);
    if (s != SP_OK) return fail(s);
    sp_pair_result res;
    s = sp_align_pair(scene.ptr, ap_views[0], ap_views[1], ap_noise,
                      static_cast<uint64_t>(ap_seed), &res);
    if (s != SP_OK) return fail(s);
    std::printf("pair %d -> %d (frame %d <- frame %d)\n", ap_views[1], ap_views[0], ap_views[0],
                ap_views[1]);
    print_sim3(res.transform);
    std::printf("residual     %.9g\nweight_sum   %.9g\n", res.weighted_residual,
                res.inlier_weight_sum);
    std::printf("focal_a      %.9g\nfocal_b      %.9g\n", res.focal_a, res.focal_b);
    if (!ap_dump.empty() && (s = sp_scene_export(scene.ptr, ap_dump.c_str())) != SP_OK)
      return fail(s);
    return 0;
  }

  if (ag->parsed())
    return run_pipeline_to(ag_args, "global",
                           {"global.objective", "global.iterations",
                            "global.pose_rot_err_deg_max", "global.pose_trans_err_mm_max",
                            "global.fused_points"});
  if (tr->parsed())
    return run_pipeline_to(tr_args, "train",
                           {"train.psnr_mean", "train.final_total_loss", "train.gaussians"});

  if (seg->parsed()) {
    PipelineHandle p;
    sp_status s =
        sp_pipeline_create_for_scene(seg_args.scene.c_str(), seg_args.out.c_str(), &p.ptr);
    if (s != SP_OK) return fail(s);
    if ((s = seg_args.apply(p.ptr)) != SP_OK) return fail(s);
    if (!seg_ckpt.empty()) {
      if ((s = sp_pipeline_load_checkpoint(p.ptr, seg_ckpt.c_str())) != SP_OK) return fail(s);
    }
    if ((s = sp_pipeline_run(p.ptr, "segment")) != SP_OK) return fail(s);
    for (const char* key : {"segment.before", "segment.after", "segment.removed"}) {
      double v;
      if (sp_pipeline_metric(p.ptr, key, &v) == SP_OK) std::printf("%-18s %.0f\n", key, v);
    }
    return 0;
  }

  if (rd->parsed()) {
    SceneHandle scene;
    sp_status s = sp_scene_create(rd_scene.c_str(), &scene.ptr);
    if (s != SP_OK) return fail(s);
    if ((s = sp_render_checkpoint(scene.ptr, rd_ckpt.c_str(), rd_novel, rd_out.c_str())) != SP_OK)
      return fail(s);
    std::printf("rendered into %s\n", rd_out.c_str());
    return 0;
  }

  if (er->parsed()) {
    SceneHandle scene;
    sp_status s = sp_scene_create(er_scene.c_str(), &scene.ptr);
    if (s != SP_OK) return fail(s);
    sp_reg_report rep;
    s = sp_eval_registration(scene.ptr, er_views[0], er_views[1], er_noise,
                             static_cast<uint64_t>(er_seed), &rep);
    if (s != SP_OK) return fail(s);
    std::printf("shared minutiae   %d\n", rep.shared_minutiae);
    std::printf("D recovered (px)  %.9g\n", rep.d_recovered_px);
    std::printf("D oracle (px)     %.9g\n", rep.d_oracle_px);
    std::printf("D 2D rigid (px)   %.9g\n", rep.d_baseline2d_px);
    return 0;
  }

  if (ed->parsed())
    return run_pipeline_to(ed_args, "eval", {"eval.depth_err_mm_mean"});
  if (en->parsed())
    return run_pipeline_to(en_args, "eval",
                           {"eval.heldout_psnr_mean", "eval.heldout_ssim_mean"});

  if (rn->parsed()) {
    PipelineHandle p;
    sp_status s = sp_pipeline_create(rn_config.c_str(), &p.ptr);
    if (s != SP_OK) return fail(s);
    if ((s = sp_pipeline_run(p.ptr, nullptr)) != SP_OK) return fail(s);
    char buf[4096];
    if (sp_pipeline_manifest_path(p.ptr, buf, sizeof(buf)) == SP_OK)
      std::printf("manifest: %s\n", buf);
    return 0;
  }
  return 0;
}
