#include "core/pipeline.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "core/errors.hpp"
#include "core/rasterizer.hpp"

namespace splatprint {

namespace {
using ordered_json = nlohmann::ordered_json;

Sim3Transform rigidify(const Sim3Transform& sim3_pose) {
  // Keep orientation and camera center; pinhole projection is invariant to
  // the per-camera metric, so the rigid pose renders the scaled frame as-is.
  return Sim3Transform::rigid(sim3_pose.rotation, sim3_pose.apply(Vec3{}));
}
}  // namespace

RunConfig RunConfig::from_config(const Config& cfg) {
  RunConfig rc;
  rc.scene_config_path = cfg.require_string("run.scene");
  rc.out_dir = cfg.get_string("run.out", rc.out_dir);
  rc.seed = cfg.get_u64("run.seed", rc.seed);
  rc.noise.sigma_mm = cfg.get_double("noise.sigma_mm", 0.0);
  rc.noise.edge_falloff_px = cfg.get_double("noise.edge_falloff_px", rc.noise.edge_falloff_px);
  rc.noise.edge_floor = cfg.get_double("noise.edge_floor", rc.noise.edge_floor);
  rc.noise.seed = rc.seed;
  rc.tau_c = cfg.get_double("align.tau_c", rc.tau_c);
  rc.global.max_iters = cfg.get_int("align.iters", rc.global.max_iters);
  rc.global.step = cfg.get_double("align.step", rc.global.step);
  rc.global.squared_norm = cfg.get_bool("align.squared_norm", rc.global.squared_norm);
  rc.global.tau_c = rc.tau_c;
  rc.global.seed = rc.seed;
  rc.fuse_conf_floor = cfg.get_double("align.conf_floor", rc.fuse_conf_floor);
  rc.fuse_voxel_mm = cfg.get_double("align.voxel_mm", rc.fuse_voxel_mm);
  rc.train_cfg.iters = cfg.get_int("train.iters", rc.train_cfg.iters);
  rc.train_cfg.lambda_ssim = cfg.get_double("train.lambda_ssim", rc.train_cfg.lambda_ssim);
  rc.train_cfg.lr_means = cfg.get_double("train.lr_means", rc.train_cfg.lr_means);
  rc.train_cfg.lr_scales = cfg.get_double("train.lr_scales", rc.train_cfg.lr_scales);
  rc.train_cfg.lr_rotations = cfg.get_double("train.lr_rotations", rc.train_cfg.lr_rotations);
  rc.train_cfg.lr_opacities = cfg.get_double("train.lr_opacities", rc.train_cfg.lr_opacities);
  rc.train_cfg.lr_colors = cfg.get_double("train.lr_colors", rc.train_cfg.lr_colors);
  rc.train_cfg.lr_pose = cfg.get_double("train.lr_pose", rc.train_cfg.lr_pose);
  rc.train_cfg.refine_poses = cfg.get_bool("train.refine_poses", rc.train_cfg.refine_poses);
  rc.train_cfg.densify = cfg.get_bool("train.densify", rc.train_cfg.densify);
  rc.train_cfg.densify_interval =
      cfg.get_int("train.densify_interval", rc.train_cfg.densify_interval);
  rc.train_cfg.seed = rc.seed;
  rc.segment.theta_keep = cfg.get_double("segment.theta_keep", rc.segment.theta_keep);
  rc.segment.theta_lo = cfg.get_double("segment.theta_lo", rc.segment.theta_lo);
  rc.segment.theta_hi = cfg.get_double("segment.theta_hi", rc.segment.theta_hi);
  rc.novel_frames = cfg.get_int("eval.novel_frames", rc.novel_frames);
  rc.raw_canonical = cfg.canonical_text();
  return rc;
}

const std::vector<std::string>& Pipeline::stage_names() {
  static const std::vector<std::string> names = {"scene",  "pairwise", "global",
                                                 "train",  "segment",  "eval"};
  return names;
}

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)) {
  require(std::filesystem::exists(cfg_.scene_config_path), ErrorCode::InvalidConfig,
          "scene config not found: " + cfg_.scene_config_path);
  std::string scene_text = read_text(cfg_.scene_config_path);
  config_hash_ = fnv1a_hex(cfg_.raw_canonical + "\x1f" + scene_text);
  std::error_code ec;
  std::filesystem::create_directories(cfg_.out_dir, ec);
  require(!ec, ErrorCode::Io, "cannot create output directory: " + cfg_.out_dir);
}

std::string Pipeline::out_path(const std::string& rel) const {
  return (std::filesystem::path(cfg_.out_dir) / rel).string();
}

std::string Pipeline::manifest_path() const { return out_path("manifest.json"); }

void Pipeline::record_metric(StageRecord& rec, const std::string& key, double value) {
  rec.metrics[key] = value;
  metrics_[key] = value;
}

double Pipeline::metric(const std::string& key) const {
  auto it = metrics_.find(key);
  require(it != metrics_.end(), ErrorCode::InvalidArgument, "unknown metric: " + key);
  return it->second;
}

bool Pipeline::has_metric(const std::string& key) const { return metrics_.count(key) != 0; }

void Pipeline::write_manifest() const {
  ordered_json j;
  j["format"] = "splatprint-run v1";
  j["config_hash"] = config_hash_;
  j["seed"] = cfg_.seed;
  j["scene_config"] = cfg_.scene_config_path;
  j["stages"] = ordered_json::array();
  for (const auto& rec : records_) {
    ordered_json s;
    s["name"] = rec.name;
    s["inputs"] = rec.inputs;
    s["outputs"] = rec.outputs;
    s["metrics"] = ordered_json::object();
    for (const auto& [k, v] : rec.metrics) s["metrics"][k] = v;
    j["stages"].push_back(s);
  }
  j["metrics"] = ordered_json::object();
  for (const auto& [k, v] : metrics_) j["metrics"][k] = v;
  write_text_atomic(manifest_path(), j.dump(2) + "\n");
}

void Pipeline::run_through(const std::string& last_stage) {
  const auto& names = stage_names();
  auto it = std::find(names.begin(), names.end(), last_stage);
  require(it != names.end(), ErrorCode::InvalidArgument, "unknown stage: " + last_stage);
  int last = static_cast<int>(it - names.begin());
  while (next_stage_ <= last) {
    const std::string& name = names[next_stage_];
    try {
      run_stage(name);
    } catch (const Error& e) {
      write_manifest();  // keep the partial record
      throw Error(e.code(), "stage '" + name + "': " + e.what());
    }
    ++next_stage_;
    write_manifest();
  }
}

void Pipeline::run_stage(const std::string& name) {
  if (name == "scene") stage_scene();
  else if (name == "pairwise") stage_pairwise();
  else if (name == "global") stage_global();
  else if (name == "train") stage_train();
  else if (name == "segment") stage_segment();
  else if (name == "eval") stage_eval();
}

const FingerScene& Pipeline::scene() {
  run_through("scene");
  return *scene_;
}

const PairAlignment& Pipeline::pair_alignment(int view_n, int view_m) {
  run_through("pairwise");
  auto it = pairwise_.find({view_n, view_m});
  require(it != pairwise_.end(), ErrorCode::IndexOutOfRange, "no such pair");
  return it->second;
}

double Pipeline::recovered_focal(int view) {
  run_through("pairwise");
  require(view >= 0 && view < static_cast<int>(focals_.size()), ErrorCode::IndexOutOfRange,
          "view index out of range");
  return focals_[view];
}

int Pipeline::gaussian_count() const {
  if (clean_cloud_) return static_cast<int>(clean_cloud_->size());
  if (trained_) return static_cast<int>(trained_->cloud.size());
  return 0;
}

Sim3Transform Pipeline::recon_view_pose(int view) const {
  require(view >= 0 && view < static_cast<int>(recon_poses_rigid_.size()),
          ErrorCode::IndexOutOfRange, "view index out of range");
  if (trained_) return trained_->poses[view];
  return recon_poses_rigid_[view];
}

void Pipeline::stage_scene() {
  StageRecord rec;
  rec.name = "scene";
  rec.inputs.push_back(cfg_.scene_config_path);
  Config sc = Config::parse_file(cfg_.scene_config_path);
  scene_ = FingerScene::generate(SceneConfig::from_config(sc));

  export_scene(*scene_, out_path("scene_surface.ply"), out_path("scene_meta.json"));
  rec.outputs.push_back(out_path("scene_surface.ply"));
  rec.outputs.push_back(out_path("scene_meta.json"));
  for (int v = 0; v < scene_->view_count(); ++v) {
    std::string img = out_path("view_" + std::to_string(v) + ".ppm");
    std::string msk = out_path("mask_" + std::to_string(v) + ".pgm");
    write_ppm(scene_->view(v).image, img);
    write_pgm_mask(scene_->view(v).mask, msk);
    rec.outputs.push_back(img);
    rec.outputs.push_back(msk);
  }
  record_metric(rec, "scene.views", scene_->view_count());
  record_metric(rec, "scene.minutiae", static_cast<double>(scene_->minutiae().size()));
  records_.push_back(std::move(rec));
}

void Pipeline::stage_pairwise() {
  StageRecord rec;
  rec.name = "pairwise";
  const FingerScene& sc = *scene_;
  const int n = sc.view_count();

  self_maps_.clear();
  focals_.clear();
  for (int v = 0; v < n; ++v) {
    self_maps_.push_back(sc.oracle_pointmap(v, v, cfg_.noise));
    const CameraIntrinsics& intr = sc.view(v).intrinsics;
    focals_.push_back(recover_focal(self_maps_[v], intr.cx, intr.cy));
    record_metric(rec, "pairwise.focal_" + std::to_string(v), focals_[v]);
  }

  std::string report = "pair  scale  rot_w rot_x rot_y rot_z  tx ty tz  residual weight_sum\n";
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      Pointmap cross = sc.oracle_pointmap(b, a, cfg_.noise);  // X^{b,(a,b)}
      PairAlignment pa = align_views(self_maps_[b], cross, cfg_.tau_c);
      pairwise_[{a, b}] = pa;  // frame b -> frame a
      const Sim3Transform& t = pa.transform;
      report += std::to_string(a) + "-" + std::to_string(b) + "  " + format_double(t.scale) +
                "  " + format_double(t.rotation.w) + " " + format_double(t.rotation.x) + " " +
                format_double(t.rotation.y) + " " + format_double(t.rotation.z) + "  " +
                format_double(t.translation.x) + " " + format_double(t.translation.y) + " " +
                format_double(t.translation.z) + "  " + format_double(pa.weighted_residual) +
                " " + format_double(pa.inlier_weight_sum) + "\n";
      record_metric(rec, "pairwise.residual_" + std::to_string(a) + std::to_string(b),
                    pa.weighted_residual);
      record_metric(rec, "pairwise.scale_" + std::to_string(a) + std::to_string(b),
                    t.scale);
    }
  }
  write_text_atomic(out_path("pairwise.txt"), report);
  rec.outputs.push_back(out_path("pairwise.txt"));
  records_.push_back(std::move(rec));
}

void Pipeline::stage_global() {
  StageRecord rec;
  rec.name = "global";
  const FingerScene& sc = *scene_;
  const int n = sc.view_count();

  std::vector<EdgeObservation> edges;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      EdgeObservation e;
      e.view_n = a;
      e.view_m = b;
      e.pm_n = self_maps_[a];
      e.pm_m = sc.oracle_pointmap(b, a, cfg_.noise);
      // pairwise_[{a,b}] maps frame b -> frame a; the edge wants m -> n.
      e.pairwise_nm = pairwise_.at({a, b});
      edges.push_back(std::move(e));
    }
  }
  graph_ = build_view_graph(n, std::move(edges));
  global_ = optimize_global(*graph_, cfg_.global);
  recon_poses_sim3_ = estimate_view_poses(*global_, self_maps_, cfg_.tau_c);
  recon_poses_rigid_.clear();
  for (const auto& p : recon_poses_sim3_) recon_poses_rigid_.push_back(rigidify(p));

  std::vector<const ImageBuffer*> images;
  for (int v = 0; v < n; ++v) images.push_back(&sc.view(v).image);
  fused_ = fuse_point_cloud(*global_, *graph_, images, cfg_.fuse_conf_floor, cfg_.fuse_voxel_mm);
  export_ply(*fused_, out_path("fused.ply"));
  rec.outputs.push_back(out_path("fused.ply"));

  // Pose report against the synthetic rig (gauge removed).
  std::vector<Sim3Transform> gt_poses;
  for (int v = 0; v < n; ++v) gt_poses.push_back(sc.view(v).world_from_camera);
  auto errors = pose_errors_after_gauge(recon_poses_sim3_, gt_poses);
  std::string report = "view  rot_err_deg  trans_err_mm\n";
  double max_rot = 0.0, max_tr = 0.0;
  for (size_t v = 0; v < errors.size(); ++v) {
    report += std::to_string(v) + "  " + format_double(errors[v].rotation_deg) + "  " +
              format_double(errors[v].translation_mm) + "\n";
    max_rot = std::max(max_rot, errors[v].rotation_deg);
    max_tr = std::max(max_tr, errors[v].translation_mm);
  }
  write_text_atomic(out_path("poses.txt"), report);
  rec.outputs.push_back(out_path("poses.txt"));

  record_metric(rec, "global.objective", global_->final_objective);
  record_metric(rec, "global.iterations", global_->iterations_run);
  record_metric(rec, "global.gauge_log_scale_sum", global_->gauge_log_scale_sum());
  record_metric(rec, "global.pose_rot_err_deg_max", max_rot);
  record_metric(rec, "global.pose_trans_err_mm_max", max_tr);
  record_metric(rec, "global.fused_points", static_cast<double>(fused_->points.size()));
  records_.push_back(std::move(rec));
}

std::vector<CameraView> Pipeline::training_views() const {
  const FingerScene& sc = *scene_;
  std::vector<CameraView> views;
  for (int v = 0; v < sc.view_count(); ++v) {
    CameraView cv = sc.view(v);
    const CameraIntrinsics& gt = cv.intrinsics;
    cv.intrinsics = CameraIntrinsics(focals_[v], gt.cx, gt.cy, gt.width, gt.height);
    cv.world_from_camera = recon_poses_rigid_[v];
    views.push_back(std::move(cv));
  }
  return views;
}

void Pipeline::stage_train() {
  StageRecord rec;
  rec.name = "train";
  rec.inputs.push_back(out_path("fused.ply"));

  GaussianCloud init = init_cloud_from_points(*fused_);
  TrainConfig tcfg = cfg_.train_cfg;
  trained_ = train(init, training_views(), tcfg);

  Checkpoint ckpt;
  ckpt.cloud = trained_->cloud;
  auto views = training_views();
  for (size_t v = 0; v < views.size(); ++v) {
    ckpt.intrinsics.push_back(views[v].intrinsics);
    ckpt.poses.push_back(trained_->poses[v]);
  }
  save_checkpoint(ckpt, out_path("gs.ply"));
  write_trace_csv(trained_->trace, out_path("loss_trace.csv"));
  rec.outputs.push_back(out_path("gs.ply"));
  rec.outputs.push_back(out_path("gs.ply.cameras.json"));
  rec.outputs.push_back(out_path("loss_trace.csv"));

  double psnr_sum = 0.0;
  for (size_t v = 0; v < views.size(); ++v) {
    CameraView cv = views[v];
    cv.world_from_camera = trained_->poses[v];
    ImageBuffer img = render(trained_->cloud, cv, cfg_.train_cfg.background);
    double p = psnr(img, views[v].image);
    psnr_sum += p;
    record_metric(rec, "train.psnr_view_" + std::to_string(v), p);
    write_ppm(img, out_path("train_render_" + std::to_string(v) + ".ppm"));
    rec.outputs.push_back(out_path("train_render_" + std::to_string(v) + ".ppm"));
  }
  record_metric(rec, "train.psnr_mean", psnr_sum / static_cast<double>(views.size()));
  record_metric(rec, "train.final_total_loss", trained_->trace.back().total);
  record_metric(rec, "train.gaussians", static_cast<double>(trained_->cloud.size()));
  records_.push_back(std::move(rec));
}

void Pipeline::load_checkpoint_for_segment(const std::string& ply_path) {
  run_through("global");
  Checkpoint ckpt = load_checkpoint(ply_path);
  TrainResult tr;
  tr.cloud = ckpt.cloud;
  tr.poses = ckpt.poses;
  trained_ = std::move(tr);
  // Focals follow the checkpoint cameras.
  for (size_t v = 0; v < ckpt.intrinsics.size() && v < focals_.size(); ++v)
    focals_[v] = ckpt.intrinsics[v].focal_px;
  next_stage_ = 4;  // segment comes next
}

void Pipeline::stage_segment() {
  StageRecord rec;
  rec.name = "segment";
  rec.inputs.push_back(out_path("gs.ply"));

  auto views = training_views();
  for (size_t v = 0; v < views.size(); ++v) views[v].world_from_camera = trained_->poses[v];
  size_t before = trained_->cloud.size();
  clean_cloud_ = segment_pass(trained_->cloud, views, cfg_.segment);

  Checkpoint ckpt;
  ckpt.cloud = *clean_cloud_;
  for (size_t v = 0; v < views.size(); ++v) {
    ckpt.intrinsics.push_back(views[v].intrinsics);
    ckpt.poses.push_back(trained_->poses[v]);
  }
  save_checkpoint(ckpt, out_path("gs_clean.ply"));
  rec.outputs.push_back(out_path("gs_clean.ply"));
  rec.outputs.push_back(out_path("gs_clean.ply.cameras.json"));

  record_metric(rec, "segment.before", static_cast<double>(before));
  record_metric(rec, "segment.after", static_cast<double>(clean_cloud_->size()));
  record_metric(rec, "segment.removed", static_cast<double>(before - clean_cloud_->size()));
  records_.push_back(std::move(rec));
}

void Pipeline::stage_eval() {
  StageRecord rec;
  rec.name = "eval";
  const FingerScene& sc = *scene_;
  const int n = sc.view_count();
  const GaussianCloud& cloud = clean_cloud_ ? *clean_cloud_ : trained_->cloud;

  // Novel-view protocol: interpolate left -> center -> right over the
  // refined poses, render, and compare against ray-cast ground truth at the
  // gauge-mapped world poses.
  std::vector<Sim3Transform> gt_poses;
  for (int v = 0; v < n; ++v) gt_poses.push_back(sc.view(v).world_from_camera);
  Sim3Transform gauge = fit_gauge(trained_->poses, gt_poses);
  Sim3Transform gauge_inv = gauge.inverse();

  int left = 0, center = n / 2, right = n - 1;
  auto novel = novel_view_poses(trained_->poses[left], trained_->poses[center],
                                trained_->poses[right], cfg_.novel_frames);
  auto views = training_views();
  std::string csv = "frame,psnr,ssim,heldout\n";
  double held_psnr = 0.0, held_ssim = 0.0;
  int held_count = 0;
  for (size_t k = 0; k < novel.size(); ++k) {
    CameraView cam;
    cam.intrinsics = views[left].intrinsics;
    cam.world_from_camera = novel[k];
    ImageBuffer img = render(cloud, cam, cfg_.train_cfg.background);

    Sim3Transform world_pose = sim3_compose(gauge_inv, novel[k]);
    CameraView gt_view = sc.render_at(
        sc.view(left).intrinsics, Sim3Transform::rigid(world_pose.rotation,
                                                       world_pose.apply(Vec3{})));
    double p = psnr(img, gt_view.image);
    double s = ssim(gt_view.image, img);
    bool heldout = k != 0 && k + 1 != novel.size();
    if (heldout) {
      held_psnr += p;
      held_ssim += s;
      ++held_count;
    }
    csv += std::to_string(k) + "," + format_double(p) + "," + format_double(s) + "," +
           (heldout ? "1" : "0") + "\n";
    std::string path = out_path("novel_" + std::to_string(k) + ".ppm");
    write_ppm(img, path);
    rec.outputs.push_back(path);
  }
  write_text_atomic(out_path("nvs.csv"), csv);
  rec.outputs.push_back(out_path("nvs.csv"));
  record_metric(rec, "eval.heldout_psnr_mean", held_psnr / std::max(1, held_count));
  record_metric(rec, "eval.heldout_ssim_mean", held_ssim / std::max(1, held_count));

  // Registration distances on the widest pair.
  int a = 0, b = n - 1;
  Sim3Transform t_b_from_a = sim3_inverse(pairwise_.at({a, b}).transform);
  MinutiaPairSet rec_pairs =
      register_and_project(self_maps_[a], sc.view(a), sc.view(b), t_b_from_a);
  double d_3d = registration_distance(rec_pairs);
  MinutiaPairSet oracle_pairs =
      register_and_project(self_maps_[a], sc.view(a), sc.view(b), sc.relative_pose(a, b));
  double d_oracle = registration_distance(oracle_pairs);
  double d_2d = baseline_2d_similarity_distance(sc.view(a), sc.view(b));
  record_metric(rec, "eval.reg_d_3d_px", d_3d);
  record_metric(rec, "eval.reg_d_oracle_px", d_oracle);
  record_metric(rec, "eval.reg_d_2d_px", d_2d);

  // Weighted depth error per view from the global pointmaps.
  double depth_sum = 0.0;
  for (int v = 0; v < n; ++v) {
    Sim3Transform cam_from_global = recon_poses_sim3_[v].inverse();
    const auto& chi = global_->chi[v];
    DepthPair dp;
    dp.width = global_->chi_valid[v].width;
    dp.height = global_->chi_valid[v].height;
    dp.predicted.resize(chi.size());
    dp.ground_truth = sc.depth_map(v);
    dp.valid.resize(chi.size());
    dp.weights = global_->chi_conf[v];
    for (size_t i = 0; i < chi.size(); ++i) {
      dp.valid[i] = global_->chi_valid[v].bits[i];
      dp.predicted[i] = dp.valid[i] ? cam_from_global.apply(chi[i]).z : 0.0;
    }
    double e = weighted_depth_error(dp, true);
    depth_sum += e;
    record_metric(rec, "eval.depth_err_mm_view_" + std::to_string(v), e);
  }
  record_metric(rec, "eval.depth_err_mm_mean", depth_sum / n);
  records_.push_back(std::move(rec));
}

std::string run_pipeline(const RunConfig& cfg) {
  Pipeline p(cfg);
  p.run_all();
  return p.manifest_path();
}

}  // namespace splatprint
