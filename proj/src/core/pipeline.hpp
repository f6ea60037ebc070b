#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "core/config.hpp"
#include "core/global_align.hpp"
#include "core/io_formats.hpp"
#include "core/metrics.hpp"
#include "core/pairwise.hpp"
#include "core/scene.hpp"
#include "core/segment.hpp"
#include "core/train.hpp"

namespace splatprint {

struct RunConfig {
  std::string scene_config_path;
  std::string out_dir = "out";
  uint64_t seed = 7;
  NoiseConfig noise;
  double tau_c = 0.5;
  GlobalOpts global;
  double fuse_conf_floor = 0.2;
  double fuse_voxel_mm = 0.3;
  TrainConfig train_cfg;
  SegmentOpts segment;
  int novel_frames = 12;
  std::string raw_canonical;  // config text used for the manifest hash

  static RunConfig from_config(const Config& cfg);
};

// Stage order mirrors the method: scene -> pairwise -> global -> train ->
// segment -> eval. Every stage persists its artifacts and appends a manifest
// record; the manifest file is rewritten atomically at each boundary.
class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  static const std::vector<std::string>& stage_names();
  void run_through(const std::string& last_stage);
  void run_all() { run_through(stage_names().back()); }

  const RunConfig& config() const { return cfg_; }
  std::string manifest_path() const;
  double metric(const std::string& key) const;
  bool has_metric(const std::string& key) const;
  const std::map<std::string, double>& metrics() const { return metrics_; }

  const FingerScene& scene();  // runs the scene stage if needed
  const PairAlignment& pair_alignment(int view_n, int view_m);
  double recovered_focal(int view);
  int gaussian_count() const;
  Sim3Transform recon_view_pose(int view) const;  // rigid, after refinement

  // Loads a previously trained checkpoint in place of the train stage so
  // segment/eval can run from persisted artifacts.
  void load_checkpoint_for_segment(const std::string& ply_path);

 private:
  struct StageRecord {
    std::string name;
    std::vector<std::string> inputs, outputs;
    std::map<std::string, double> metrics;
  };

  void run_stage(const std::string& name);
  void stage_scene();
  void stage_pairwise();
  void stage_global();
  void stage_train();
  void stage_segment();
  void stage_eval();
  void write_manifest() const;
  void record_metric(StageRecord& rec, const std::string& key, double value);
  std::string out_path(const std::string& rel) const;
  std::vector<CameraView> training_views() const;

  RunConfig cfg_;
  std::string config_hash_;
  std::vector<StageRecord> records_;
  std::map<std::string, double> metrics_;
  int next_stage_ = 0;

  std::optional<FingerScene> scene_;
  std::vector<Pointmap> self_maps_;
  std::vector<double> focals_;
  std::map<std::pair<int, int>, PairAlignment> pairwise_;
  std::optional<ViewGraph> graph_;
  std::optional<GlobalAlignment> global_;
  std::vector<Sim3Transform> recon_poses_sim3_;
  std::vector<Sim3Transform> recon_poses_rigid_;
  std::optional<ColoredPointCloud> fused_;
  std::optional<TrainResult> trained_;
  std::optional<GaussianCloud> clean_cloud_;
};

// Convenience: full pipeline run returning the manifest path.
std::string run_pipeline(const RunConfig& cfg);

}  // namespace splatprint
