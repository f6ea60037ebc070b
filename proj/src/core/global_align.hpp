#pragma once

#include <vector>

#include "core/image.hpp"
#include "core/pairwise.hpp"
#include "core/scene.hpp"

namespace splatprint {

// One image pair e = (n, m). Both pointmaps are expressed in the frame of the
// pair's reference view n; pairwise_nm maps frame m into frame n.
struct EdgeObservation {
  int view_n = 0, view_m = 0;
  Pointmap pm_n;  // X^{n,e} (view n's self map)
  Pointmap pm_m;  // X^{m,e}
  PairAlignment pairwise_nm;
};

struct ViewGraph {
  int view_count = 0;
  std::vector<EdgeObservation> edges;
};

// Validates connectivity and per-edge grids. Throws DisconnectedGraph.
ViewGraph build_view_graph(int view_count, std::vector<EdgeObservation> edges);

// Default construction: the complete graph over a scene's views, with oracle
// pointmaps and pairwise Procrustes initializations per edge.
ViewGraph build_complete_view_graph(const FingerScene& scene, const NoiseConfig& noise = {},
                                    double tau_c = 0.5);

struct GlobalOpts {
  int max_iters = 300;
  double step = 0.01;          // Adam base step, cosine-decayed
  double tau_c = 0.5;          // confidence threshold for initialization solves
  bool squared_norm = false;   // Eq. 2 norm as printed is un-squared
  double epsilon_mm = 1e-6;    // smoothing for the un-squared norm at zero
  uint64_t seed = 0;
};

struct GlobalAlignment {
  // Global per-view pointmaps (full grids; meaningful where chi_conf > 0).
  std::vector<std::vector<Vec3>> chi;
  std::vector<std::vector<double>> chi_conf;  // per-pixel max edge confidence
  std::vector<BitMask> chi_valid;
  // Per-edge sim3 mapping the pair's reference frame into the global frame;
  // scale() is sigma_e, the rigid part is P_e.
  std::vector<Sim3Transform> edge_pose;
  double final_objective = 0.0;  // confidence-normalized smoothed Eq. 2 value
  int iterations_run = 0;
  std::vector<double> objective_trace;  // accepted objective values, in order

  double edge_scale(size_t e) const { return edge_pose[e].scale; }
  double gauge_log_scale_sum() const;
};

GlobalAlignment optimize_global(const ViewGraph& graph, const GlobalOpts& opts);

// Objective evaluation used by the optimizer (exposed for tests).
double global_objective(const ViewGraph& graph, const GlobalAlignment& state,
                        const GlobalOpts& opts);

struct ColoredPointCloud {
  std::vector<Vec3> points;
  std::vector<Vec3> colors;
  std::vector<double> confidence;
};

// Concatenates chi points above the confidence floor, attaching source-pixel
// colors, then voxel-downsamples (keeps the most confident point per cell).
ColoredPointCloud fuse_point_cloud(const GlobalAlignment& ga, const ViewGraph& graph,
                                   const std::vector<const ImageBuffer*>& view_images,
                                   double confidence_floor, double voxel_mm);

// Per-view camera pose in the global frame, recovered by Procrustes between
// each view's self-frame pointmap and its global pointmap.
std::vector<Sim3Transform> estimate_view_poses(const GlobalAlignment& ga,
                                               const std::vector<Pointmap>& self_maps,
                                               double tau_c = 0.5);

}  // namespace splatprint
