#pragma once

#include <utility>
#include <vector>

#include "core/camera.hpp"
#include "core/image.hpp"
#include "core/linalg.hpp"
#include "core/scene.hpp"

namespace splatprint {

struct MinutiaPair {
  int id = 0;
  double x = 0.0, y = 0.0;    // view-a minutia mapped into view b, pixels
  double gx = 0.0, gy = 0.0;  // mated ground-truth pixel in view b
};

using MinutiaPairSet = std::vector<MinutiaPair>;

// D = mean Euclidean pixel distance over the pairs. Throws EmptySet.
double registration_distance(const MinutiaPairSet& pairs);

// Lifts view-a minutiae to 3D through its self pointmap, transports them with
// the given frame-a -> frame-b transform, projects into view b and pairs by
// minutia id. Throws NoSharedMinutiae.
MinutiaPairSet register_and_project(const Pointmap& self_map_a, const CameraView& view_a,
                                    const CameraView& view_b,
                                    const Sim3Transform& b_from_a);

// Image-plane similarity fit (2D Procrustes) on the same mated minutiae; the
// 2D registration baseline. Returns the mean residual distance.
double baseline_2d_similarity_distance(const CameraView& view_a, const CameraView& view_b);

struct DepthPair {
  std::vector<double> predicted;  // mm
  std::vector<double> ground_truth;
  std::vector<uint8_t> valid;
  std::vector<double> weights;
  int width = 0, height = 0;
};

// Weighted mean absolute depth error; with scale_align the prediction is
// multiplied by the weighted-median ratio gt/pred first (pointmap depth is
// scale-ambiguous). Throws EmptyOverlap.
double weighted_depth_error(const DepthPair& dp, bool scale_align);

// n poses at equal parameter intervals along left -> center -> right
// (slerp rotations, lerp positions), endpoints included. Throws InvalidCount
// for n < 2.
std::vector<Sim3Transform> novel_view_poses(const Sim3Transform& left,
                                            const Sim3Transform& center,
                                            const Sim3Transform& right, int n = 12);

// 10 log10(1 / MSE) with unit dynamic range, capped at the 99 dB sentinel.
double psnr(const ImageBuffer& a, const ImageBuffer& b);
// PSNR restricted to pixels where mask is set.
double psnr_masked(const ImageBuffer& a, const ImageBuffer& b, const BitMask& mask);

// Single Sim3 aligning a reconstructed pose set onto ground truth: rotation
// from quaternion averaging of per-view offsets, scale from centroid spread,
// translation from centroids. Poses are world_from_camera.
Sim3Transform fit_gauge(const std::vector<Sim3Transform>& reconstructed,
                        const std::vector<Sim3Transform>& ground_truth);

struct PoseError {
  double rotation_deg = 0.0;
  double translation_mm = 0.0;  // measured in ground-truth units (gauge scale removed)
};

std::vector<PoseError> pose_errors_after_gauge(const std::vector<Sim3Transform>& reconstructed,
                                               const std::vector<Sim3Transform>& ground_truth);

}  // namespace splatprint
