#pragma once

#include <string>
#include <vector>

#include "core/gaussian.hpp"
#include "core/global_align.hpp"
#include "core/image.hpp"
#include "core/scene.hpp"
#include "core/train.hpp"

namespace splatprint {

// All readers raise MalformedFile with the byte offset of the defect; all
// writers are plain ASCII/binary-8bit and atomic (write-temp-then-rename).

// Colored point cloud as ASCII PLY ("splatprint-cloud v1" comment), positions
// printed with 9 significant digits.
void export_ply(const ColoredPointCloud& cloud, const std::string& path);
ColoredPointCloud import_ply(const std::string& path);

// 8-bit binary PPM (P6) / PGM (P5, mask values 0 or 255).
void write_ppm(const ImageBuffer& img, const std::string& path);
ImageBuffer read_ppm(const std::string& path);
void write_pgm_mask(const BitMask& mask, const std::string& path);
BitMask read_pgm_mask(const std::string& path);

// Gaussian checkpoint: ASCII PLY extension ("splatprint-gs v1") holding every
// gaussian parameter in documented order, full double precision, plus a
// cameras sidecar (<stem>.cameras.json) with poses and intrinsics.
struct Checkpoint {
  GaussianCloud cloud;
  std::vector<CameraIntrinsics> intrinsics;
  std::vector<Sim3Transform> poses;  // world_from_camera per view
};
void save_checkpoint(const Checkpoint& ckpt, const std::string& ply_path);
Checkpoint load_checkpoint(const std::string& ply_path);

// Loss trace CSV: "iter,l1,dssim,total,psnr".
void write_trace_csv(const std::vector<TraceRow>& rows, const std::string& path);

// Scene export: surface-sample PLY ("splatprint-scene v1") plus a JSON
// sidecar with minutiae, rig and surface parameters.
void export_scene(const FingerScene& scene, const std::string& ply_path,
                  const std::string& sidecar_json_path, int sample_count = 20000);

// Atomic small-file helpers.
void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);

std::string format_double(double v, int significant = 9);

}  // namespace splatprint
