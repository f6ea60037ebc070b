/* splatprint C API: contactless-fingerprint 3D reconstruction on synthetic
 * finger scenes. Handles are opaque; every call returns an sp_status and the
 * last failure message is kept per thread (sp_last_error). */
#ifndef SPLATPRINT_H
#define SPLATPRINT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SP_API __declspec(dllexport)
#else
#define SP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sp_status {
  SP_OK = 0,
  SP_ERR_INVALID_ARGUMENT = 1,
  SP_ERR_INVALID_CONFIG = 2,
  SP_ERR_IO = 3,
  SP_ERR_MALFORMED_FILE = 4,
  SP_ERR_INDEX_OUT_OF_RANGE = 5,
  SP_ERR_DEGENERATE_INPUT = 6,
  SP_ERR_DISCONNECTED_GRAPH = 7,
  SP_ERR_EMPTY_RESULT = 8,
  SP_ERR_NUMERIC = 9,
  SP_ERR_DIMENSION_MISMATCH = 10,
  SP_ERR_STAGE_FAILED = 11,
  SP_ERR_UNKNOWN = 12
} sp_status;

SP_API const char* sp_status_name(sp_status status);
/* Message for the calling thread's most recent failure ("" if none). */
SP_API const char* sp_last_error(void);
SP_API const char* sp_version(void);

/* Scale s, unit quaternion (w,x,y,z) and pre-scale translation t; the
 * transform acts as p -> s * (R p + t). */
typedef struct sp_sim3 {
  double scale;
  double quat_wxyz[4];
  double translation[3];
} sp_sim3;

typedef struct sp_scene sp_scene;
typedef struct sp_pipeline sp_pipeline;

/* ---- synthetic scenes ---- */
SP_API sp_status sp_scene_create(const char* config_path, sp_scene** out);
SP_API sp_status sp_scene_create_default(uint64_t seed, sp_scene** out);
SP_API void sp_scene_destroy(sp_scene* scene);
SP_API int sp_scene_view_count(const sp_scene* scene);
SP_API int sp_scene_minutiae_count(const sp_scene* scene);
SP_API sp_status sp_scene_view_pose(const sp_scene* scene, int view, sp_sim3* out);
/* Writes surface PLY + metadata sidecar + per-view PPM/PGM into out_dir. */
SP_API sp_status sp_scene_export(const sp_scene* scene, const char* out_dir);

/* ---- pairwise alignment (Procrustes over oracle pointmaps) ---- */
typedef struct sp_pair_result {
  sp_sim3 transform; /* frame of view_a <- frame of view_b */
  double weighted_residual;
  double inlier_weight_sum;
  double focal_a, focal_b; /* recovered focal lengths, pixels */
} sp_pair_result;

SP_API sp_status sp_align_pair(const sp_scene* scene, int view_a, int view_b,
                               double noise_sigma_mm, uint64_t noise_seed,
                               sp_pair_result* out);

/* ---- registration evaluation ---- */
typedef struct sp_reg_report {
  double d_recovered_px; /* pipeline transform */
  double d_oracle_px;    /* ground-truth transform */
  double d_baseline2d_px;
  int shared_minutiae;
} sp_reg_report;

SP_API sp_status sp_eval_registration(const sp_scene* scene, int view_a, int view_b,
                                      double noise_sigma_mm, uint64_t noise_seed,
                                      sp_reg_report* out);

/* ---- pipeline ---- */
SP_API sp_status sp_pipeline_create(const char* run_config_path, sp_pipeline** out);
/* Minimal config from a scene file plus defaults; out_dir receives artifacts. */
SP_API sp_status sp_pipeline_create_for_scene(const char* scene_config_path,
                                              const char* out_dir, sp_pipeline** out);
SP_API void sp_pipeline_destroy(sp_pipeline* pipeline);
/* Overrides one config entry ("train.iters", "500") before stages run. */
SP_API sp_status sp_pipeline_set(sp_pipeline* pipeline, const char* key, const char* value);
/* Runs every stage up to and including last_stage:
 * scene | pairwise | global | train | segment | eval. NULL means eval. */
SP_API sp_status sp_pipeline_run(sp_pipeline* pipeline, const char* last_stage);
/* Swaps in a trained checkpoint so segment/eval run from persisted inputs. */
SP_API sp_status sp_pipeline_load_checkpoint(sp_pipeline* pipeline, const char* ply_path);
SP_API sp_status sp_pipeline_metric(const sp_pipeline* pipeline, const char* key, double* out);
SP_API sp_status sp_pipeline_manifest_path(const sp_pipeline* pipeline, char* buffer,
                                           size_t buffer_size);
SP_API int sp_pipeline_gaussian_count(const sp_pipeline* pipeline);
SP_API sp_status sp_pipeline_view_pose(const sp_pipeline* pipeline, int view, sp_sim3* out);

/* ---- checkpoint rendering ---- */
/* novel_frames == 0 renders the checkpoint's own training views; otherwise
 * renders that many interpolated novel views. Images land in out_dir. */
SP_API sp_status sp_render_checkpoint(const sp_scene* scene, const char* ckpt_ply,
                                      int novel_frames, const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* SPLATPRINT_H */
