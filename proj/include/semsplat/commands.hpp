// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semsplat/config.hpp"
#include "semsplat/geometry.hpp"
#include "semsplat/mesh.hpp"
#include "semsplat/optim.hpp"
#include "semsplat/priors.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

namespace fs = std::filesystem;

/// Contents of a synthesized (or hand-made) dataset's meta.txt and split.txt.
struct DatasetMeta {
  int class_count = 0;
  int width = 0, height = 0;
  std::uint64_t seed = 0;
  Vec3 bounds_lo = Vec3::Zero(), bounds_hi = Vec3::Zero();
  std::vector<Box> boxes;
  std::vector<int> train_views, test_views;
};

DatasetMeta read_dataset_meta(const fs::path& dataset);

/// Defaults, then the key=value file, then explicit overrides, then the seed.
TrainConfig resolve_config(const std::optional<fs::path>& config_file, const std::map<std::string, std::string>& overrides,
                           std::optional<std::uint64_t> seed);

struct SynthParams {
  std::uint64_t seed = 0;
  int box_count = 4;
  int class_count = 0;  // 0: one class per surface group, 6 + box_count
  int width = 320, height = 240;
  int views = 12;
  int test_every = 3;  // every third view is held out
  std::size_t points = 10000;
  int threads = 1;
};

void cmd_synth(const fs::path& out, const SynthParams& params);

/// One primitive per point: isotropic scale from the mean 3-NN distance,
/// opacity 0.1, semantic logits one-hot * 2 at the point's class (zeros when
/// the cloud carries no classes).
GaussianScene init_scene_from_points(const PointCloud& cloud, int class_count, int threads = 1);

struct TrainParams {
  fs::path dataset, out;
  TrainConfig config;
  bool disable_sem = false, disable_depth = false, disable_normal = false;
  int threads = 1;
};

struct TrainArtifacts {
  fs::path checkpoint, log;
  TrainResult result;
  TrainConfig resolved;
};

TrainConfig apply_ablation_flags(TrainConfig config, bool disable_sem, bool disable_depth, bool disable_normal);

TrainArtifacts cmd_train(const TrainParams& params);

struct RenderParams {
  fs::path checkpoint, dataset, out;
  std::vector<int> views;  // empty = every view
  int threads = 1;
};

void cmd_render(const RenderParams& params);
void render_views(const GaussianScene& scene, const fs::path& dataset, const std::vector<int>& views, const fs::path& out,
                  int threads);

/// Rendered depth divided by accumulated opacity, zero where opacity < 0.5.
Image fusion_depth(const GaussianScene& scene, const Camera& camera, int threads = 1);

TriangleMesh fuse_depth_maps(const std::vector<Camera>& cameras, const std::vector<Image>& depths, const Vec3& lo,
                             const Vec3& hi, double voxel_size, int threads = 1);

struct MeshParams {
  double voxel_size = kDefaultVoxelSize;
  bool oracle_depth = false;  // fuse the dataset's exact depth instead of renders
  int threads = 1;
};

/// Fuses training-view depth into a TSDF over the dataset bounds and extracts its surface.
TriangleMesh extract_mesh(const GaussianScene& scene, const fs::path& dataset, const MeshParams& params);

struct EvalParams {
  fs::path checkpoint, dataset, out;
  double threshold = kDefaultFScoreThreshold;
  double voxel_size = kDefaultVoxelSize;
  std::size_t samples = 200000;
  bool oracle_depth = false;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct ViewMetrics {
  int view = 0;
  double psnr = 0, ssim = 0;
};

struct EvalResult {
  std::vector<ViewMetrics> views;
  double mean_psnr = 0, mean_ssim = 0;
  std::optional<GeometryReport> geometry;
};

EvalResult evaluate_scene(const GaussianScene& scene, const EvalParams& params);
/// Loads params.checkpoint, evaluates it and writes eval.csv (plus geometry.txt
/// and geometry.csv when the dataset has gt_mesh.ply) into params.out.
EvalResult cmd_eval(const EvalParams& params);

struct EditParams {
  fs::path checkpoint, out;
  std::optional<fs::path> dataset;  // re-render when present
  EditMode mode = EditMode::extract;
  std::set<int> classes;
  Vec3 color = Vec3(1, 0, 0);
  std::vector<int> views;
  int threads = 1;
};

GaussianScene cmd_edit(const EditParams& params);

struct AblationParams {
  fs::path dataset, out;
  TrainConfig config;
  EvalParams eval;
  int threads = 1;
};

struct AblationRow {
  std::string name;
  fs::path checkpoint;
  EvalResult eval;
};

/// base, +sem, +depth, +normals: each rung enables one more loss group, all
/// with the same seed. Writes ablation.csv into params.out.
std::vector<AblationRow> cmd_ablate(const AblationParams& params);

std::string ablation_table_csv(const std::vector<AblationRow>& rows);

/// Parses argv and dispatches. Returns the process exit code: 0 success,
/// 2 config error, 3 data error, 4 numerical failure, 1 anything else.
int run_cli(int argc, char** argv);

}  // namespace semsplat
