// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>

#include "semsplat/geometry.hpp"
#include "semsplat/image.hpp"
#include "semsplat/optim.hpp"
#include "semsplat/scene.hpp"

namespace semsplat {

/// Little-endian PFM ("Pf" gray or "PF" color). Rows are stored bottom-up on disk.
Image read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const Image& image);

/// 8-bit PNG or binary PPM. Values are clamped to [0, 1] and rounded on write.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& image);
Image read_ppm(const std::filesystem::path& path);
void write_ppm(const std::filesystem::path& path, const Image& image);
/// Dispatches on the extension (.png, .ppm, .pfm).
Image read_image(const std::filesystem::path& path);

/// "SEMF", u32 height, u32 width, u32 channels, then H*W*C little-endian f32.
Image read_semf(const std::filesystem::path& path);
void write_semf(const std::filesystem::path& path, const Image& logits);

/// Text camera: "fx fy cx cy" on the first line, a row-major 3x4 world-to-camera
/// pose on the next three, then "width height".
Camera read_camera(const std::filesystem::path& path, double orthonormal_tolerance = 1e-6);
void write_camera(const std::filesystem::path& path, const Camera& camera);

/// "AGSC" checkpoint: magic, u32 version, u32 count, u32 class_count, then per
/// primitive the f32 fields position, log_scale, rotation, opacity, color, semantic.
void write_checkpoint(const std::filesystem::path& path, const GaussianScene& scene);
GaussianScene read_checkpoint(const std::filesystem::path& path);

/// "AGOS" sidecar with the step counter, learning rates and f64 moments.
void write_optimizer_state(const std::filesystem::path& path, const OptimizerState& state, int class_count);
OptimizerState read_optimizer_state(const std::filesystem::path& path);

enum class PlyFormat { ascii, binary_little_endian };

void write_ply(const std::filesystem::path& path, const TriangleMesh& mesh, PlyFormat format = PlyFormat::binary_little_endian);
void write_ply(const std::filesystem::path& path, const PointCloud& cloud, PlyFormat format = PlyFormat::binary_little_endian);
TriangleMesh read_ply_mesh(const std::filesystem::path& path);
/// Reads x/y/z plus red/green/blue and class when present.
PointCloud read_ply_points(const std::filesystem::path& path);

}  // namespace semsplat
