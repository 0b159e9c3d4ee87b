// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace semsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

inline constexpr int kDefaultClassCount = 150;

/// One optimizable splat, stored in raw (pre-activation) parameters.
///
/// Quaternions are (w, x, y, z). The same struct doubles as the container for
/// per-primitive gradients and optimizer moments, so every field is a plain
/// block of doubles.
struct GaussianPrimitive {
  Vec3 position = Vec3::Zero();
  Vec3 log_scale = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0);
  double opacity_logit = 0.0;
  Vec3 color_logit = Vec3::Zero();
  std::vector<double> semantic;

  static GaussianPrimitive zeros(int class_count);
};

/// Parameter groups in checkpoint declaration order.
enum class ParamGroup { position, log_scale, rotation, opacity, color, semantic };
inline constexpr std::array<ParamGroup, 6> kParamGroups = {
    ParamGroup::position, ParamGroup::log_scale, ParamGroup::rotation,
    ParamGroup::opacity,  ParamGroup::color,     ParamGroup::semantic};

std::string_view param_group_name(ParamGroup g);
std::span<double> field(GaussianPrimitive& p, ParamGroup g);
std::span<const double> field(const GaussianPrimitive& p, ParamGroup g);

struct ActivatedGaussian {
  Vec3 position;
  Vec3 scale;
  Vec4 rotation;  // unit quaternion
  double opacity;
  Vec3 color;
  std::span<const double> semantic;
};

double sigmoid(double x);
/// Inverse sigmoid with the argument clamped to (1e-6, 1 - 1e-6).
double logit(double p);

/// Maps raw parameters to physical quantities. Throws InvalidParameter naming
/// `index` if any raw value is non-finite or the quaternion has zero length.
ActivatedGaussian activate(const GaussianPrimitive& p, std::size_t index = 0);

/// Rotation matrix of a (not necessarily normalized) quaternion.
Mat3 quaternion_to_matrix(const Vec4& q);

/// argmax of the semantic logits; ties resolve to the lowest index.
int dominant_class(const GaussianPrimitive& p);
int argmax_first(std::span<const double> values);

struct Rgb8 {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb8&) const = default;
};

/// Deterministic, well-separated colors for class visualization.
std::vector<Rgb8> make_class_palette(int class_count);

struct GaussianScene {
  std::vector<GaussianPrimitive> primitives;
  int class_count = kDefaultClassCount;
  std::vector<Rgb8> class_palette;

  GaussianScene() = default;
  explicit GaussianScene(int classes) : class_count(classes), class_palette(make_class_palette(classes)) {}

  std::size_t size() const { return primitives.size(); }
  bool empty() const { return primitives.empty(); }
  /// Throws InvalidParameter on inconsistent class counts or non-finite values.
  void validate() const;
};

/// Pinhole camera. Pixel (x, y) has its center at continuous coordinate (x, y),
/// camera frame is x right, y down, z forward.
struct Camera {
  double fx = 1, fy = 1, cx = 0.5, cy = 0.5;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  int width = 1;
  int height = 1;

  /// Throws InvalidParameter when intrinsics are out of range or rotation is
  /// not orthonormal within `tolerance`.
  void validate(double tolerance = 1e-9) const;
  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }
  Vec3 center() const { return -rotation.transpose() * translation; }
  /// Unit-depth ray direction (z = 1) through pixel coordinate (u, v), camera frame.
  Vec3 pixel_ray(double u, double v) const { return {(u - cx) / fx, (v - cy) / fy, 1.0}; }
  /// Same view at a different resolution; intrinsics scale with the pixel grid.
  Camera resized(int new_width, int new_height) const;

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_x_deg,
                        int width, int height);
};

enum class EditMode { extract, remove, highlight };

/// Semantic editing. `extract` keeps primitives whose dominant class is in
/// `classes`, `remove` drops them, `highlight` blends their activated color
/// 70% toward `highlight_color` and leaves every other primitive untouched.
GaussianScene edit_scene(const GaussianScene& scene, EditMode mode, const std::set<int>& classes,
                         const Vec3& highlight_color = Vec3(1.0, 0.0, 0.0));

inline constexpr double kHighlightBlend = 0.7;

}  // namespace semsplat
