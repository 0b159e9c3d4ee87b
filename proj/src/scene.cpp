// SPDX-License-Identifier: Apache-2.0
#include "semsplat/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Geometry>

#include "semsplat/error.hpp"
#include "semsplat/log.hpp"

namespace semsplat {

GaussianPrimitive GaussianPrimitive::zeros(int class_count) {
  GaussianPrimitive p;
  p.rotation.setZero();
  p.semantic.assign(std::size_t(class_count), 0.0);
  return p;
}

std::string_view param_group_name(ParamGroup g) {
  switch (g) {
    case ParamGroup::position: return "position";
    case ParamGroup::log_scale: return "log_scale";
    case ParamGroup::rotation: return "rotation";
    case ParamGroup::opacity: return "opacity_logit";
    case ParamGroup::color: return "color_logit";
    case ParamGroup::semantic: return "semantic";
  }
  return "?";
}

std::span<double> field(GaussianPrimitive& p, ParamGroup g) {
  switch (g) {
    case ParamGroup::position: return {p.position.data(), 3};
    case ParamGroup::log_scale: return {p.log_scale.data(), 3};
    case ParamGroup::rotation: return {p.rotation.data(), 4};
    case ParamGroup::opacity: return {&p.opacity_logit, 1};
    case ParamGroup::color: return {p.color_logit.data(), 3};
    case ParamGroup::semantic: return {p.semantic.data(), p.semantic.size()};
  }
  return {};
}

std::span<const double> field(const GaussianPrimitive& p, ParamGroup g) {
  return field(const_cast<GaussianPrimitive&>(p), g);
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

Mat3 quaternion_to_matrix(const Vec4& q_raw) {
  const Vec4 q = q_raw / q_raw.norm();
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
      2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
      2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

ActivatedGaussian activate(const GaussianPrimitive& p, std::size_t index) {
  auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  for (ParamGroup g : kParamGroups) {
    if (!finite(field(p, g))) {
      std::ostringstream msg;
      msg << "primitive " << index << ": non-finite " << param_group_name(g);
      throw InvalidParameter(msg.str());
    }
  }
  const double qn = p.rotation.norm();
  if (!(qn > 0.0)) {
    throw InvalidParameter("primitive " + std::to_string(index) + ": zero-length rotation quaternion");
  }
  ActivatedGaussian a;
  a.position = p.position;
  a.scale = p.log_scale.array().exp();
  a.rotation = p.rotation / qn;
  a.opacity = sigmoid(p.opacity_logit);
  a.color = Vec3(sigmoid(p.color_logit[0]), sigmoid(p.color_logit[1]), sigmoid(p.color_logit[2]));
  a.semantic = p.semantic;
  return a;
}

int argmax_first(std::span<const double> values) {
  int best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[std::size_t(best)]) best = int(i);
  }
  return best;
}

int dominant_class(const GaussianPrimitive& p) { return argmax_first(p.semantic); }

std::vector<Rgb8> make_class_palette(int class_count) {
  // Golden-ratio hue walk in HSV; fixed saturation/value bands for contrast.
  std::vector<Rgb8> palette;
  palette.reserve(std::size_t(std::max(class_count, 0)));
  for (int c = 0; c < class_count; ++c) {
    const double h = std::fmod(c * 0.618033988749895, 1.0) * 6.0;
    const double s = (c % 2 == 0) ? 0.65 : 0.9;
    const double v = (c % 3 == 0) ? 0.95 : 0.75;
    const int sector = int(h) % 6;
    const double f = h - std::floor(h);
    const double pp = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (sector) {
      case 0: r = v, g = t, b = pp; break;
      case 1: r = q, g = v, b = pp; break;
      case 2: r = pp, g = v, b = t; break;
      case 3: r = pp, g = q, b = v; break;
      case 4: r = t, g = pp, b = v; break;
      default: r = v, g = pp, b = q; break;
    }
    auto to8 = [](double x) { return std::uint8_t(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); };
    palette.push_back({to8(r), to8(g), to8(b)});
  }
  return palette;
}

void GaussianScene::validate() const {
  if (class_count <= 0) throw InvalidParameter("class_count must be positive");
  for (std::size_t i = 0; i < primitives.size(); ++i) {
    if (primitives[i].semantic.size() != std::size_t(class_count)) {
      std::ostringstream msg;
      msg << "primitive " << i << ": semantic length " << primitives[i].semantic.size()
          << " != class_count " << class_count;
      throw InvalidParameter(msg.str());
    }
    activate(primitives[i], i);
  }
}

void Camera::validate(double tolerance) const {
  if (!(fx > 0) || !(fy > 0)) throw InvalidParameter("camera focal lengths must be positive");
  if (width <= 0 || height <= 0) throw InvalidParameter("camera dimensions must be positive");
  if (!(cx > 0 && cx < width) || !(cy > 0 && cy < height)) {
    throw InvalidParameter("camera principal point outside the image");
  }
  if (!rotation.allFinite() || !translation.allFinite()) {
    throw InvalidParameter("camera pose is non-finite");
  }
  const double err = (rotation * rotation.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (err > tolerance || rotation.determinant() < 0) {
    std::ostringstream msg;
    msg << "camera rotation is not orthonormal (max deviation " << err << ")";
    throw InvalidParameter(msg.str());
  }
}

Camera Camera::resized(int new_width, int new_height) const {
  Camera c = *this;
  const double sx = double(new_width) / width;
  const double sy = double(new_height) / height;
  // Pixel centers sit on integer coordinates, so the grid maps as (x + 0.5) * s - 0.5.
  c.fx = fx * sx;
  c.fy = fy * sy;
  c.cx = (cx + 0.5) * sx - 0.5;
  c.cy = (cy + 0.5) * sy - 0.5;
  c.width = new_width;
  c.height = new_height;
  return c;
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fov_x_deg,
                       int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  const Vec3 right = forward.cross(up).normalized();
  const Vec3 down = forward.cross(right);
  Camera c;
  c.rotation.row(0) = right.transpose();
  c.rotation.row(1) = down.transpose();
  c.rotation.row(2) = forward.transpose();
  c.translation = -c.rotation * eye;
  c.width = width;
  c.height = height;
  c.fx = c.fy = 0.5 * width / std::tan(0.5 * fov_x_deg * M_PI / 180.0);
  c.cx = 0.5 * (width - 1);
  c.cy = 0.5 * (height - 1);
  return c;
}

GaussianScene edit_scene(const GaussianScene& scene, EditMode mode, const std::set<int>& classes,
                         const Vec3& highlight_color) {
  for (int c : classes) {
    if (c < 0 || c >= scene.class_count) {
      throw InvalidParameter("edit class " + std::to_string(c) + " outside [0, " +
                             std::to_string(scene.class_count) + ")");
    }
  }
  GaussianScene out(scene.class_count);
  out.class_palette = scene.class_palette;
  out.primitives.reserve(scene.size());
  for (const auto& p : scene.primitives) {
    const bool match = classes.contains(dominant_class(p));
    switch (mode) {
      case EditMode::extract:
        if (match) out.primitives.push_back(p);
        break;
      case EditMode::remove:
        if (!match) out.primitives.push_back(p);
        break;
      case EditMode::highlight: {
        GaussianPrimitive q = p;
        if (match) {
          for (int k = 0; k < 3; ++k) {
            const double c = sigmoid(p.color_logit[k]);
            q.color_logit[k] = logit((1.0 - kHighlightBlend) * c + kHighlightBlend * highlight_color[k]);
          }
        }
        out.primitives.push_back(std::move(q));
        break;
      }
    }
  }
  if (mode != EditMode::highlight && out.empty() && !scene.empty()) {
    warn(mode == EditMode::extract ? "extract produced an empty scene" : "delete removed every primitive");
  }
  return out;
}

}  // namespace semsplat
