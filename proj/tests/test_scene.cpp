// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "semsplat/error.hpp"
#include "semsplat/log.hpp"
#include "semsplat/scene.hpp"
#include "support.hpp"

using namespace semsplat;

namespace {

GaussianPrimitive with_semantic(std::vector<double> s) {
  GaussianPrimitive p;
  p.semantic = std::move(s);
  return p;
}

GaussianScene labelled_scene(const std::vector<int>& classes, int class_count) {
  GaussianScene s(class_count);
  for (std::size_t i = 0; i < classes.size(); ++i) {
    GaussianPrimitive p = GaussianPrimitive::zeros(class_count);
    p.position = Vec3(double(i), 0, 1);
    p.color_logit = Vec3(0.1 * double(i), -0.2, 0.3);
    p.semantic[std::size_t(classes[i])] = 5.0;
    s.primitives.push_back(p);
  }
  return s;
}

}  // namespace

TEST_CASE("activate maps raw parameters to physical ranges") {
  GaussianPrimitive p = GaussianPrimitive::zeros(3);
  p.rotation = Vec4(2, 0, 0, 0);
  const ActivatedGaussian a = activate(p);
  CHECK(a.scale == Vec3(1, 1, 1));
  CHECK(a.opacity == 0.5);
  CHECK(a.rotation == Vec4(1, 0, 0, 0));
  CHECK(a.color == Vec3::Constant(0.5));
}

TEST_CASE("activate rejects non-finite parameters and names the primitive") {
  GaussianPrimitive p = GaussianPrimitive::zeros(2);
  p.log_scale[1] = std::nan("");
  CHECK_THROWS_WITH_AS(activate(p, 42), doctest::Contains("42"), InvalidParameter);
  p = GaussianPrimitive::zeros(2);
  p.rotation = Vec4::Zero();
  CHECK_THROWS_AS(activate(p, 0), InvalidParameter);
}

TEST_CASE("dominant_class takes the first maximum") {
  CHECK(dominant_class(with_semantic({0.1, 3.0, -1.0})) == 1);
  CHECK(dominant_class(with_semantic({2.0, 2.0, 2.0})) == 0);
  std::vector<double> one_hot(150, 0.0);
  one_hot[149] = 1.0;
  CHECK(dominant_class(with_semantic(one_hot)) == 149);
}

TEST_CASE("dominant_class is invariant under constant shifts") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(7);
    for (auto& v : s) v = nd(rng);
    std::vector<double> shifted = s;
    const double c = 10 * nd(rng);
    for (auto& v : shifted) v += c;
    CHECK(dominant_class(with_semantic(s)) == dominant_class(with_semantic(shifted)));
  }
}

TEST_CASE("logit clamps and inverts sigmoid") {
  CHECK(sigmoid(logit(0.3)) == doctest::Approx(0.3).epsilon(1e-14));
  CHECK(std::isfinite(logit(0.0)));
  CHECK(std::isfinite(logit(1.0)));
  CHECK(sigmoid(logit(1.0)) == doctest::Approx(1 - 1e-6));
}

TEST_CASE("quaternion_to_matrix gives orthonormal rotations") {
  std::mt19937_64 rng(9);
  for (int i = 0; i < 20; ++i) {
    const Mat3 r = quaternion_to_matrix(test::random_quaternion(rng) * 3.0);
    CHECK((r * r.transpose() - Mat3::Identity()).norm() < 1e-12);
    CHECK(r.determinant() == doctest::Approx(1.0));
  }
}

TEST_CASE("class palette is deterministic and distinct") {
  const auto a = make_class_palette(150), b = make_class_palette(150);
  CHECK(a == b);
  for (std::size_t i = 1; i < a.size(); ++i) CHECK_FALSE(a[i] == a[i - 1]);
}

TEST_CASE("edit_scene extract and delete partition the primitives") {
  const GaussianScene s = labelled_scene({7, 1, 7, 3, 7, 0, 2, 7, 5, 1}, 10);
  const GaussianScene kept = edit_scene(s, EditMode::extract, {7});
  const GaussianScene dropped = edit_scene(s, EditMode::remove, {7});
  CHECK(kept.size() == 4);
  CHECK(dropped.size() == 6);
  for (const auto& p : kept.primitives) CHECK(dominant_class(p) == 7);
  for (const auto& p : dropped.primitives) CHECK(dominant_class(p) != 7);
  CHECK(kept.class_count == 10);
}

TEST_CASE("edit_scene identities") {
  const GaussianScene s = labelled_scene({0, 1, 2, 3}, 4);
  const GaussianScene all = edit_scene(s, EditMode::extract, {0, 1, 2, 3});
  const GaussianScene none = edit_scene(s, EditMode::remove, {});
  REQUIRE(all.size() == s.size());
  REQUIRE(none.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    CHECK(all.primitives[i].position == s.primitives[i].position);
    CHECK(none.primitives[i].color_logit == s.primitives[i].color_logit);
  }
}

TEST_CASE("edit_scene warns when extract leaves nothing") {
  int warnings = 0;
  auto previous = set_warning_sink([&](std::string_view) { ++warnings; });
  const GaussianScene s = labelled_scene({0, 1}, 3);
  CHECK(edit_scene(s, EditMode::extract, {2}).empty());
  CHECK(warnings == 1);
  set_warning_sink(previous);
}

TEST_CASE("highlight blends matching colors and leaves the rest bit-identical") {
  const GaussianScene s = labelled_scene({0, 1, 0, 2}, 3);
  const Vec3 target(1, 0, 0);
  const GaussianScene h = edit_scene(s, EditMode::highlight, {0}, target);
  REQUIRE(h.size() == s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& a = s.primitives[i];
    const auto& b = h.primitives[i];
    CHECK(a.position == b.position);
    CHECK(a.semantic == b.semantic);
    if (dominant_class(a) == 0) {
      for (int c = 0; c < 3; ++c) {
        const double expect = (1 - kHighlightBlend) * sigmoid(a.color_logit[c]) + kHighlightBlend * target[c];
        CHECK(sigmoid(b.color_logit[c]) == doctest::Approx(expect).epsilon(1e-9));
      }
    } else {
      CHECK(a.color_logit == b.color_logit);
    }
  }
}

TEST_CASE("edit_scene rejects classes out of range") {
  const GaussianScene s = labelled_scene({0, 1}, 3);
  CHECK_THROWS_AS(edit_scene(s, EditMode::extract, {3}), InvalidParameter);
  CHECK_THROWS_AS(edit_scene(s, EditMode::remove, {-1}), InvalidParameter);
}

TEST_CASE("scene validate catches inconsistent class counts") {
  GaussianScene s(4);
  s.primitives.push_back(GaussianPrimitive::zeros(3));
  CHECK_THROWS_AS(s.validate(), InvalidParameter);
}

TEST_CASE("camera look_at and resize") {
  const Camera c = Camera::look_at(Vec3(1, 2, 3), Vec3(1, 2, 10), Vec3(0, -1, 0), 90.0, 64, 48);
  CHECK_NOTHROW(c.validate());
  CHECK((c.center() - Vec3(1, 2, 3)).norm() < 1e-12);
  const Vec3 ahead = c.to_camera(Vec3(1, 2, 5));
  CHECK(ahead.z() == doctest::Approx(2.0));
  CHECK(std::abs(ahead.x()) < 1e-12);
  const Camera half = c.resized(32, 24);
  CHECK(half.fx == doctest::Approx(c.fx / 2));
  // The same world point lands on the same continuous image location, rescaled.
  const Vec3 p = c.to_camera(Vec3(1.5, 2.3, 6));
  const double u = c.fx * p.x() / p.z() + c.cx, uh = half.fx * p.x() / p.z() + half.cx;
  CHECK((uh + 0.5) == doctest::Approx((u + 0.5) / 2));
}

TEST_CASE("camera validate rejects bad intrinsics and rotations") {
  Camera c = test::frontal_camera(8, 8, 10);
  CHECK_NOTHROW(c.validate());
  c.fx = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = test::frontal_camera(8, 8, 10);
  c.rotation(0, 0) = 1.01;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}
