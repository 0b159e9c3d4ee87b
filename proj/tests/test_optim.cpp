// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "semsplat/error.hpp"
#include "semsplat/optim.hpp"
#include "support.hpp"

using namespace semsplat;

namespace {

GaussianPrimitive identity(int classes) {
  GaussianPrimitive p = GaussianPrimitive::zeros(classes);
  p.rotation = Vec4(1, 0, 0, 0);
  return p;
}

GaussianScene one_primitive(int classes = 2) {
  GaussianScene s(classes);
  s.primitives.push_back(identity(classes));
  return s;
}

std::vector<GaussianPrimitive> uniform_gradient(const GaussianScene& s, double g) {
  std::vector<GaussianPrimitive> out(s.size(), GaussianPrimitive::zeros(s.class_count));
  for (auto& p : out)
    for (ParamGroup grp : kParamGroups)
      for (double& v : field(p, grp)) v = g;
  return out;
}

}  // namespace

TEST_CASE("first adam step moves each coordinate by the learning rate") {
  GaussianScene s = one_primitive();
  TrainConfig cfg;
  OptimizerState st = make_optimizer_state(s, cfg, 1.0);
  const GaussianPrimitive before = s.primitives[0];
  adam_step(s, st, uniform_gradient(s, 0.5), 1);
  CHECK(st.step == 1);
  CHECK(s.primitives[0].position.x() == doctest::Approx(before.position.x() - group_lr(st, ParamGroup::position)));
  CHECK(s.primitives[0].opacity_logit == doctest::Approx(-cfg.lr_opacity).epsilon(1e-10));
  CHECK(s.primitives[0].semantic[1] == doctest::Approx(-cfg.lr_semantic).epsilon(1e-10));
  CHECK(s.primitives[0].rotation.norm() == doctest::Approx(1.0));
}

TEST_CASE("adam step with zero gradient leaves parameters unchanged") {
  GaussianScene s = one_primitive();
  s.primitives[0].position = Vec3(1, 2, 3);
  OptimizerState st = make_optimizer_state(s, TrainConfig{}, 1.0);
  adam_step(s, st, uniform_gradient(s, 0.0));
  CHECK(s.primitives[0].position == Vec3(1, 2, 3));
}

TEST_CASE("adam step rejects non-finite gradients and mismatched moments") {
  GaussianScene s = one_primitive();
  OptimizerState st = make_optimizer_state(s, TrainConfig{}, 1.0);
  auto g = uniform_gradient(s, 0.1);
  g[0].color_logit.y() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(adam_step(s, st, g, 7), NumericalFailure);
  OptimizerState wrong = st;
  wrong.append_zero(2);
  CHECK_THROWS_AS(adam_step(s, wrong, uniform_gradient(s, 0.1)), ContractViolation);
}

TEST_CASE("position learning rate decays log-linearly") {
  TrainConfig cfg;
  cfg.total_iters = 100;
  CHECK(position_lr(cfg, 2.0, 0) == doctest::Approx(2 * cfg.lr_position_init));
  CHECK(position_lr(cfg, 2.0, 100) == doctest::Approx(2 * cfg.lr_position_final));
  CHECK(position_lr(cfg, 1.0, 50) == doctest::Approx(std::sqrt(cfg.lr_position_init * cfg.lr_position_final)));
}

TEST_CASE("camera extent") {
  const Camera c = test::frontal_camera(4, 4, 4);
  CHECK(camera_extent({c}) == 1.0);
  Camera a = c, b = c;
  a.translation = Vec3(-1, 0, 0);
  b.translation = Vec3(1, 0, 0);
  CHECK(camera_extent({a, b}) == doctest::Approx(1.1));
}

TEST_CASE("densification clones small high-gradient primitives") {
  GaussianScene s = one_primitive();
  s.primitives[0].log_scale = Vec3::Constant(std::log(0.001));
  s.primitives[0].opacity_logit = logit(0.5);
  TrainConfig cfg;
  cfg.min_primitives = 0;
  OptimizerState st = make_optimizer_state(s, cfg, 1.0);
  DensifyStats stats;
  stats.reset(1);
  stats.grad_sum[0] = 1.0;
  stats.count[0] = 1;
  const DensifyResult r = densify_and_prune(s, st, stats, cfg, 1.0, 0);
  CHECK(r.cloned == 1);
  CHECK(s.size() == 2);
  CHECK(st.first.size() == 2);
  CHECK(s.primitives[1].position == s.primitives[0].position);
  CHECK(stats.grad_sum.size() == 2);
}

TEST_CASE("densification splits large primitives into two smaller ones") {
  GaussianScene s = one_primitive();
  s.primitives[0].log_scale = Vec3::Constant(std::log(0.5));
  s.primitives[0].opacity_logit = logit(0.5);
  TrainConfig cfg;
  cfg.min_primitives = 0;
  OptimizerState st = make_optimizer_state(s, cfg, 1.0);
  DensifyStats stats;
  stats.reset(1);
  stats.grad_sum[0] = 1.0;
  stats.count[0] = 1;
  const DensifyResult r = densify_and_prune(s, st, stats, cfg, 1.0, 3);
  CHECK(r.split == 1);
  REQUIRE(s.size() == 2);
  for (const auto& p : s.primitives) CHECK(std::exp(p.log_scale.x()) == doctest::Approx(0.5 / 1.6));
}

TEST_CASE("pruning respects the primitive floor") {
  GaussianScene s(2);
  for (int i = 0; i < 20; ++i) {
    GaussianPrimitive p = identity(2);
    p.opacity_logit = logit(i < 10 ? 0.001 + 1e-5 * i : 0.5);
    s.primitives.push_back(p);
  }
  TrainConfig cfg;
  OptimizerState st = make_optimizer_state(s, cfg, 1.0);
  DensifyStats stats;
  stats.reset(20);
  const DensifyResult r = densify_and_prune(s, st, stats, cfg, 1.0, 0);
  CHECK(r.pruned == 4);
  CHECK(s.size() == 16);
  // The most opaque of the low-opacity candidates survive.
  int low = 0;
  for (const auto& p : s.primitives) low += sigmoid(p.opacity_logit) < 0.005;
  CHECK(low == 6);
  cfg.min_primitives = 0;
  densify_and_prune(s, st, stats, cfg, 1.0, 0);
  CHECK(s.size() == 10);
}

TEST_CASE("densify schedule") {
  TrainConfig cfg;
  CHECK_FALSE(densify_due(cfg, 300));
  CHECK(densify_due(cfg, 600));
  CHECK_FALSE(densify_due(cfg, 5100));
}

namespace {

std::vector<TrainView> overfit_views(GaussianScene& init) {
  std::mt19937_64 rng(21);
  const Camera cam = test::frontal_camera(32, 32, 40);
  Image target(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) {
      target.at(x, y, 0) = x < 16 ? 0.8 : 0.2;
      target.at(x, y, 1) = 0.3 + 0.4 * y / 31.0;
      target.at(x, y, 2) = 0.5;
    }
  init = GaussianScene(3);
  for (int i = 0; i < 40; ++i) {
    GaussianPrimitive p = identity(3);
    p.position = Vec3(test::uniform(rng, -0.4, 0.4), test::uniform(rng, -0.4, 0.4), test::uniform(rng, 1.9, 2.1));
    p.log_scale = Vec3::Constant(std::log(0.12));
    p.opacity_logit = logit(0.3);
    init.primitives.push_back(p);
  }
  Image logits(32, 32, 3);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) logits.at(x, y, x < 16 ? 0 : 1) = 6.0;
  Image prior(32, 32, 1, 2.0);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) prior.at(x, y) += 0.01 * x;
  return {TrainView{cam, target, PriorBundle::derive(logits, prior)}};
}

}  // namespace

TEST_CASE("training overfits a single view") {
  GaussianScene init;
  const auto views = overfit_views(init);
  TrainConfig cfg;
  cfg.total_iters = 500;
  cfg.guidance_start_iter = 200;
  cfg.densify_from_iter = 100;
  cfg.densify_until_iter = 400;
  cfg.densify_interval = 100;
  TrainOptions opt;
  opt.extent = 1.0;
  const TrainResult r = train(init, views, cfg, opt);
  REQUIRE(r.log.rows.size() == 500);
  CHECK(r.log.rows.front().iteration == 1);
  CHECK_FALSE(r.log.rows.front().guidance_active);
  CHECK(r.log.rows.back().guidance_active);
  CHECK(r.log.rows.back().l_rgb < 0.5 * r.log.rows.front().l_rgb);
  CHECK(r.log.rows.back().l_sem < r.log.rows.front().l_sem);
  r.state.audit(r.scene);
}

TEST_CASE("zero iterations return the initial scene") {
  GaussianScene init;
  const auto views = overfit_views(init);
  TrainConfig cfg;
  cfg.total_iters = 0;
  const TrainResult r = train(init, views, cfg);
  CHECK(r.log.rows.empty());
  REQUIRE(r.scene.size() == init.size());
  for (std::size_t i = 0; i < init.size(); ++i) CHECK(r.scene.primitives[i].position == init.primitives[i].position);
}

TEST_CASE("training rejects an empty view list") {
  GaussianScene s = one_primitive();
  CHECK_THROWS_AS(train(s, {}, TrainConfig{}), Error);
}
