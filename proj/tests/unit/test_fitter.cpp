#include <cmath>
#include <numbers>

#include "doctest.h"

#include "bodyfit/errors.hpp"
#include "bodyfit/fitter.hpp"
#include "bodyfit/synthlab.hpp"

using namespace bodyfit;

namespace {

const Bundle& bundle() {
  static const Bundle b = [] {
    ScenarioSpec spec;
    spec.seed = 21;
    spec.frames = 2;
    spec.resolution = 128;
    return synthesize_bundle(spec, 250);
  }();
  return b;
}

FitConfig quick_config() {
  FitConfig c = default_fit_config(bundle().model.joint_count());
  for (auto& s : c.stages) s.steps = std::min(s.steps, 8);
  c.render_resolution = 64;
  return c;
}

FitResult run(const FitConfig& c, const FitOptions& o = {}) {
  const Bundle& b = bundle();
  return fit(b.model, b.camera, b.observations, c, o);
}

}  // namespace

TEST_CASE("root yaw helpers invert each other") {
  for (double yaw : {-3.0, -1.0, 0.0, 0.4, 2.5, std::numbers::pi}) {
    CHECK(yaw_from_root(root_for_yaw(yaw)) == doctest::Approx(yaw).epsilon(1e-12));
  }
}

TEST_CASE("config json round trip and validation") {
  const FitConfig c = default_fit_config();
  const FitConfig back = fit_config_from_json(fit_config_to_json(c));
  CHECK(fit_config_to_json(back) == fit_config_to_json(c));
  FitConfig bad = c;
  bad.stages[0].step_sizes["elbows"] = 0.1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.stages.clear();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("init_poses recovers the turnaround yaw") {
  const Bundle& b = bundle();
  const auto poses = init_poses(b.model, b.camera, b.observations, default_fit_config());
  REQUIRE(poses.size() == 2);
  for (std::size_t f = 0; f < 2; ++f) {
    const double d = yaw_from_root(poses[f].theta.row(0).transpose()) -
                     yaw_from_root(b.ground_truth.frames[f].theta.row(0).transpose());
    CHECK(std::abs(std::remainder(d, 2 * std::numbers::pi)) < 0.5);
  }
}

TEST_CASE("init_poses places the subject at the right depth") {
  const Bundle& b = bundle();
  const auto poses = init_poses(b.model, b.camera, b.observations, default_fit_config());
  for (std::size_t f = 0; f < 2; ++f) {
    const double z = b.ground_truth.frames[f].trans.z();
    CHECK(std::abs(poses[f].trans.z() - z) < 0.15 * z);
  }
}

TEST_CASE("init_poses rejects a frame without confident keypoints") {
  const Bundle& b = bundle();
  auto obs = b.observations;
  for (auto& k : obs[1].keypoints) k.confidence = 0.0;
  CHECK_THROWS_AS(init_poses(b.model, b.camera, obs, default_fit_config()), InitializationError);
}

TEST_CASE("fit is deterministic and best-so-far never increases") {
  const FitResult a = run(quick_config());
  const FitResult b = run(quick_config());
  CHECK(fit_result_to_json(a).dump() == fit_result_to_json(b).dump());
  CHECK(a.stage_params.size() == a.stages.size());
  for (const auto& st : a.stages) {
    for (std::size_t i = 1; i < st.best.size(); ++i) CHECK(st.best[i] <= st.best[i - 1]);
  }
  CHECK(a.frame_iou.size() == 2);
}

TEST_CASE("frozen poses stay bit-identical") {
  const Bundle& b = bundle();
  SubjectParams init = zero_subject(b.model, 2);
  init.frames = b.ground_truth.frames;
  FitOptions o;
  o.initial = init;
  o.freeze_poses = true;
  const FitResult r = run(quick_config(), o);
  for (std::size_t f = 0; f < 2; ++f) {
    CHECK(r.params.frames[f].theta == b.ground_truth.frames[f].theta);
    CHECK(r.params.frames[f].trans == b.ground_truth.frames[f].trans);
  }
  CHECK(r.params.beta != init.beta);
}

TEST_CASE("a diverging stage is rolled back to its best iterate") {
  FitConfig c = quick_config();
  for (auto& [k, v] : c.stages.back().step_sizes) v = 1e3;
  const FitResult r = run(c);
  CHECK(r.diverged);
  CHECK(r.stages.back().diverged);
  CHECK(r.params.beta.allFinite());
  CHECK(r.params.offsets.allFinite());
  CHECK(r.params.offsets.rowwise().norm().maxCoeff() <= kMaxOffsetNorm + 1e-12);
  CHECK(r.frame_iou.size() == 2);
}

TEST_CASE("refine with zero steps returns its input") {
  const Bundle& b = bundle();
  SubjectParams start = zero_subject(b.model, 2);
  start.frames = b.ground_truth.frames;
  const FitResult r = refine(b.model, b.camera, b.observations, start, 0, quick_config());
  CHECK(r.params.beta == start.beta);
  CHECK(r.params.offsets == start.offsets);
  CHECK(r.params.frames[1].theta == start.frames[1].theta);
  CHECK_THROWS_AS(refine(b.model, b.camera, b.observations, start, -1, quick_config()), InvalidArgument);
}

TEST_CASE("a spent budget stops the fit") {
  FitConfig c = quick_config();
  c.budget_seconds = 1e-9;
  const FitResult r = run(c);
  CHECK(r.budget_exhausted);
  CHECK(r.params.beta.allFinite());
}
