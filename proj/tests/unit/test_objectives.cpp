#include <memory>
#include <random>

#include "doctest.h"

#include "bodyfit/certify.hpp"
#include "bodyfit/errors.hpp"
#include "bodyfit/gradcheck.hpp"
#include "bodyfit/objectives.hpp"
#include "bodyfit/synthlab.hpp"

using namespace bodyfit;

namespace {

const Bundle& bundle() {
  static const Bundle b = [] {
    ScenarioSpec spec;
    spec.seed = 11;
    spec.frames = 3;
    spec.resolution = 64;
    return synthesize_bundle(spec, 250);
  }();
  return b;
}

ObjectiveContext context(bool with_target) {
  ObjectiveContext ctx;
  ctx.model = &bundle().model;
  ctx.camera = bundle().camera;
  ctx.observations = std::make_shared<const std::vector<FrameObservation>>(bundle().observations);
  if (with_target) ctx.target = bundle().ground_truth;
  ctx.softness_tau = 2.0;
  return ctx;
}

SubjectParams perturbed(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  SubjectParams s = bundle().ground_truth;
  for (int i = 0; i < s.beta.size(); ++i) s.beta[i] += 0.1 * n(rng);
  for (Eigen::Index i = 0; i < s.offsets.size(); ++i) s.offsets.data()[i] += 0.002 * n(rng);
  for (auto& f : s.frames)
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) f.theta.data()[i] += 0.05 * n(rng);
  return s;
}

}  // namespace

TEST_CASE("term names round trip") {
  for (Term t : kAllTerms) CHECK(term_from_name(term_name(t)) == t);
  CHECK_THROWS_AS(term_from_name("no_such_term"), ConfigError);
  CHECK(term_is_supervised(Term::kTPose));
  CHECK_FALSE(term_is_supervised(Term::kPoseConsistency));
  CHECK_FALSE(term_is_per_frame(Term::kPoseConsistency));
  CHECK(term_uses_observations(Term::kSilhouette));
}

TEST_CASE("pose consistency against a direct formula") {
  const SubjectParams s = perturbed(1);
  const int J = bundle().model.joint_count();
  double expect = 0.0;
  for (int j = 1; j < J; ++j) {
    for (int k = 0; k < 3; ++k) {
      double m = 0.0;
      for (const auto& f : s.frames) m += f.theta(j, k);
      m /= 3.0;
      for (const auto& f : s.frames) expect += (f.theta(j, k) - m) * (f.theta(j, k) - m);
    }
  }
  expect /= 3.0 * 3.0 * (J - 1);
  CHECK(reg_pose_consistency(bundle().model, s) == doctest::Approx(expect).epsilon(1e-12));

  // The root is free and identical poses cost nothing.
  SubjectParams same = s;
  for (auto& f : same.frames) {
    const Vec3 root = f.theta.row(0).transpose();
    f.theta = s.frames[0].theta;
    f.theta.row(0) = root.transpose();
  }
  CHECK(reg_pose_consistency(bundle().model, same) < 1e-30);
  SubjectParams one = zero_subject(bundle().model, 1);
  CHECK(reg_pose_consistency(bundle().model, one) == 0.0);
}

TEST_CASE("composed objective equals the weighted sum of its terms") {
  ObjectiveSpec spec;
  spec.terms = {{Term::kKeypoints2D, 0.5}, {Term::kLaplacian, 3.0}, {Term::kPoseConsistency, 2.0}};
  const ComposedObjective obj = compose(spec, context(false), 3);
  const SubjectParams s = perturbed(2);
  const auto& m = bundle().model;
  double kp = 0.0;
  for (std::size_t f = 0; f < 3; ++f) kp += loss_keypoints2d(m, bundle().camera, s, bundle().observations[f], f);
  const double expect = 0.5 * kp + 3.0 * reg_laplacian(m, s) + 2.0 * reg_pose_consistency(m, s);
  CHECK(obj.evaluate_subject(s, nullptr) == doctest::Approx(expect).epsilon(1e-12));
  const auto values = obj.term_values(s);
  REQUIRE(values.size() == 3);
  CHECK(values[2] == doctest::Approx(reg_pose_consistency(m, s)).epsilon(1e-12));
}

TEST_CASE("composed gradients match central differences") {
  ObjectiveSpec spec;
  spec.terms = {{Term::kTPose, 1.0},     {Term::kPosed, 1.0},    {Term::kKeypoints2D, 0.01},
                {Term::kSymmetry, 1.0},  {Term::kAnchors, 0.01}, {Term::kPoseConsistency, 1.0},
                {Term::kPoseParams, 1.0}};
  const ComposedObjective obj = compose(spec, context(true), 3);
  const ParamVector p = to_param_vector(perturbed(3));
  const auto report = finite_difference_report(obj, p, 1e-6, {.max_per_group = 8, .seed = 1});
  CHECK(report.max_relative_error < 1e-5);
}

TEST_CASE("compose validates the spec") {
  ObjectiveSpec spec;
  spec.terms = {{Term::kTPose, 1.0}};
  CHECK_THROWS_AS(compose(spec, context(false), 3), ConfigError);  // needs a target
  spec.terms = {{Term::kKeypoints2D, 1.0}};
  spec.frames = {5};
  CHECK_THROWS_AS(compose(spec, context(false), 3), ConfigError);
}

TEST_CASE("objective spec json round trip") {
  ObjectiveSpec spec;
  spec.terms = {{Term::kSilhouette, 1.0}, {Term::kPoseConsistency, 0.25}};
  spec.frames = {0, 2};
  const ObjectiveSpec back = objective_spec_from_json(objective_spec_to_json(spec));
  REQUIRE(back.terms.size() == 2);
  CHECK(back.terms[1].term == Term::kPoseConsistency);
  CHECK(back.terms[1].weight == 0.25);
  CHECK(back.frames == spec.frames);
}

TEST_CASE("finite difference checker catches a wrong gradient") {
  ParamVector layout;
  layout.add_group("x", {0.3, -1.2});
  const FunctionObjective bad(layout, [](const ParamVector& p, ParamVector* g) {
    const auto x = p.group("x");
    if (g) {
      g->group("x")[0] = 2 * x[0];
      g->group("x")[1] = 3 * x[1];  // should be 2 x
    }
    return x[0] * x[0] + x[1] * x[1];
  });
  CHECK(finite_difference_check(bad, layout, 1e-6) > 0.1);
}

TEST_CASE("certification flags an injected fault and nothing else") {
  CertifyOptions o;
  o.points = 1;
  o.coordinates_per_group = 8;
  o.silhouette_coordinates_per_group = 4;
  o.inject_fault = Term::kLaplacian;
  for (const TermCheck& c : certify_gradients(o)) CHECK_MESSAGE(c.passed == (c.term != Term::kLaplacian), term_name(c.term));
}
