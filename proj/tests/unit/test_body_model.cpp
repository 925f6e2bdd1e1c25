#include <cstdlib>
#include <random>

#include "doctest.h"

#include "bodyfit/body_model.hpp"
#include "bodyfit/errors.hpp"
#include "bodyfit/synthlab.hpp"

using namespace bodyfit;

namespace {

const ModelDefinition& model() {
  static const ModelDefinition m = build_procedural_model(300);
  return m;
}

SubjectParams random_subject(std::uint64_t seed, std::size_t frames) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  SubjectParams s = zero_subject(model(), frames);
  for (int i = 0; i < s.beta.size(); ++i) s.beta[i] = u(rng);
  for (Eigen::Index i = 0; i < s.offsets.size(); ++i) s.offsets.data()[i] = 0.01 * u(rng);
  for (auto& f : s.frames) {
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) f.theta.data()[i] = 0.4 * u(rng);
    f.trans = Vec3(u(rng), u(rng), 3.0);
  }
  return s;
}

}  // namespace

TEST_CASE("procedural model is valid and height normalized") {
  CHECK_NOTHROW(model().validate());
  CHECK(model().joint_count() == 24);
  CHECK(model().vertex_count() >= kMinProceduralVertices);
  const int big = build_procedural_model(2000).vertex_count();
  CHECK(std::abs(big - 2000) < 200);
  CHECK(eye_ankle_span(normalize_height(model())) == doctest::Approx(eye_ankle_span(model())).epsilon(1e-12));
  // Skin weights form a partition of unity.
  CHECK((model().skin_weights.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("zero parameters reproduce the template") {
  const SubjectParams s = zero_subject(model(), 1);
  CHECK((pose_mesh(model(), s, 0) - model().template_vertices).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize_height rescales to the canonical span") {
  ModelDefinition m = model();
  const double span = eye_ankle_span(m);
  m.template_vertices *= 1.3;
  m.shape_dirs *= 1.3;
  const ModelDefinition n = normalize_height(m);
  CHECK(eye_ankle_span(n) == doctest::Approx(span).epsilon(1e-12));
  ModelDefinition flat = model();
  flat.template_vertices.setZero();
  CHECK_THROWS_AS(normalize_height(flat), DegenerateModel);
}

TEST_CASE("joints depend on shape only") {
  SubjectParams s = random_subject(4, 1);
  const Points j = regress_joints(model(), s.beta);
  const Points rest = shaped_tpose(model(), s.beta, Points::Zero(model().vertex_count(), 3));
  CHECK((j - model().joint_regressor * rest).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("param vector round trip") {
  const SubjectParams s = random_subject(5, 3);
  const ParamVector p = to_param_vector(s);
  CHECK(p.has(kShapeGroup));
  CHECK(p.has(pose_group(2)));
  const SubjectParams back = from_param_vector(model(), p);
  CHECK(back.beta == s.beta);
  CHECK(back.offsets == s.offsets);
  CHECK(back.frames[2].theta == s.frames[2].theta);
  CHECK(back.frames[1].trans == s.frames[1].trans);
}

TEST_CASE("check_subject rejects mismatched shapes") {
  SubjectParams s = zero_subject(model(), 2);
  CHECK_NOTHROW(check_subject(model(), s));
  s.beta.resize(3);
  CHECK_THROWS_AS(check_subject(model(), s), Error);
  s = zero_subject(model(), 2);
  s.frames[1].theta.resize(5, 3);
  CHECK_THROWS_AS(check_subject(model(), s), Error);
}

TEST_CASE("unpose inverts pose") {
  const SubjectParams s = random_subject(6, 1);
  const Points posed = pose_mesh(model(), s, 0);
  const Points back = unpose_vertices(model(), posed, s.beta, s.frames[0].theta, s.frames[0].trans);
  CHECK((back - shaped_tpose(model(), s.beta, s.offsets)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("both pose_mesh overloads agree") {
  const SubjectParams s = random_subject(7, 2);
  CHECK(pose_mesh(model(), s, 1) == pose_mesh(model(), s.beta, s.offsets, s.frames[1]));
  CHECK_THROWS(pose_mesh(model(), s, 2));
}

TEST_CASE("keypoints follow the regressor") {
  const SubjectParams s = random_subject(8, 1);
  const Points posed = pose_mesh(model(), s, 0);
  const Points k = regress_keypoints3d(model(), posed);
  CHECK(k.rows() == model().keypoint_count());
  CHECK((k - model().keypoint_regressor * posed).cwiseAbs().maxCoeff() < 1e-12);
}
