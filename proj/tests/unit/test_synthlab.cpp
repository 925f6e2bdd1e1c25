#include <filesystem>
#include <random>

#include "doctest.h"

#include "bodyfit/errors.hpp"
#include "bodyfit/synthlab.hpp"

using namespace bodyfit;

namespace {

const ModelDefinition& model() {
  static const ModelDefinition m = build_procedural_model(300);
  return m;
}

}  // namespace

TEST_CASE("shape directions are height neutral and translation free") {
  const auto& m = model();
  const double span = eye_ankle_span(m);
  for (int b = 0; b < m.shape_count(); ++b) {
    ModelDefinition shaped = m;
    const Eigen::VectorXd dir = m.shape_dirs.col(b);
    shaped.template_vertices += Eigen::Map<const Points>(dir.data(), m.vertex_count(), 3);
    CHECK(eye_ankle_span(shaped) == doctest::Approx(span).epsilon(1e-9));
    const Eigen::RowVector3d shift = Eigen::Map<const Points>(dir.data(), m.vertex_count(), 3).colwise().mean();
    CHECK(shift.norm() < 1e-12);
  }
}

TEST_CASE("sampled clothing is bounded, symmetric and spares head, hands and feet") {
  const auto& m = model();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SubjectShape s = sample_subject(m, seed);
    CHECK(s.offsets.rowwise().norm().maxCoeff() <= kMaxClothingOffset + 1e-15);
    CHECK((s.beta.array().abs() <= 2.0).all());
    for (const auto& [l, r] : m.symmetry_pairs) {
      CHECK(s.offsets(l, 0) == doctest::Approx(-s.offsets(r, 0)).epsilon(1e-12));
      CHECK(s.offsets(l, 1) == doctest::Approx(s.offsets(r, 1)).epsilon(1e-12));
    }
    for (int v : head_hand_foot_vertices(m)) CHECK(s.offsets.row(v).norm() == 0.0);
  }
  CHECK(sample_subject(m, 4).beta == sample_subject(m, 4).beta);
}

TEST_CASE("point_triangle_distance on known configurations") {
  const Vec3 a(0, 0, 0), b(1, 0, 0), c(0, 1, 0);
  CHECK(point_triangle_distance(Vec3(0.2, 0.2, 3), a, b, c) == doctest::Approx(3.0));
  CHECK(point_triangle_distance(Vec3(-1, 0, 0), a, b, c) == doctest::Approx(1.0));
  CHECK(point_triangle_distance(Vec3(1, 1, 0), a, b, c) == doctest::Approx(std::sqrt(0.5)));
  CHECK(point_triangle_distance(Vec3(2, -1, 0), a, b, c) == doctest::Approx(std::sqrt(2.0)));
  // Degenerate triangles fall back to a segment or a point.
  CHECK(point_triangle_distance(Vec3(0.5, 1, 0), a, b, b) == doctest::Approx(1.0));
  CHECK(point_triangle_distance(Vec3(0, 0, 2), a, a, a) == doctest::Approx(2.0));
}

TEST_CASE("surface distance of a mesh to itself is zero") {
  const auto& m = model();
  const auto d = point_to_surface_distance(m.template_vertices, m.template_vertices, m.faces);
  for (double x : d) CHECK(x < 1e-12);
  Points shifted = m.template_vertices;
  shifted.col(2).array() += 0.01;
  const double e = bidirectional_surface_error(m.template_vertices, m.faces, shifted, m.faces);
  CHECK(e > 0.0);
  CHECK(e <= 10.0 + 1e-9);  // a 1 cm shift moves no vertex farther than 10 mm
}

TEST_CASE("evaluating the ground truth against itself") {
  ScenarioSpec spec;
  spec.seed = 3;
  spec.frames = 2;
  spec.resolution = 128;
  spec.keypoint_noise_px = 0.0;
  const Bundle b = synthesize_bundle(spec, 250);
  const EvaluationReport r = evaluate_fit(b.model, b.camera, b.ground_truth, b.ground_truth, b.observations);
  CHECK(r.mean_mm == 0.0);
  CHECK(r.max_mm == 0.0);
  for (double k : r.keypoint_rmse_px) CHECK(k < 1e-9);
  for (double iou : r.silhouette_iou) CHECK(iou > 0.95);
}

TEST_CASE("scenarios are validated") {
  ScenarioSpec spec;
  spec.frames = 0;
  CHECK_THROWS_AS(spec.validate(), ScenarioError);
  spec = {};
  spec.resolution = 10;
  CHECK_THROWS_AS(spec.validate(), ScenarioError);
  const ScenarioSpec back = scenario_from_json(scenario_to_json(ScenarioSpec{.seed = 9, .frames = 3}));
  CHECK(back.seed == 9);
  CHECK(back.frames == 3);
}

TEST_CASE("turnaround covers the requested yaw range") {
  TurnaroundSpec t;
  t.frames = 4;
  t.jitter = false;
  const auto poses = make_turnaround(24, t);
  REQUIRE(poses.size() == 4);
  for (std::size_t i = 1; i < 4; ++i) {
    const Mat3 a = rodrigues(poses[i - 1].theta.row(0).transpose());
    const Mat3 b = rodrigues(poses[i].theta.row(0).transpose());
    const double step = Eigen::AngleAxisd(a.transpose() * b).angle();
    CHECK(step == doctest::Approx(std::numbers::pi / 2).epsilon(1e-9));
  }
}

TEST_CASE("morph_disc dilates and erodes") {
  SilhouetteImage m(11, 11);
  m.at(5, 5) = 1.0;
  const SilhouetteImage d = morph_disc(m, 2);
  CHECK(d.at(7, 5) == 1.0);
  CHECK(d.at(7, 7) == 0.0);
  CHECK(morph_disc(d, -2).at(5, 5) == 1.0);
  CHECK(morph_disc(d, -2).at(6, 5) == 0.0);
  CHECK(morph_disc(m, 0).values == m.values);
}

TEST_CASE("bundle save and load round trip") {
  ScenarioSpec spec;
  spec.seed = 5;
  spec.frames = 2;
  spec.resolution = 64;
  const Bundle b = synthesize_bundle(spec, 250);
  const auto dir = std::filesystem::temp_directory_path() / "bodyfit_unit_bundle";
  std::filesystem::remove_all(dir);
  save_bundle(b, dir);
  const Bundle back = load_bundle(dir);
  CHECK(back.model.template_vertices == b.model.template_vertices);
  CHECK(back.ground_truth.beta == b.ground_truth.beta);
  CHECK(back.observations.size() == 2);
  CHECK(back.observations[1].mask.values == b.observations[1].mask.values);
  CHECK(back.observations[0].keypoints.size() == b.observations[0].keypoints.size());
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_bundle(dir), IoError);
}
