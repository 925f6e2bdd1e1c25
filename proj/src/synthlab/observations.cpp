#include <cmath>
#include <random>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/mesh.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {

void ScenarioSpec::validate() const {
  if (frames < 1) throw ScenarioError("scenario needs at least one frame");
  if (resolution < 64) throw ScenarioError("scenario resolution must be >= 64");
  if (!(camera_distance > 0.0)) throw ScenarioError("camera distance must be positive");
  if (!(keypoint_noise_px >= 0.0)) throw ScenarioError("keypoint noise must be >= 0");
  if (!std::isfinite(yaw_coverage_deg)) throw ScenarioError("yaw coverage must be finite");
}

nlohmann::json scenario_to_json(const ScenarioSpec& s) {
  return {{"seed", s.seed},
          {"frames", s.frames},
          {"yaw_coverage_deg", s.yaw_coverage_deg},
          {"camera_distance", s.camera_distance},
          {"resolution", s.resolution},
          {"keypoint_noise_px", s.keypoint_noise_px},
          {"corruption_radius", s.corruption_radius},
          {"jitter", s.jitter},
          {"anchors", s.anchors}};
}

ScenarioSpec scenario_from_json(const nlohmann::json& doc) {
  ScenarioSpec s;
  try {
    s.seed = doc.value("seed", s.seed);
    s.frames = doc.value("frames", s.frames);
    s.yaw_coverage_deg = doc.value("yaw_coverage_deg", s.yaw_coverage_deg);
    s.camera_distance = doc.value("camera_distance", s.camera_distance);
    s.resolution = doc.value("resolution", s.resolution);
    s.keypoint_noise_px = doc.value("keypoint_noise_px", s.keypoint_noise_px);
    s.corruption_radius = doc.value("corruption_radius", s.corruption_radius);
    s.jitter = doc.value("jitter", s.jitter);
    s.anchors = doc.value("anchors", s.anchors);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("malformed scenario: ") + e.what());
  }
  s.validate();
  return s;
}

SilhouetteImage morph_disc(const SilhouetteImage& mask, int radius) {
  if (radius == 0) return mask;
  const bool dilate = radius > 0;
  const int r = std::abs(radius);
  SilhouetteImage out(mask.width, mask.height);
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      bool hit = !dilate;
      for (int dy = -r; dy <= r && hit != dilate; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          if (dx * dx + dy * dy > r * r) continue;
          const int xx = x + dx;
          const int yy = y + dy;
          const bool on = xx >= 0 && yy >= 0 && xx < mask.width && yy < mask.height &&
                          mask.at(xx, yy) >= 0.5;
          if (dilate && on) {
            hit = true;
            break;
          }
          if (!dilate && !on) {
            hit = false;
            break;
          }
        }
      }
      out.at(x, y) = hit ? 1.0 : 0.0;
    }
  }
  return out;
}

std::vector<FrameObservation> render_observations(const ModelDefinition& model, const Camera& camera,
                                                  const SubjectParams& subject,
                                                  const ScenarioSpec& scenario) {
  scenario.validate();
  camera.validate();
  check_subject(model, subject);
  std::seed_seq seq{static_cast<std::uint32_t>(scenario.seed),
                    static_cast<std::uint32_t>(scenario.seed >> 32), 3u};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<FrameObservation> out;
  for (std::size_t i = 0; i < subject.frames.size(); ++i) {
    const Points posed = pose_mesh(model, subject, i);
    if ((posed.col(2).array() <= 0.1).any()) {
      throw ScenarioError("frame " + std::to_string(i) + ": subject is not in front of the camera");
    }
    const Pixels px = project(camera, posed);
    if ((px.col(0).array() < 0.0).any() || (px.col(1).array() < 0.0).any() ||
        (px.col(0).array() > camera.width).any() || (px.col(1).array() > camera.height).any()) {
      throw ScenarioError("frame " + std::to_string(i) + ": subject leaves the camera frustum");
    }
    FrameObservation obs;
    obs.mask = threshold(render_silhouette(camera, posed, model.faces, kMaskRenderTau));
    obs.mask = morph_disc(obs.mask, scenario.corruption_radius);

    const Pixels kp = project(camera, regress_keypoints3d(model, posed));
    for (Eigen::Index k = 0; k < kp.rows(); ++k) {
      Keypoint2D p;
      p.u = kp(k, 0) + scenario.keypoint_noise_px * noise(rng);
      p.v = kp(k, 1) + scenario.keypoint_noise_px * noise(rng);
      const bool inside = p.u >= 0.0 && p.v >= 0.0 && p.u < camera.width && p.v < camera.height;
      p.confidence = inside ? 1.0 : 0.0;
      obs.keypoints.push_back(p);
    }

    if (scenario.anchors) {
      // Eye vertices act as face landmarks when they face the camera.
      const Points normals = vertex_normals(posed, model.faces);
      for (int id : model.eye_ids) {
        const Vec3 p = posed.row(id).transpose();
        const Vec3 n = normals.row(id).transpose();
        if (n.dot(-p) <= 0.0) continue;
        AnchorLandmark a;
        a.vertex = id;
        a.u = px(id, 0) + scenario.keypoint_noise_px * noise(rng);
        a.v = px(id, 1) + scenario.keypoint_noise_px * noise(rng);
        a.confidence = 1.0;
        obs.anchors.push_back(a);
      }
    }
    out.push_back(std::move(obs));
  }
  return out;
}

Bundle synthesize_bundle(const ScenarioSpec& scenario, int vertex_target) {
  scenario.validate();
  Bundle b;
  b.scenario = scenario;
  b.model = build_procedural_model(vertex_target);
  b.camera = Camera::standard(scenario.resolution, scenario.resolution);
  const SubjectShape shape = sample_subject(b.model, scenario.seed);
  TurnaroundSpec turn;
  turn.frames = scenario.frames;
  turn.yaw_coverage_deg = scenario.yaw_coverage_deg;
  turn.camera_distance = scenario.camera_distance;
  turn.jitter = scenario.jitter;
  turn.seed = scenario.seed;
  b.ground_truth.beta = shape.beta;
  b.ground_truth.offsets = shape.offsets;
  b.ground_truth.frames = make_turnaround(b.model.joint_count(), turn);
  place_subject(b.model, b.ground_truth, scenario.camera_distance);
  b.observations = render_observations(b.model, b.camera, b.ground_truth, scenario);
  return b;
}

}  // namespace bodyfit
