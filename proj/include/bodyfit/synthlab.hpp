#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <json.hpp>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/fitter.hpp"
#include "bodyfit/objectives.hpp"

namespace bodyfit {

// ---- procedural body model ------------------------------------------------

inline constexpr int kMinProceduralVertices = 200;
inline constexpr int kDefaultVertexTarget = 1000;
inline constexpr int kDefaultShapeCount = 10;

/// Symmetric tube-limbed humanoid in the 24-joint SMPL tree, height
/// normalized. Vertex count lands within about 10% of `vertex_target` from
/// 500 up; below that the minimum ring resolution gives 384.
ModelDefinition build_procedural_model(int vertex_target = kDefaultVertexTarget,
                                       int shape_count = kDefaultShapeCount);

/// Vertex sets of the procedural layout (by template position).
std::vector<int> head_hand_foot_vertices(const ModelDefinition& model);

// ---- subjects and sequences -----------------------------------------------

inline constexpr double kMaxClothingOffset = 0.03;

struct SubjectShape {
  Eigen::VectorXd beta;
  Points offsets;
};

SubjectShape sample_subject(const ModelDefinition& model, std::uint64_t seed);

struct TurnaroundSpec {
  int frames = 8;
  double yaw_coverage_deg = 360.0;
  double camera_distance = 3.0;
  bool jitter = true;
  std::uint64_t seed = 0;
};

/// A-posed frames turning about the vertical axis. Translations are filled
/// in by place_subject.
std::vector<FramePose> make_turnaround(int joint_count, const TurnaroundSpec& spec);

/// Sets every frame's translation so the posed bounding box is centered on
/// the optical axis at `distance`.
void place_subject(const ModelDefinition& model, SubjectParams& subject, double distance);

// ---- observations --------------------------------------------------------

struct ScenarioSpec {
  std::uint64_t seed = 0;
  int frames = 8;
  double yaw_coverage_deg = 360.0;
  double camera_distance = 3.0;
  int resolution = 1080;
  double keypoint_noise_px = 1.0;
  int corruption_radius = 0;  // > 0 dilates, < 0 erodes the masks
  bool jitter = true;
  bool anchors = true;

  void validate() const;  // throws ScenarioError
};

nlohmann::json scenario_to_json(const ScenarioSpec& spec);
ScenarioSpec scenario_from_json(const nlohmann::json& doc);

inline constexpr double kMaskRenderTau = 0.5;

std::vector<FrameObservation> render_observations(const ModelDefinition& model, const Camera& camera,
                                                  const SubjectParams& subject,
                                                  const ScenarioSpec& scenario);

/// Binary erosion (radius < 0) or dilation (radius > 0) with a disc.
SilhouetteImage morph_disc(const SilhouetteImage& mask, int radius);

/// Model, subject and observations for one scenario.
struct Bundle {
  ModelDefinition model;
  Camera camera;
  ScenarioSpec scenario;
  SubjectParams ground_truth;
  std::vector<FrameObservation> observations;
};

Bundle synthesize_bundle(const ScenarioSpec& scenario, int vertex_target = kDefaultVertexTarget);

void save_bundle(const Bundle& bundle, const std::filesystem::path& dir);
/// Throws IoError naming the offending file.
Bundle load_bundle(const std::filesystem::path& dir);

nlohmann::json observations_keypoints_json(const std::vector<FrameObservation>& obs);

// ---- evaluation ----------------------------------------------------------

/// Axis-aligned bounding-box tree over triangles for exact closest-point
/// queries.
class TriangleTree {
 public:
  TriangleTree(const Points& vertices, const Faces& faces);
  double distance(const Vec3& p) const;

 private:
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;
    int right = -1;
    int begin = 0;
    int end = 0;
  };
  int build(int begin, int end);
  std::vector<Eigen::Matrix3d> tris_;  // columns are corners
  std::vector<Vec3> centroids_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
};

/// Exact distance from p to triangle (a, b, c); degenerate triangles
/// collapse to segments or points.
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

std::vector<double> point_to_surface_distance(const Points& points, const Points& vertices,
                                              const Faces& faces);

/// Mean of both directed vertex-to-surface distances, pooled, in mm.
double bidirectional_surface_error(const Points& vertices_a, const Faces& faces_a,
                                   const Points& vertices_b, const Faces& faces_b);

struct EvaluationReport {
  double mean_mm = 0.0;
  double std_mm = 0.0;
  double max_mm = 0.0;
  std::vector<double> keypoint_rmse_px;
  std::vector<double> silhouette_iou;
};

nlohmann::json evaluation_to_json(const EvaluationReport& report);

/// Shape error with both subjects posed by the ground truth's frame-0
/// pose, plus per-frame keypoint RMSE and IoU under the estimate's poses.
EvaluationReport evaluate_fit(const ModelDefinition& model, const Camera& camera,
                              const SubjectParams& estimate, const SubjectParams& ground_truth,
                              const std::vector<FrameObservation>& observations);

/// Shape-only part of evaluate_fit (mm).
double pose_normalized_error(const ModelDefinition& model, const SubjectParams& estimate,
                             const SubjectParams& ground_truth);

}  // namespace bodyfit
