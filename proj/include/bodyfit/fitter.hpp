#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/objectives.hpp"

namespace bodyfit {

/// Optimizable parameter kinds. "pose" and "trans" cover every frame.
inline constexpr const char* kGroupKinds[] = {"shape", "offsets", "pose", "trans"};

struct StageConfig {
  std::string name;
  std::map<std::string, double> step_sizes;  // kind -> Adam step size; keys are the active groups
  ObjectiveSpec objective;
  int steps = 0;
  double tau_px = 2.0;  // silhouette softness in observation pixels
};

struct FitConfig {
  std::vector<StageConfig> stages;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double lr_final_fraction = 0.1;  // geometric step-size decay over each stage
  int render_resolution = 256;     // silhouette height used while fitting
  std::optional<double> budget_seconds;
  double early_stop_tolerance = 1e-9;
  int early_stop_patience = 25;
  std::uint64_t seed = 0;
  std::string init_pose_name = "a_pose";
  Points init_pose;  // J x 3 axis-angle, root excluded (row 0 ignored)

  /// Throws ConfigError.
  void validate(const ModelDefinition* model = nullptr) const;
  const StageConfig& refinement_stage() const { return stages.back(); }
};

/// Shoulders abducted 60 degrees, elbows bent 15 degrees forward, hips 5
/// degrees apart. Joint layout of the 24-joint SMPL tree.
Points a_pose_theta(int joint_count);

/// Axis-angle of the root for a y-up model facing +z seen upright by the
/// camera, turned by `yaw` radians about the body's vertical axis.
Vec3 root_for_yaw(double yaw);
/// Inverse of root_for_yaw (radians in (-pi, pi]).
double yaw_from_root(const Vec3& root_axis_angle);

FitConfig default_fit_config(int joint_count = 24);
nlohmann::json fit_config_to_json(const FitConfig& config);
FitConfig fit_config_from_json(const nlohmann::json& doc);

struct StageTrace {
  std::string name;
  std::vector<double> values;  // objective at each executed step
  std::vector<double> best;    // best-so-far
  double seconds = 0.0;
  bool diverged = false;
  bool early_stopped = false;
};

struct FitResult {
  SubjectParams params;
  std::vector<StageTrace> stages;
  std::vector<SubjectParams> stage_params;  // best iterate after each executed stage
  std::vector<double> frame_iou;
  bool diverged = false;
  bool budget_exhausted = false;
  int total_steps() const;
};

/// result.json: the recovered SubjectParams plus status flags, stage
/// summaries and per-frame IoU. Contains no timing, so repeated runs are
/// byte-identical.
nlohmann::json fit_result_to_json(const FitResult& result);

/// Per-frame A-pose, yaw and translation from 2D keypoints.
std::vector<FramePose> init_poses(const ModelDefinition& model, const Camera& camera,
                                  const std::vector<FrameObservation>& observations,
                                  const FitConfig& config);

struct FitOptions {
  std::optional<SubjectParams> initial;  // skip init_poses and start here
  bool freeze_poses = false;             // drop pose/trans from every stage
};

FitResult fit(const ModelDefinition& model, const Camera& camera,
              const std::vector<FrameObservation>& observations, const FitConfig& config,
              const FitOptions& options = {});

/// Extra steps of the refinement stage starting from `params`.
FitResult refine(const ModelDefinition& model, const Camera& camera,
                 const std::vector<FrameObservation>& observations, const SubjectParams& params,
                 int steps, const FitConfig& config);

/// Silhouette IoU of `params` against each observed mask, rendered at the
/// mask resolution.
std::vector<double> silhouette_ious(const ModelDefinition& model, const Camera& camera,
                                    const SubjectParams& params,
                                    const std::vector<FrameObservation>& observations);

/// Masks box-filtered to `height` rows (aspect kept); other fields copied.
std::vector<FrameObservation> downsample_observations(const std::vector<FrameObservation>& obs,
                                                      const Camera& camera, int height);

}  // namespace bodyfit
