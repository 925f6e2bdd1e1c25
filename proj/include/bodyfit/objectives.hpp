#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "bodyfit/body_model.hpp"
#include "bodyfit/camera.hpp"
#include "bodyfit/gradcheck.hpp"
#include "bodyfit/silhouette.hpp"

namespace bodyfit {

struct Keypoint2D {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

/// A 2D target for a specific mesh vertex (face landmarks and the like).
struct AnchorLandmark {
  int vertex = 0;
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;
};

struct FrameObservation {
  SilhouetteImage mask;
  std::vector<Keypoint2D> keypoints;
  std::vector<AnchorLandmark> anchors;
};

enum class Term {
  kTPose,
  kPosed,
  kSilhouette,
  kUndressed,
  kPoseParams,
  kKeypoints3D,
  kKeypoints2D,
  kLaplacian,
  kSymmetry,
  kAnchors,
  kPoseConsistency,
};

inline constexpr Term kAllTerms[] = {Term::kTPose,       Term::kPosed,       Term::kSilhouette,
                                     Term::kUndressed,   Term::kPoseParams,  Term::kKeypoints3D,
                                     Term::kKeypoints2D, Term::kLaplacian,   Term::kSymmetry,
                                     Term::kAnchors,     Term::kPoseConsistency};

std::string_view term_name(Term term);
/// Throws ConfigError for unknown names.
Term term_from_name(std::string_view name);
/// Terms that compare against ground-truth parameters.
bool term_is_supervised(Term term);
bool term_is_per_frame(Term term);
bool term_uses_observations(Term term);

struct WeightedTerm {
  Term term = Term::kTPose;
  double weight = 1.0;
};

struct ObjectiveSpec {
  std::vector<WeightedTerm> terms;
  std::vector<std::size_t> frames;  // empty: every frame
};

nlohmann::json objective_spec_to_json(const ObjectiveSpec& spec);
ObjectiveSpec objective_spec_from_json(const nlohmann::json& doc);

/// Everything a composed objective evaluates against. Keypoints and anchors
/// are in `camera` pixels; masks may be stored at a lower resolution, in
/// which case silhouettes are rendered with `camera.resized(mask.height)`.
struct ObjectiveContext {
  const ModelDefinition* model = nullptr;
  Camera camera;
  std::shared_ptr<const std::vector<FrameObservation>> observations;
  std::optional<SubjectParams> target;
  double softness_tau = 2.0;
};

/// Weighted sum of loss terms over a multi-frame subject. Per-frame terms
/// are summed over the spec's frame set in ascending frame order.
class ComposedObjective final : public Objective {
 public:
  ComposedObjective(ObjectiveContext context, ObjectiveSpec spec, std::size_t frame_count);

  void check_layout(const ParamVector& params) const override;
  double evaluate(const ParamVector& params, ParamVector* gradient) const override;

  /// Same as evaluate, on the structured parameters. `gradient`, when
  /// given, is overwritten.
  double evaluate_subject(const SubjectParams& est, SubjectParams* gradient) const;

  /// Unweighted value of every term in the spec, in spec order.
  std::vector<double> term_values(const SubjectParams& est) const;

  const ObjectiveSpec& spec() const { return spec_; }
  std::size_t frame_count() const { return frame_count_; }
  const ObjectiveContext& context() const { return context_; }

 private:
  struct TargetCache;

  double run(const SubjectParams& est, SubjectParams* gradient, std::vector<double>* per_term) const;

  ObjectiveContext context_;
  ObjectiveSpec spec_;
  std::size_t frame_count_;
  std::vector<std::size_t> frames_;
  std::vector<std::vector<int>> neighbors_;
  std::shared_ptr<const TargetCache> target_cache_;
};

/// Validates the spec against the context and builds the objective.
/// Throws ConfigError when the spec is unusable.
ComposedObjective compose(const ObjectiveSpec& spec, const ObjectiveContext& context,
                          std::size_t frame_count);

// ---- individual terms (value only) --------------------------------------

double loss_tpose(const ModelDefinition& model, const SubjectParams& est,
                  const SubjectParams& target);
double loss_posed(const ModelDefinition& model, const SubjectParams& est,
                  const SubjectParams& target, std::size_t frame_index);
double loss_silhouette(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                       const FrameObservation& observation, std::size_t frame_index, double tau);
double loss_undressed(const ModelDefinition& model, const SubjectParams& est,
                      const SubjectParams& target);
double loss_pose_params(const SubjectParams& est, const SubjectParams& target,
                        std::size_t frame_index);
double loss_keypoints3d(const ModelDefinition& model, const SubjectParams& est,
                        const SubjectParams& target, std::size_t frame_index);
double loss_keypoints2d(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                        const FrameObservation& observation, std::size_t frame_index);
double reg_laplacian(const ModelDefinition& model, const SubjectParams& est);
double reg_symmetry(const ModelDefinition& model, const SubjectParams& est);
/// Spread of non-root joint rotations across frames (0 for one frame).
double reg_pose_consistency(const ModelDefinition& model, const SubjectParams& est);
double reg_landmarks(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                     const FrameObservation& observation, std::size_t frame_index);

}  // namespace bodyfit
