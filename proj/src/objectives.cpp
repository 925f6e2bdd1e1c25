#include "bodyfit/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/mesh.hpp"

namespace bodyfit {
namespace {

using Vec2 = Eigen::Vector2d;

// ---- term kernels ----------------------------------------------------------
// Each kernel returns the unweighted value and, when an adjoint buffer is
// given, adds weight * d(value)/d(input) into it.

double mean_sq_diff(const Points& a, const Points& b, double weight, Points* d_a) {
  const Points diff = a - b;
  const double n = static_cast<double>(a.rows());
  if (d_a) *d_a += (2.0 * weight / n) * diff;
  return diff.squaredNorm() / n;
}

double laplacian_kernel(const Points& offsets, const std::vector<std::vector<int>>& neighbors,
                        double weight, Points* d_offsets) {
  double sum = 0.0;
  std::size_t counted = 0;
  std::vector<std::pair<std::size_t, Eigen::RowVector3d>> residuals;
  residuals.reserve(neighbors.size());
  for (std::size_t v = 0; v < neighbors.size(); ++v) {
    const auto& ring = neighbors[v];
    if (ring.empty()) continue;
    Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
    for (int u : ring) mean += offsets.row(u);
    mean /= static_cast<double>(ring.size());
    const Eigen::RowVector3d r = offsets.row(static_cast<Eigen::Index>(v)) - mean;
    sum += r.squaredNorm();
    ++counted;
    residuals.emplace_back(v, r);
  }
  if (counted == 0) return 0.0;
  const double n = static_cast<double>(counted);
  if (d_offsets) {
    for (const auto& [v, r] : residuals) {
      const Eigen::RowVector3d g = (2.0 * weight / n) * r;
      d_offsets->row(static_cast<Eigen::Index>(v)) += g;
      const auto& ring = neighbors[v];
      const Eigen::RowVector3d share = g / static_cast<double>(ring.size());
      for (int u : ring) d_offsets->row(u) -= share;
    }
  }
  return sum / n;
}

double symmetry_kernel(const Points& offsets, const std::vector<std::pair<int, int>>& pairs,
                       double weight, Points* d_offsets) {
  if (pairs.empty()) throw ContractViolation("reg_symmetry: model has no symmetry pairs");
  const Eigen::RowVector3d mirror(-1.0, 1.0, 1.0);
  const double n = static_cast<double>(pairs.size());
  double sum = 0.0;
  for (const auto& [l, r] : pairs) {
    const Eigen::RowVector3d e = offsets.row(l) - offsets.row(r).cwiseProduct(mirror);
    sum += e.squaredNorm();
    if (d_offsets) {
      const Eigen::RowVector3d g = (2.0 * weight / n) * e;
      d_offsets->row(l) += g;
      d_offsets->row(r) -= g.cwiseProduct(mirror);
    }
  }
  return sum / n;
}

// Mean squared deviation of each non-root joint rotation from its average
// over the selected frames. The subject holds one pose while turning, so
// this ties limb foreshortening across views.
double pose_consistency_kernel(const SubjectParams& est, const std::vector<std::size_t>& frames,
                               double weight, SubjectParams* gradient) {
  if (frames.size() < 2) return 0.0;
  const Eigen::Index joints = est.frames.front().theta.rows();
  if (joints < 2) return 0.0;
  Points mean = Points::Zero(joints, 3);
  for (std::size_t f : frames) mean += est.frames[f].theta;
  mean /= static_cast<double>(frames.size());
  const double n = static_cast<double>(frames.size()) * static_cast<double>(3 * (joints - 1));
  double sum = 0.0;
  for (std::size_t f : frames) {
    const Points r = (est.frames[f].theta - mean).bottomRows(joints - 1);
    sum += r.squaredNorm();
    // The mean's own dependence contributes sum_f r_f = 0.
    if (gradient) gradient->frames[f].theta.bottomRows(joints - 1) += (2.0 * weight / n) * r;
  }
  return sum / n;
}

// Confidence-weighted squared pixel error, normalized by total confidence and
// image height squared. Returns 0 for an empty or all-zero-confidence set
// when `allow_empty`, otherwise throws.
double weighted_reprojection(const Camera& camera, const Points& points,
                             const std::vector<Vec2>& targets, const std::vector<double>& conf,
                             bool allow_empty, double weight, Points* d_points) {
  double total = 0.0;
  for (double c : conf) total += c;
  if (!(total > 0.0)) {
    if (allow_empty) return 0.0;
    throw DegenerateObservation("keypoint confidences are all zero");
  }
  const Pixels proj = project(camera, points);
  const double h2 = static_cast<double>(camera.height) * camera.height;
  const double norm = total * h2;
  double sum = 0.0;
  Pixels d_proj = Pixels::Zero(points.rows(), 2);
  for (Eigen::Index k = 0; k < points.rows(); ++k) {
    const double c = conf[static_cast<std::size_t>(k)];
    if (c == 0.0) continue;
    const Vec2 r = proj.row(k).transpose() - targets[static_cast<std::size_t>(k)];
    sum += c * r.squaredNorm();
    d_proj.row(k) = (2.0 * weight * c / norm) * r.transpose();
  }
  if (d_points) *d_points += project_backward(camera, points, d_proj);
  return sum / norm;
}

double keypoints2d_kernel(const ModelDefinition& model, const Camera& camera, const Points& posed,
                          const FrameObservation& obs, double weight, Points* d_posed) {
  if (static_cast<int>(obs.keypoints.size()) != model.keypoint_count()) {
    throw ContractViolation("observation keypoint count does not match model");
  }
  const Points kp = model.keypoint_regressor * posed;
  std::vector<Vec2> targets;
  std::vector<double> conf;
  for (const auto& k : obs.keypoints) {
    targets.emplace_back(k.u, k.v);
    conf.push_back(k.confidence);
  }
  Points d_kp = Points::Zero(kp.rows(), 3);
  const double value =
      weighted_reprojection(camera, kp, targets, conf, false, weight, d_posed ? &d_kp : nullptr);
  if (d_posed) *d_posed += model.keypoint_regressor.transpose() * d_kp;
  return value;
}

double anchors_kernel(const Camera& camera, const Points& posed, const FrameObservation& obs,
                      double weight, Points* d_posed) {
  if (obs.anchors.empty()) return 0.0;
  Points pts(static_cast<Eigen::Index>(obs.anchors.size()), 3);
  std::vector<Vec2> targets;
  std::vector<double> conf;
  for (std::size_t i = 0; i < obs.anchors.size(); ++i) {
    const auto& a = obs.anchors[i];
    if (a.vertex < 0 || a.vertex >= posed.rows()) {
      throw ContractViolation("anchor vertex index out of range");
    }
    pts.row(static_cast<Eigen::Index>(i)) = posed.row(a.vertex);
    targets.emplace_back(a.u, a.v);
    conf.push_back(a.confidence);
  }
  Points d_pts = Points::Zero(pts.rows(), 3);
  const double value =
      weighted_reprojection(camera, pts, targets, conf, true, weight, d_posed ? &d_pts : nullptr);
  if (d_posed) {
    for (std::size_t i = 0; i < obs.anchors.size(); ++i) {
      d_posed->row(obs.anchors[i].vertex) += d_pts.row(static_cast<Eigen::Index>(i));
    }
  }
  return value;
}

Camera render_camera_for(const Camera& camera, const SilhouetteImage& mask) {
  if (mask.width == camera.width && mask.height == camera.height) return camera;
  if (mask.height < 8) throw ContractViolation("observation mask is too small");
  const Camera c = camera.resized(mask.height);
  if (c.width != mask.width) {
    throw ContractViolation("observation mask aspect ratio does not match the camera");
  }
  return c;
}

double silhouette_kernel(const Camera& camera, const Faces& faces, const Points& posed,
                         const SilhouetteImage& mask, double tau, double weight, Points* d_posed) {
  const Camera cam = render_camera_for(camera, mask);
  const SoftRender render = render_soft(cam, posed, faces, tau);
  const double n = static_cast<double>(mask.pixel_count());
  double sum = 0.0;
  std::vector<double> d_image(mask.pixel_count());
  for (std::size_t i = 0; i < mask.pixel_count(); ++i) {
    const double r = render.image.values[i] - mask.values[i];
    sum += r * r;
    d_image[i] = 2.0 * weight * r / n;
  }
  if (d_posed) *d_posed += render_backward(cam, posed, faces, tau, render, d_image);
  return sum / n;
}

double pose_params_kernel(const FramePose& est, const FramePose& target, double weight,
                          Points* d_theta, Vec3* d_trans) {
  if (est.theta.rows() != target.theta.rows()) {
    throw ContractViolation("pose parameter joint counts differ");
  }
  double sum = 0.0;
  for (Eigen::Index j = 0; j < est.theta.rows(); ++j) {
    const RodriguesJacobian jac = rodrigues_with_jacobian(est.theta.row(j).transpose());
    const Mat3 diff = jac.rotation - rodrigues(target.theta.row(j).transpose());
    sum += diff.squaredNorm();
    if (d_theta) d_theta->row(j) += rodrigues_backward(jac, 2.0 * weight * diff).transpose();
  }
  const Vec3 dt = est.trans - target.trans;
  sum += dt.squaredNorm();
  if (d_trans) *d_trans += 2.0 * weight * dt;
  return sum;
}

const FrameObservation& observation_at(const ObjectiveContext& ctx, std::size_t frame) {
  if (!ctx.observations || frame >= ctx.observations->size()) {
    throw ContractViolation("no observation for frame " + std::to_string(frame));
  }
  return (*ctx.observations)[frame];
}

void require_frame(const SubjectParams& p, std::size_t frame) {
  if (frame >= p.frames.size()) {
    throw ContractViolation("frame index " + std::to_string(frame) + " out of range");
  }
}

void require_same_model(const ModelDefinition& model, const SubjectParams& a, const SubjectParams& b) {
  check_subject(model, a);
  check_subject(model, b);
}

}  // namespace

// ---- term registry ------------------------------------------------------

std::string_view term_name(Term term) {
  switch (term) {
    case Term::kTPose: return "tpose";
    case Term::kPosed: return "posed";
    case Term::kSilhouette: return "silhouette";
    case Term::kUndressed: return "undressed";
    case Term::kPoseParams: return "pose_params";
    case Term::kKeypoints3D: return "keypoints3d";
    case Term::kKeypoints2D: return "keypoints2d";
    case Term::kLaplacian: return "laplacian";
    case Term::kSymmetry: return "symmetry";
    case Term::kAnchors: return "anchors";
    case Term::kPoseConsistency: return "pose_consistency";
  }
  return "unknown";
}

Term term_from_name(std::string_view name) {
  for (Term t : kAllTerms) {
    if (term_name(t) == name) return t;
  }
  throw ConfigError("unknown objective term '" + std::string(name) + "'");
}

bool term_is_supervised(Term term) {
  switch (term) {
    case Term::kTPose:
    case Term::kPosed:
    case Term::kUndressed:
    case Term::kPoseParams:
    case Term::kKeypoints3D:
      return true;
    default:
      return false;
  }
}

bool term_is_per_frame(Term term) {
  switch (term) {
    case Term::kTPose:
    case Term::kUndressed:
    case Term::kLaplacian:
    case Term::kSymmetry:
    case Term::kPoseConsistency:
      return false;
    default:
      return true;
  }
}

bool term_uses_observations(Term term) {
  return term == Term::kSilhouette || term == Term::kKeypoints2D || term == Term::kAnchors;
}

nlohmann::json objective_spec_to_json(const ObjectiveSpec& spec) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : spec.terms) {
    terms.push_back({{"name", std::string(term_name(t.term))}, {"weight", t.weight}});
  }
  return {{"terms", terms}, {"frames", spec.frames}};
}

ObjectiveSpec objective_spec_from_json(const nlohmann::json& doc) {
  ObjectiveSpec spec;
  try {
    for (const auto& t : doc.at("terms")) {
      WeightedTerm wt;
      wt.term = term_from_name(t.at("name").get<std::string>());
      wt.weight = t.value("weight", 1.0);
      spec.terms.push_back(wt);
    }
    if (doc.contains("frames")) spec.frames = doc.at("frames").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed objective spec: ") + e.what());
  }
  return spec;
}

// ---- composed objective ---------------------------------------------------

struct ComposedObjective::TargetCache {
  ShapeState shape;
  std::vector<Points> posed;
  std::vector<Points> keypoints;
};

ComposedObjective::ComposedObjective(ObjectiveContext context, ObjectiveSpec spec,
                                     std::size_t frame_count)
    : context_(std::move(context)), spec_(std::move(spec)), frame_count_(frame_count) {
  if (!context_.model) throw ConfigError("objective needs a model");
  const ModelDefinition& model = *context_.model;
  if (spec_.terms.empty()) throw ConfigError("objective spec has no terms");
  bool any_positive = false;
  bool needs_target = false;
  bool needs_obs = false;
  bool needs_neighbors = false;
  for (const auto& t : spec_.terms) {
    if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
      throw ConfigError("term weights must be finite and nonnegative");
    }
    any_positive = any_positive || t.weight > 0.0;
    needs_target = needs_target || term_is_supervised(t.term);
    needs_obs = needs_obs || term_uses_observations(t.term);
    needs_neighbors = needs_neighbors || t.term == Term::kLaplacian;
  }
  if (!any_positive) throw ConfigError("objective spec needs at least one positive weight");
  if (needs_target && !context_.target) {
    throw ConfigError("supervised terms require target parameters");
  }
  if (needs_obs && (!context_.observations || context_.observations->size() != frame_count_)) {
    throw ConfigError("observation count does not match frame count");
  }
  if (needs_obs) context_.camera.validate();

  if (spec_.frames.empty()) {
    for (std::size_t i = 0; i < frame_count_; ++i) frames_.push_back(i);
  } else {
    frames_ = spec_.frames;
    std::sort(frames_.begin(), frames_.end());
    frames_.erase(std::unique(frames_.begin(), frames_.end()), frames_.end());
    if (frames_.back() >= frame_count_) throw ConfigError("objective frame index out of range");
  }
  if (needs_neighbors) neighbors_ = vertex_neighbors(model.faces, model.vertex_count());

  if (context_.target) {
    const SubjectParams& tgt = *context_.target;
    check_subject(model, tgt);
    if (tgt.frames.size() != frame_count_) {
      throw ConfigError("target frame count does not match objective frame count");
    }
    auto cache = std::make_shared<TargetCache>();
    cache->shape = compute_shape(model, tgt.beta, tgt.offsets);
    for (std::size_t i = 0; i < frame_count_; ++i) {
      cache->posed.push_back(compute_pose(model, cache->shape, tgt.frames[i]).posed);
      cache->keypoints.push_back(model.keypoint_regressor * cache->posed.back());
    }
    target_cache_ = std::move(cache);
  }
}

void ComposedObjective::check_layout(const ParamVector& params) const {
  const ModelDefinition& model = *context_.model;
  if (params.group_count() != 2 + 2 * frame_count_) {
    throw ContractViolation("parameter vector has " + std::to_string(params.group_count()) +
                            " groups, objective expects " + std::to_string(2 + 2 * frame_count_));
  }
  auto expect = [&](std::size_t idx, const std::string& name, std::size_t len) {
    if (params.names()[idx] != name || params.group_at(idx).size() != len) {
      throw ContractViolation("parameter group " + std::to_string(idx) + " should be '" + name +
                              "' of length " + std::to_string(len));
    }
  };
  expect(0, std::string(kShapeGroup), static_cast<std::size_t>(model.shape_count()));
  expect(1, std::string(kOffsetsGroup), static_cast<std::size_t>(3 * model.vertex_count()));
  for (std::size_t i = 0; i < frame_count_; ++i) {
    expect(2 + 2 * i, pose_group(i), static_cast<std::size_t>(3 * model.joint_count()));
    expect(3 + 2 * i, trans_group(i), 3);
  }
}

double ComposedObjective::evaluate(const ParamVector& params, ParamVector* gradient) const {
  check_layout(params);
  const SubjectParams est = from_param_vector(*context_.model, params);
  if (!gradient) return run(est, nullptr, nullptr);
  SubjectParams grad;
  const double value = run(est, &grad, nullptr);
  ParamVector g = to_param_vector(grad);
  if (!g.same_layout(*gradient)) throw ContractViolation("gradient buffer layout mismatch");
  *gradient = std::move(g);
  return value;
}

double ComposedObjective::evaluate_subject(const SubjectParams& est, SubjectParams* gradient) const {
  return run(est, gradient, nullptr);
}

std::vector<double> ComposedObjective::term_values(const SubjectParams& est) const {
  std::vector<double> values;
  run(est, nullptr, &values);
  return values;
}

double ComposedObjective::run(const SubjectParams& est, SubjectParams* gradient,
                              std::vector<double>* per_term) const {
  const ModelDefinition& model = *context_.model;
  check_subject(model, est);
  if (est.frames.size() != frame_count_) {
    throw ContractViolation("subject has " + std::to_string(est.frames.size()) +
                            " frames, objective expects " + std::to_string(frame_count_));
  }
  const bool want_grad = gradient != nullptr;
  if (want_grad) *gradient = zero_subject(model, frame_count_);
  if (per_term) per_term->assign(spec_.terms.size(), 0.0);

  const ShapeState shape = compute_shape(model, est.beta, est.offsets);
  ShapeAdjoint shape_adj = ShapeAdjoint::zeros(model);
  Points d_offsets_direct = Points::Zero(model.vertex_count(), 3);
  double total = 0.0;

  for (std::size_t ti = 0; ti < spec_.terms.size(); ++ti) {
    const auto& [term, weight] = spec_.terms[ti];
    if (term_is_per_frame(term)) continue;
    const bool g = want_grad && weight != 0.0;
    double value = 0.0;
    switch (term) {
      case Term::kTPose:
        value = mean_sq_diff(shape.tshape, target_cache_->shape.tshape, weight,
                             g ? &shape_adj.d_tshape : nullptr);
        break;
      case Term::kUndressed:
        value = mean_sq_diff(shape.rest, target_cache_->shape.rest, weight,
                             g ? &shape_adj.d_rest : nullptr);
        break;
      case Term::kLaplacian:
        value = laplacian_kernel(est.offsets, neighbors_, weight, g ? &d_offsets_direct : nullptr);
        break;
      case Term::kSymmetry:
        value = symmetry_kernel(est.offsets, model.symmetry_pairs, weight,
                                g ? &d_offsets_direct : nullptr);
        break;
      case Term::kPoseConsistency:
        value = pose_consistency_kernel(est, frames_, weight, g ? gradient : nullptr);
        break;
      default:
        break;
    }
    total += weight * value;
    if (per_term) (*per_term)[ti] += value;
  }

  for (std::size_t frame : frames_) {
    const PoseState pose = compute_pose(model, shape, est.frames[frame]);
    Points d_posed = Points::Zero(model.vertex_count(), 3);
    bool posed_touched = false;
    for (std::size_t ti = 0; ti < spec_.terms.size(); ++ti) {
      const auto& [term, weight] = spec_.terms[ti];
      if (!term_is_per_frame(term)) continue;
      const bool g = want_grad && weight != 0.0;
      Points* dp = g ? &d_posed : nullptr;
      double value = 0.0;
      switch (term) {
        case Term::kPosed:
          value = mean_sq_diff(pose.posed, target_cache_->posed[frame], weight, dp);
          break;
        case Term::kKeypoints3D: {
          const Points kp = model.keypoint_regressor * pose.posed;
          Points d_kp = Points::Zero(kp.rows(), 3);
          value = mean_sq_diff(kp, target_cache_->keypoints[frame], weight, g ? &d_kp : nullptr);
          if (g) d_posed += model.keypoint_regressor.transpose() * d_kp;
          break;
        }
        case Term::kKeypoints2D:
          value = keypoints2d_kernel(model, context_.camera, pose.posed,
                                     observation_at(context_, frame), weight, dp);
          break;
        case Term::kAnchors:
          value = anchors_kernel(context_.camera, pose.posed, observation_at(context_, frame),
                                 weight, dp);
          break;
        case Term::kSilhouette:
          value = silhouette_kernel(context_.camera, model.faces, pose.posed,
                                    observation_at(context_, frame).mask, context_.softness_tau,
                                    weight, dp);
          break;
        case Term::kPoseParams:
          value = pose_params_kernel(est.frames[frame], context_.target->frames[frame], weight,
                                     g ? &gradient->frames[frame].theta : nullptr,
                                     g ? &gradient->frames[frame].trans : nullptr);
          break;
        default:
          break;
      }
      posed_touched = posed_touched || (dp != nullptr && term != Term::kPoseParams);
      total += weight * value;
      if (per_term) (*per_term)[ti] += value;
    }
    if (want_grad && posed_touched) {
      pose_backward(model, shape, pose, d_posed, shape_adj, gradient->frames[frame].theta,
                    gradient->frames[frame].trans);
    }
  }

  if (want_grad) {
    shape_backward(model, shape_adj, gradient->beta, gradient->offsets);
    gradient->offsets += d_offsets_direct;
  }
  return total;
}

ComposedObjective compose(const ObjectiveSpec& spec, const ObjectiveContext& context,
                          std::size_t frame_count) {
  return ComposedObjective(context, spec, frame_count);
}

// ---- individual terms -----------------------------------------------------

double loss_tpose(const ModelDefinition& model, const SubjectParams& est,
                  const SubjectParams& target) {
  require_same_model(model, est, target);
  return mean_sq_diff(shaped_tpose(model, est.beta, est.offsets),
                      shaped_tpose(model, target.beta, target.offsets), 0.0, nullptr);
}

double loss_posed(const ModelDefinition& model, const SubjectParams& est,
                  const SubjectParams& target, std::size_t frame_index) {
  require_same_model(model, est, target);
  require_frame(est, frame_index);
  require_frame(target, frame_index);
  return mean_sq_diff(pose_mesh(model, est, frame_index), pose_mesh(model, target, frame_index), 0.0,
                      nullptr);
}

double loss_silhouette(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                       const FrameObservation& observation, std::size_t frame_index, double tau) {
  check_subject(model, est);
  require_frame(est, frame_index);
  return silhouette_kernel(camera, model.faces, pose_mesh(model, est, frame_index),
                           observation.mask, tau, 0.0, nullptr);
}

double loss_undressed(const ModelDefinition& model, const SubjectParams& est,
                      const SubjectParams& target) {
  require_same_model(model, est, target);
  const Points zero = Points::Zero(model.vertex_count(), 3);
  return mean_sq_diff(shaped_tpose(model, est.beta, zero), shaped_tpose(model, target.beta, zero),
                      0.0, nullptr);
}

double loss_pose_params(const SubjectParams& est, const SubjectParams& target,
                        std::size_t frame_index) {
  require_frame(est, frame_index);
  require_frame(target, frame_index);
  return pose_params_kernel(est.frames[frame_index], target.frames[frame_index], 0.0, nullptr,
                            nullptr);
}

double loss_keypoints3d(const ModelDefinition& model, const SubjectParams& est,
                        const SubjectParams& target, std::size_t frame_index) {
  require_same_model(model, est, target);
  require_frame(est, frame_index);
  require_frame(target, frame_index);
  return mean_sq_diff(regress_keypoints3d(model, pose_mesh(model, est, frame_index)),
                      regress_keypoints3d(model, pose_mesh(model, target, frame_index)), 0.0,
                      nullptr);
}

double loss_keypoints2d(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                        const FrameObservation& observation, std::size_t frame_index) {
  check_subject(model, est);
  require_frame(est, frame_index);
  return keypoints2d_kernel(model, camera, pose_mesh(model, est, frame_index), observation, 0.0,
                            nullptr);
}

double reg_laplacian(const ModelDefinition& model, const SubjectParams& est) {
  check_subject(model, est);
  return laplacian_kernel(est.offsets, vertex_neighbors(model.faces, model.vertex_count()), 0.0,
                          nullptr);
}

double reg_symmetry(const ModelDefinition& model, const SubjectParams& est) {
  check_subject(model, est);
  return symmetry_kernel(est.offsets, model.symmetry_pairs, 0.0, nullptr);
}

double reg_pose_consistency(const ModelDefinition& model, const SubjectParams& est) {
  check_subject(model, est);
  std::vector<std::size_t> all(est.frames.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return pose_consistency_kernel(est, all, 0.0, nullptr);
}

double reg_landmarks(const ModelDefinition& model, const Camera& camera, const SubjectParams& est,
                     const FrameObservation& observation, std::size_t frame_index) {
  check_subject(model, est);
  require_frame(est, frame_index);
  if (observation.anchors.empty()) return 0.0;
  return anchors_kernel(camera, pose_mesh(model, est, frame_index), observation, 0.0, nullptr);
}

}  // namespace bodyfit
