#include "bodyfit/fitter.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/model_io.hpp"

namespace bodyfit {
namespace {

constexpr double kInitConfidence = 0.2;
constexpr int kMinInitKeypoints = 4;
constexpr int kYawCandidates = 36;
constexpr double kIouRenderTau = 0.5;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// Adam on one contiguous block.
void adam_update(double* x, const double* g, double* m, double* v, Eigen::Index n, double lr,
                 double b1, double b2, double eps, int t) {
  const double c1 = 1.0 - std::pow(b1, t);
  const double c2 = 1.0 - std::pow(b2, t);
  for (Eigen::Index i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
    x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

bool subject_finite(const SubjectParams& p) {
  if (!p.beta.allFinite() || !p.offsets.allFinite()) return false;
  for (const auto& f : p.frames) {
    if (!f.theta.allFinite() || !f.trans.allFinite()) return false;
  }
  return true;
}

void clamp_offsets(Points& offsets) {
  for (Eigen::Index v = 0; v < offsets.rows(); ++v) {
    const double n = offsets.row(v).norm();
    if (n > kMaxOffsetNorm) offsets.row(v) *= kMaxOffsetNorm / n;
  }
}

struct StageOutcome {
  bool diverged = false;
  bool budget_exhausted = false;
};

struct Budget {
  Clock::time_point start;
  std::optional<double> seconds;
  bool exceeded() const { return seconds && seconds_since(start) > *seconds; }
};

StageOutcome run_stage(const ModelDefinition& model, const Camera& camera,
                       const std::shared_ptr<const std::vector<FrameObservation>>& observations,
                       const FitConfig& config, const StageConfig& stage,
                       const std::map<std::string, double>& step_sizes, const Budget& budget,
                       SubjectParams& params, StageTrace& trace) {
  StageOutcome out;
  const auto stage_start = Clock::now();
  trace.name = stage.name;
  const std::size_t frames = params.frames.size();

  ObjectiveContext ctx;
  ctx.model = &model;
  ctx.camera = camera;
  ctx.observations = observations;
  const int mask_height = observations->front().mask.height;
  ctx.softness_tau = stage.tau_px * static_cast<double>(mask_height) / camera.height;
  const ComposedObjective objective(ctx, stage.objective, frames);

  auto size_of = [&](const char* kind) {
    const auto it = step_sizes.find(kind);
    return it == step_sizes.end() ? 0.0 : it->second;
  };
  const double lr_shape = size_of("shape");
  const double lr_offsets = size_of("offsets");
  const double lr_pose = size_of("pose");
  const double lr_trans = size_of("trans");

  SubjectParams m = zero_subject(model, frames);
  SubjectParams v = zero_subject(model, frames);
  SubjectParams grad;
  SubjectParams best = params;
  double best_value = std::numeric_limits<double>::infinity();
  int stall = 0;

  for (int step = 0; step < stage.steps; ++step) {
    double value;
    try {
      value = objective.evaluate_subject(params, &grad);
    } catch (const BehindCamera&) {
      value = std::numeric_limits<double>::quiet_NaN();
    }
    if (!std::isfinite(value) || !subject_finite(grad)) {
      out.diverged = true;
      break;
    }
    trace.values.push_back(value);
    const double improvement = best_value - value;
    if (value < best_value) {
      best_value = value;
      best = params;
    }
    trace.best.push_back(best_value);
    stall = (step > 0 && !(improvement >= config.early_stop_tolerance)) ? stall + 1 : 0;

    const double decay =
        stage.steps > 1 ? std::pow(config.lr_final_fraction,
                                   static_cast<double>(step) / (stage.steps - 1))
                        : 1.0;
    const int t = step + 1;
    auto update = [&](double* x, const double* g, double* mm, double* vv, Eigen::Index n,
                      double lr) {
      if (lr > 0.0) {
        adam_update(x, g, mm, vv, n, lr * decay, config.beta1, config.beta2, config.adam_epsilon, t);
      }
    };
    update(params.beta.data(), grad.beta.data(), m.beta.data(), v.beta.data(), params.beta.size(),
           lr_shape);
    update(params.offsets.data(), grad.offsets.data(), m.offsets.data(), v.offsets.data(),
           params.offsets.size(), lr_offsets);
    for (std::size_t f = 0; f < frames; ++f) {
      update(params.frames[f].theta.data(), grad.frames[f].theta.data(), m.frames[f].theta.data(),
             v.frames[f].theta.data(), params.frames[f].theta.size(), lr_pose);
      update(params.frames[f].trans.data(), grad.frames[f].trans.data(), m.frames[f].trans.data(),
             v.frames[f].trans.data(), 3, lr_trans);
    }
    if (lr_offsets > 0.0) clamp_offsets(params.offsets);

    if (budget.exceeded()) {
      out.budget_exhausted = true;
      break;
    }
    if (stall >= config.early_stop_patience) {
      trace.early_stopped = true;
      break;
    }
  }
  // The trace records values before each update, so the best iterate is
  // always one that was evaluated.
  if (!trace.values.empty()) params = best;
  trace.diverged = out.diverged;
  trace.seconds = seconds_since(stage_start);
  return out;
}

struct KeypointBox {
  double height = 0.0;
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
};

KeypointBox box_of(const Pixels& px, const std::vector<int>& ids) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  KeypointBox b;
  for (int k : ids) {
    lo = std::min(lo, px(k, 1));
    hi = std::max(hi, px(k, 1));
    b.centroid += px.row(k).transpose();
  }
  b.height = hi - lo;
  b.centroid /= static_cast<double>(ids.size());
  return b;
}

}  // namespace

int FitResult::total_steps() const {
  int n = 0;
  for (const auto& s : stages) n += static_cast<int>(s.values.size());
  return n;
}

nlohmann::json fit_result_to_json(const FitResult& result) {
  nlohmann::json doc = subject_to_json(result.params);
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : result.stages) {
    stages.push_back({{"name", s.name},
                      {"steps", s.values.size()},
                      {"best_objective", s.best.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.best.back())},
                      {"diverged", s.diverged},
                      {"early_stopped", s.early_stopped}});
  }
  doc["stages"] = stages;
  doc["diverged"] = result.diverged;
  doc["budget_exhausted"] = result.budget_exhausted;
  doc["frame_iou"] = result.frame_iou;
  return doc;
}

std::vector<FramePose> init_poses(const ModelDefinition& model, const Camera& camera,
                                  const std::vector<FrameObservation>& observations,
                                  const FitConfig& config) {
  if (observations.empty()) throw InitializationError("no observations to initialize from");
  camera.validate();
  if (config.init_pose.rows() != model.joint_count()) {
    throw ConfigError("init_pose joint count does not match the model");
  }
  const Eigen::VectorXd beta = Eigen::VectorXd::Zero(model.shape_count());
  const Points offsets = Points::Zero(model.vertex_count(), 3);
  const ShapeState shape = compute_shape(model, beta, offsets);
  const double f = camera.focal_pixels;
  const Eigen::Vector2d c = camera.principal_point;

  std::vector<FramePose> out;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const FrameObservation& obs = observations[i];
    if (static_cast<int>(obs.keypoints.size()) != model.keypoint_count()) {
      throw InitializationError("frame " + std::to_string(i) + ": keypoint count mismatch");
    }
    std::vector<int> ids;
    Pixels observed(model.keypoint_count(), 2);
    for (int k = 0; k < model.keypoint_count(); ++k) {
      const auto& kp = obs.keypoints[static_cast<std::size_t>(k)];
      observed.row(k) << kp.u, kp.v;
      if (kp.confidence > kInitConfidence) ids.push_back(k);
    }
    if (static_cast<int>(ids.size()) < kMinInitKeypoints) {
      throw InitializationError("frame " + std::to_string(i) + ": fewer than " +
                                std::to_string(kMinInitKeypoints) + " confident keypoints");
    }
    const KeypointBox target = box_of(observed, ids);
    if (!(target.height > 1.0)) {
      throw InitializationError("frame " + std::to_string(i) + ": keypoints span no height");
    }

    FramePose best_pose;
    double best_loss = std::numeric_limits<double>::infinity();
    for (int y = 0; y < kYawCandidates; ++y) {
      FramePose pose;
      pose.theta = config.init_pose;
      pose.theta.row(0) = root_for_yaw(2.0 * std::numbers::pi * y / kYawCandidates).transpose();
      const Points kp0 = model.keypoint_regressor * compute_pose(model, shape, pose).posed;
      Eigen::RowVector3d centroid = Eigen::RowVector3d::Zero();
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int k : ids) {
        centroid += kp0.row(k);
        lo = std::min(lo, kp0(k, 1));
        hi = std::max(hi, kp0(k, 1));
      }
      centroid /= static_cast<double>(ids.size());
      // Similar triangles give the depth; the centroid ray gives x and y.
      double z = f * (hi - lo) / target.height;
      for (int iter = 0; iter < 3; ++iter) {
        const Vec3 anchor((target.centroid.x() - c.x()) * z / f, (target.centroid.y() - c.y()) * z / f, z);
        pose.trans = anchor - centroid.transpose();
        Points kp = kp0;
        kp.rowwise() += pose.trans.transpose();
        if ((kp.col(2).array() <= kMinDepth).any()) break;
        const KeypointBox got = box_of(project(camera, kp), ids);
        if (!(got.height > 0.0)) break;
        z *= got.height / target.height;
      }
      const Vec3 anchor((target.centroid.x() - c.x()) * z / f, (target.centroid.y() - c.y()) * z / f, z);
      pose.trans = anchor - centroid.transpose();

      Points kp = kp0;
      kp.rowwise() += pose.trans.transpose();
      double loss = std::numeric_limits<double>::infinity();
      if (!(kp.col(2).array() <= kMinDepth).any()) {
        const Pixels px = project(camera, kp);
        double num = 0.0;
        double den = 0.0;
        for (int k = 0; k < model.keypoint_count(); ++k) {
          const double w = obs.keypoints[static_cast<std::size_t>(k)].confidence;
          num += w * (px.row(k) - observed.row(k)).squaredNorm();
          den += w;
        }
        loss = num / den;
      }
      if (loss < best_loss) {  // strict: the lowest yaw index wins ties
        best_loss = loss;
        best_pose = pose;
      }
    }
    if (!std::isfinite(best_loss)) {
      throw InitializationError("frame " + std::to_string(i) + ": no yaw places the body in front of the camera");
    }
    out.push_back(std::move(best_pose));
  }
  return out;
}

std::vector<FrameObservation> downsample_observations(const std::vector<FrameObservation>& obs,
                                                      const Camera& camera, int height) {
  std::vector<FrameObservation> out = obs;
  for (auto& o : out) {
    if (o.mask.height != camera.height || o.mask.width != camera.width) {
      throw ContractViolation("observation mask size does not match the camera");
    }
    if (height >= o.mask.height) continue;
    const Camera small = camera.resized(height);
    o.mask = resample_area(o.mask, small.width, small.height);
  }
  return out;
}

std::vector<double> silhouette_ious(const ModelDefinition& model, const Camera& camera,
                                    const SubjectParams& params,
                                    const std::vector<FrameObservation>& observations) {
  if (params.frames.size() != observations.size()) {
    throw ContractViolation("frame count does not match observation count");
  }
  std::vector<double> ious;
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const SilhouetteImage& mask = observations[i].mask;
    const Camera cam = mask.height == camera.height ? camera : camera.resized(mask.height);
    const SilhouetteImage img =
        render_silhouette(cam, pose_mesh(model, params, i), model.faces, kIouRenderTau);
    ious.push_back(mask_iou(img, mask));
  }
  return ious;
}

FitResult fit(const ModelDefinition& model, const Camera& camera,
              const std::vector<FrameObservation>& observations, const FitConfig& config,
              const FitOptions& options) {
  if (observations.empty()) throw ContractViolation("fit needs at least one observation");
  camera.validate();
  config.validate(&model);
  const Budget budget{Clock::now(), config.budget_seconds};

  FitResult result;
  if (options.initial) {
    result.params = *options.initial;
    check_subject(model, result.params);
    if (result.params.frames.size() != observations.size()) {
      throw ContractViolation("initial parameters have the wrong frame count");
    }
  } else {
    result.params = zero_subject(model, observations.size());
    result.params.frames = init_poses(model, camera, observations, config);
  }

  const auto low = std::make_shared<const std::vector<FrameObservation>>(
      downsample_observations(observations, camera, config.render_resolution));

  for (const auto& stage : config.stages) {
    std::map<std::string, double> sizes = stage.step_sizes;
    if (options.freeze_poses) {
      sizes.erase("pose");
      sizes.erase("trans");
    }
    if (sizes.empty()) continue;
    StageTrace trace;
    const StageOutcome o =
        run_stage(model, camera, low, config, stage, sizes, budget, result.params, trace);
    result.stages.push_back(std::move(trace));
    result.stage_params.push_back(result.params);
    if (o.diverged) {
      result.diverged = true;
      break;
    }
    if (o.budget_exhausted) {
      result.budget_exhausted = true;
      break;
    }
  }
  result.frame_iou = silhouette_ious(model, camera, result.params, observations);
  return result;
}

FitResult refine(const ModelDefinition& model, const Camera& camera,
                 const std::vector<FrameObservation>& observations, const SubjectParams& params,
                 int steps, const FitConfig& config) {
  if (steps < 0) throw InvalidArgument("refine: steps must be >= 0");
  FitConfig one = config;
  StageConfig stage = config.refinement_stage();
  stage.steps = steps;
  one.stages = {stage};
  FitOptions options;
  options.initial = params;
  return fit(model, camera, observations, one, options);
}

}  // namespace bodyfit
