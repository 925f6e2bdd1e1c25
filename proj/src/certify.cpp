#include "bodyfit/certify.hpp"

#include <algorithm>
#include <memory>
#include <numbers>
#include <random>

#include "bodyfit/fitter.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

// Objective wrapper whose gradient is deliberately wrong.
class FaultyObjective final : public Objective {
 public:
  explicit FaultyObjective(const Objective& inner) : inner_(inner) {}
  void check_layout(const ParamVector& params) const override { inner_.check_layout(params); }
  double evaluate(const ParamVector& params, ParamVector* gradient) const override {
    const double v = inner_.evaluate(params, gradient);
    if (gradient) {
      for (std::size_t g = 0; g < gradient->group_count(); ++g) {
        for (double& x : gradient->group_at(g)) x *= 1.01;
      }
    }
    return v;
  }

 private:
  const Objective& inner_;
};

SubjectParams random_subject(const ModelDefinition& model, int frames, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SubjectParams p = zero_subject(model, static_cast<std::size_t>(frames));
  for (int i = 0; i < p.beta.size(); ++i) p.beta[i] = uni(rng);
  for (int v = 0; v < model.vertex_count(); ++v) {
    for (int a = 0; a < 3; ++a) p.offsets(v, a) = 0.01 * uni(rng);
  }
  const Points a_pose = a_pose_theta(model.joint_count());
  for (auto& f : p.frames) {
    f.theta = a_pose;
    for (int j = 1; j < model.joint_count(); ++j) {
      for (int a = 0; a < 3; ++a) f.theta(j, a) += 0.3 * uni(rng);
    }
    f.theta.row(0) = root_for_yaw(std::numbers::pi * uni(rng)).transpose();
    f.theta.row(0) += 0.05 * Eigen::RowVector3d(uni(rng), uni(rng), uni(rng));
  }
  place_subject(model, p, 3.0);
  for (auto& f : p.frames) f.trans += 0.05 * Vec3(uni(rng), uni(rng), uni(rng));
  return p;
}

// The target moved by a small random step, so every residual is small and
// round-off in the objective stays below the finite-difference signal.
SubjectParams perturbed(const SubjectParams& target, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  SubjectParams p = target;
  for (int i = 0; i < p.beta.size(); ++i) p.beta[i] += 0.02 * uni(rng);
  for (Eigen::Index i = 0; i < p.offsets.size(); ++i) p.offsets.data()[i] += 0.001 * uni(rng);
  for (auto& f : p.frames) {
    for (Eigen::Index i = 0; i < f.theta.size(); ++i) f.theta.data()[i] += 0.005 * uni(rng);
    f.trans += 0.003 * Vec3(uni(rng), uni(rng), uni(rng));
  }
  return p;
}

}  // namespace

TermCheck term_tolerance(Term term) {
  TermCheck c;
  c.term = term;
  switch (term) {
    case Term::kSilhouette:
      c.epsilon = 1e-4;
      c.tolerance = 1e-3;
      break;
    case Term::kKeypoints2D:
    case Term::kAnchors:
      c.epsilon = 1e-5;
      c.tolerance = 1e-4;
      break;
    default:
      c.epsilon = 1e-5;
      c.tolerance = 1e-5;
      break;
  }
  return c;
}

std::vector<TermCheck> certify_gradients(const CertifyOptions& options) {
  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  ModelDefinition model = build_procedural_model(options.vertex_target);
  // Random pose correctives so the pose-blendshape path is exercised too.
  for (Eigen::Index i = 0; i < model.pose_dirs.size(); ++i) model.pose_dirs.data()[i] = 0.002 * uni(rng);
  const Camera camera = Camera::standard(options.resolution, options.resolution);

  std::vector<TermCheck> checks;
  for (Term t : kAllTerms) checks.push_back(term_tolerance(t));

  for (int point = 0; point < options.points; ++point) {
    const SubjectParams target = random_subject(model, options.frames, rng);
    const SubjectParams est = perturbed(target, rng);
    ScenarioSpec scenario;
    scenario.seed = options.seed + static_cast<std::uint64_t>(point);
    scenario.frames = options.frames;
    scenario.resolution = std::max(64, options.resolution);
    scenario.keypoint_noise_px = 1.0;
    auto obs = std::make_shared<std::vector<FrameObservation>>(
        render_observations(model, camera, target, scenario));
    // Anchors on a spread of vertices so the term is never vacuous.
    for (auto& o : *obs) {
      o.anchors.clear();
      for (int k = 0; k < 6; ++k) {
        const int v = static_cast<int>((k * 997 + point * 31) % model.vertex_count());
        o.anchors.push_back({v, 32.0 + 10.0 * uni(rng), 32.0 + 10.0 * uni(rng), 0.5 + 0.5 * (uni(rng) + 1.0) / 2.0});
      }
    }
    ObjectiveContext ctx;
    ctx.model = &model;
    ctx.camera = camera;
    ctx.observations = obs;
    ctx.target = target;
    ctx.softness_tau = options.softness_tau;
    const ParamVector params = to_param_vector(est);

    for (auto& check : checks) {
      ObjectiveSpec spec;
      spec.terms = {{check.term, 1.0}};
      const ComposedObjective objective(ctx, spec, static_cast<std::size_t>(options.frames));
      const FaultyObjective faulty(objective);
      const Objective& used = options.inject_fault == check.term
                                  ? static_cast<const Objective&>(faulty)
                                  : static_cast<const Objective&>(objective);
      const FiniteDifferenceResult r = finite_difference_report(
          used, params, check.epsilon,
          CoordinateSample{check.term == Term::kSilhouette ? options.silhouette_coordinates_per_group
                                                      : options.coordinates_per_group,
                           options.seed * 1000 + static_cast<std::uint64_t>(point)});
      if (point == 0 || r.max_relative_error > check.max_relative_error) {
        check.max_relative_error = r.max_relative_error;
        check.worst_group = r.worst_group;
        check.worst_index = r.worst_index;
        check.analytic = r.analytic;
        check.numeric = r.numeric;
      }
    }
  }
  for (auto& c : checks) c.passed = c.max_relative_error <= c.tolerance;
  return checks;
}

}  // namespace bodyfit
