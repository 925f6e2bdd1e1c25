#include <cmath>
#include <numbers>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/fitter.hpp"

namespace bodyfit {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// SMPL joint indices used by the canonical pose.
constexpr int kLeftHip = 1;
constexpr int kRightHip = 2;
constexpr int kLeftShoulder = 16;
constexpr int kRightShoulder = 17;
constexpr int kLeftElbow = 18;
constexpr int kRightElbow = 19;

bool known_kind(const std::string& kind) {
  for (const char* k : kGroupKinds) {
    if (kind == k) return true;
  }
  return false;
}

WeightedTerm wt(Term t, double w) { return WeightedTerm{t, w}; }

}  // namespace

Points a_pose_theta(int joint_count) {
  Points theta = Points::Zero(joint_count, 3);
  if (joint_count < 20) return theta;
  // Left side is +x in the model frame; arms hang 30 degrees below
  // horizontal, forearms bend toward the front (+z).
  theta.row(kLeftShoulder) << 0.0, 0.0, -30.0 * kDeg;
  theta.row(kRightShoulder) << 0.0, 0.0, 30.0 * kDeg;
  theta.row(kLeftElbow) << 0.0, -15.0 * kDeg, 0.0;
  theta.row(kRightElbow) << 0.0, 15.0 * kDeg, 0.0;
  theta.row(kLeftHip) << 0.0, 0.0, 5.0 * kDeg;
  theta.row(kRightHip) << 0.0, 0.0, -5.0 * kDeg;
  return theta;
}

Vec3 root_for_yaw(double yaw) {
  const Mat3 r = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()).toRotationMatrix() *
                 Eigen::AngleAxisd(yaw, Vec3::UnitY()).toRotationMatrix();
  return axis_angle_from_rotation(r);
}

double yaw_from_root(const Vec3& root_axis_angle) {
  const Mat3 m = Eigen::AngleAxisd(std::numbers::pi, Vec3::UnitX()).toRotationMatrix().transpose() *
                 rodrigues(root_axis_angle);
  return std::atan2(m(0, 2), m(0, 0));
}

void FitConfig::validate(const ModelDefinition* model) const {
  if (stages.empty()) throw ConfigError("fit config needs at least one stage");
  for (const auto& s : stages) {
    if (s.steps < 0) throw ConfigError("stage '" + s.name + "': step count must be >= 0");
    if (s.step_sizes.empty()) throw ConfigError("stage '" + s.name + "': no parameter groups");
    for (const auto& [kind, size] : s.step_sizes) {
      if (!known_kind(kind)) throw ConfigError("stage '" + s.name + "': unknown group '" + kind + "'");
      if (!(size > 0.0) || !std::isfinite(size)) {
        throw ConfigError("stage '" + s.name + "': step sizes must be positive");
      }
    }
    if (!(s.tau_px > 0.0)) throw ConfigError("stage '" + s.name + "': tau must be positive");
    if (s.objective.terms.empty()) throw ConfigError("stage '" + s.name + "': empty objective");
    bool positive = false;
    for (const auto& t : s.objective.terms) {
      if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
        throw ConfigError("stage '" + s.name + "': weights must be finite and >= 0");
      }
      if (term_is_supervised(t.term)) {
        throw ConfigError("stage '" + s.name + "': term '" + std::string(term_name(t.term)) +
                          "' needs ground truth and cannot be used for fitting");
      }
      positive = positive || t.weight > 0.0;
    }
    if (!positive) throw ConfigError("stage '" + s.name + "': no positive weight");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam decay rates must lie in [0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("Adam epsilon must be positive");
  if (!(lr_final_fraction > 0.0 && lr_final_fraction <= 1.0)) {
    throw ConfigError("lr_final_fraction must lie in (0, 1]");
  }
  if (render_resolution < 16) throw ConfigError("render_resolution must be >= 16");
  if (budget_seconds && !(*budget_seconds > 0.0)) throw ConfigError("budget_seconds must be positive");
  if (early_stop_patience < 1) throw ConfigError("early_stop patience must be >= 1");
  if (!(early_stop_tolerance >= 0.0)) throw ConfigError("early_stop tolerance must be >= 0");
  if (model && init_pose.rows() != model->joint_count()) {
    throw ConfigError("init_pose has " + std::to_string(init_pose.rows()) + " joints, model has " +
                      std::to_string(model->joint_count()));
  }
}

FitConfig default_fit_config(int joint_count) {
  FitConfig c;
  c.init_pose = a_pose_theta(joint_count);

  // Stage P also moves beta: keypoints fix bone lengths, and limb poses fitted
  // with the mean skeleton come out bent to compensate.
  StageConfig p;
  p.name = "P";
  p.step_sizes = {{"pose", 0.01}, {"trans", 0.01}, {"shape", 0.05}};
  p.objective.terms = {wt(Term::kKeypoints2D, 1.0), wt(Term::kPoseConsistency, 1.0)};
  p.steps = 150;
  p.tau_px = 1.0;

  // Softness in observation pixels. The soft union dilates by roughly
  // tau * ln(overlap), so coarse tau biases the body thin; 0.5 px matches
  // how masks are produced.
  StageConfig s;
  s.name = "S";
  s.step_sizes = {{"shape", 0.1}, {"pose", 0.001}, {"trans", 0.001}};
  s.objective.terms = {wt(Term::kSilhouette, 1.0), wt(Term::kKeypoints2D, 0.5),
                       wt(Term::kPoseConsistency, 1.0)};
  s.steps = 40;
  s.tau_px = 1.0;

  StageConfig d;
  d.name = "D";
  d.step_sizes = {{"offsets", 0.001}, {"shape", 0.02}, {"pose", 0.0005}, {"trans", 0.0005}};
  d.objective.terms = {wt(Term::kSilhouette, 1.0), wt(Term::kKeypoints2D, 0.5),
                       wt(Term::kLaplacian, 10.0), wt(Term::kSymmetry, 1.0),
                       wt(Term::kAnchors, 0.5), wt(Term::kPoseConsistency, 1.0)};
  d.steps = 25;
  d.tau_px = 0.5;

  c.stages = {p, s, d};
  return c;
}

nlohmann::json fit_config_to_json(const FitConfig& c) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& s : c.stages) {
    stages.push_back({{"name", s.name},
                      {"steps", s.steps},
                      {"step_sizes", s.step_sizes},
                      {"tau_px", s.tau_px},
                      {"objective", objective_spec_to_json(s.objective)}});
  }
  nlohmann::json theta = nlohmann::json::array();
  for (Eigen::Index j = 0; j < c.init_pose.rows(); ++j) {
    theta.push_back({c.init_pose(j, 0), c.init_pose(j, 1), c.init_pose(j, 2)});
  }
  nlohmann::json doc = {
      {"version", 1},
      {"seed", c.seed},
      {"render_resolution", c.render_resolution},
      {"budget_seconds", nullptr},
      {"optimizer",
       {{"beta1", c.beta1},
        {"beta2", c.beta2},
        {"epsilon", c.adam_epsilon},
        {"lr_final_fraction", c.lr_final_fraction}}},
      {"early_stop", {{"tolerance", c.early_stop_tolerance}, {"patience", c.early_stop_patience}}},
      {"init_pose", {{"name", c.init_pose_name}, {"theta", theta}}},
      {"stages", stages},
  };
  if (c.budget_seconds) doc["budget_seconds"] = *c.budget_seconds;
  return doc;
}

FitConfig fit_config_from_json(const nlohmann::json& doc) {
  FitConfig c;
  try {
    if (doc.value("version", 1) != 1) throw ConfigError("unsupported fit config version");
    c.seed = doc.value("seed", std::uint64_t{0});
    c.render_resolution = doc.value("render_resolution", c.render_resolution);
    if (doc.contains("budget_seconds") && !doc.at("budget_seconds").is_null()) {
      c.budget_seconds = doc.at("budget_seconds").get<double>();
    }
    if (doc.contains("optimizer")) {
      const auto& o = doc.at("optimizer");
      c.beta1 = o.value("beta1", c.beta1);
      c.beta2 = o.value("beta2", c.beta2);
      c.adam_epsilon = o.value("epsilon", c.adam_epsilon);
      c.lr_final_fraction = o.value("lr_final_fraction", c.lr_final_fraction);
    }
    if (doc.contains("early_stop")) {
      const auto& e = doc.at("early_stop");
      c.early_stop_tolerance = e.value("tolerance", c.early_stop_tolerance);
      c.early_stop_patience = e.value("patience", c.early_stop_patience);
    }
    if (doc.contains("init_pose")) {
      const auto& ip = doc.at("init_pose");
      c.init_pose_name = ip.value("name", c.init_pose_name);
      const auto& rows = ip.at("theta");
      c.init_pose.resize(static_cast<Eigen::Index>(rows.size()), 3);
      for (std::size_t j = 0; j < rows.size(); ++j) {
        if (rows[j].size() != 3) throw ConfigError("init_pose rows must have 3 entries");
        for (int k = 0; k < 3; ++k) c.init_pose(static_cast<Eigen::Index>(j), k) = rows[j][k].get<double>();
      }
    } else {
      c.init_pose = a_pose_theta(24);
    }
    for (const auto& s : doc.at("stages")) {
      StageConfig st;
      st.name = s.value("name", std::string("stage"));
      st.steps = s.at("steps").get<int>();
      st.step_sizes = s.at("step_sizes").get<std::map<std::string, double>>();
      st.tau_px = s.value("tau_px", st.tau_px);
      st.objective = objective_spec_from_json(s.at("objective"));
      c.stages.push_back(std::move(st));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed fit config: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace bodyfit
