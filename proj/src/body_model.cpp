#include "bodyfit/body_model.hpp"

#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "bodyfit/errors.hpp"

namespace bodyfit {
namespace {

constexpr double kRowSumTolerance = 1e-9;
constexpr double kSymmetryTolerance = 1e-6;

void require(bool ok, const std::string& what) {
  if (!ok) throw ContractViolation(what);
}

Eigen::Map<const Eigen::VectorXd> flat(const Points& p) {
  return {p.data(), p.size()};
}

double mean_y(const Points& v, const std::vector<int>& ids) {
  double s = 0.0;
  for (int id : ids) s += v(id, 1);
  return s / static_cast<double>(ids.size());
}

void check_row_sums(const RowMatrix& m, const char* name) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if (std::abs(m.row(r).sum() - 1.0) > kRowSumTolerance) {
      throw DegenerateModel(std::string(name) + " row " + std::to_string(r) + " does not sum to 1");
    }
  }
}

}  // namespace

void ModelDefinition::validate() const {
  const int v = vertex_count();
  const int j = joint_count();
  if (v < 4) throw DegenerateModel("model needs at least 4 vertices");
  if (j < 1 || parents[0] != -1) throw DegenerateModel("joint 0 must be the root");
  for (int i = 1; i < j; ++i) {
    if (parents[i] < 0 || parents[i] >= i) {
      throw DegenerateModel("kinematic parents must be topologically ordered");
    }
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      if (faces(f, c) < 0 || faces(f, c) >= v) throw DegenerateModel("face index out of range");
    }
  }
  if (shape_dirs.rows() != 3 * v) throw DegenerateModel("shape_dirs must have 3V rows");
  if (pose_dirs.rows() != 3 * v || pose_dirs.cols() != 9 * (j - 1)) {
    throw DegenerateModel("pose_dirs must be 3V x 9(J-1)");
  }
  if (joint_regressor.rows() != j || joint_regressor.cols() != v) {
    throw DegenerateModel("joint_regressor must be J x V");
  }
  if (skin_weights.rows() != v || skin_weights.cols() != j) {
    throw DegenerateModel("skin_weights must be V x J");
  }
  if (keypoint_regressor.cols() != v || keypoint_regressor.rows() < 1) {
    throw DegenerateModel("keypoint_regressor must be K x V");
  }
  if ((joint_regressor.array() < 0.0).any() || (skin_weights.array() < 0.0).any()) {
    throw DegenerateModel("regressor and skin weights must be nonnegative");
  }
  check_row_sums(joint_regressor, "joint_regressor");
  check_row_sums(skin_weights, "skin_weights");
  check_row_sums(keypoint_regressor, "keypoint_regressor");
  for (const auto& [l, r] : symmetry_pairs) {
    if (l < 0 || r < 0 || l >= v || r >= v) throw DegenerateModel("symmetry pair out of range");
    const auto a = template_vertices.row(l);
    const auto b = template_vertices.row(r);
    if (std::abs(a.x() + b.x()) > kSymmetryTolerance || std::abs(a.y() - b.y()) > kSymmetryTolerance ||
        std::abs(a.z() - b.z()) > kSymmetryTolerance) {
      throw DegenerateModel("symmetry pair " + std::to_string(l) + "/" + std::to_string(r) +
                            " is not mirrored in x");
    }
  }
  for (int id : eye_ids) {
    if (id < 0 || id >= v) throw DegenerateModel("eye id out of range");
  }
  for (int id : ankle_ids) {
    if (id < 0 || id >= v) throw DegenerateModel("ankle id out of range");
  }
  if (!template_vertices.allFinite() || !shape_dirs.allFinite() || !pose_dirs.allFinite()) {
    throw DegenerateModel("model contains non-finite values");
  }
}

SubjectParams zero_subject(const ModelDefinition& model, std::size_t frame_count) {
  SubjectParams p;
  p.beta = Eigen::VectorXd::Zero(model.shape_count());
  p.offsets = Points::Zero(model.vertex_count(), 3);
  p.frames.assign(frame_count, FramePose{Points::Zero(model.joint_count(), 3), Vec3::Zero()});
  return p;
}

void check_subject(const ModelDefinition& model, const SubjectParams& params) {
  require(params.beta.size() == model.shape_count(), "beta length does not match model");
  require(params.offsets.rows() == model.vertex_count(), "offsets row count does not match model");
  for (const auto& f : params.frames) {
    require(f.theta.rows() == model.joint_count(), "theta row count does not match model");
  }
}

ParamVector to_param_vector(const SubjectParams& params) {
  ParamVector pv;
  pv.add_group(std::string(kShapeGroup),
               std::vector<double>(params.beta.data(), params.beta.data() + params.beta.size()));
  pv.add_group(std::string(kOffsetsGroup),
               std::vector<double>(params.offsets.data(),
                                   params.offsets.data() + params.offsets.size()));
  for (std::size_t i = 0; i < params.frames.size(); ++i) {
    const auto& f = params.frames[i];
    pv.add_group(pose_group(i), std::vector<double>(f.theta.data(), f.theta.data() + f.theta.size()));
    pv.add_group(trans_group(i), {f.trans.x(), f.trans.y(), f.trans.z()});
  }
  return pv;
}

SubjectParams from_param_vector(const ModelDefinition& model, const ParamVector& pv) {
  const int v = model.vertex_count();
  const int j = model.joint_count();
  const auto shape = pv.group(kShapeGroup);
  const auto offsets = pv.group(kOffsetsGroup);
  require(static_cast<int>(shape.size()) == model.shape_count(), "shape group length mismatch");
  require(static_cast<int>(offsets.size()) == 3 * v, "offsets group length mismatch");
  require(pv.group_count() >= 2 && (pv.group_count() - 2) % 2 == 0, "malformed parameter vector");
  const std::size_t frames = (pv.group_count() - 2) / 2;

  SubjectParams p;
  p.beta = Eigen::Map<const Eigen::VectorXd>(shape.data(), static_cast<Eigen::Index>(shape.size()));
  p.offsets = Eigen::Map<const Points>(offsets.data(), v, 3);
  p.frames.resize(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    const auto theta = pv.group(pose_group(i));
    const auto trans = pv.group(trans_group(i));
    require(static_cast<int>(theta.size()) == 3 * j, "pose group length mismatch");
    require(trans.size() == 3, "trans group length mismatch");
    p.frames[i].theta = Eigen::Map<const Points>(theta.data(), j, 3);
    p.frames[i].trans = Vec3(trans[0], trans[1], trans[2]);
  }
  return p;
}

// ---- forward model --------------------------------------------------------

Points shaped_tpose(const ModelDefinition& model, const Eigen::VectorXd& beta,
                    const Points& offsets) {
  require(beta.size() == model.shape_count(), "shaped_tpose: beta length mismatch");
  require(offsets.rows() == model.vertex_count(), "shaped_tpose: offsets row mismatch");
  return compute_shape(model, beta, offsets).tshape;
}

Points regress_joints(const ModelDefinition& model, const Eigen::VectorXd& beta) {
  require(beta.size() == model.shape_count(), "regress_joints: beta length mismatch");
  const Eigen::VectorXd rest = flat(model.template_vertices) + model.shape_dirs * beta;
  const Eigen::Map<const Points> rest_pts(rest.data(), model.vertex_count(), 3);
  return model.joint_regressor * rest_pts;
}

Points pose_blend(const ModelDefinition& model, const Points& theta) {
  require(theta.rows() == model.joint_count(), "pose_blend: theta row mismatch");
  const int j = model.joint_count();
  Eigen::VectorXd feature(9 * (j - 1));
  for (int k = 1; k < j; ++k) {
    const Mat3 r = rodrigues(theta.row(k).transpose()) - Mat3::Identity();
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) feature(9 * (k - 1) + 3 * a + b) = r(a, b);
    }
  }
  const Eigen::VectorXd disp = model.pose_dirs * feature;
  return Eigen::Map<const Points>(disp.data(), model.vertex_count(), 3);
}

Points pose_mesh(const ModelDefinition& model, const SubjectParams& params,
                 std::size_t frame_index) {
  if (frame_index >= params.frames.size()) {
    throw ContractViolation("pose_mesh: frame index " + std::to_string(frame_index) +
                            " out of range");
  }
  return pose_mesh(model, params.beta, params.offsets, params.frames[frame_index]);
}

Points pose_mesh(const ModelDefinition& model, const Eigen::VectorXd& beta, const Points& offsets,
                 const FramePose& pose) {
  require(pose.theta.rows() == model.joint_count(), "pose_mesh: theta row mismatch");
  const ShapeState shape = compute_shape(model, beta, offsets);
  return compute_pose(model, shape, pose).posed;
}

Points unpose_vertices(const ModelDefinition& model, const Points& posed_vertices,
                       const Eigen::VectorXd& beta, const Points& theta, const Vec3& trans) {
  const int v = model.vertex_count();
  require(posed_vertices.rows() == v, "unpose_vertices: vertex count mismatch");
  const ShapeState shape = compute_shape(model, beta, Points::Zero(v, 3));
  const PoseState state = compute_pose(model, shape, FramePose{theta, Vec3::Zero()});
  const Points blend = pose_blend(model, theta);

  Points out(v, 3);
  for (int i = 0; i < v; ++i) {
    Mat3 r = Mat3::Zero();
    Vec3 t = Vec3::Zero();
    for (int k = 0; k < model.joint_count(); ++k) {
      const double w = model.skin_weights(i, k);
      if (w == 0.0) continue;
      r += w * state.skin_rot[k];
      t += w * state.skin_trans[k];
    }
    const Eigen::JacobiSVD<Mat3> svd(r);
    const Vec3 sv = svd.singularValues();
    if (!(sv[2] > 0.0) || sv[0] / sv[2] > 1e12) {
      throw DegenerateSkinning("unpose_vertices: singular blended transform at vertex " +
                               std::to_string(i));
    }
    const Vec3 p = posed_vertices.row(i).transpose() - trans - t;
    out.row(i) = (r.partialPivLu().solve(p)).transpose() - blend.row(i);
  }
  return out;
}

Points regress_keypoints3d(const ModelDefinition& model, const Points& posed_vertices) {
  require(posed_vertices.rows() == model.vertex_count(),
          "regress_keypoints3d: vertex count mismatch");
  return model.keypoint_regressor * posed_vertices;
}

double eye_ankle_span(const ModelDefinition& model) {
  if (model.eye_ids.empty() || model.ankle_ids.empty()) {
    throw DegenerateModel("eye and ankle vertex sets must be nonempty");
  }
  return mean_y(model.template_vertices, model.eye_ids) -
         mean_y(model.template_vertices, model.ankle_ids);
}

ModelDefinition normalize_height(ModelDefinition model) {
  const double span = eye_ankle_span(model);
  if (!(span > 0.0)) throw DegenerateModel("eye-ankle span must be positive");
  const double factor = kNormalizedEyeAnkleSpan / span;
  if (std::abs(factor - 1.0) < 1e-12) return model;
  model.template_vertices *= factor;
  model.shape_dirs *= factor;
  model.pose_dirs *= factor;
  return model;
}

// ---- differentiable pipeline ---------------------------------------------

ShapeAdjoint ShapeAdjoint::zeros(const ModelDefinition& model) {
  return {Points::Zero(model.vertex_count(), 3), Points::Zero(model.vertex_count(), 3),
          Points::Zero(model.joint_count(), 3)};
}

ShapeState compute_shape(const ModelDefinition& model, const Eigen::VectorXd& beta,
                         const Points& offsets) {
  require(beta.size() == model.shape_count(), "beta length mismatch");
  require(offsets.rows() == model.vertex_count(), "offsets row mismatch");
  ShapeState s;
  const Eigen::VectorXd rest = flat(model.template_vertices) + model.shape_dirs * beta;
  s.rest = Eigen::Map<const Points>(rest.data(), model.vertex_count(), 3);
  s.tshape = s.rest + offsets;
  s.joints = model.joint_regressor * s.rest;
  return s;
}

void shape_backward(const ModelDefinition& model, const ShapeAdjoint& adjoint,
                    Eigen::Ref<Eigen::VectorXd> d_beta, Points& d_offsets) {
  d_offsets += adjoint.d_tshape;
  const Points d_rest =
      adjoint.d_tshape + adjoint.d_rest + model.joint_regressor.transpose() * adjoint.d_joints;
  d_beta += model.shape_dirs.transpose() * flat(d_rest);
}

PoseState compute_pose(const ModelDefinition& model, const ShapeState& shape,
                       const FramePose& pose) {
  const int jc = model.joint_count();
  const int vc = model.vertex_count();
  require(pose.theta.rows() == jc, "theta row count mismatch");
  if (!pose.trans.allFinite()) throw InvalidArgument("non-finite translation");

  PoseState st;
  st.trans = pose.trans;
  st.local.resize(jc);
  st.world_rot.resize(jc);
  st.world_trans.resize(jc);
  st.skin_rot.resize(jc);
  st.skin_trans.resize(jc);

  Eigen::VectorXd feature(9 * (jc - 1));
  for (int k = 0; k < jc; ++k) {
    st.local[k] = rodrigues_with_jacobian(pose.theta.row(k).transpose());
    const Vec3 joint = shape.joints.row(k).transpose();
    if (k == 0) {
      st.world_rot[0] = st.local[0].rotation;
      st.world_trans[0] = joint;
    } else {
      const int p = model.parents[k];
      st.world_rot[k] = st.world_rot[p] * st.local[k].rotation;
      st.world_trans[k] =
          st.world_rot[p] * (joint - shape.joints.row(p).transpose()) + st.world_trans[p];
      const Mat3 dev = st.local[k].rotation - Mat3::Identity();
      for (int a = 0; a < 3; ++a) {
        for (int b = 0; b < 3; ++b) feature(9 * (k - 1) + 3 * a + b) = dev(a, b);
      }
    }
    st.skin_rot[k] = st.world_rot[k];
    st.skin_trans[k] = st.world_trans[k] - st.world_rot[k] * joint;
  }

  const Eigen::VectorXd blend = model.pose_dirs * feature;
  st.pre_skin = shape.tshape + Eigen::Map<const Points>(blend.data(), vc, 3);

  st.posed.resize(vc, 3);
  for (int i = 0; i < vc; ++i) {
    Mat3 r = Mat3::Zero();
    Vec3 t = Vec3::Zero();
    for (int k = 0; k < jc; ++k) {
      const double w = model.skin_weights(i, k);
      if (w == 0.0) continue;
      r.noalias() += w * st.skin_rot[k];
      t.noalias() += w * st.skin_trans[k];
    }
    st.posed.row(i) = (r * st.pre_skin.row(i).transpose() + t + pose.trans).transpose();
  }
  return st;
}

void pose_backward(const ModelDefinition& model, const ShapeState& shape, const PoseState& st,
                   const Points& d_posed, ShapeAdjoint& shape_adjoint, Points& d_theta,
                   Vec3& d_trans) {
  const int jc = model.joint_count();
  const int vc = model.vertex_count();

  std::vector<Mat3> d_skin_rot(jc, Mat3::Zero());
  std::vector<Vec3> d_skin_trans(jc, Vec3::Zero());
  Points d_pre = Points::Zero(vc, 3);

  for (int i = 0; i < vc; ++i) {
    const Vec3 g = d_posed.row(i).transpose();
    if (g.isZero(0.0)) continue;
    const Vec3 p = st.pre_skin.row(i).transpose();
    const Mat3 outer = g * p.transpose();
    Mat3 r = Mat3::Zero();
    for (int k = 0; k < jc; ++k) {
      const double w = model.skin_weights(i, k);
      if (w == 0.0) continue;
      r.noalias() += w * st.skin_rot[k];
      d_skin_rot[k].noalias() += w * outer;
      d_skin_trans[k].noalias() += w * g;
    }
    d_pre.row(i) = (r.transpose() * g).transpose();
    d_trans += g;
  }

  std::vector<Mat3> d_world_rot(jc);
  std::vector<Vec3> d_world_trans(jc);
  for (int k = 0; k < jc; ++k) {
    const Vec3 joint = shape.joints.row(k).transpose();
    d_world_rot[k] = d_skin_rot[k] - d_skin_trans[k] * joint.transpose();
    d_world_trans[k] = d_skin_trans[k];
    shape_adjoint.d_joints.row(k) -= (st.world_rot[k].transpose() * d_skin_trans[k]).transpose();
  }

  // Pose blendshape adjoint, one 3x3 block per non-root joint.
  const Eigen::VectorXd d_feature =
      model.pose_dirs.transpose() * Eigen::Map<const Eigen::VectorXd>(d_pre.data(), d_pre.size());

  std::vector<Mat3> d_local(jc, Mat3::Zero());
  for (int k = jc - 1; k >= 1; --k) {
    const int p = model.parents[k];
    const Vec3 bone = (shape.joints.row(k) - shape.joints.row(p)).transpose();
    d_world_rot[p].noalias() += d_world_rot[k] * st.local[k].rotation.transpose();
    d_world_rot[p].noalias() += d_world_trans[k] * bone.transpose();
    d_local[k].noalias() += st.world_rot[p].transpose() * d_world_rot[k];
    const Vec3 d_bone = st.world_rot[p].transpose() * d_world_trans[k];
    shape_adjoint.d_joints.row(k) += d_bone.transpose();
    shape_adjoint.d_joints.row(p) -= d_bone.transpose();
    d_world_trans[p] += d_world_trans[k];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) d_local[k](a, b) += d_feature(9 * (k - 1) + 3 * a + b);
    }
  }
  d_local[0] += d_world_rot[0];
  shape_adjoint.d_joints.row(0) += d_world_trans[0].transpose();

  for (int k = 0; k < jc; ++k) {
    d_theta.row(k) += rodrigues_backward(st.local[k], d_local[k]).transpose();
  }
  shape_adjoint.d_tshape += d_pre;
}

}  // namespace bodyfit
