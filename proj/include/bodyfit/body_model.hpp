#pragma once

#include <utility>
#include <vector>

#include <Eigen/Core>

#include "bodyfit/params.hpp"
#include "bodyfit/rotation.hpp"

namespace bodyfit {

/// N x 3 row-major block of points (vertices, joints, axis-angles).
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr double kNormalizedEyeAnkleSpan = 1.66;

/// Template mesh, blendshapes, regressors and skinning data of an
/// SMPL-style body. Immutable once loaded.
///
/// Flat blendshape layout: row 3*v + axis, one column per coefficient.
/// Joints are stored in topological order (parents[j] < j, parents[0] = -1).
struct ModelDefinition {
  Points template_vertices;        // V x 3, meters
  Faces faces;                     // T x 3
  std::vector<int> parents;        // J
  RowMatrix shape_dirs;            // 3V x B
  RowMatrix pose_dirs;             // 3V x 9(J-1)
  RowMatrix joint_regressor;       // J x V
  RowMatrix skin_weights;          // V x J
  RowMatrix keypoint_regressor;    // K x V
  std::vector<std::pair<int, int>> symmetry_pairs;  // (left, right); midline vertices pair with themselves
  std::vector<int> eye_ids;
  std::vector<int> ankle_ids;

  int vertex_count() const { return static_cast<int>(template_vertices.rows()); }
  int joint_count() const { return static_cast<int>(parents.size()); }
  int keypoint_count() const { return static_cast<int>(keypoint_regressor.rows()); }
  int shape_count() const { return static_cast<int>(shape_dirs.cols()); }

  /// Throws DegenerateModel on any broken invariant.
  void validate() const;
};

struct FramePose {
  Points theta;  // J x 3 axis-angle, radians
  Vec3 trans = Vec3::Zero();
};

/// The optimizable unknowns of a subject.
struct SubjectParams {
  Eigen::VectorXd beta;
  Points offsets;  // V x 3, T-pose space
  std::vector<FramePose> frames;
};

inline constexpr double kMaxOffsetNorm = 0.3;

SubjectParams zero_subject(const ModelDefinition& model, std::size_t frame_count);
void check_subject(const ModelDefinition& model, const SubjectParams& params);

ParamVector to_param_vector(const SubjectParams& params);
SubjectParams from_param_vector(const ModelDefinition& model, const ParamVector& params);

// ---- forward model --------------------------------------------------------

Points shaped_tpose(const ModelDefinition& model, const Eigen::VectorXd& beta,
                    const Points& offsets);
Points regress_joints(const ModelDefinition& model, const Eigen::VectorXd& beta);
Points pose_blend(const ModelDefinition& model, const Points& theta);
Points pose_mesh(const ModelDefinition& model, const SubjectParams& params,
                 std::size_t frame_index);
Points pose_mesh(const ModelDefinition& model, const Eigen::VectorXd& beta, const Points& offsets,
                 const FramePose& pose);
Points unpose_vertices(const ModelDefinition& model, const Points& posed_vertices,
                       const Eigen::VectorXd& beta, const Points& theta,
                       const Vec3& trans = Vec3::Zero());
Points regress_keypoints3d(const ModelDefinition& model, const Points& posed_vertices);
ModelDefinition normalize_height(ModelDefinition model);
double eye_ankle_span(const ModelDefinition& model);

// ---- differentiable pipeline ---------------------------------------------
//
// The shape part (blendshapes, offsets, joints) is shared by all frames and
// evaluated once; each frame then poses it. Backward passes accumulate (+=)
// into the supplied adjoint buffers.

struct ShapeState {
  Points rest;    // T + Bs(beta)
  Points tshape;  // rest + D
  Points joints;  // J x 3, regressed from rest
};

struct ShapeAdjoint {
  Points d_tshape;
  Points d_rest;  // gradient on T + Bs(beta) that bypasses the offsets
  Points d_joints;
  static ShapeAdjoint zeros(const ModelDefinition& model);
};

ShapeState compute_shape(const ModelDefinition& model, const Eigen::VectorXd& beta,
                         const Points& offsets);

void shape_backward(const ModelDefinition& model, const ShapeAdjoint& adjoint,
                    Eigen::Ref<Eigen::VectorXd> d_beta, Points& d_offsets);

struct PoseState {
  std::vector<RodriguesJacobian> local;
  std::vector<Mat3> world_rot;
  std::vector<Vec3> world_trans;
  std::vector<Mat3> skin_rot;
  std::vector<Vec3> skin_trans;
  Points pre_skin;  // T-shape plus pose blendshapes
  Points posed;
  Vec3 trans = Vec3::Zero();
};

PoseState compute_pose(const ModelDefinition& model, const ShapeState& shape,
                       const FramePose& pose);

/// Back-propagates dL/d(posed vertices) to the shape adjoint and the frame's
/// axis-angle / translation gradients.
void pose_backward(const ModelDefinition& model, const ShapeState& shape, const PoseState& state,
                   const Points& d_posed, ShapeAdjoint& shape_adjoint, Points& d_theta,
                   Vec3& d_trans);

}  // namespace bodyfit
