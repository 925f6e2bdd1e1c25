#pragma once

#include <array>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bodyfit {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Rotation matrix for an axis-angle vector (radians). Throws InvalidArgument
/// on non-finite input. Small angles use a series expansion of the
/// coefficients, so the map is smooth through zero.
Mat3 rodrigues(const Vec3& axis_angle);

/// Rotation plus its partial derivatives dR/d(axis_angle[i]).
struct RodriguesJacobian {
  Mat3 rotation;
  std::array<Mat3, 3> d_rotation;
};

RodriguesJacobian rodrigues_with_jacobian(const Vec3& axis_angle);

/// Pulls a matrix adjoint dL/dR back onto the axis-angle parameters.
Vec3 rodrigues_backward(const RodriguesJacobian& jac, const Mat3& d_rotation);

/// Nearest proper rotation U diag(1, 1, det(U V^T)) V^T. Throws
/// DegenerateInput when two or more singular values fall below 1e-12.
Mat3 project_to_rotation(const Mat3& m);

/// Inverse of rodrigues for a proper rotation, angle in [0, pi].
Vec3 axis_angle_from_rotation(const Mat3& rotation);

Mat3 skew(const Vec3& v);

}  // namespace bodyfit
