#include "bodyfit/rotation.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "bodyfit/errors.hpp"

namespace bodyfit {
namespace {

// Below this angle the coefficient functions are evaluated by their Taylor
// series; the truncation error there is O(theta^8).
constexpr double kSeriesAngle = 1e-2;

struct Coefficients {
  double a;  // sin(t)/t
  double b;  // (1 - cos(t))/t^2
  double c;  // a'(t)/t
  double d;  // b'(t)/t
};

Coefficients coefficients(double theta) {
  const double t2 = theta * theta;
  if (theta < kSeriesAngle) {
    const double t4 = t2 * t2;
    const double t6 = t4 * t2;
    return {1.0 - t2 / 6.0 + t4 / 120.0 - t6 / 5040.0,
            0.5 - t2 / 24.0 + t4 / 720.0 - t6 / 40320.0,
            -1.0 / 3.0 + t2 / 30.0 - t4 / 840.0 + t6 / 45360.0,
            -1.0 / 12.0 + t2 / 180.0 - t4 / 6720.0 + t6 / 453600.0};
  }
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  const double half = std::sin(0.5 * theta);
  const double one_minus_cos = 2.0 * half * half;
  return {s / theta, one_minus_cos / t2, (theta * c - s) / (t2 * theta),
          (theta * s - 2.0 * one_minus_cos) / (t2 * t2)};
}

void check_finite(const Vec3& v) {
  if (!v.allFinite()) throw InvalidArgument("rodrigues: non-finite axis-angle");
}

}  // namespace

Mat3 skew(const Vec3& v) {
  Mat3 k;
  k << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return k;
}

Mat3 rodrigues(const Vec3& axis_angle) {
  check_finite(axis_angle);
  const Coefficients co = coefficients(axis_angle.norm());
  const Mat3 k = skew(axis_angle);
  return Mat3::Identity() + co.a * k + co.b * (k * k);
}

RodriguesJacobian rodrigues_with_jacobian(const Vec3& axis_angle) {
  check_finite(axis_angle);
  const Coefficients co = coefficients(axis_angle.norm());
  const Mat3 k = skew(axis_angle);
  const Mat3 k2 = k * k;
  RodriguesJacobian out;
  out.rotation = Mat3::Identity() + co.a * k + co.b * k2;
  for (int i = 0; i < 3; ++i) {
    const Mat3 e = skew(Vec3::Unit(i));
    out.d_rotation[i] = co.a * e + co.b * (e * k + k * e) +
                        (co.c * axis_angle[i]) * k + (co.d * axis_angle[i]) * k2;
  }
  return out;
}

Vec3 rodrigues_backward(const RodriguesJacobian& jac, const Mat3& d_rotation) {
  return {jac.d_rotation[0].cwiseProduct(d_rotation).sum(),
          jac.d_rotation[1].cwiseProduct(d_rotation).sum(),
          jac.d_rotation[2].cwiseProduct(d_rotation).sum()};
}

Mat3 project_to_rotation(const Mat3& m) {
  if (!m.allFinite()) throw InvalidArgument("project_to_rotation: non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 sv = svd.singularValues();
  int tiny = 0;
  for (int i = 0; i < 3; ++i) tiny += sv[i] < 1e-12 ? 1 : 0;
  if (tiny >= 2) throw DegenerateInput("project_to_rotation: rank-deficient matrix");
  const Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Mat3 sign = Mat3::Identity();
  sign(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * sign * v.transpose();
}

Vec3 axis_angle_from_rotation(const Mat3& rotation) {
  const Eigen::AngleAxisd aa(rotation);
  return aa.angle() * aa.axis();
}

}  // namespace bodyfit
