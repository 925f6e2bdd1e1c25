#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "bodyfit/errors.hpp"
#include "bodyfit/params.hpp"
#include "bodyfit/rotation.hpp"

using namespace bodyfit;

namespace {

Mat3 eigen_rotation(const Vec3& aa) {
  const double angle = aa.norm();
  if (angle == 0.0) return Mat3::Identity();
  return Eigen::AngleAxisd(angle, aa / angle).toRotationMatrix();
}

}  // namespace

TEST_CASE("rodrigues matches Eigen's angle-axis") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    const Vec3 aa(u(rng), u(rng), u(rng));
    const Mat3 r = rodrigues(aa);
    CHECK((r - eigen_rotation(aa)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(rodrigues(Vec3::Zero()) == Mat3::Identity());
}

TEST_CASE("rodrigues is continuous through zero") {
  const Vec3 axis = Vec3(1, 2, -1).normalized();
  for (double a : {1e-3, 1e-6, 1e-9, 1e-12}) {
    CHECK((rodrigues(a * axis) - eigen_rotation(a * axis)).cwiseAbs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("rodrigues rejects non-finite input") {
  CHECK_THROWS_AS(rodrigues(Vec3(NAN, 0, 0)), InvalidArgument);
  CHECK_THROWS_AS(rodrigues(Vec3(0, INFINITY, 0)), InvalidArgument);
}

TEST_CASE("axis_angle_from_rotation inverts rodrigues") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    Vec3 axis(u(rng), u(rng), u(rng));
    axis.normalize();
    const double angle = std::numbers::pi * std::abs(u(rng)) * 0.999;
    const Vec3 back = axis_angle_from_rotation(rodrigues(angle * axis));
    CHECK((back - angle * axis).norm() < 1e-9);
  }
  // Near pi the sign of the axis is ambiguous; the rotation must match.
  const Vec3 near_pi = (std::numbers::pi - 1e-9) * Vec3(0, 1, 0);
  CHECK((rodrigues(axis_angle_from_rotation(rodrigues(near_pi))) - rodrigues(near_pi)).norm() < 1e-9);
}

TEST_CASE("rodrigues jacobian matches central differences") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  for (int i = 0; i < 20; ++i) {
    const Vec3 aa = i == 0 ? Vec3::Zero() : Vec3(u(rng), u(rng), u(rng));
    const RodriguesJacobian jac = rodrigues_with_jacobian(aa);
    for (int k = 0; k < 3; ++k) {
      const double h = 1e-6;
      Vec3 p = aa, m = aa;
      p[k] += h;
      m[k] -= h;
      const Mat3 fd = (rodrigues(p) - rodrigues(m)) / (2 * h);
      CHECK((jac.d_rotation[k] - fd).cwiseAbs().maxCoeff() < 1e-8);
    }
    // Backward of a linear functional <G, R> equals its directional derivatives.
    const Mat3 g = Mat3::Random();
    const Vec3 back = rodrigues_backward(jac, g);
    for (int k = 0; k < 3; ++k) CHECK(back[k] == doctest::Approx((jac.d_rotation[k].cwiseProduct(g)).sum()).epsilon(1e-12));
  }
}

TEST_CASE("project_to_rotation") {
  const Mat3 r = rodrigues(Vec3(0.3, -0.2, 0.9));
  CHECK((project_to_rotation(r) - r).cwiseAbs().maxCoeff() < 1e-12);
  const Mat3 noisy = r + 1e-3 * Mat3::Random();
  const Mat3 p = project_to_rotation(noisy);
  CHECK(p.determinant() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p - r).norm() < 1e-2);
  // A reflection is mapped to a proper rotation.
  CHECK(project_to_rotation(Mat3(Eigen::Vector3d(1, 1, -1).asDiagonal())).determinant() ==
        doctest::Approx(1.0));
  Mat3 rank1 = Mat3::Zero();
  rank1(0, 0) = 1.0;
  CHECK_THROWS_AS(project_to_rotation(rank1), DegenerateInput);
}

TEST_CASE("skew builds the cross-product matrix") {
  const Vec3 a(1, -2, 3), b(0.5, 4, -1);
  CHECK((skew(a) * b - a.cross(b)).norm() < 1e-15);
}

TEST_CASE("ParamVector keeps insertion order and layout") {
  ParamVector p;
  p.add_group("shape", {1, 2});
  p.add_group("pose_0", {3, 4, 5});
  CHECK(p.names() == std::vector<std::string>{"shape", "pose_0"});
  CHECK(p.size() == 5);
  CHECK(p.group("pose_0")[2] == 5);
  CHECK(p.has("shape"));
  CHECK_FALSE(p.has("trans_0"));
  const ParamVector z = p.zeros_like();
  CHECK(z.same_layout(p));
  CHECK(z.group("shape")[1] == 0.0);
  p.group("shape")[0] = NAN;
  CHECK_FALSE(p.all_finite());
  p.set_zero();
  CHECK(p.all_finite());
  CHECK(pose_group(3) != trans_group(3));
}
