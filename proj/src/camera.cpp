#include "bodyfit/camera.hpp"

#include <cmath>
#include <string>

#include "bodyfit/errors.hpp"

namespace bodyfit {

Camera Camera::standard(int width, int height) {
  Camera c;
  c.width = width;
  c.height = height;
  c.focal_pixels = static_cast<double>(height);
  c.principal_point = Eigen::Vector2d(0.5 * width, 0.5 * height);
  c.validate();
  return c;
}

void Camera::validate() const {
  if (width < 8 || height < 8) throw InvalidArgument("camera image must be at least 8x8");
  if (!(focal_pixels > 0.0) || !std::isfinite(focal_pixels)) {
    throw InvalidArgument("camera focal length must be positive");
  }
  if (!principal_point.allFinite()) throw InvalidArgument("camera principal point must be finite");
}

Camera Camera::resized(int new_height) const {
  const double s = static_cast<double>(new_height) / height;
  Camera c;
  c.height = new_height;
  c.width = static_cast<int>(std::lround(width * s));
  c.focal_pixels = focal_pixels * s;
  c.principal_point = principal_point * s;
  c.validate();
  return c;
}

Pixels project(const Camera& camera, const Points& points) {
  Pixels out(points.rows(), 2);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double z = points(i, 2);
    if (!(z > kMinDepth)) {
      throw BehindCamera("point " + std::to_string(i) + " is behind the camera (z = " +
                         std::to_string(z) + ")");
    }
    out(i, 0) = camera.principal_point.x() + camera.focal_pixels * points(i, 0) / z;
    out(i, 1) = camera.principal_point.y() + camera.focal_pixels * points(i, 1) / z;
  }
  return out;
}

Points project_backward(const Camera& camera, const Points& points, const Pixels& d_pixels) {
  Points out(points.rows(), 3);
  const double f = camera.focal_pixels;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double inv_z = 1.0 / points(i, 2);
    const double gu = d_pixels(i, 0);
    const double gv = d_pixels(i, 1);
    out(i, 0) = gu * f * inv_z;
    out(i, 1) = gv * f * inv_z;
    out(i, 2) = -(gu * points(i, 0) + gv * points(i, 1)) * f * inv_z * inv_z;
  }
  return out;
}

}  // namespace bodyfit
