#pragma once

#include <Eigen/Core>

#include "bodyfit/body_model.hpp"

namespace bodyfit {

using Pixels = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline constexpr double kMinDepth = 1e-6;

/// Pinhole camera at the origin looking down +z, image y pointing down.
/// Pixel (col, row) covers [col, col+1) x [row, row+1); its center is at
/// (col + 0.5, row + 0.5).
struct Camera {
  int width = 0;
  int height = 0;
  double focal_pixels = 0.0;
  Eigen::Vector2d principal_point = Eigen::Vector2d::Zero();

  /// Focal length equal to the sensor height, principal point at the center.
  static Camera standard(int width, int height);

  void validate() const;

  /// Same field of view at a different image height.
  Camera resized(int new_height) const;
};

Pixels project(const Camera& camera, const Points& points);

/// d(loss)/d(points) given d(loss)/d(pixels).
Points project_backward(const Camera& camera, const Points& points, const Pixels& d_pixels);

}  // namespace bodyfit
