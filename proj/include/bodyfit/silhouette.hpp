#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "bodyfit/camera.hpp"

namespace bodyfit {

/// Row-major occupancy image with values in [0, 1].
struct SilhouetteImage {
  int width = 0;
  int height = 0;
  std::vector<double> values;

  SilhouetteImage() = default;
  SilhouetteImage(int w, int h, double fill = 0.0)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  double& at(int col, int row) { return values[static_cast<std::size_t>(row) * width + col]; }
  double at(int col, int row) const { return values[static_cast<std::size_t>(row) * width + col]; }
  std::size_t pixel_count() const { return values.size(); }
};

/// Soft rasterization of a triangle soup.
///
/// Each triangle covers pixel p with alpha = sigmoid(d/tau), d being the
/// signed 2D distance from the pixel center to the projected triangle
/// (positive inside). Occupancy is the probabilistic union
/// 1 - prod(1 - alpha). Coverage is tapered to exactly zero between 4 and 5
/// tau outside a triangle so far pixels can be skipped without breaking
/// differentiability.
struct SoftRender {
  SilhouetteImage image;
  std::vector<double> log_free;  // sum of log(1 - alpha) over nonzero factors
  std::vector<int> saturated;    // count of factors with 1 - alpha == 0
  Pixels projected;
};

SoftRender render_soft(const Camera& camera, const Points& vertices, const Faces& faces,
                       double softness_tau);

SilhouetteImage render_silhouette(const Camera& camera, const Points& vertices, const Faces& faces,
                                  double softness_tau);

/// d(loss)/d(vertices) given d(loss)/d(occupancy) per pixel.
Points render_backward(const Camera& camera, const Points& vertices, const Faces& faces,
                       double softness_tau, const SoftRender& forward,
                       std::span<const double> d_image);

/// Intersection over union of the {value >= 0.5} sets; 1 when both are empty.
double mask_iou(const SilhouetteImage& a, const SilhouetteImage& b);

/// Area-weighted resampling to a new size (box filter with fractional overlap).
SilhouetteImage resample_area(const SilhouetteImage& image, int width, int height);

SilhouetteImage threshold(const SilhouetteImage& image, double level = 0.5);

/// Binary NetPBM (P5), 8 bit. Values are scaled by 255 and rounded on save.
void save_pgm(const SilhouetteImage& image, const std::filesystem::path& path);
SilhouetteImage load_pgm(const std::filesystem::path& path);

}  // namespace bodyfit
