#include <filesystem>
#include <random>

#include "doctest.h"

#include "bodyfit/camera.hpp"
#include "bodyfit/errors.hpp"
#include "bodyfit/gradcheck.hpp"
#include "bodyfit/silhouette.hpp"

using namespace bodyfit;

TEST_CASE("pinhole projection") {
  const Camera cam = Camera::standard(200, 100);
  CHECK(cam.focal_pixels == 100.0);
  CHECK(cam.principal_point == Eigen::Vector2d(100.0, 50.0));
  Points p(2, 3);
  p << 0.2, -0.1, 2.0, -1.0, 0.5, 4.0;
  const Pixels px = project(cam, p);
  CHECK(px(0, 0) == doctest::Approx(100.0 + 100.0 * 0.1));
  CHECK(px(0, 1) == doctest::Approx(50.0 - 100.0 * 0.05));
  CHECK(px(1, 0) == doctest::Approx(100.0 - 25.0));
  CHECK(px(1, 1) == doctest::Approx(50.0 + 12.5));
  p(1, 2) = 0.0;
  CHECK_THROWS_AS(project(cam, p), BehindCamera);
}

TEST_CASE("resized keeps the field of view") {
  const Camera cam = Camera::standard(1080, 1080);
  const Camera small = cam.resized(256);
  CHECK(small.height == 256);
  CHECK(small.focal_pixels / small.height == doctest::Approx(cam.focal_pixels / cam.height));
}

TEST_CASE("project_backward matches central differences") {
  const Camera cam = Camera::standard(64, 64);
  Points p(3, 3);
  p << 0.1, 0.2, 2.0, -0.3, 0.1, 3.0, 0.0, -0.2, 2.5;
  Pixels w(3, 2);
  w << 0.3, -1.0, 2.0, 0.5, -0.7, 1.1;
  const Points g = project_backward(cam, p, w);
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 3; ++k) {
      Points a = p, b = p;
      a(i, k) += 1e-6;
      b(i, k) -= 1e-6;
      const double fd = ((project(cam, a) - project(cam, b)).cwiseProduct(w)).sum() / 2e-6;
      CHECK(g(i, k) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

namespace {

// Axis-aligned square of half-width h at depth z, centered on the axis.
void square(double h, double z, Points& v, Faces& f) {
  v.resize(4, 3);
  v << -h, -h, z, h, -h, z, h, h, z, -h, h, z;
  f.resize(2, 3);
  f << 0, 1, 2, 0, 2, 3;
}

}  // namespace

TEST_CASE("soft render of a square approaches the hard mask") {
  const Camera cam = Camera::standard(64, 64);
  Points v;
  Faces f;
  square(0.25, 2.0, v, f);  // 8 px half-width about the center
  const SilhouetteImage img = render_silhouette(cam, v, f, 0.05);
  SilhouetteImage hard(64, 64);
  for (int r = 24; r < 40; ++r)
    for (int c = 24; c < 40; ++c) hard.at(c, r) = 1.0;
  CHECK(mask_iou(threshold(img), hard) == doctest::Approx(1.0));
  CHECK(img.at(30, 34) > 0.99);
  // On the shared diagonal each triangle sits at d = 0 and covers half.
  CHECK(img.at(32, 32) == doctest::Approx(0.75));
  CHECK(img.at(2, 2) == 0.0);  // beyond the taper
  // Both the image and its complement are bounded.
  for (double x : img.values) CHECK((x >= 0.0 && x <= 1.0));
}

TEST_CASE("render_backward matches central differences") {
  const Camera cam = Camera::standard(24, 24);
  Points v;
  Faces f;
  square(0.3, 2.0, v, f);
  v(2, 0) += 0.07;
  v(3, 1) -= 0.05;
  const double tau = 1.0;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> w(24 * 24);
  for (double& x : w) x = u(rng);
  auto loss = [&](const Points& pts) {
    const SilhouetteImage img = render_silhouette(cam, pts, f, tau);
    double s = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * img.values[i];
    return s;
  };
  const SoftRender fwd = render_soft(cam, v, f, tau);
  const Points g = render_backward(cam, v, f, tau, fwd, w);
  for (int i = 0; i < 4; ++i) {
    for (int k = 0; k < 3; ++k) {
      Points a = v, b = v;
      a(i, k) += 1e-6;
      b(i, k) -= 1e-6;
      const double fd = (loss(a) - loss(b)) / 2e-6;
      CHECK(g(i, k) == doctest::Approx(fd).epsilon(1e-5).scale(1.0));
    }
  }
}

TEST_CASE("mask_iou edge cases") {
  SilhouetteImage a(4, 4), b(4, 4);
  CHECK(mask_iou(a, b) == 1.0);
  a.at(0, 0) = 1.0;
  CHECK(mask_iou(a, b) == 0.0);
  b.at(0, 0) = 0.6;
  b.at(1, 0) = 1.0;
  CHECK(mask_iou(a, b) == doctest::Approx(0.5));
}

TEST_CASE("resample_area preserves mass") {
  SilhouetteImage img(9, 9);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0;
  for (double& x : img.values) sum += (x = u(rng));
  const SilhouetteImage small = resample_area(img, 4, 4);
  double small_sum = 0.0;
  for (double x : small.values) small_sum += x;
  CHECK(small_sum * (81.0 / 16.0) == doctest::Approx(sum).epsilon(1e-12));
  const SilhouetteImage same = resample_area(img, 9, 9);
  for (std::size_t i = 0; i < img.values.size(); ++i) CHECK(same.values[i] == doctest::Approx(img.values[i]));
}

TEST_CASE("pgm round trip") {
  SilhouetteImage img(5, 3);
  img.at(1, 1) = 1.0;
  img.at(4, 2) = 0.5;
  const auto path = std::filesystem::temp_directory_path() / "bodyfit_unit_mask.pgm";
  save_pgm(img, path);
  const SilhouetteImage back = load_pgm(path);
  CHECK(back.width == 5);
  CHECK(back.height == 3);
  CHECK(back.at(1, 1) == 1.0);
  CHECK(back.at(4, 2) == doctest::Approx(128.0 / 255.0));
  CHECK(back.at(0, 0) == 0.0);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_pgm(path), IoError);
}
