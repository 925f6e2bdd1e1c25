#include "bodyfit/silhouette.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "bodyfit/errors.hpp"

namespace bodyfit {
namespace {

using Vec2 = Eigen::Vector2d;

constexpr double kTaperStart = -4.0;  // in units of tau
constexpr double kCutoff = -5.0;
// Edges shorter than this many tau are blended into their midpoint: below
// the blur scale they carry no visible detail, and their direction is too
// sensitive to vertex motion to give a well-conditioned distance.
constexpr double kCollapseLength = 0.5;
constexpr double kSmoothMinPower = 8.0;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double pow8(double x) {
  x *= x;
  x *= x;
  return x * x;
}

// C2 ramp from 0 at u <= 0 to 1 at u >= 1, and its derivative.
double smoother_step(double u, double* du) {
  if (u <= 0.0 || u >= 1.0) {
    *du = 0.0;
    return u <= 0.0 ? 0.0 : 1.0;
  }
  *du = 30.0 * u * u * (u - 1.0) * (u - 1.0);
  return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

// Signed distance (positive inside) and its partial derivatives with
// respect to the three triangle corners.
struct SignedDistance {
  double value = 0.0;
  Vec2 d_corner[3] = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
};

// Closest point of segment ab to p, as the parameter t along it.
double segment_parameter(const Vec2& p, const Vec2& a, const Vec2& e) {
  const double len2 = e.squaredNorm();
  return len2 > 0.0 ? std::clamp((p - a).dot(e) / len2, 0.0, 1.0) : 0.0;
}

// Minus the distance from p to segment ab, with derivatives for a and b.
double segment_distance(const Vec2& p, const Vec2& a, const Vec2& b, Vec2* d_a, Vec2* d_b) {
  const Vec2 e = b - a;
  const double t = segment_parameter(p, a, e);
  const Vec2 diff = p - (a + t * e);
  const double dist = diff.norm();
  if (d_a) {
    // d(-|p - q|)/dq = diff / |diff|, and q = (1 - t) a + t b.
    const Vec2 dir = dist > 0.0 ? Vec2(diff / dist) : Vec2::Zero();
    *d_a = (1.0 - t) * dir;
    *d_b = t * dir;
  }
  return -dist;
}

// A projected triangle with per-edge data shared by all pixels it touches.
struct Tri {
  Vec2 c[3];
  Vec2 e[3];  // c[k+1] - c[k]
  double len[3];
  double sign = 0.0;  // orientation; 0 for degenerate triangles
  double collapse[3] = {0.0, 0.0, 0.0};    // blend weight toward the edge midpoint
  double d_collapse[3] = {0.0, 0.0, 0.0};  // d collapse / d len
  bool any_collapse = false;
  int mask_count = 0;
  int masks[8];
  double mask_weight[8];

  Tri(const Vec2 (&corners)[3], double tau) {
    for (int k = 0; k < 3; ++k) c[k] = corners[k];
    for (int k = 0; k < 3; ++k) {
      e[k] = c[(k + 1) % 3] - c[k];
      len[k] = e[k].norm();
    }
    const double area = cross(e[0], c[2] - c[0]);
    if (area != 0.0 && len[0] > 0.0 && len[1] > 0.0 && len[2] > 0.0) sign = area > 0.0 ? 1.0 : -1.0;
    const double l0 = kCollapseLength * tau;
    for (int k = 0; k < 3; ++k) {
      double du;
      collapse[k] = 1.0 - smoother_step(len[k] / l0 - 1.0, &du);
      d_collapse[k] = -du / l0;
      any_collapse = any_collapse || collapse[k] > 0.0;
    }
    // Collapse states that carry weight or weight gradient.
    for (int mask = 0; mask < 8; ++mask) {
      double w = 1.0;
      bool needed = false;
      for (int k = 0; k < 3; ++k) {
        w *= (mask >> k) & 1 ? collapse[k] : 1.0 - collapse[k];
        needed = needed || d_collapse[k] != 0.0;
      }
      if (w != 0.0 || needed) {
        masks[mask_count] = mask;
        mask_weight[mask_count++] = w;
      }
    }
  }

  // Distance from p to the line of edge k, positive on the inner side.
  double edge_distance(int k, const Vec2& p) const { return sign * cross(e[k], p - c[k]) / len[k]; }

  // Exact distance outside; inside, a p-norm soft minimum of the three
  // edge-line distances, which matches it to first order at the boundary
  // and has no medial-axis kink.
  SignedDistance full(const Vec2& p, bool gradient) const {
    SignedDistance out;
    if (sign != 0.0) {
      double d[3];
      bool inside = true;
      for (int k = 0; k < 3; ++k) {
        d[k] = edge_distance(k, p);
        inside = inside && d[k] > 0.0;
      }
      if (inside) {
        const double m = std::min({d[0], d[1], d[2]});
        double sum = 0.0;
        for (double dk : d) sum += pow8(m / dk);
        const double ratio = std::pow(sum, -1.0 / kSmoothMinPower);  // D / m
        out.value = m * ratio;
        if (!gradient) return out;
        for (int k = 0; k < 3; ++k) {
          const double r = ratio * m / d[k];
          const double w = pow8(r) * r;  // dD/dd_k
          const Vec2 q = p - c[k];
          const double cr = cross(e[k], q);
          const double l = len[k];
          const Vec2 d_cross_de(q.y(), -q.x());
          const Vec2 d_cross_dq(-e[k].y(), e[k].x());
          const Vec2 d_len = e[k] / l;
          // d = sign * cross(e, q) / l with e = c[k+1] - c[k], q = p - c[k].
          out.d_corner[(k + 1) % 3] += w * sign * (d_cross_de / l - cr * d_len / (l * l));
          out.d_corner[k] += w * sign * (-(d_cross_de + d_cross_dq) / l + cr * d_len / (l * l));
        }
        return out;
      }
    }
    double best = std::numeric_limits<double>::infinity();
    int best_edge = 0;
    double best_t = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double t = segment_parameter(p, c[k], e[k]);
      const double dist2 = (p - (c[k] + t * e[k])).squaredNorm();
      if (dist2 < best) {
        best = dist2;
        best_edge = k;
        best_t = t;
      }
    }
    const Vec2 diff = p - (c[best_edge] + best_t * e[best_edge]);
    const double dist = std::sqrt(best);
    out.value = -dist;
    if (gradient && dist > 0.0) {
      const Vec2 dir = diff / dist;
      out.d_corner[best_edge] = (1.0 - best_t) * dir;
      out.d_corner[(best_edge + 1) % 3] = best_t * dir;
    }
    return out;
  }

  // The triangle after collapsing the edges in `mask`: one edge leaves a
  // segment from its midpoint to the opposite corner, two or more leave
  // the centroid.
  SignedDistance collapsed(const Vec2& p, int mask, bool gradient) const {
    SignedDistance out;
    const int count = (mask & 1) + ((mask >> 1) & 1) + ((mask >> 2) & 1);
    if (count == 1) {
      const int k = mask == 1 ? 0 : (mask == 2 ? 1 : 2);
      const int k1 = (k + 1) % 3;
      const int k2 = (k + 2) % 3;
      Vec2 dm, dc;
      out.value = segment_distance(p, 0.5 * (c[k] + c[k1]), c[k2], gradient ? &dm : nullptr, &dc);
      if (gradient) {
        out.d_corner[k] = 0.5 * dm;
        out.d_corner[k1] = 0.5 * dm;
        out.d_corner[k2] = dc;
      }
      return out;
    }
    const Vec2 diff = p - (c[0] + c[1] + c[2]) / 3.0;
    const double dist = diff.norm();
    out.value = -dist;
    if (gradient && dist > 0.0) {
      for (auto& g : out.d_corner) g = diff / (3.0 * dist);
    }
    return out;
  }

  // Blend of the exact and collapsed shapes, weighted by the per-edge
  // collapse factors.
  SignedDistance evaluate(const Vec2& p, bool gradient) const {
    if (!any_collapse) return full(p, gradient);
    SignedDistance out;
    double d_weight[3] = {0.0, 0.0, 0.0};  // d value / d collapse[k]
    for (int i = 0; i < mask_count; ++i) {
      const int mask = masks[i];
      const double w = mask_weight[i];
      if (w == 0.0 && !gradient) continue;
      const SignedDistance s = mask == 0 ? full(p, gradient) : collapsed(p, mask, gradient);
      out.value += w * s.value;
      if (!gradient) continue;
      for (int k = 0; k < 3; ++k) out.d_corner[k] += w * s.d_corner[k];
      for (int k = 0; k < 3; ++k) {
        double dw = (mask >> k) & 1 ? 1.0 : -1.0;
        for (int j = 0; j < 3; ++j) {
          if (j != k) dw *= (mask >> j) & 1 ? collapse[j] : 1.0 - collapse[j];
        }
        d_weight[k] += dw * s.value;
      }
    }
    if (gradient) {
      for (int k = 0; k < 3; ++k) {
        if (d_collapse[k] == 0.0) continue;
        const Vec2 g = d_weight[k] * d_collapse[k] * e[k] / len[k];
        out.d_corner[(k + 1) % 3] += g;
        out.d_corner[k] -= g;
      }
    }
    return out;
  }

  // Value only, with a cheap rejection for pixels at least `reject`
  // outside. The half-plane bound holds for every collapsed shape too,
  // since they lie inside the triangle.
  bool value(const Vec2& p, double reject, double& v) const {
    if (sign != 0.0) {
      for (int k = 0; k < 3; ++k) {
        if (-edge_distance(k, p) >= reject) return false;
      }
    }
    v = evaluate(p, false).value;
    return v > -reject;
  }
};

// Tapered sigmoid coverage and its derivative with respect to the signed
// distance. `free` is 1 - alpha and `log_free` its log, both computed
// without cancellation.
struct Coverage {
  double alpha = 0.0;
  double free = 1.0;
  double log_free = 0.0;
  double d_alpha = 0.0;
};

Coverage coverage(double d, double tau) {
  Coverage c;
  const double x = d / tau;
  if (x <= kCutoff) return c;
  const double e = std::exp(-std::abs(x));
  const double s = x >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  const double s_neg = x >= 0.0 ? e / (1.0 + e) : 1.0 / (1.0 + e);
  const double slope = s * s_neg / tau;
  if (x >= kTaperStart) {
    c.alpha = s;
    c.free = s_neg;
    c.log_free = -(std::max(x, 0.0) + std::log1p(e));
    c.d_alpha = slope;
    return c;
  }
  const double u = x - kCutoff;  // in (0, 1)
  const double h = u * u * u * (u * (6.0 * u - 15.0) + 10.0);
  const double dh = 30.0 * u * u * (u - 1.0) * (u - 1.0) / tau;
  c.alpha = s * h;
  c.free = 1.0 - c.alpha;
  c.log_free = std::log1p(-c.alpha);
  c.d_alpha = slope * h + s * dh;
  return c;
}

struct PixelRange {
  int c0, c1, r0, r1;
  bool empty() const { return c0 > c1 || r0 > r1; }
};

PixelRange triangle_range(const Vec2 (&c)[3], double margin, int width, int height) {
  const double minx = std::min({c[0].x(), c[1].x(), c[2].x()}) - margin;
  const double maxx = std::max({c[0].x(), c[1].x(), c[2].x()}) + margin;
  const double miny = std::min({c[0].y(), c[1].y(), c[2].y()}) - margin;
  const double maxy = std::max({c[0].y(), c[1].y(), c[2].y()}) + margin;
  PixelRange r;
  r.c0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
  r.c1 = std::min(width - 1, static_cast<int>(std::floor(maxx - 0.5)));
  r.r0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
  r.r1 = std::min(height - 1, static_cast<int>(std::floor(maxy - 0.5)));
  return r;
}

void load_corners(const Pixels& proj, const Faces& faces, Eigen::Index f, Vec2 (&c)[3]) {
  for (int k = 0; k < 3; ++k) c[k] = proj.row(faces(f, k)).transpose();
}

void check_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw InvalidArgument("softness tau must be positive");
  }
}

}  // namespace

SoftRender render_soft(const Camera& camera, const Points& vertices, const Faces& faces,
                       double softness_tau) {
  camera.validate();
  check_tau(softness_tau);
  SoftRender out;
  out.projected = project(camera, vertices);
  const std::size_t n = static_cast<std::size_t>(camera.width) * camera.height;
  out.image = SilhouetteImage(camera.width, camera.height);
  out.log_free.assign(n, 0.0);
  out.saturated.assign(n, 0);

  const double margin = -kCutoff * softness_tau;
  Vec2 c[3];
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    load_corners(out.projected, faces, f, c);
    const PixelRange range = triangle_range(c, margin, camera.width, camera.height);
    if (range.empty()) continue;
    const Tri tri(c, softness_tau);
    for (int row = range.r0; row <= range.r1; ++row) {
      for (int col = range.c0; col <= range.c1; ++col) {
        const Vec2 p(col + 0.5, row + 0.5);
        double d;
        if (!tri.value(p, margin, d)) continue;
        const Coverage cov = coverage(d, softness_tau);
        if (cov.alpha == 0.0) continue;
        const std::size_t idx = static_cast<std::size_t>(row) * camera.width + col;
        if (cov.free > 0.0) {
          out.log_free[idx] += cov.log_free;
        } else {
          ++out.saturated[idx];
        }
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    out.image.values[i] = out.saturated[i] > 0 ? 1.0 : -std::expm1(out.log_free[i]);
  }
  return out;
}

SilhouetteImage render_silhouette(const Camera& camera, const Points& vertices, const Faces& faces,
                                  double softness_tau) {
  return render_soft(camera, vertices, faces, softness_tau).image;
}

Points render_backward(const Camera& camera, const Points& vertices, const Faces& faces,
                       double softness_tau, const SoftRender& forward,
                       std::span<const double> d_image) {
  if (d_image.size() != forward.image.pixel_count()) {
    throw ContractViolation("render_backward: adjoint image size mismatch");
  }
  Pixels d_proj = Pixels::Zero(vertices.rows(), 2);
  const double margin = -kCutoff * softness_tau;
  std::vector<double> free_product(forward.log_free.size());
  for (std::size_t i = 0; i < free_product.size(); ++i) free_product[i] = std::exp(forward.log_free[i]);
  Vec2 c[3];
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    load_corners(forward.projected, faces, f, c);
    const PixelRange range = triangle_range(c, margin, camera.width, camera.height);
    if (range.empty()) continue;
    const Tri tri(c, softness_tau);
    Vec2 acc[3] = {Vec2::Zero(), Vec2::Zero(), Vec2::Zero()};
    for (int row = range.r0; row <= range.r1; ++row) {
      for (int col = range.c0; col <= range.c1; ++col) {
        const std::size_t idx = static_cast<std::size_t>(row) * camera.width + col;
        const double g = d_image[idx];
        if (g == 0.0) continue;
        const Vec2 p(col + 0.5, row + 0.5);
        double d;
        if (!tri.value(p, margin, d)) continue;
        const Coverage cov = coverage(d, softness_tau);
        if (cov.d_alpha == 0.0) continue;
        // d occupancy / d alpha = product of the other factors.
        double others = 0.0;
        const int sat = forward.saturated[idx];
        if (sat == 0) {
          others = free_product[idx] / cov.free;
        } else if (sat == 1 && cov.free == 0.0) {
          others = free_product[idx];
        }
        if (others == 0.0) continue;
        const SignedDistance sd = tri.evaluate(p, true);
        const double gd = g * others * cov.d_alpha;
        if (gd == 0.0) continue;
        for (int k = 0; k < 3; ++k) acc[k] += gd * sd.d_corner[k];
      }
    }
    for (int k = 0; k < 3; ++k) d_proj.row(faces(f, k)) += acc[k].transpose();
  }
  return project_backward(camera, vertices, d_proj);
}

double mask_iou(const SilhouetteImage& a, const SilhouetteImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw ContractViolation("mask_iou: image dimensions differ");
  }
  std::size_t inter = 0;
  std::size_t uni = 0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const bool x = a.values[i] >= 0.5;
    const bool y = b.values[i] >= 0.5;
    inter += (x && y) ? 1 : 0;
    uni += (x || y) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

SilhouetteImage resample_area(const SilhouetteImage& image, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("resample_area: target size must be positive");
  if (width == image.width && height == image.height) return image;
  // Separable box filter: each target cell averages the source interval it covers.
  auto weights = [](int src, int dst) {
    std::vector<std::vector<std::pair<int, double>>> w(static_cast<std::size_t>(dst));
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      const double lo = i * scale;
      const double hi = (i + 1) * scale;
      for (int s = static_cast<int>(std::floor(lo)); s < static_cast<int>(std::ceil(hi)) && s < src; ++s) {
        const double overlap = std::min(hi, s + 1.0) - std::max(lo, static_cast<double>(s));
        if (overlap > 0.0) w[static_cast<std::size_t>(i)].emplace_back(s, overlap / scale);
      }
    }
    return w;
  };
  const auto wx = weights(image.width, width);
  const auto wy = weights(image.height, height);
  SilhouetteImage tmp(width, image.height);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < width; ++c) {
      double s = 0.0;
      for (const auto& [src, w] : wx[static_cast<std::size_t>(c)]) s += w * image.at(src, r);
      tmp.at(c, r) = s;
    }
  }
  SilhouetteImage out(width, height);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double s = 0.0;
      for (const auto& [src, w] : wy[static_cast<std::size_t>(r)]) s += w * tmp.at(c, src);
      out.at(c, r) = std::clamp(s, 0.0, 1.0);
    }
  }
  return out;
}

SilhouetteImage threshold(const SilhouetteImage& image, double level) {
  SilhouetteImage out = image;
  for (double& v : out.values) v = v >= level ? 1.0 : 0.0;
  return out;
}

void save_pgm(const SilhouetteImage& image, const std::filesystem::path& path) {
  std::string data = "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) +
                     "\n255\n";
  data.reserve(data.size() + image.values.size());
  for (double v : image.values) {
    data.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0))));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

SilhouetteImage load_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(in, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  if (next_token() != "P5") throw IoError(path.string() + " is not a binary PGM (P5)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(next_token());
    h = std::stoi(next_token());
    maxval = std::stoi(next_token());
  } catch (const std::exception&) {
    throw IoError("malformed PGM header in " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw IoError("unsupported PGM geometry or depth in " + path.string());
  }
  SilhouetteImage img(w, h);
  std::string bytes(img.values.size(), '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw IoError("truncated PGM data in " + path.string());
  }
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.values[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return img;
}

}  // namespace bodyfit
