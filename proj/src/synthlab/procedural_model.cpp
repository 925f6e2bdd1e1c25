#include <algorithm>
#include <array>
#include <limits>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

enum class Part { kTorso, kHead, kArm, kLeg, kFoot };

struct Control {
  Vec3 center;
  double r1 = 0.0;  // along the ring's first axis
  double r2 = 0.0;
  int joint = -1;
};

struct Segment {
  int joint;  // joint whose rotation drives this segment
  Vec3 a, b;
};

struct TubeSpec {
  Part part;
  bool midline;
  Vec3 reference;  // projected onto each ring plane to give the first axis
  std::vector<Control> controls;
  std::vector<Segment> segments;
};

// Joint positions (meters, y up, left = +x, front = +z) before height
// normalization. Index order follows the SMPL kinematic tree.
const Vec3 kJoints[24] = {
    {0.00, 0.93, 0.00},  {0.09, 0.85, 0.00},  {-0.09, 0.85, 0.00}, {0.00, 1.03, 0.00},
    {0.10, 0.48, 0.00},  {-0.10, 0.48, 0.00}, {0.00, 1.16, 0.00},  {0.10, 0.08, 0.00},
    {-0.10, 0.08, 0.00}, {0.00, 1.29, 0.00},  {0.10, 0.03, 0.10},  {-0.10, 0.03, 0.10},
    {0.00, 1.45, 0.00},  {0.07, 1.38, 0.00},  {-0.07, 1.38, 0.00}, {0.00, 1.55, 0.00},
    {0.18, 1.40, 0.00},  {-0.18, 1.40, 0.00}, {0.45, 1.40, 0.00},  {-0.45, 1.40, 0.00},
    {0.70, 1.40, 0.00},  {-0.70, 1.40, 0.00}, {0.78, 1.40, 0.00},  {-0.78, 1.40, 0.00},
};
const std::vector<int> kParents = {-1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8,
                                   9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21};

int mirror_joint(int j) {
  static const int map[24] = {0, 2, 1, 3, 5, 4, 6, 8, 7, 9, 11, 10,
                              12, 14, 13, 15, 17, 16, 19, 18, 21, 20, 23, 22};
  return map[j];
}

const Vec3 kMirror(-1.0, 1.0, 1.0);

Control ctl(double x, double y, double z, double r1, double r2, int joint = -1) {
  return Control{Vec3(x, y, z), r1, r2, joint};
}

std::vector<TubeSpec> body_tubes() {
  const Vec3 x = Vec3::UnitX();
  const Vec3 y = Vec3::UnitY();
  const Vec3 head_top(0.0, 1.745, 0.0);
  const Vec3 hand_tip(0.86, 1.40, 0.0);
  const Vec3 toe(0.10, 0.025, 0.17);
  const Vec3 heel(0.10, 0.05, -0.05);
  const Vec3 crotch(0.0, 0.80, 0.0);
  const Vec3 sole(0.10, 0.05, 0.0);
  auto J = [](int j) { return kJoints[j]; };

  std::vector<TubeSpec> tubes;
  tubes.push_back({Part::kTorso, true, x,
                   {ctl(0, 0.80, 0, 0.14, 0.10), ctl(0, 0.93, 0, 0.165, 0.11, 0),
                    ctl(0, 1.03, 0, 0.15, 0.10, 3), ctl(0, 1.16, 0, 0.155, 0.10, 6),
                    ctl(0, 1.29, 0, 0.175, 0.11, 9), ctl(0, 1.38, 0, 0.17, 0.095),
                    ctl(0, 1.43, 0, 0.11, 0.07)},
                   {{0, crotch, J(0)}, {0, J(0), J(3)}, {3, J(3), J(6)}, {6, J(6), J(9)},
                    {9, J(9), J(12)}}});
  tubes.push_back({Part::kHead, true, x,
                   {ctl(0, 1.41, 0, 0.055, 0.055), ctl(0, 1.45, 0, 0.055, 0.055, 12),
                    ctl(0, 1.51, 0, 0.06, 0.065), ctl(0, 1.55, 0, 0.08, 0.09, 15),
                    ctl(0, 1.64, 0, 0.085, 0.10), ctl(0, 1.70, 0, 0.07, 0.08),
                    ctl(0, 1.73, 0, 0.03, 0.03)},
                   {{9, J(9), J(12)}, {12, J(12), J(15)}, {15, J(15), head_top}}});
  tubes.push_back({Part::kArm, false, y,
                   {ctl(0.07, 1.38, 0, 0.05, 0.05, 13), ctl(0.18, 1.40, 0, 0.052, 0.052, 16),
                    ctl(0.45, 1.40, 0, 0.04, 0.04, 18), ctl(0.70, 1.40, 0, 0.03, 0.032, 20),
                    ctl(0.78, 1.40, 0, 0.015, 0.045, 22), ctl(0.86, 1.40, 0, 0.012, 0.035)},
                   {{9, J(9), J(13)}, {13, J(13), J(16)}, {16, J(16), J(18)}, {18, J(18), J(20)},
                    {20, J(20), J(22)}, {22, J(22), hand_tip}}});
  tubes.push_back({Part::kLeg, false, x,
                   {ctl(0.09, 0.93, 0, 0.08, 0.08), ctl(0.09, 0.85, 0, 0.085, 0.085, 1),
                    ctl(0.10, 0.48, 0, 0.05, 0.05, 4), ctl(0.10, 0.08, 0, 0.036, 0.036, 7),
                    ctl(0.10, 0.05, 0, 0.035, 0.035)},
                   {{0, J(0), J(1)}, {1, J(1), J(4)}, {4, J(4), J(7)}, {7, J(7), sole}}});
  tubes.push_back({Part::kFoot, false, x,
                   {ctl(0.10, 0.05, -0.05, 0.04, 0.03), ctl(0.10, 0.03, 0.10, 0.04, 0.025, 10),
                    ctl(0.10, 0.025, 0.17, 0.035, 0.018)},
                   {{7, heel, J(10)}, {10, J(10), toe}}});
  return tubes;
}

int ring_size(const TubeSpec& t, double spacing) {
  double rmax = 0.0;
  for (const auto& c : t.controls) rmax = std::max(rmax, 0.5 * (c.r1 + c.r2));
  const int n = static_cast<int>(std::ceil(2.0 * std::numbers::pi * rmax / spacing / 4.0)) * 4;
  return std::max(8, n);
}

std::vector<int> segment_counts(const TubeSpec& t, double spacing) {
  std::vector<int> out;
  for (std::size_t i = 0; i + 1 < t.controls.size(); ++i) {
    const double len = (t.controls[i + 1].center - t.controls[i].center).norm();
    out.push_back(std::max(1, static_cast<int>(std::ceil(len / spacing))));
  }
  return out;
}

int count_vertices(const std::vector<TubeSpec>& tubes, double spacing) {
  int total = 0;
  for (const auto& t : tubes) {
    int rings = 1;
    for (int s : segment_counts(t, spacing)) rings += s;
    const int v = rings * ring_size(t, spacing) + 2;
    total += t.midline ? v : 2 * v;
  }
  return total;
}

// Mesh under construction with per-vertex bookkeeping.
struct Builder {
  std::vector<Vec3> vertices;
  std::vector<Vec3> ring_center;
  std::vector<Part> part;
  std::vector<int> mirror;  // symmetric partner
  std::vector<Eigen::Vector3i> faces;
  std::vector<std::vector<int>> joint_rings = std::vector<std::vector<int>>(24);
  std::vector<std::array<double, 24>> weights;
  int head_top = -1;

  int add(const Vec3& p, const Vec3& center, Part pt) {
    vertices.push_back(p);
    ring_center.push_back(center);
    part.push_back(pt);
    mirror.push_back(-1);
    weights.push_back({});
    return static_cast<int>(vertices.size()) - 1;
  }
};

double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

std::array<double, 24> skin_row(const Vec3& p, const std::vector<Segment>& segments) {
  constexpr double kSoft = 0.02;
  std::array<double, 24> dist;
  dist.fill(std::numeric_limits<double>::infinity());
  for (const auto& s : segments) dist[static_cast<std::size_t>(s.joint)] =
      std::min(dist[static_cast<std::size_t>(s.joint)], segment_distance(p, s.a, s.b));
  int first = -1;
  int second = -1;
  for (int j = 0; j < 24; ++j) {
    if (!std::isfinite(dist[static_cast<std::size_t>(j)])) continue;
    if (first < 0 || dist[static_cast<std::size_t>(j)] < dist[static_cast<std::size_t>(first)]) {
      second = first;
      first = j;
    } else if (second < 0 || dist[static_cast<std::size_t>(j)] < dist[static_cast<std::size_t>(second)]) {
      second = j;
    }
  }
  std::array<double, 24> w{};
  auto kernel = [&](int j) {
    const double d = dist[static_cast<std::size_t>(j)];
    return 1.0 / ((d * d + kSoft * kSoft) * (d * d + kSoft * kSoft));
  };
  const double w1 = kernel(first);
  const double w2 = second >= 0 ? kernel(second) : 0.0;
  w[static_cast<std::size_t>(first)] = w1 / (w1 + w2);
  if (second >= 0) w[static_cast<std::size_t>(second)] = w2 / (w1 + w2);
  return w;
}

// Emits one tube (and, for side tubes, its mirror image).
void emit_tube(Builder& b, const TubeSpec& t, double spacing) {
  const int n = ring_size(t, spacing);
  const auto counts = segment_counts(t, spacing);

  struct Ring {
    Vec3 center;
    Vec3 e1, e2;
    double r1, r2;
    int joint;
  };
  std::vector<Ring> rings;
  for (std::size_t i = 0; i + 1 < t.controls.size(); ++i) {
    const Control& c0 = t.controls[i];
    const Control& c1 = t.controls[i + 1];
    for (int s = 0; s < counts[i]; ++s) {
      const double u = static_cast<double>(s) / counts[i];
      rings.push_back({(1.0 - u) * c0.center + u * c1.center, Vec3::Zero(), Vec3::Zero(),
                       (1.0 - u) * c0.r1 + u * c1.r1, (1.0 - u) * c0.r2 + u * c1.r2,
                       s == 0 ? c0.joint : -1});
    }
  }
  const Control& last = t.controls.back();
  rings.push_back({last.center, Vec3::Zero(), Vec3::Zero(), last.r1, last.r2, last.joint});
  const std::size_t m = rings.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec3 prev = rings[i == 0 ? 0 : i - 1].center;
    const Vec3 next = rings[i + 1 < m ? i + 1 : m - 1].center;
    const Vec3 d = (next - prev).normalized();
    rings[i].e1 = (t.reference - t.reference.dot(d) * d).normalized();
    rings[i].e2 = d.cross(rings[i].e1);
  }

  const int base = static_cast<int>(b.vertices.size());
  for (const Ring& r : rings) {
    const int first = static_cast<int>(b.vertices.size());
    for (int k = 0; k < n; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / n;
      b.add(r.center + r.r1 * std::cos(phi) * r.e1 + r.r2 * std::sin(phi) * r.e2, r.center, t.part);
    }
    if (t.midline) {
      // Partner of phi is pi - phi; make the pairing exact.
      for (int k = 0; k < n; ++k) {
        const int kp = ((n / 2 - k) % n + n) % n;
        const int v = first + k;
        const int vp = first + kp;
        b.mirror[static_cast<std::size_t>(v)] = vp;
        if (k == kp) {
          b.vertices[static_cast<std::size_t>(v)].x() = 0.0;
        } else if (b.vertices[static_cast<std::size_t>(v)].x() > 0.0) {
          b.vertices[static_cast<std::size_t>(vp)] =
              b.vertices[static_cast<std::size_t>(v)].cwiseProduct(kMirror);
        }
      }
    }
    if (r.joint >= 0) {
      for (int k = 0; k < n; ++k) b.joint_rings[static_cast<std::size_t>(r.joint)].push_back(first + k);
    }
  }
  // Domed caps.
  const Vec3 d0 = (rings[1].center - rings[0].center).normalized();
  const Vec3 d1 = (rings[m - 1].center - rings[m - 2].center).normalized();
  const int cap0 = b.add(rings[0].center - 0.5 * std::min(rings[0].r1, rings[0].r2) * d0,
                         rings[0].center, t.part);
  const int cap1 = b.add(rings[m - 1].center + 0.5 * std::min(rings[m - 1].r1, rings[m - 1].r2) * d1,
                         rings[m - 1].center, t.part);
  if (t.midline) {
    b.mirror[static_cast<std::size_t>(cap0)] = cap0;
    b.mirror[static_cast<std::size_t>(cap1)] = cap1;
    b.vertices[static_cast<std::size_t>(cap0)].x() = 0.0;
    b.vertices[static_cast<std::size_t>(cap1)].x() = 0.0;
  }
  if (t.part == Part::kHead) b.head_top = cap1;

  auto vid = [&](std::size_t ring, int k) { return base + static_cast<int>(ring) * n + ((k % n) + n) % n; };
  auto oriented = [&](int a, int c, int d, const Vec3& interior) {
    const Vec3& pa = b.vertices[static_cast<std::size_t>(a)];
    const Vec3& pc = b.vertices[static_cast<std::size_t>(c)];
    const Vec3& pd = b.vertices[static_cast<std::size_t>(d)];
    const Vec3 normal = (pc - pa).cross(pd - pa);
    const Vec3 out = (pa + pc + pd) / 3.0 - interior;
    if (normal.dot(out) >= 0.0) {
      b.faces.emplace_back(a, c, d);
    } else {
      b.faces.emplace_back(a, d, c);
    }
  };
  const std::size_t tube_faces = b.faces.size();
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const Vec3 interior = 0.5 * (rings[i].center + rings[i + 1].center);
    for (int k = 0; k < n; ++k) {
      oriented(vid(i, k), vid(i, k + 1), vid(i + 1, k + 1), interior);
      oriented(vid(i, k), vid(i + 1, k + 1), vid(i + 1, k), interior);
    }
  }
  for (int k = 0; k < n; ++k) {
    oriented(cap0, vid(0, k), vid(0, k + 1), rings[std::min<std::size_t>(1, m - 1)].center);
    oriented(cap1, vid(m - 1, k), vid(m - 1, k + 1), rings[m >= 2 ? m - 2 : 0].center);
  }
  const int end = static_cast<int>(b.vertices.size());
  for (int v = base; v < end; ++v) {
    b.weights[static_cast<std::size_t>(v)] = skin_row(b.vertices[static_cast<std::size_t>(v)], t.segments);
  }

  if (t.midline) return;
  // Mirror copy: x negated, winding flipped, joints swapped.
  const std::size_t face_end = b.faces.size();
  const int offset = end - base;
  for (int v = base; v < end; ++v) {
    const int w = b.add(b.vertices[static_cast<std::size_t>(v)].cwiseProduct(kMirror),
                        b.ring_center[static_cast<std::size_t>(v)].cwiseProduct(kMirror), t.part);
    b.mirror[static_cast<std::size_t>(v)] = w;
    b.mirror[static_cast<std::size_t>(w)] = v;
    std::array<double, 24> row{};
    for (int j = 0; j < 24; ++j) {
      row[static_cast<std::size_t>(mirror_joint(j))] = b.weights[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
    }
    b.weights[static_cast<std::size_t>(w)] = row;
  }
  for (std::size_t f = tube_faces; f < face_end; ++f) {
    const Eigen::Vector3i face = b.faces[f];
    b.faces.emplace_back(face[0] + offset, face[2] + offset, face[1] + offset);
  }
  for (int j = 0; j < 24; ++j) {
    const int mj = mirror_joint(j);
    if (mj == j) continue;
    auto& src = b.joint_rings[static_cast<std::size_t>(j)];
    auto& dst = b.joint_rings[static_cast<std::size_t>(mj)];
    if (!src.empty() && dst.empty() && src.front() >= base && src.front() < end) {
      for (int v : src) dst.push_back(v + offset);
    }
  }
}

double smoothstep(double e0, double e1, double x) {
  const double t = std::clamp((x - e0) / (e1 - e0), 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

}  // namespace

ModelDefinition build_procedural_model(int vertex_target, int shape_count) {
  if (vertex_target < kMinProceduralVertices) {
    throw ConfigError("procedural model needs at least " + std::to_string(kMinProceduralVertices) +
                      " vertices");
  }
  if (shape_count < 1) throw ConfigError("procedural model needs at least one shape direction");
  const auto tubes = body_tubes();

  // Ring spacing whose vertex count is closest to the target.
  double lo = 0.003;
  double hi = 0.3;
  for (int it = 0; it < 60; ++it) {
    const double mid = std::sqrt(lo * hi);
    if (count_vertices(tubes, mid) > vertex_target) lo = mid; else hi = mid;
  }
  const double spacing =
      std::abs(count_vertices(tubes, lo) - vertex_target) < std::abs(count_vertices(tubes, hi) - vertex_target)
          ? lo
          : hi;

  Builder b;
  for (const auto& t : tubes) emit_tube(b, t, spacing);
  const int nv = static_cast<int>(b.vertices.size());

  ModelDefinition m;
  m.template_vertices.resize(nv, 3);
  for (int v = 0; v < nv; ++v) m.template_vertices.row(v) = b.vertices[static_cast<std::size_t>(v)].transpose();
  m.faces.resize(static_cast<Eigen::Index>(b.faces.size()), 3);
  for (std::size_t f = 0; f < b.faces.size(); ++f) m.faces.row(static_cast<Eigen::Index>(f)) = b.faces[f].transpose();
  m.parents = kParents;

  m.joint_regressor = RowMatrix::Zero(24, nv);
  for (int j = 0; j < 24; ++j) {
    const auto& ring = b.joint_rings[static_cast<std::size_t>(j)];
    if (ring.empty()) throw DegenerateModel("joint " + std::to_string(j) + " has no vertex ring");
    for (int v : ring) m.joint_regressor(j, v) = 1.0 / static_cast<double>(ring.size());
  }
  m.skin_weights = RowMatrix::Zero(nv, 24);
  for (int v = 0; v < nv; ++v) {
    for (int j = 0; j < 24; ++j) m.skin_weights(v, j) = b.weights[static_cast<std::size_t>(v)][static_cast<std::size_t>(j)];
  }
  m.keypoint_regressor = RowMatrix::Zero(25, nv);
  m.keypoint_regressor.topRows(24) = m.joint_regressor;
  m.keypoint_regressor(24, b.head_top) = 1.0;

  for (int v = 0; v < nv; ++v) {
    const int w = b.mirror[static_cast<std::size_t>(v)];
    if (w == v || (w >= 0 && m.template_vertices(v, 0) > 0.0)) m.symmetry_pairs.emplace_back(v, w);
  }

  // Eyes: nearest head vertices to the eye targets, mirrored exactly.
  const Vec3 eye_target(0.035, 1.64, 0.10);
  int eye = -1;
  double best = std::numeric_limits<double>::infinity();
  for (int v = 0; v < nv; ++v) {
    if (b.part[static_cast<std::size_t>(v)] != Part::kHead || m.template_vertices(v, 0) <= 0.0) continue;
    const double d = (m.template_vertices.row(v).transpose() - eye_target).squaredNorm();
    if (d < best) {
      best = d;
      eye = v;
    }
  }
  m.eye_ids = {eye, b.mirror[static_cast<std::size_t>(eye)]};
  m.ankle_ids = b.joint_rings[7];
  m.ankle_ids.insert(m.ankle_ids.end(), b.joint_rings[8].begin(), b.joint_rings[8].end());

  // ---- shape directions ----
  const double eye_y = 0.5 * (m.template_vertices(m.eye_ids[0], 1) + m.template_vertices(m.eye_ids[1], 1));
  double ankle_y = 0.0;
  for (int v : m.ankle_ids) ankle_y += m.template_vertices(v, 1);
  ankle_y /= static_cast<double>(m.ankle_ids.size());

  std::vector<Points> dirs;
  auto radial = [&](int v) {
    return Vec3(b.vertices[static_cast<std::size_t>(v)] - b.ring_center[static_cast<std::size_t>(v)]);
  };
  auto field = [&](auto fn) {
    Points d = Points::Zero(nv, 3);
    for (int v = 0; v < nv; ++v) d.row(v) = fn(v).transpose();
    dirs.push_back(d);
  };
  // Bulk: every cross-section grows.
  field([&](int v) { return Vec3(0.06 * radial(v)); });
  // Torso girth, strongest at the waist.
  field([&](int v) {
    if (b.part[static_cast<std::size_t>(v)] != Part::kTorso) return Vec3(Vec3::Zero());
    const double y = b.vertices[static_cast<std::size_t>(v)].y();
    return Vec3(0.10 * (1.0 - 0.5 * smoothstep(1.05, 1.35, y)) * radial(v));
  });
  // Arm length.
  field([&](int v) {
    if (b.part[static_cast<std::size_t>(v)] != Part::kArm) return Vec3(Vec3::Zero());
    const double x = b.vertices[static_cast<std::size_t>(v)].x();
    const double s = std::clamp((std::abs(x) - 0.18) / 0.60, 0.0, 1.0);
    return Vec3(0.04 * s * (x > 0 ? 1.0 : -1.0), 0.0, 0.0);
  });
  // Leg length (made height-neutral below, so the upper body shortens).
  field([&](int v) {
    const Part p = b.part[static_cast<std::size_t>(v)];
    if (p != Part::kLeg && p != Part::kFoot) return Vec3(Vec3::Zero());
    const double y = b.vertices[static_cast<std::size_t>(v)].y();
    const double s = std::clamp((0.85 - y) / 0.77, 0.0, 1.0);
    return Vec3(0.0, -0.05 * s, 0.0);
  });
  // Shoulder width.
  field([&](int v) {
    const Vec3& p = b.vertices[static_cast<std::size_t>(v)];
    const Part pt = b.part[static_cast<std::size_t>(v)];
    if (pt == Part::kArm) return Vec3(0.025 * (p.x() > 0 ? 1.0 : -1.0), 0.0, 0.0);
    if (pt == Part::kTorso) return Vec3(0.15 * p.x() * smoothstep(1.20, 1.38, p.y()), 0.0, 0.0);
    return Vec3(Vec3::Zero());
  });
  // Remaining directions: smooth random fields, fixed seed.
  std::mt19937_64 rng(0);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  while (static_cast<int>(dirs.size()) < shape_count) {
    struct Wave {
      Vec3 k;
      double phase;
      Vec3 amp;
    };
    std::vector<Wave> waves;
    for (int w = 0; w < 3; ++w) {
      Vec3 k(uni(rng), uni(rng), uni(rng));
      k = k.normalized() * 2.0 * std::numbers::pi * (0.6 + 0.4 * (uni(rng) + 1.0));
      const double phase = std::numbers::pi * uni(rng);
      waves.push_back({k, phase, Vec3(uni(rng), uni(rng), uni(rng)) * 0.008});
    }
    field([&](int v) {
      const Vec3& p = b.vertices[static_cast<std::size_t>(v)];
      Vec3 d = Vec3::Zero();
      for (const auto& w : waves) d += w.amp * std::sin(w.k.dot(p) + w.phase);
      return d;
    });
  }
  dirs.resize(static_cast<std::size_t>(shape_count));

  m.shape_dirs = RowMatrix::Zero(3 * nv, shape_count);
  for (int s = 0; s < shape_count; ++s) {
    Points d = dirs[static_cast<std::size_t>(s)];
    // Exact mirror symmetry.
    Points sym = d;
    for (const auto& [l, r] : m.symmetry_pairs) {
      const Eigen::RowVector3d avg =
          0.5 * (d.row(l) + d.row(r).cwiseProduct(kMirror.transpose()));
      sym.row(l) = avg;
      sym.row(r) = avg.cwiseProduct(kMirror.transpose());
    }
    // Height neutrality: cancel any change of the eye-ankle span with a
    // vertical stretch about the ankles.
    double eye_dy = 0.0;
    for (int v : m.eye_ids) eye_dy += sym(v, 1);
    eye_dy /= static_cast<double>(m.eye_ids.size());
    double ankle_dy = 0.0;
    for (int v : m.ankle_ids) ankle_dy += sym(v, 1);
    ankle_dy /= static_cast<double>(m.ankle_ids.size());
    const double dspan = eye_dy - ankle_dy;
    for (int v = 0; v < nv; ++v) {
      sym(v, 1) -= dspan * (m.template_vertices(v, 1) - ankle_y) / (eye_y - ankle_y);
    }
    // No net translation: a rigid shift of the rest shape is absorbed by
    // the per-frame translations and would be invisible to every image.
    sym.rowwise() -= sym.colwise().mean();
    for (int v = 0; v < nv; ++v) {
      for (int a = 0; a < 3; ++a) m.shape_dirs(3 * v + a, s) = sym(v, a);
    }
  }
  m.pose_dirs = RowMatrix::Zero(3 * nv, 9 * 23);

  m = normalize_height(std::move(m));
  m.validate();
  return m;
}

std::vector<int> head_hand_foot_vertices(const ModelDefinition& model) {
  const Points joints = regress_joints(model, Eigen::VectorXd::Zero(model.shape_count()));
  if (joints.rows() != 24) throw ContractViolation("region lookup needs the 24-joint layout");
  const double head_y = 0.5 * (joints(12, 1) + joints(15, 1));
  const double wrist_x = 0.5 * (joints(20, 0) - joints(21, 0));
  const double ankle_y = 0.5 * (joints(7, 1) + joints(8, 1));
  std::vector<int> out;
  for (int v = 0; v < model.vertex_count(); ++v) {
    const auto p = model.template_vertices.row(v);
    if (p.y() > head_y || std::abs(p.x()) > wrist_x || p.y() < ankle_y + 0.01) out.push_back(v);
  }
  return out;
}

}  // namespace bodyfit
