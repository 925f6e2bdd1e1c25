#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "bodyfit/errors.hpp"
#include "bodyfit/mesh.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr int kSmoothingSteps = 5;
constexpr int kOctaves = 3;
constexpr double kBaseCell = 0.25;  // meters

// Independent stream per purpose so subject, sequence and noise draws do
// not shift when one of them changes.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Lattice value in [-1, 1].
double lattice(std::uint64_t salt, long long i, long long j, long long k) {
  std::uint64_t h = mix(salt ^ mix(static_cast<std::uint64_t>(i) ^ mix(static_cast<std::uint64_t>(j) ^
                                                                       mix(static_cast<std::uint64_t>(k)))));
  return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

double value_noise(std::uint64_t salt, const Vec3& p) {
  const Vec3 f = p.array().floor();
  const Vec3 t = p - f;
  const Vec3 s = t.array() * t.array() * (3.0 - 2.0 * t.array());
  const long long x0 = static_cast<long long>(f.x());
  const long long y0 = static_cast<long long>(f.y());
  const long long z0 = static_cast<long long>(f.z());
  double out = 0.0;
  for (int dx = 0; dx < 2; ++dx) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dz = 0; dz < 2; ++dz) {
        const double w = (dx ? s.x() : 1.0 - s.x()) * (dy ? s.y() : 1.0 - s.y()) *
                         (dz ? s.z() : 1.0 - s.z());
        out += w * lattice(salt, x0 + dx, y0 + dy, z0 + dz);
      }
    }
  }
  return out;
}

}  // namespace

SubjectShape sample_subject(const ModelDefinition& model, std::uint64_t seed) {
  auto rng = stream(seed, 1);
  std::uniform_real_distribution<double> beta_dist(-2.0, 2.0);
  SubjectShape out;
  out.beta.resize(model.shape_count());
  for (int i = 0; i < model.shape_count(); ++i) out.beta[i] = beta_dist(rng);
  const std::uint64_t salt = rng();

  const Points normals = vertex_normals(model.template_vertices, model.faces);
  Points d(model.vertex_count(), 3);
  for (int v = 0; v < model.vertex_count(); ++v) {
    const Vec3 p = model.template_vertices.row(v).transpose();
    double s = 0.0;
    double amp = 1.0;
    double cell = kBaseCell;
    for (int o = 0; o < kOctaves; ++o) {
      s += amp * value_noise(salt + static_cast<std::uint64_t>(o), p / cell);
      amp *= 0.5;
      cell *= 0.5;
    }
    d.row(v) = s * normals.row(v);
  }
  const auto ring = vertex_neighbors(model.faces, model.vertex_count());
  for (int i = 0; i < kSmoothingSteps; ++i) d = laplacian_smooth(d, ring);

  const Eigen::RowVector3d mirror(-1.0, 1.0, 1.0);
  for (const auto& [l, r] : model.symmetry_pairs) {
    const Eigen::RowVector3d avg = 0.5 * (d.row(l) + d.row(r).cwiseProduct(mirror));
    d.row(l) = avg;
    d.row(r) = avg.cwiseProduct(mirror);
  }
  for (int v : head_hand_foot_vertices(model)) d.row(v).setZero();
  // Smoothing shrinks the noise; rescale to a drawn peak amplitude.
  const double peak = d.rowwise().norm().maxCoeff();
  if (peak > 0.0) d *= std::uniform_real_distribution<double>(0.5, 1.0)(rng) * kMaxClothingOffset / peak;
  for (int v = 0; v < model.vertex_count(); ++v) {
    const double n = d.row(v).norm();
    if (n > kMaxClothingOffset) d.row(v) *= kMaxClothingOffset / n;
  }
  out.offsets = std::move(d);
  return out;
}

std::vector<FramePose> make_turnaround(int joint_count, const TurnaroundSpec& spec) {
  if (spec.frames < 1) throw ScenarioError("turnaround needs at least one frame");
  auto rng = stream(spec.seed, 2);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  static constexpr int kLimbJoints[] = {1, 2, 4, 5, 16, 17, 18, 19, 20, 21};
  std::vector<FramePose> frames;
  for (int i = 0; i < spec.frames; ++i) {
    FramePose f;
    f.theta = a_pose_theta(joint_count);
    double yaw = spec.yaw_coverage_deg * kDeg * i / spec.frames;
    if (spec.jitter) {
      yaw += 3.0 * kDeg * unit(rng);
      for (int j : kLimbJoints) {
        if (j >= joint_count) continue;
        for (int a = 0; a < 3; ++a) f.theta(j, a) += 2.0 * kDeg * unit(rng);
      }
    }
    f.theta.row(0) = root_for_yaw(yaw).transpose();
    frames.push_back(std::move(f));
  }
  return frames;
}

void place_subject(const ModelDefinition& model, SubjectParams& subject, double distance) {
  if (!(distance > 0.0)) throw ScenarioError("camera distance must be positive");
  for (std::size_t i = 0; i < subject.frames.size(); ++i) {
    subject.frames[i].trans.setZero();
    const Points posed = pose_mesh(model, subject, i);
    const Vec3 center = 0.5 * (posed.colwise().minCoeff() + posed.colwise().maxCoeff()).transpose();
    subject.frames[i].trans = Vec3(0.0, 0.0, distance) - center;
  }
}

}  // namespace bodyfit
