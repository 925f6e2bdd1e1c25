#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bodyfit/errors.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

constexpr int kLeafSize = 8;

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

double box_distance2(const Eigen::AlignedBox3d& box, const Vec3& p) {
  const Vec3 d = (box.min() - p).cwiseMax(Vec3::Zero()).cwiseMax(p - box.max());
  return d.squaredNorm();
}

}  // namespace

// Closest point by Voronoi region of the triangle (vertex, edge or face).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const double scale = std::max({ab.squaredNorm(), ac.squaredNorm(), (c - b).squaredNorm()});
  if (ab.cross(ac).squaredNorm() <= 1e-24 * scale * scale) {
    return std::min({point_segment_distance(p, a, b), point_segment_distance(p, b, c),
                     point_segment_distance(p, c, a)});
  }
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return ap.norm();

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return bp.norm();

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return (p - (a + v * ab)).norm();
  }

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return cp.norm();

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return (p - (a + w * ac)).norm();
  }

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (p - (b + w * (c - b))).norm();
  }

  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return (p - (a + ab * v + ac * w)).norm();
}

TriangleTree::TriangleTree(const Points& vertices, const Faces& faces) {
  if (faces.rows() == 0 || vertices.rows() == 0) throw InvalidArgument("distance query needs a nonempty mesh");
  tris_.resize(static_cast<std::size_t>(faces.rows()));
  centroids_.resize(tris_.size());
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    Eigen::Matrix3d t;
    for (int k = 0; k < 3; ++k) {
      const int v = faces(f, k);
      if (v < 0 || v >= vertices.rows()) throw InvalidArgument("face index out of range");
      t.col(k) = vertices.row(v).transpose();
    }
    tris_[static_cast<std::size_t>(f)] = t;
    centroids_[static_cast<std::size_t>(f)] = t.rowwise().mean();
  }
  order_.resize(tris_.size());
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * tris_.size() / kLeafSize + 2);
  build(0, static_cast<int>(order_.size()));
}

int TriangleTree::build(int begin, int end) {
  Node node;
  node.box.setEmpty();
  Eigen::AlignedBox3d cbox;
  cbox.setEmpty();
  for (int i = begin; i < end; ++i) {
    const auto& t = tris_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
    for (int k = 0; k < 3; ++k) node.box.extend(Vec3(t.col(k)));
    cbox.extend(centroids_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])]);
  }
  node.begin = begin;
  node.end = end;
  const int id = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= kLeafSize) return id;

  int axis = 0;
  cbox.sizes().maxCoeff(&axis);
  const int mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) {
                     const double ca = centroids_[static_cast<std::size_t>(a)][axis];
                     const double cb = centroids_[static_cast<std::size_t>(b)][axis];
                     return ca < cb || (ca == cb && a < b);
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[static_cast<std::size_t>(id)].left = left;
  nodes_[static_cast<std::size_t>(id)].right = right;
  return id;
}

double TriangleTree::distance(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const Node& n = nodes_[static_cast<std::size_t>(stack.back())];
    stack.pop_back();
    if (box_distance2(n.box, p) > best * best) continue;
    if (n.left < 0) {
      for (int i = n.begin; i < n.end; ++i) {
        const auto& t = tris_[static_cast<std::size_t>(order_[static_cast<std::size_t>(i)])];
        best = std::min(best, point_triangle_distance(p, t.col(0), t.col(1), t.col(2)));
      }
      continue;
    }
    const double dl = box_distance2(nodes_[static_cast<std::size_t>(n.left)].box, p);
    const double dr = box_distance2(nodes_[static_cast<std::size_t>(n.right)].box, p);
    // Visit the nearer child first.
    if (dl <= dr) {
      stack.push_back(n.right);
      stack.push_back(n.left);
    } else {
      stack.push_back(n.left);
      stack.push_back(n.right);
    }
  }
  return best;
}

std::vector<double> point_to_surface_distance(const Points& points, const Points& vertices,
                                              const Faces& faces) {
  const TriangleTree tree(vertices, faces);
  std::vector<double> out(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = tree.distance(points.row(i).transpose());
  }
  return out;
}

namespace {

std::vector<double> pooled_distances(const Points& va, const Faces& fa, const Points& vb,
                                     const Faces& fb) {
  std::vector<double> d = point_to_surface_distance(va, vb, fb);
  const std::vector<double> back = point_to_surface_distance(vb, va, fa);
  d.insert(d.end(), back.begin(), back.end());
  return d;
}

}  // namespace

double bidirectional_surface_error(const Points& vertices_a, const Faces& faces_a,
                                   const Points& vertices_b, const Faces& faces_b) {
  const std::vector<double> ab = point_to_surface_distance(vertices_a, vertices_b, faces_b);
  const std::vector<double> ba = point_to_surface_distance(vertices_b, vertices_a, faces_a);
  // Summing each direction separately keeps the result exactly symmetric.
  const double sa = std::accumulate(ab.begin(), ab.end(), 0.0);
  const double sb = std::accumulate(ba.begin(), ba.end(), 0.0);
  return 1000.0 * (sa + sb) / static_cast<double>(ab.size() + ba.size());
}

nlohmann::json evaluation_to_json(const EvaluationReport& r) {
  return {{"mean_mm", r.mean_mm},
          {"std_mm", r.std_mm},
          {"max_mm", r.max_mm},
          {"keypoint_rmse_px", r.keypoint_rmse_px},
          {"silhouette_iou", r.silhouette_iou}};
}

double pose_normalized_error(const ModelDefinition& model, const SubjectParams& estimate,
                             const SubjectParams& ground_truth) {
  check_subject(model, estimate);
  check_subject(model, ground_truth);
  if (ground_truth.frames.empty()) throw ContractViolation("ground truth has no frames");
  const FramePose& pose = ground_truth.frames.front();
  const Points est = pose_mesh(model, estimate.beta, estimate.offsets, pose);
  const Points gt = pose_mesh(model, ground_truth.beta, ground_truth.offsets, pose);
  return bidirectional_surface_error(est, model.faces, gt, model.faces);
}

EvaluationReport evaluate_fit(const ModelDefinition& model, const Camera& camera,
                              const SubjectParams& estimate, const SubjectParams& ground_truth,
                              const std::vector<FrameObservation>& observations) {
  check_subject(model, estimate);
  check_subject(model, ground_truth);
  if (ground_truth.frames.empty()) throw ContractViolation("ground truth has no frames");
  if (estimate.frames.size() != observations.size()) {
    throw ContractViolation("estimate frame count does not match the observations");
  }
  EvaluationReport r;
  const FramePose& pose = ground_truth.frames.front();
  const Points est = pose_mesh(model, estimate.beta, estimate.offsets, pose);
  const Points gt = pose_mesh(model, ground_truth.beta, ground_truth.offsets, pose);
  const std::vector<double> d = pooled_distances(est, model.faces, gt, model.faces);
  r.mean_mm = bidirectional_surface_error(est, model.faces, gt, model.faces);
  double var = 0.0;
  for (double x : d) {
    const double mm = 1000.0 * x;
    var += (mm - r.mean_mm) * (mm - r.mean_mm);
    r.max_mm = std::max(r.max_mm, mm);
  }
  r.std_mm = std::sqrt(var / static_cast<double>(d.size()));
  r.max_mm = std::max(r.max_mm, r.mean_mm);

  for (std::size_t i = 0; i < observations.size(); ++i) {
    const Points posed = pose_mesh(model, estimate, i);
    const Pixels px = project(camera, regress_keypoints3d(model, posed));
    double sum = 0.0;
    int n = 0;
    for (Eigen::Index k = 0; k < px.rows(); ++k) {
      const auto& o = observations[i].keypoints[static_cast<std::size_t>(k)];
      if (!(o.confidence > 0.0)) continue;
      sum += (px.row(k) - Eigen::RowVector2d(o.u, o.v)).squaredNorm();
      ++n;
    }
    r.keypoint_rmse_px.push_back(n > 0 ? std::sqrt(sum / n) : 0.0);
  }
  r.silhouette_iou = silhouette_ious(model, camera, estimate, observations);
  return r;
}

}  // namespace bodyfit
