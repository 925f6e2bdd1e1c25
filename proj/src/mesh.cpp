#include "bodyfit/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/model_io.hpp"

namespace bodyfit {

std::vector<std::vector<int>> vertex_neighbors(const Faces& faces, int vertex_count) {
  std::vector<std::vector<int>> ring(static_cast<std::size_t>(vertex_count));
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces(f, k);
      const int b = faces(f, (k + 1) % 3);
      if (a == b) continue;
      ring[static_cast<std::size_t>(a)].push_back(b);
      ring[static_cast<std::size_t>(b)].push_back(a);
    }
  }
  for (auto& r : ring) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return ring;
}

Points vertex_normals(const Points& vertices, const Faces& faces) {
  Points n = Points::Zero(vertices.rows(), 3);
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    const Vec3 a = vertices.row(faces(f, 0)).transpose();
    const Vec3 b = vertices.row(faces(f, 1)).transpose();
    const Vec3 c = vertices.row(faces(f, 2)).transpose();
    const Vec3 area_normal = (b - a).cross(c - a);  // length = 2 * area
    for (int k = 0; k < 3; ++k) n.row(faces(f, k)) += area_normal.transpose();
  }
  for (Eigen::Index i = 0; i < n.rows(); ++i) {
    const double len = n.row(i).norm();
    if (len > 0.0) n.row(i) /= len;
  }
  return n;
}

Points laplacian_smooth(const Points& field, const std::vector<std::vector<int>>& neighbors) {
  Points out = field;
  for (std::size_t v = 0; v < neighbors.size(); ++v) {
    const auto& ring = neighbors[v];
    if (ring.empty()) continue;
    Eigen::RowVector3d s = Eigen::RowVector3d::Zero();
    for (int u : ring) s += field.row(u);
    out.row(static_cast<Eigen::Index>(v)) = s / static_cast<double>(ring.size());
  }
  return out;
}

void save_obj(const Points& vertices, const Faces& faces, const std::filesystem::path& path) {
  std::string text;
  char buf[128];
  for (Eigen::Index i = 0; i < vertices.rows(); ++i) {
    std::snprintf(buf, sizeof(buf), "v %.9f %.9f %.9f\n", vertices(i, 0), vertices(i, 1),
                  vertices(i, 2));
    text += buf;
  }
  for (Eigen::Index f = 0; f < faces.rows(); ++f) {
    std::snprintf(buf, sizeof(buf), "f %d %d %d\n", faces(f, 0) + 1, faces(f, 1) + 1,
                  faces(f, 2) + 1);
    text += buf;
  }
  write_text_file(path, text);
}

void load_obj(const std::filesystem::path& path, Points& vertices, Faces& faces) {
  std::istringstream in(read_text_file(path));
  std::vector<Vec3> vs;
  std::vector<Eigen::Vector3i> fs;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      ls >> v.x() >> v.y() >> v.z();
      if (!ls) throw IoError("malformed vertex record in " + path.string());
      vs.push_back(v);
    } else if (tag == "f") {
      Eigen::Vector3i f;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        ls >> tok;
        if (tok.empty()) throw IoError("malformed face record in " + path.string());
        f[k] = std::stoi(tok.substr(0, tok.find('/'))) - 1;
      }
      fs.push_back(f);
    }
  }
  vertices.resize(static_cast<Eigen::Index>(vs.size()), 3);
  for (std::size_t i = 0; i < vs.size(); ++i) vertices.row(static_cast<Eigen::Index>(i)) = vs[i].transpose();
  faces.resize(static_cast<Eigen::Index>(fs.size()), 3);
  for (std::size_t i = 0; i < fs.size(); ++i) faces.row(static_cast<Eigen::Index>(i)) = fs[i].transpose();
}

}  // namespace bodyfit
