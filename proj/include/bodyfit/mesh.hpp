#pragma once

#include <filesystem>
#include <vector>

#include "bodyfit/body_model.hpp"

namespace bodyfit {

/// Sorted, de-duplicated 1-ring of every vertex.
std::vector<std::vector<int>> vertex_neighbors(const Faces& faces, int vertex_count);

/// Area-weighted unit vertex normals; zero for isolated vertices.
Points vertex_normals(const Points& vertices, const Faces& faces);

/// One step of uniform Laplacian smoothing: v <- mean of its 1-ring.
Points laplacian_smooth(const Points& field, const std::vector<std::vector<int>>& neighbors);

/// Wavefront OBJ with v and f records only.
void save_obj(const Points& vertices, const Faces& faces, const std::filesystem::path& path);
void load_obj(const std::filesystem::path& path, Points& vertices, Faces& faces);

}  // namespace bodyfit
