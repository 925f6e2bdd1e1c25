#include "bodyfit/model_io.hpp"

#include <fstream>
#include <sstream>

#include "bodyfit/errors.hpp"

namespace bodyfit {
namespace {

using nlohmann::json;

json rows_to_json(const Points& p) {
  json out = json::array();
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.push_back({p(i, 0), p(i, 1), p(i, 2)});
  return out;
}

Points points_from_json(const json& arr, Eigen::Index expected_rows, const char* what) {
  if (!arr.is_array()) throw IoError(std::string(what) + " must be an array");
  if (expected_rows >= 0 && static_cast<Eigen::Index>(arr.size()) != expected_rows) {
    throw IoError(std::string(what) + " has the wrong number of rows");
  }
  Points p(static_cast<Eigen::Index>(arr.size()), 3);
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_array() || arr[i].size() != 3) {
      throw IoError(std::string(what) + " rows must have 3 entries");
    }
    for (int c = 0; c < 3; ++c) p(static_cast<Eigen::Index>(i), c) = arr[i][c].get<double>();
  }
  return p;
}

json matrix_rows(const RowMatrix& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.push_back(std::vector<double>(m.row(r).data(), m.row(r).data() + m.cols()));
  }
  return out;
}

RowMatrix matrix_from_rows(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows) {
    throw IoError(std::string(what) + " must have " + std::to_string(rows) + " rows");
  }
  RowMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = arr[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw IoError(std::string(what) + " row " + std::to_string(r) + " has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json flat_matrix(const RowMatrix& m) {
  return std::vector<double>(m.data(), m.data() + m.size());
}

RowMatrix matrix_from_flat(const json& arr, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!arr.is_array() || static_cast<Eigen::Index>(arr.size()) != rows * cols) {
    throw IoError(std::string(what) + " must hold " + std::to_string(rows * cols) + " numbers");
  }
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows * cols; ++i) m.data()[i] = arr[static_cast<std::size_t>(i)].get<double>();
  return m;
}

}  // namespace

nlohmann::json model_to_json(const ModelDefinition& model) {
  json doc;
  doc["version"] = kModelFormatVersion;
  doc["V"] = model.vertex_count();
  doc["J"] = model.joint_count();
  doc["K"] = model.keypoint_count();
  doc["B"] = model.shape_count();
  doc["template"] = rows_to_json(model.template_vertices);
  json faces = json::array();
  for (Eigen::Index f = 0; f < model.faces.rows(); ++f) {
    faces.push_back({model.faces(f, 0), model.faces(f, 1), model.faces(f, 2)});
  }
  doc["faces"] = std::move(faces);
  doc["parents"] = model.parents;
  doc["shape_dirs"] = flat_matrix(model.shape_dirs);
  doc["pose_dirs"] = flat_matrix(model.pose_dirs);
  doc["joint_regressor"] = matrix_rows(model.joint_regressor);
  doc["skin_weights"] = matrix_rows(model.skin_weights);
  doc["keypoint_regressor"] = matrix_rows(model.keypoint_regressor);
  json pairs = json::array();
  for (const auto& [l, r] : model.symmetry_pairs) pairs.push_back({l, r});
  doc["symmetry_pairs"] = std::move(pairs);
  doc["eye_ids"] = model.eye_ids;
  doc["ankle_ids"] = model.ankle_ids;
  return doc;
}

ModelDefinition model_from_json(const nlohmann::json& doc) {
  ModelDefinition m;
  try {
    if (doc.at("version").get<int>() != kModelFormatVersion) {
      throw IoError("unsupported model version");
    }
    const auto v = doc.at("V").get<Eigen::Index>();
    const auto j = doc.at("J").get<Eigen::Index>();
    const auto k = doc.at("K").get<Eigen::Index>();
    const auto b = doc.at("B").get<Eigen::Index>();
    if (v < 1 || j < 1 || k < 1 || b < 0) throw IoError("model dimensions must be positive");
    m.template_vertices = points_from_json(doc.at("template"), v, "template");
    const json& faces = doc.at("faces");
    m.faces.resize(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].size() != 3) throw IoError("faces must be triangles");
      for (int c = 0; c < 3; ++c) m.faces(static_cast<Eigen::Index>(f), c) = faces[f][c].get<int>();
    }
    m.parents = doc.at("parents").get<std::vector<int>>();
    if (static_cast<Eigen::Index>(m.parents.size()) != j) throw IoError("parents must have J entries");
    m.shape_dirs = matrix_from_flat(doc.at("shape_dirs"), 3 * v, b, "shape_dirs");
    m.pose_dirs = matrix_from_flat(doc.at("pose_dirs"), 3 * v, 9 * (j - 1), "pose_dirs");
    m.joint_regressor = matrix_from_rows(doc.at("joint_regressor"), j, v, "joint_regressor");
    m.skin_weights = matrix_from_rows(doc.at("skin_weights"), v, j, "skin_weights");
    m.keypoint_regressor = matrix_from_rows(doc.at("keypoint_regressor"), k, v, "keypoint_regressor");
    for (const auto& p : doc.at("symmetry_pairs")) {
      if (p.size() != 2) throw IoError("symmetry pairs must have two entries");
      m.symmetry_pairs.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    m.eye_ids = doc.at("eye_ids").get<std::vector<int>>();
    m.ankle_ids = doc.at("ankle_ids").get<std::vector<int>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed model document: ") + e.what());
  }
  m.validate();
  return m;
}

void save_model(const ModelDefinition& model, const std::filesystem::path& path) {
  write_json_file(path, model_to_json(model));
}

ModelDefinition load_model(const std::filesystem::path& path) {
  return model_from_json(read_json_file(path));
}

nlohmann::json subject_to_json(const SubjectParams& params) {
  json doc;
  doc["beta"] = std::vector<double>(params.beta.data(), params.beta.data() + params.beta.size());
  doc["offsets"] = rows_to_json(params.offsets);
  json frames = json::array();
  for (const auto& f : params.frames) {
    frames.push_back({{"theta", rows_to_json(f.theta)},
                      {"trans", {f.trans.x(), f.trans.y(), f.trans.z()}}});
  }
  doc["frames"] = std::move(frames);
  return doc;
}

SubjectParams subject_from_json(const nlohmann::json& doc) {
  SubjectParams p;
  try {
    const auto beta = doc.at("beta").get<std::vector<double>>();
    p.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), static_cast<Eigen::Index>(beta.size()));
    p.offsets = points_from_json(doc.at("offsets"), -1, "offsets");
    for (const auto& f : doc.at("frames")) {
      FramePose pose;
      pose.theta = points_from_json(f.at("theta"), -1, "theta");
      const auto t = f.at("trans").get<std::vector<double>>();
      if (t.size() != 3) throw IoError("trans must have 3 entries");
      pose.trans = Vec3(t[0], t[1], t[2]);
      p.frames.push_back(std::move(pose));
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed subject document: ") + e.what());
  }
  return p;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw IoError("cannot parse " + path.string() + ": " + e.what());
  }
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("write failed for " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move " + tmp.string() + " into place: " + ec.message());
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  write_text_file(path, doc.dump(1) + "\n");
}

}  // namespace bodyfit
