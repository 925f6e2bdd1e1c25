#include <cstdio>
#include <string>

#include "bodyfit/errors.hpp"
#include "bodyfit/model_io.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

namespace fs = std::filesystem;

std::string frame_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%03zu.pgm", i);
  return buf;
}

nlohmann::json camera_to_json(const Camera& c) {
  return {{"width", c.width},
          {"height", c.height},
          {"focal_pixels", c.focal_pixels},
          {"principal_point", {c.principal_point.x(), c.principal_point.y()}}};
}

Camera camera_from_json(const nlohmann::json& doc) {
  Camera c;
  c.width = doc.at("width").get<int>();
  c.height = doc.at("height").get<int>();
  c.focal_pixels = doc.at("focal_pixels").get<double>();
  const auto pp = doc.at("principal_point").get<std::vector<double>>();
  if (pp.size() != 2) throw IoError("principal_point must have 2 entries");
  c.principal_point = Eigen::Vector2d(pp[0], pp[1]);
  c.validate();
  return c;
}

// Runs `fn`, turning any library error into an IoError that names `file`.
template <typename Fn>
auto with_file(const fs::path& file, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const IoError& e) {
    const std::string what = e.what();
    if (what.find(file.string()) != std::string::npos) throw;
    throw IoError(file.string() + ": " + what);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(file.string() + ": " + e.what());
  } catch (const Error& e) {
    throw IoError(file.string() + ": " + e.what());
  }
}

}  // namespace

nlohmann::json observations_keypoints_json(const std::vector<FrameObservation>& obs) {
  nlohmann::json frames = nlohmann::json::array();
  for (const auto& o : obs) {
    nlohmann::json points = nlohmann::json::array();
    for (const auto& k : o.keypoints) points.push_back({k.u, k.v, k.confidence});
    nlohmann::json anchors = nlohmann::json::array();
    for (const auto& a : o.anchors) anchors.push_back({a.vertex, a.u, a.v, a.confidence});
    frames.push_back({{"points", points}, {"anchors", anchors}});
  }
  return {{"frames", frames}};
}

void save_bundle(const Bundle& bundle, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (ec) throw IoError("cannot create " + (dir / "frames").string() + ": " + ec.message());
  save_model(bundle.model, dir / "model.json");
  write_json_file(dir / "subject.json", subject_to_json(bundle.ground_truth));
  write_json_file(dir / "keypoints.json", observations_keypoints_json(bundle.observations));
  nlohmann::json scenario = scenario_to_json(bundle.scenario);
  scenario["camera"] = camera_to_json(bundle.camera);
  write_json_file(dir / "scenario.json", scenario);
  for (std::size_t i = 0; i < bundle.observations.size(); ++i) {
    save_pgm(bundle.observations[i].mask, dir / "frames" / frame_name(i));
  }
}

Bundle load_bundle(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("bundle directory " + dir.string() + " does not exist");
  Bundle b;
  const fs::path scenario_file = dir / "scenario.json";
  with_file(scenario_file, [&] {
    const nlohmann::json doc = read_json_file(scenario_file);
    b.scenario = scenario_from_json(doc);
    b.camera = camera_from_json(doc.at("camera"));
    return 0;
  });
  const fs::path model_file = dir / "model.json";
  b.model = with_file(model_file, [&] { return load_model(model_file); });
  const fs::path subject_file = dir / "subject.json";
  if (fs::exists(subject_file)) {
    b.ground_truth = with_file(subject_file, [&] {
      SubjectParams p = subject_from_json(read_json_file(subject_file));
      check_subject(b.model, p);
      return p;
    });
  }
  const fs::path kp_file = dir / "keypoints.json";
  with_file(kp_file, [&] {
    const nlohmann::json doc = read_json_file(kp_file);
    const auto& frames = doc.at("frames");
    if (frames.empty()) throw IoError("no frames");
    for (const auto& f : frames) {
      FrameObservation o;
      for (const auto& p : f.at("points")) {
        if (p.size() != 3) throw IoError("keypoint entries must be [u, v, confidence]");
        o.keypoints.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
      }
      if (static_cast<int>(o.keypoints.size()) != b.model.keypoint_count()) {
        throw IoError("keypoint count does not match the model");
      }
      if (f.contains("anchors")) {
        for (const auto& a : f.at("anchors")) {
          if (a.size() != 4) throw IoError("anchor entries must be [vertex, u, v, confidence]");
          AnchorLandmark al{a[0].get<int>(), a[1].get<double>(), a[2].get<double>(), a[3].get<double>()};
          if (al.vertex < 0 || al.vertex >= b.model.vertex_count()) {
            throw IoError("anchor vertex out of range");
          }
          o.anchors.push_back(al);
        }
      }
      b.observations.push_back(std::move(o));
    }
    return 0;
  });
  for (std::size_t i = 0; i < b.observations.size(); ++i) {
    const fs::path mask_file = dir / "frames" / frame_name(i);
    b.observations[i].mask = with_file(mask_file, [&] { return load_pgm(mask_file); });
    if (b.observations[i].mask.width != b.camera.width ||
        b.observations[i].mask.height != b.camera.height) {
      throw IoError(mask_file.string() + ": mask size does not match the camera");
    }
  }
  if (!b.ground_truth.frames.empty() && b.ground_truth.frames.size() != b.observations.size()) {
    throw IoError(subject_file.string() + ": frame count does not match keypoints.json");
  }
  return b;
}

}  // namespace bodyfit
