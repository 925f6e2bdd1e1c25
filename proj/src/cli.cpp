#include "bodyfit/cli.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bodyfit/certify.hpp"
#include "bodyfit/errors.hpp"
#include "bodyfit/fitter.hpp"
#include "bodyfit/mesh.hpp"
#include "bodyfit/model_io.hpp"
#include "bodyfit/synthlab.hpp"

namespace bodyfit {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitUsage = 2;

struct Manifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json outputs = nlohmann::json::object();
  std::uint64_t seed = 0;
  Clock::time_point start = Clock::now();

  void write(const fs::path& path) const {
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    write_json_file(path, {{"command", command},
                           {"tool_version", std::string(kToolVersion)},
                           {"seed", seed},
                           {"config", config},
                           {"inputs", inputs},
                           {"outputs", outputs},
                           {"wall_clock_seconds", seconds}});
  }
};

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
  // Probe writability up front so failures surface before any work.
  const fs::path probe = dir / ".write_probe";
  write_text_file(probe, "");
  fs::remove(probe, ec);
}

std::string frame_file(const char* prefix, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s%03zu.%s", prefix, i, ext);
  return buf;
}

SubjectParams load_result(const fs::path& file, const ModelDefinition& model) {
  SubjectParams p = subject_from_json(read_json_file(file));
  check_subject(model, p);
  return p;
}

// ---- synth ----

struct SynthArgs {
  std::string out;
  std::uint64_t seed = 0;
  int frames = 8;
  int resolution = 1080;
  double noise = 1.0;
  int corruption = 0;
  int vertices = kDefaultVertexTarget;
};

int cmd_synth(const SynthArgs& a) {
  Manifest m;
  m.command = "synth";
  m.seed = a.seed;
  ScenarioSpec s;
  s.seed = a.seed;
  s.frames = a.frames;
  s.resolution = a.resolution;
  s.keypoint_noise_px = a.noise;
  s.corruption_radius = a.corruption;
  s.validate();
  const fs::path out(a.out);
  ensure_dir(out);
  const Bundle b = synthesize_bundle(s, a.vertices);
  save_bundle(b, out);
  m.config = scenario_to_json(s);
  m.config["vertices"] = a.vertices;
  m.outputs = {{"bundle", out.string()}};
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---- fit ----

struct FitArgs {
  std::string data;
  std::string config;
  std::string out;
  bool gt_poses = false;
  std::optional<double> budget_seconds;
};

void write_trace(const FitResult& r, const fs::path& path) {
  std::ostringstream s;
  s.precision(17);
  s << "stage,step,objective,best_so_far\n";
  for (const auto& st : r.stages) {
    for (std::size_t i = 0; i < st.values.size(); ++i) {
      s << st.name << ',' << i << ',' << st.values[i] << ',' << st.best[i] << '\n';
    }
  }
  write_text_file(path, s.str());
}

int cmd_fit(const FitArgs& a) {
  Manifest m;
  m.command = "fit";
  const Bundle b = load_bundle(a.data);
  FitConfig config = a.config.empty()
                         ? default_fit_config(b.model.joint_count())
                         : fit_config_from_json(read_json_file(a.config));
  if (a.budget_seconds) config.budget_seconds = a.budget_seconds;
  config.validate(&b.model);
  m.seed = config.seed;
  const fs::path out(a.out);
  ensure_dir(out);

  FitOptions options;
  if (a.gt_poses) {
    if (b.ground_truth.frames.empty()) {
      throw IoError((fs::path(a.data) / "subject.json").string() + ": --gt-poses needs ground truth");
    }
    SubjectParams init = zero_subject(b.model, b.observations.size());
    init.frames = b.ground_truth.frames;
    options.initial = init;
    options.freeze_poses = true;
  }
  const FitResult r = fit(b.model, b.camera, b.observations, config, options);

  write_json_file(out / "result.json", fit_result_to_json(r));
  write_trace(r, out / "trace.csv");
  save_obj(shaped_tpose(b.model, r.params.beta, r.params.offsets), b.model.faces, out / "tshape.obj");
  for (std::size_t i = 0; i < r.params.frames.size(); ++i) {
    save_obj(pose_mesh(b.model, r.params, i), b.model.faces, out / frame_file("posed_", i, "obj"));
  }
  if (r.diverged) std::cerr << "warning: optimization diverged; last finite iterate kept\n";

  m.config = fit_config_to_json(config);
  m.inputs = {{"data", a.data}, {"config", a.config}, {"gt_poses", a.gt_poses}};
  m.outputs = {{"result", (out / "result.json").string()}, {"trace", (out / "trace.csv").string()}};
  nlohmann::json timing = nlohmann::json::array();
  for (const auto& s : r.stages) timing.push_back({{"stage", s.name}, {"seconds", s.seconds}, {"steps", s.values.size()}});
  m.outputs["stage_timing"] = timing;
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---- eval ----

int cmd_eval(const std::string& result, const std::string& data) {
  Manifest m;
  m.command = "eval";
  const Bundle b = load_bundle(data);
  if (b.ground_truth.frames.empty()) {
    throw IoError((fs::path(data) / "subject.json").string() + ": ground truth missing");
  }
  const SubjectParams est = load_result(result, b.model);
  const EvaluationReport rep = evaluate_fit(b.model, b.camera, est, b.ground_truth, b.observations);
  const nlohmann::json doc = evaluation_to_json(rep);
  std::cout << doc.dump(1) << '\n';
  m.inputs = {{"result", result}, {"data", data}};
  m.outputs = {{"report", doc}};
  const fs::path dir = fs::path(result).parent_path();
  m.write((dir.empty() ? fs::path(".") : dir) / "eval_manifest.json");
  return kExitOk;
}

// ---- render ----

int cmd_render(const std::string& result, const std::string& data, const std::string& out_dir) {
  Manifest m;
  m.command = "render";
  const Bundle b = load_bundle(data);
  const SubjectParams est = load_result(result, b.model);
  if (est.frames.size() != b.observations.size()) {
    throw IoError(result + ": frame count does not match the bundle");
  }
  const fs::path out(out_dir);
  ensure_dir(out);
  std::ostringstream csv;
  csv.precision(17);
  csv << "frame,iou\n";
  for (std::size_t i = 0; i < est.frames.size(); ++i) {
    const SilhouetteImage img = threshold(
        render_silhouette(b.camera, pose_mesh(b.model, est, i), b.model.faces, kMaskRenderTau));
    save_pgm(img, out / frame_file("", i, "pgm"));
    csv << i << ',' << mask_iou(img, b.observations[i].mask) << '\n';
  }
  write_text_file(out / "iou.csv", csv.str());
  m.inputs = {{"result", result}, {"data", data}};
  m.outputs = {{"dir", out.string()}};
  m.write(out / "manifest.json");
  return kExitOk;
}

// ---- gradcheck ----

int cmd_gradcheck(std::uint64_t seed, const std::string& report, const std::string& fault) {
  Manifest m;
  m.command = "gradcheck";
  m.seed = seed;
  CertifyOptions o;
  o.seed = seed;
  if (!fault.empty()) o.inject_fault = term_from_name(fault);
  // Fail on an unwritable report path before spending the runtime.
  write_text_file(report, "");
  const auto checks = certify_gradients(o);
  std::ostringstream csv;
  csv.precision(6);
  csv << "term,max_relative_error,tolerance,epsilon,passed,worst_group,worst_index\n";
  bool ok = true;
  for (const auto& c : checks) {
    csv << term_name(c.term) << ',' << std::scientific << c.max_relative_error << ',' << c.tolerance << ','
        << c.epsilon << std::defaultfloat << ',' << (c.passed ? "yes" : "no") << ',' << c.worst_group
        << ',' << c.worst_index << '\n';
    if (!c.passed) {
      ok = false;
      std::cerr << "gradient check failed: " << term_name(c.term) << " max relative error "
                << c.max_relative_error << " > " << c.tolerance << '\n';
    }
  }
  write_text_file(report, csv.str());
  m.config = {{"points", o.points}, {"vertices", o.vertex_target}, {"frames", o.frames},
              {"resolution", o.resolution}, {"tau", o.softness_tau}};
  m.outputs = {{"report", report}, {"passed", ok}};
  fs::path mpath(report);
  mpath.replace_extension(".manifest.json");
  m.write(mpath);
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Body shape and pose recovery from silhouettes and keypoints"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolVersion));

  SynthArgs sa;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic observation bundle");
  synth->add_option("--out", sa.out, "Output directory")->required();
  synth->add_option("--seed", sa.seed, "Random seed");
  synth->add_option("--frames", sa.frames, "Number of frames")->check(CLI::PositiveNumber);
  synth->add_option("--resolution", sa.resolution, "Image height and width in pixels")->check(CLI::Range(64, 8192));
  synth->add_option("--noise", sa.noise, "Keypoint noise sigma in pixels")->check(CLI::NonNegativeNumber);
  synth->add_option("--corruption", sa.corruption, "Mask dilation (>0) or erosion (<0) radius in pixels");
  synth->add_option("--vertices", sa.vertices, "Target vertex count of the body model")
      ->check(CLI::Range(kMinProceduralVertices, 100000));

  FitArgs fa;
  double budget = 0.0;
  auto* fitc = app.add_subcommand("fit", "Fit shape and poses to a bundle");
  fitc->add_option("--data", fa.data, "Bundle directory")->required();
  fitc->add_option("--config", fa.config, "Fit config JSON (default: built-in)");
  fitc->add_option("--out", fa.out, "Output directory")->required();
  fitc->add_flag("--gt-poses", fa.gt_poses, "Use and freeze the ground-truth poses");
  auto* budget_opt = fitc->add_option("--budget-seconds", budget, "Wall-clock budget")->check(CLI::PositiveNumber);

  std::string ev_result, ev_data;
  auto* evalc = app.add_subcommand("eval", "Evaluate a fit against ground truth");
  evalc->add_option("--result", ev_result, "result.json")->required();
  evalc->add_option("--data", ev_data, "Bundle directory")->required();

  std::uint64_t gc_seed = 0;
  std::string gc_report, gc_fault;
  auto* grad = app.add_subcommand("gradcheck", "Certify analytic gradients by finite differences");
  grad->add_option("--seed", gc_seed, "Random seed");
  grad->add_option("--tolerance-report", gc_report, "CSV report path")->required();
  grad->add_option("--inject-fault", gc_fault, "Corrupt one term's gradient (self-test)")->group("");

  std::string rd_result, rd_data, rd_out;
  auto* render = app.add_subcommand("render", "Render fitted silhouettes");
  render->add_option("--result", rd_result, "result.json")->required();
  render->add_option("--data", rd_data, "Bundle directory")->required();
  render->add_option("--out", rd_out, "Output directory")->required();

  auto* defaults = app.add_subcommand("default-config", "Print the built-in fit config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*synth) return cmd_synth(sa);
    if (*fitc) {
      if (*budget_opt) fa.budget_seconds = budget;
      return cmd_fit(fa);
    }
    if (*evalc) return cmd_eval(ev_result, ev_data);
    if (*grad) return cmd_gradcheck(gc_seed, gc_report, gc_fault);
    if (*render) return cmd_render(rd_result, rd_data, rd_out);
    if (*defaults) {
      std::cout << fit_config_to_json(default_fit_config()).dump(2) << '\n';
      return kExitOk;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace bodyfit
