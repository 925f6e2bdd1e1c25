#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "doctest.h"

#include "bodyfit/cli.hpp"

using namespace bodyfit;

namespace {

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "bodyfit");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("cli exit codes") {
  const auto dir = std::filesystem::temp_directory_path() / "bodyfit_unit_cli";
  std::filesystem::remove_all(dir);
  const std::string data = (dir / "data").string();

  CHECK(cli({}) == 2);
  CHECK(cli({"frobnicate"}) == 2);
  CHECK(cli({"fit", "--out", "x"}) == 2);
  CHECK(cli({"synth", "--out", data, "--resolution", "8"}) == 2);
  CHECK(cli({"fit", "--data", (dir / "missing").string(), "--out", (dir / "o").string()}) == 2);

  REQUIRE(cli({"synth", "--out", data, "--seed", "2", "--frames", "2", "--resolution", "96",
               "--vertices", "250"}) == 0);
  CHECK(std::filesystem::exists(dir / "data"));

  const std::string cfg = (dir / "quick.json").string();
  {
    std::ofstream(cfg) << R"({"stages": [{"name": "S", "steps": 3, "tau_px": 1.0,
      "step_sizes": {"shape": 0.1},
      "objective": {"terms": [{"name": "silhouette", "weight": 1.0}]}}],
      "render_resolution": 48})";
  }
  const std::string out = (dir / "fit").string();
  REQUIRE(cli({"fit", "--data", data, "--config", cfg, "--out", out, "--gt-poses"}) == 0);
  CHECK(std::filesystem::exists(dir / "fit" / "result.json"));
  CHECK(cli({"eval", "--result", (dir / "fit" / "result.json").string(), "--data", data}) == 0);
  CHECK(cli({"render", "--result", (dir / "fit" / "result.json").string(), "--data", data, "--out",
             (dir / "render").string()}) == 0);

  {
    std::ofstream(cfg) << "{ not json";
  }
  CHECK(cli({"fit", "--data", data, "--config", cfg, "--out", out}) == 2);
  CHECK(cli({"default-config"}) == 0);
  std::filesystem::remove_all(dir);
}
