#include "doctest.h"

#include <sstream>
#include <string>
#include <vector>

#include "ctnet/cli.hpp"
#include "ctnet/errors.hpp"
#include "ctnet/io.hpp"
#include "ctnet/metrics.hpp"
#include "ctnet/pipeline.hpp"
#include "ctnet/synthetic.hpp"

using namespace ctnet;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ctnet_pipeline_test_" + std::to_string(::getpid())) / name;
  fs::create_directories(dir);
  return dir;
}

struct CliRun {
  int code;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "ctnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

bool same_file(const fs::path& a, const fs::path& b) { return read_bytes(a) == read_bytes(b); }

const fs::path& smoke_dir() {
  static const fs::path dir = [] {
    const fs::path d = scratch("smoke");
    write_fixture(smoke_fixture(), d);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("smoke pipeline runs and writes every intermediate") {
  const fs::path out = scratch("smoke_out");
  const PipelineResult r = run_pipeline(load_config(smoke_dir() / "config.json"), fixture_inputs(smoke_dir()), out);
  for (const char* f : {"p_model.cttn", "m_dis.cttn", "m_dis.cttn.json", "m_tps.cttn", "warped_clothes.png",
                        "tps_clothes.cttn", "control_grid.json", "tps.json", "target_layout.png", "fused.png",
                        "report.json", "manifest.json"}) {
    CHECK(fs::exists(out / f));
  }
  CHECK(r.report["losses"]["total"].is_number());
  CHECK(r.report["warp_ssim"].is_number());
  CHECK(r.manifest["outputs"].size() > 20);
  CHECK_FALSE(r.manifest["config"].contains("workers"));
}

TEST_CASE("pipeline manifests are byte-identical across runs and worker counts") {
  PipelineConfig c = load_config(smoke_dir() / "config.json");
  std::vector<std::vector<std::uint8_t>> manifests;
  for (std::size_t workers : {1, 8, 1, 3}) {
    c.workers = workers;
    const fs::path out = scratch("det_" + std::to_string(manifests.size()));
    run_pipeline(c, fixture_inputs(smoke_dir()), out);
    manifests.push_back(read_bytes(out / "manifest.json"));
  }
  for (const auto& m : manifests) CHECK(m == manifests[0]);
}

TEST_CASE("identity fixture saturates the dense warp") {
  const fs::path dir = scratch("identity");
  const Fixture fx = identity_fixture();
  write_fixture(fx, dir);
  const fs::path out = scratch("identity_out");
  const PipelineResult r = run_pipeline(fx.config, fixture_inputs(dir), out);
  const Tensor warped = load_tensor(out / "warped_clothes.cttn");
  const Tensor model = load_tensor(out / "model_clothes.cttn");
  CHECK(masked_ssim(warped, model, clothes_mask(fx.model.layout)) >= 0.99);
  CHECK(load_tensor(out / "fused.cttn").identical(load_tensor(out / "tps_clothes.cttn")));
  CHECK(r.report["warp_ssim"].get<double>() >= 0.99);
}

TEST_CASE("bundled fixtures match the generators") {
  const fs::path bundled = fs::path(CTNET_SOURCE_DIR) / "fixtures";
  for (const auto& [kind, fx] : {std::pair{"smoke", smoke_fixture()}, std::pair{"identity", identity_fixture()}}) {
    const fs::path fresh = scratch(std::string("bundled_") + kind);
    write_fixture(fx, fresh);
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(fresh)) {
      CAPTURE(e.path().filename().string());
      CHECK(same_file(e.path(), bundled / kind / e.path().filename()));
      ++files;
    }
    CHECK(files == 8);
  }
}

TEST_CASE("missing inputs fail with the stage name") {
  PipelineInputs in = fixture_inputs(smoke_dir());
  in.target_body = smoke_dir() / "absent.png";
  try {
    run_pipeline(PipelineConfig{}, in, scratch("missing"));
    FAIL("expected an IoError");
  } catch (const IoError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("stage load-inputs") != std::string::npos);
    CHECK(msg.find("target_body=missing") != std::string::npos);
  }
  CHECK(cli({"pipeline", "--fixture", smoke_dir().string(), "--target-body", (smoke_dir() / "absent.png").string(),
             "--out", scratch("missing_cli").string()})
            .code == kExitIo);
}

TEST_CASE("cli exit codes") {
  CHECK(cli({}).code == kExitValidation);
  CHECK(cli({"no-such-command"}).code == kExitValidation);
  CHECK(cli({"tps-apply", "--tps", "x.json"}).code == kExitValidation);
  CHECK(cli({"distance-field", "--keypoints", "/nonexistent/k.json", "--out", "x.cttn"}).code == kExitIo);

  const fs::path d = scratch("codes");
  write_text(d / "bad.json", "{\"width\": 4}");
  CHECK(cli({"distance-field", "--keypoints", (d / "bad.json").string(), "--out", (d / "x.cttn").string()}).code ==
        kExitValidation);
  write_text(d / "probs.json", "");
  save_tensor(Tensor({1, 2}, {0.5, 0.6}), d / "probs.cttn");
  CHECK(cli({"metrics", "--probs", (d / "probs.cttn").string()}).code == kExitValidation);
  // two coincident control points make the spline singular
  write_text(d / "grid.json", dump_json(control_grid_to_json([] {
               ControlGrid c = ControlGrid::uniform(2, {0, 0, 4, 4});
               c.source[1] = c.source[0];
               return c;
             }())));
  CHECK(cli({"tps-fit", "--control", (d / "grid.json").string(), "--out", (d / "t.json").string()}).code ==
        kExitNumerical);
  CHECK(exit_code_for(NumericalError("x")) == kExitNumerical);
  CHECK(exit_code_for(ShapeError("x")) == kExitValidation);
}

TEST_CASE("cli subcommands compose to the pipeline results") {
  const fs::path fx = smoke_dir();
  const fs::path p = scratch("compose_pipeline");
  const fs::path c = scratch("compose_cli");
  const std::string cfg = (fx / "config.json").string();
  auto F = [&](const char* n) { return (fx / n).string(); };
  auto P = [&](const char* n) { return (p / n).string(); };
  auto C = [&](const char* n) { return (c / n).string(); };

  const CliRun pipe = cli({"pipeline", "--fixture", fx.string(), "--out", p.string()});
  REQUIRE(pipe.code == 0);

  REQUIRE(cli({"distance-field", "--keypoints", F("model_keypoints.json"), "--out", C("p_model.cttn")}).code == 0);
  REQUIRE(cli({"distance-field", "--keypoints", F("target_keypoints.json"), "--out", C("p_target.cttn")}).code == 0);
  CHECK(same_file(C("p_model.cttn"), P("p_model.cttn")));
  CHECK(same_file(C("p_target.cttn"), P("p_target.cttn")));

  for (const char* scale : {"dense", "tps"}) {
    const std::string name = std::string(scale == std::string("dense") ? "m_dis" : "m_tps") + ".cttn";
    REQUIRE(cli({"correspond", "--model-image", F("model.png"), "--model-field", C("p_model.cttn"), "--target-field",
                 C("p_target.cttn"), "--scale", scale, "--config", cfg, "--out", (c / name).string()})
                .code == 0);
    CHECK(same_file(c / name, p / name));
    CHECK(same_file(c / (name + ".json"), p / (name + ".json")));
  }

  REQUIRE(cli({"warp-dense", "--matrix", C("m_dis.cttn"), "--image", P("model_clothes.cttn"), "--out",
               C("warped_clothes.cttn")})
              .code == 0);
  CHECK(same_file(C("warped_clothes.cttn"), P("warped_clothes.cttn")));
  REQUIRE(cli({"warp-dense", "--matrix", C("m_dis.cttn"), "--layout", F("model_layout.png"), "--out",
               C("warped_layout.png"), "--scores-out", C("layout_scores.cttn")})
              .code == 0);
  CHECK(same_file(C("warped_layout.png"), P("warped_layout.png")));
  CHECK(same_file(C("layout_scores.cttn"), P("layout_scores.cttn")));

  REQUIRE(cli({"tps-fit", "--matrix", C("m_tps.cttn"), "--config", cfg, "--out", C("tps.json"), "--control-out",
               C("control_grid.json")})
              .code == 0);
  CHECK(same_file(C("tps.json"), P("tps.json")));
  CHECK(same_file(C("control_grid.json"), P("control_grid.json")));
  REQUIRE(cli({"tps-apply", "--tps", C("tps.json"), "--image", P("model_clothes.cttn"), "--out", C("tps_clothes.cttn")})
              .code == 0);
  CHECK(same_file(C("tps_clothes.cttn"), P("tps_clothes.cttn")));

  REQUIRE(cli({"layout-merge", "--warped", C("warped_layout.png"), "--preserved", F("target_preserved.png"), "--out",
               C("target_layout.png")})
              .code == 0);
  CHECK(same_file(C("target_layout.png"), P("target_layout.png")));

  REQUIRE(cli({"fuse", "--tps", C("tps_clothes.cttn"), "--warped", C("warped_clothes.cttn"), "--layout",
               C("target_layout.png"), "--body", F("target_body.png"), "--out", C("fused.cttn")})
              .code == 0);
  CHECK(same_file(C("fused.cttn"), P("fused.cttn")));
  REQUIRE(cli({"fuse", "--tps", C("tps_clothes.cttn"), "--gen", P("generated.cttn"), "--identity-mask", "1", "--out",
               C("fused2.cttn")})
              .code == 0);
  CHECK(same_file(C("fused2.cttn"), P("fused.cttn")));

  const Json report = parse_json(read_text(P("report.json")), "report");
  const CliRun losses = cli({"losses", "--fused", C("fused.cttn"), "--tps-clothes", C("tps_clothes.cttn"),
                             "--truth-clothes", F("truth_clothes.png"), "--control", C("control_grid.json"),
                             "--layout-scores", C("layout_scores.cttn"), "--target-layout", C("target_layout.png"),
                             "--model-clothes", P("model_clothes.cttn"), "--attention", P("attention.cttn"), "--body",
                             F("target_body.png"), "--config", cfg});
  REQUIRE(losses.code == 0);
  CHECK(parse_json(losses.out, "losses") == report["losses"]);

  const CliRun metrics = cli({"metrics", "--warped", C("warped_clothes.cttn"), "--fused", C("fused.cttn"),
                              "--truth-clothes", F("truth_clothes.png"), "--body", F("target_body.png"),
                              "--target-layout", C("target_layout.png")});
  REQUIRE(metrics.code == 0);
  const Json m = parse_json(metrics.out, "metrics");
  for (const char* k : {"warp_ssim", "mask_ssim", "h_ssim"}) CHECK(m[k] == report[k]);
}

TEST_CASE("cli pipeline flags override the config file") {
  const fs::path a = scratch("override_a"), b = scratch("override_b");
  REQUIRE(cli({"pipeline", "--fixture", smoke_dir().string(), "--seed", "3", "--out", a.string()}).code == 0);
  REQUIRE(cli({"pipeline", "--fixture", smoke_dir().string(), "--seed", "3", "--workers", "8", "--out", b.string()})
              .code == 0);
  const Json ma = parse_json(read_text(a / "manifest.json"), "a");
  CHECK(ma["config"]["seed"] == 3);
  CHECK(same_file(a / "manifest.json", b / "manifest.json"));
}

TEST_CASE("inception score from the cli") {
  const fs::path d = scratch("is");
  save_tensor(Tensor({2, 2}, {0.8, 0.2, 0.2, 0.8}), d / "p.cttn");
  const CliRun r = cli({"metrics", "--probs", (d / "p.cttn").string()});
  REQUIRE(r.code == 0);
  CHECK(parse_json(r.out, "is")["inception_score"].get<double>() == doctest::Approx(1.21257).epsilon(1e-5));
}
