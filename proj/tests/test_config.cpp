#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "fedsparse/config.hpp"

using namespace fedsparse;
namespace fs = std::filesystem;

TEST_CASE("parse_config_json round-trips and validates") {
  const char* text = R"({
    "pipeline": "thgs",
    "num_clients": 12,
    "clients_per_round": 4,
    "rounds": 7,
    "sparsity": 0.2,
    "sparsity_min": 0.05,
    "attenuation": 0.5,
    "layer_dims": [20, 16, 10],
    "seed": 99
  })";
  const ConfigFile cfg = parse_config_json(text);
  CHECK(cfg.run.pipeline == Pipeline::kThgs);
  CHECK(cfg.run.num_clients == 12);
  CHECK(cfg.run.seed == 99);

  const ConfigFile again = parse_config_json(config_to_json(cfg));
  CHECK(config_to_json(again) == config_to_json(cfg));
}

TEST_CASE("unknown keys are rejected by name") {
  CHECK_THROWS_WITH_AS(parse_config_json(R"({"sparsityy": 0.1})"),
                       "config: unknown key \"sparsityy\"",
                       std::invalid_argument);
}

TEST_CASE("invalid settings are rejected at load") {
  CHECK_THROWS(parse_config_json(R"({"num_clients": 2, "clients_per_round": 5})"));
  CHECK_THROWS(parse_config_json(R"({"dataset": "csv"})"));
  CHECK_THROWS(parse_config_json(R"({"dataset": "idx"})"));  // missing paths
  CHECK_THROWS(parse_config_json("not json at all"));
}

TEST_CASE("presets cover the experiment grid") {
  for (const auto& name : preset_names()) {
    const ConfigFile cfg = preset_config(name);
    CHECK_NOTHROW(cfg.run.validate());
  }
  CHECK(preset_config("fig1-s01").run.sparsity == 0.1);
  CHECK(preset_config("fig1-s001").run.sparsity == 0.01);
  CHECK(preset_config("fig1-s0001").run.sparsity == 0.001);
  CHECK(preset_config("fig3-n4-a02").run.labels_per_client == 4);
  CHECK(preset_config("fig3-n8-a08").run.attenuation == 0.8);
  CHECK_THROWS(preset_config("fig3-n5-a02"));
  CHECK_THROWS(preset_config("nonsense"));
}

TEST_CASE("records_to_csv column order is stable") {
  RoundRecord r;
  r.round = 3;
  r.accuracy = 0.5;
  r.loss = 1.25;
  r.upload_bits = 960;
  r.download_bits = 640;
  r.exposures = 2;
  const std::string csv = records_to_csv({r});
  CHECK(csv ==
        "round,accuracy,loss,upload_bits,download_bits,exposures\n"
        "3,0.5,1.25,960,640,2\n");
}

TEST_CASE("execute_run writes artifacts and is reproducible from the manifest") {
  ConfigFile cfg = preset_config("smoke");
  cfg.run.rounds = 3;
  cfg.run.num_clients = 6;
  cfg.run.clients_per_round = 3;
  cfg.synth_per_class = 40;
  const fs::path out = fs::temp_directory_path() /
                       ("fedsparse_cfg_" + std::to_string(::getpid()));
  cfg.out_dir = out.string();

  const RunArtifacts artifacts = execute_run(cfg);
  CHECK(fs::exists(artifacts.rounds_csv));
  CHECK(fs::exists(artifacts.report_txt));
  CHECK(fs::exists(artifacts.manifest_json));

  // replay from the manifest alone
  std::ifstream manifest(artifacts.manifest_json);
  std::ostringstream buf;
  buf << manifest.rdbuf();
  ConfigFile replay = parse_config_json(buf.str());
  replay.out_dir = (out / "replay").string();
  const RunArtifacts second = execute_run(replay);

  std::ifstream a(artifacts.rounds_csv), b(second.rounds_csv);
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  fs::remove_all(out);
}

TEST_CASE("execute_run with missing dataset leaves no partial artifacts") {
  ConfigFile cfg = preset_config("smoke");
  cfg.dataset = "idx";
  cfg.images_path = "/nonexistent/img";
  cfg.labels_path = "/nonexistent/lab";
  cfg.test_images_path = "/nonexistent/timg";
  cfg.test_labels_path = "/nonexistent/tlab";
  const fs::path out = fs::temp_directory_path() /
                       ("fedsparse_missing_" + std::to_string(::getpid()));
  cfg.out_dir = out.string();
  CHECK_THROWS(execute_run(cfg));
  CHECK(!fs::exists(out));
}
