#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedsparse/federation.hpp"

namespace fedsparse {

/// Full run description: federation parameters plus dataset source and
/// output location. Loaded from a JSON document; unknown keys are rejected.
struct ConfigFile {
  RunConfig run;
  std::string dataset = "synthetic";  // "synthetic" or "idx"
  std::string images_path;
  std::string labels_path;
  std::string test_images_path;
  std::string test_labels_path;
  // synthetic dataset shape
  int synth_classes = 10;
  int synth_per_class = 200;
  int synth_feature_dim = 20;
  int synth_test_per_class = 50;
  std::string out_dir = "out";
};

ConfigFile load_config(const std::string& path);
ConfigFile parse_config_json(const std::string& json_text);
std::string config_to_json(const ConfigFile& cfg);

/// Named experiment presets covering the sparsity sweep and the
/// Non-IID-{4,6,8} x alpha {0.2,0.5,0.8} grid at desk scale.
ConfigFile preset_config(const std::string& name);
std::vector<std::string> preset_names();

struct RunArtifacts {
  std::string rounds_csv;
  std::string report_txt;
  std::string manifest_json;
};

/// Executes the configured experiment and writes rounds.csv, report.txt and
/// manifest.json under cfg.out_dir.
RunArtifacts execute_run(const ConfigFile& cfg);

std::string records_to_csv(const std::vector<RoundRecord>& records);

}  // namespace fedsparse
