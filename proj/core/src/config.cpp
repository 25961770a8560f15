#include "fedsparse/config.hpp"

#include <json.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fedsparse/data.hpp"
#include "fedsparse/ledger.hpp"

namespace fedsparse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const char* const kKnownKeys[] = {
    "pipeline",        "num_clients",     "clients_per_round",
    "local_iterations", "batch_size",     "learning_rate",
    "rounds",          "sparsity",        "attenuation",
    "sparsity_min",    "rate_initial",    "rate_min",
    "rate_alpha",      "mask_p",          "mask_q",
    "mask_k_ratio",    "labels_per_client", "layer_dims",
    "seed",            "dataset",         "images_path",
    "labels_path",     "test_images_path", "test_labels_path",
    "synth_classes",   "synth_per_class", "synth_feature_dim",
    "synth_test_per_class", "out_dir",
};

void check_keys(const json& j) {
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (const char* k : kKnownKeys)
      if (key == k) { known = true; break; }
    if (!known)
      throw std::invalid_argument("config: unknown key \"" + key + "\"");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ConfigFile parse_config_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j);

  ConfigFile cfg;
  if (j.contains("pipeline"))
    cfg.run.pipeline = pipeline_from_string(j.at("pipeline").get<std::string>());
  get_if(j, "num_clients", cfg.run.num_clients);
  get_if(j, "clients_per_round", cfg.run.clients_per_round);
  get_if(j, "local_iterations", cfg.run.local_iterations);
  get_if(j, "batch_size", cfg.run.batch_size);
  get_if(j, "learning_rate", cfg.run.learning_rate);
  get_if(j, "rounds", cfg.run.rounds);
  get_if(j, "sparsity", cfg.run.sparsity);
  get_if(j, "attenuation", cfg.run.attenuation);
  get_if(j, "sparsity_min", cfg.run.sparsity_min);
  get_if(j, "rate_initial", cfg.run.rate_initial);
  get_if(j, "rate_min", cfg.run.rate_min);
  get_if(j, "rate_alpha", cfg.run.rate_alpha);
  get_if(j, "mask_p", cfg.run.mask_p);
  get_if(j, "mask_q", cfg.run.mask_q);
  get_if(j, "mask_k_ratio", cfg.run.mask_k_ratio);
  get_if(j, "labels_per_client", cfg.run.labels_per_client);
  get_if(j, "layer_dims", cfg.run.layer_dims);
  get_if(j, "seed", cfg.run.seed);
  get_if(j, "dataset", cfg.dataset);
  get_if(j, "images_path", cfg.images_path);
  get_if(j, "labels_path", cfg.labels_path);
  get_if(j, "test_images_path", cfg.test_images_path);
  get_if(j, "test_labels_path", cfg.test_labels_path);
  get_if(j, "synth_classes", cfg.synth_classes);
  get_if(j, "synth_per_class", cfg.synth_per_class);
  get_if(j, "synth_feature_dim", cfg.synth_feature_dim);
  get_if(j, "synth_test_per_class", cfg.synth_test_per_class);
  get_if(j, "out_dir", cfg.out_dir);

  cfg.run.validate();
  if (cfg.dataset != "synthetic" && cfg.dataset != "idx")
    throw std::invalid_argument("config: dataset must be \"synthetic\" or \"idx\"");
  if (cfg.dataset == "idx" &&
      (cfg.images_path.empty() || cfg.labels_path.empty() ||
       cfg.test_images_path.empty() || cfg.test_labels_path.empty()))
    throw std::invalid_argument(
        "config: idx dataset requires images_path, labels_path, "
        "test_images_path, test_labels_path");
  return cfg;
}

ConfigFile load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_json(buf.str());
}

std::string config_to_json(const ConfigFile& cfg) {
  json j;
  j["pipeline"] = pipeline_to_string(cfg.run.pipeline);
  j["num_clients"] = cfg.run.num_clients;
  j["clients_per_round"] = cfg.run.clients_per_round;
  j["local_iterations"] = cfg.run.local_iterations;
  j["batch_size"] = cfg.run.batch_size;
  j["learning_rate"] = cfg.run.learning_rate;
  j["rounds"] = cfg.run.rounds;
  j["sparsity"] = cfg.run.sparsity;
  j["attenuation"] = cfg.run.attenuation;
  j["sparsity_min"] = cfg.run.sparsity_min;
  j["rate_initial"] = cfg.run.rate_initial;
  j["rate_min"] = cfg.run.rate_min;
  j["rate_alpha"] = cfg.run.rate_alpha;
  j["mask_p"] = cfg.run.mask_p;
  j["mask_q"] = cfg.run.mask_q;
  j["mask_k_ratio"] = cfg.run.mask_k_ratio;
  j["labels_per_client"] = cfg.run.labels_per_client;
  j["layer_dims"] = cfg.run.layer_dims;
  j["seed"] = cfg.run.seed;
  j["dataset"] = cfg.dataset;
  j["images_path"] = cfg.images_path;
  j["labels_path"] = cfg.labels_path;
  j["test_images_path"] = cfg.test_images_path;
  j["test_labels_path"] = cfg.test_labels_path;
  j["synth_classes"] = cfg.synth_classes;
  j["synth_per_class"] = cfg.synth_per_class;
  j["synth_feature_dim"] = cfg.synth_feature_dim;
  j["synth_test_per_class"] = cfg.synth_test_per_class;
  j["out_dir"] = cfg.out_dir;
  return j.dump(2);
}

namespace {

ConfigFile smoke_preset() {
  ConfigFile cfg;
  cfg.run.num_clients = 20;
  cfg.run.clients_per_round = 5;
  cfg.run.rounds = 20;
  cfg.run.local_iterations = 5;
  cfg.run.batch_size = 50;
  cfg.run.learning_rate = 0.2;
  cfg.run.pipeline = Pipeline::kThgs;
  cfg.run.sparsity = 0.1;
  cfg.run.attenuation = 0.8;
  cfg.run.sparsity_min = 0.01;
  cfg.run.layer_dims = {20, 16, 10};
  cfg.synth_classes = 10;
  cfg.synth_per_class = 200;
  cfg.synth_feature_dim = 20;
  cfg.synth_test_per_class = 50;
  cfg.out_dir = "out/smoke";
  return cfg;
}

ConfigFile mnist_base() {
  ConfigFile cfg;
  cfg.dataset = "idx";
  cfg.images_path = "data/train-images-idx3-ubyte";
  cfg.labels_path = "data/train-labels-idx1-ubyte";
  cfg.test_images_path = "data/t10k-images-idx3-ubyte";
  cfg.test_labels_path = "data/t10k-labels-idx1-ubyte";
  cfg.run.layer_dims = {784, 64, 10};
  cfg.run.num_clients = 100;
  cfg.run.clients_per_round = 10;
  cfg.run.local_iterations = 5;
  cfg.run.batch_size = 50;
  cfg.run.learning_rate = 0.1;
  cfg.run.rounds = 100;
  return cfg;
}

}  // namespace

ConfigFile preset_config(const std::string& name) {
  if (name == "smoke") return smoke_preset();

  if (name == "secure-smoke") {
    ConfigFile cfg = smoke_preset();
    cfg.run.pipeline = Pipeline::kSecureAgg;
    cfg.run.rate_initial = 0.5;
    cfg.run.rate_min = 0.01;
    cfg.run.rate_alpha = 0.8;
    cfg.out_dir = "out/secure-smoke";
    return cfg;
  }

  // Sparsity sweep on IID MNIST: s in {0.1, 0.01, 0.001}.
  if (name == "fig1-fedavg" || name == "fig1-s01" || name == "fig1-s001" ||
      name == "fig1-s0001") {
    ConfigFile cfg = mnist_base();
    cfg.out_dir = "out/" + name;
    if (name == "fig1-fedavg") {
      cfg.run.pipeline = Pipeline::kFedAvg;
    } else {
      cfg.run.pipeline = Pipeline::kThgs;
      cfg.run.attenuation = 0.8;
      cfg.run.sparsity = name == "fig1-s01" ? 0.1
                         : name == "fig1-s001" ? 0.01
                                               : 0.001;
      cfg.run.sparsity_min = std::min(0.01, cfg.run.sparsity);
    }
    return cfg;
  }

  // Non-IID-{4,6,8} x attenuation {0.2,0.5,0.8} grid.
  if (name.rfind("fig3-n", 0) == 0) {
    // fig3-n<labels>-a<02|05|08>
    const auto dash = name.find("-a");
    if (dash != std::string::npos && dash > 6) {
      const int n = std::stoi(name.substr(6, dash - 6));
      const std::string a = name.substr(dash + 2);
      double alpha = 0.0;
      if (a == "02") alpha = 0.2;
      else if (a == "05") alpha = 0.5;
      else if (a == "08") alpha = 0.8;
      if (alpha > 0.0 && (n == 4 || n == 6 || n == 8)) {
        ConfigFile cfg = mnist_base();
        cfg.run.pipeline = Pipeline::kThgs;
        cfg.run.labels_per_client = n;
        cfg.run.sparsity = 0.1;
        cfg.run.attenuation = alpha;
        cfg.run.sparsity_min = 0.01;
        cfg.out_dir = "out/" + name;
        return cfg;
      }
    }
  }

  throw std::invalid_argument("unknown preset \"" + name + "\"");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> names = {"smoke",      "secure-smoke", "fig1-fedavg",
                                    "fig1-s01",   "fig1-s001",    "fig1-s0001"};
  for (int n : {4, 6, 8})
    for (const char* a : {"02", "05", "08"})
      names.push_back("fig3-n" + std::to_string(n) + "-a" + a);
  return names;
}

std::string records_to_csv(const std::vector<RoundRecord>& records) {
  std::ostringstream out;
  out << "round,accuracy,loss,upload_bits,download_bits,exposures\n";
  for (const auto& r : records)
    out << r.round << ',' << r.accuracy << ',' << r.loss << ','
        << r.upload_bits << ',' << r.download_bits << ',' << r.exposures
        << '\n';
  return out.str();
}

RunArtifacts execute_run(const ConfigFile& cfg) {
  cfg.run.validate();

  Dataset train, test;
  if (cfg.dataset == "idx") {
    train = load_idx(cfg.images_path, cfg.labels_path);
    test = load_idx(cfg.test_images_path, cfg.test_labels_path);
  } else {
    train = synth_dataset(cfg.synth_classes, cfg.synth_per_class,
                          cfg.synth_feature_dim, cfg.run.seed * 2 + 1);
    test = synth_dataset(cfg.synth_classes, cfg.synth_test_per_class,
                         cfg.synth_feature_dim, cfg.run.seed * 2 + 2);
  }
  if (!train.samples.empty() &&
      train.samples[0].size() != cfg.run.layer_dims.front())
    throw std::invalid_argument("config: layer_dims[0] != dataset feature dim");

  const ExperimentResult result = run_experiment(cfg.run, train, test);

  fs::create_directories(cfg.out_dir);
  RunArtifacts artifacts;
  artifacts.rounds_csv = (fs::path(cfg.out_dir) / "rounds.csv").string();
  artifacts.report_txt = (fs::path(cfg.out_dir) / "report.txt").string();
  artifacts.manifest_json = (fs::path(cfg.out_dir) / "manifest.json").string();

  std::ofstream(artifacts.rounds_csv) << records_to_csv(result.records);

  const std::uint64_t m = result.final_model.total_len();
  const CostReport report =
      cost_report(result.records, 0.95, cfg.run.clients_per_round, m);
  std::ostringstream rep;
  rep << format_cost_table({pipeline_to_string(cfg.run.pipeline)}, {report});
  rep << "\nmodel_params " << m << "\n";
  rep << "dense_update_mib " << dense_update_mib(m) << "\n";
  std::ofstream(artifacts.report_txt) << rep.str();

  std::ofstream(artifacts.manifest_json) << config_to_json(cfg) << "\n";
  return artifacts;
}

}  // namespace fedsparse
