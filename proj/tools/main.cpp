// fedsparse command-line front end: run experiments, inspect partitions,
// compare completed runs.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fedsparse/config.hpp"
#include "fedsparse/data.hpp"
#include "fedsparse/ledger.hpp"

namespace fs = std::filesystem;
using namespace fedsparse;

namespace {

struct RunOptions {
  std::string config_path;
  std::string preset;
  std::string out_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int rounds = 0;
  std::string pipeline;
};

ConfigFile resolve_config(const RunOptions& opt) {
  ConfigFile cfg;
  if (!opt.preset.empty())
    cfg = preset_config(opt.preset);
  else if (!opt.config_path.empty())
    cfg = load_config(opt.config_path);
  else
    throw std::invalid_argument("provide --config or --preset");

  if (opt.seed_set) cfg.run.seed = opt.seed;
  if (opt.rounds > 0) cfg.run.rounds = opt.rounds;
  if (!opt.pipeline.empty())
    cfg.run.pipeline = pipeline_from_string(opt.pipeline);
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  cfg.run.validate();
  return cfg;
}

int cmd_run(const RunOptions& opt) {
  const ConfigFile cfg = resolve_config(opt);
  const RunArtifacts artifacts = execute_run(cfg);
  std::cout << "wrote " << artifacts.rounds_csv << "\n"
            << "wrote " << artifacts.report_txt << "\n"
            << "wrote " << artifacts.manifest_json << "\n";
  return 0;
}

int cmd_partition(const RunOptions& opt) {
  const ConfigFile cfg = resolve_config(opt);
  Dataset train;
  if (cfg.dataset == "idx")
    train = load_idx(cfg.images_path, cfg.labels_path);
  else
    train = synth_dataset(cfg.synth_classes, cfg.synth_per_class,
                          cfg.synth_feature_dim, cfg.run.seed * 2 + 1);

  const PartitionSpec spec = partition(train, cfg.run.num_clients,
                                       cfg.run.labels_per_client, cfg.run.seed);
  std::cout << "client\tsamples\tdistinct_labels\n";
  for (std::size_t c = 0; c < spec.assignment.size(); ++c) {
    std::set<int> labels;
    for (std::size_t s : spec.assignment[c]) labels.insert(train.labels[s]);
    std::cout << c << '\t' << spec.assignment[c].size() << '\t'
              << labels.size() << '\n';
  }
  return 0;
}

struct LoadedRun {
  std::string name;
  std::vector<RoundRecord> records;
  std::uint64_t model_params = 0;
  int clients_per_round = 0;
};

LoadedRun load_run_dir(const std::string& dir) {
  LoadedRun run;
  run.name = fs::path(dir).filename().string();

  std::ifstream manifest(fs::path(dir) / "manifest.json");
  if (!manifest)
    throw std::runtime_error("incomplete run dir (no manifest.json): " + dir);
  std::ostringstream mbuf;
  mbuf << manifest.rdbuf();
  const ConfigFile cfg = parse_config_json(mbuf.str());
  run.clients_per_round = cfg.run.clients_per_round;
  std::uint64_t m = 0;
  for (std::size_t i = 0; i + 1 < cfg.run.layer_dims.size(); ++i)
    m += cfg.run.layer_dims[i] * cfg.run.layer_dims[i + 1] +
         cfg.run.layer_dims[i + 1];
  run.model_params = m;

  std::ifstream csv(fs::path(dir) / "rounds.csv");
  if (!csv)
    throw std::runtime_error("incomplete run dir (no rounds.csv): " + dir);
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    if (line.empty()) continue;
    RoundRecord r;
    char comma;
    std::istringstream ls(line);
    ls >> r.round >> comma >> r.accuracy >> comma >> r.loss >> comma >>
        r.upload_bits >> comma >> r.download_bits >> comma >> r.exposures;
    if (!ls) throw std::runtime_error("bad rounds.csv line in " + dir);
    run.records.push_back(r);
  }
  if (run.records.empty())
    throw std::runtime_error("incomplete run dir (empty rounds.csv): " + dir);
  return run;
}

int cmd_report(const std::vector<std::string>& dirs, double target) {
  std::vector<std::string> names;
  std::vector<CostReport> reports;
  for (const auto& dir : dirs) {
    const LoadedRun run = load_run_dir(dir);
    names.push_back(run.name);
    reports.push_back(cost_report(run.records, target, run.clients_per_round,
                                  run.model_params));
  }
  std::cout << format_cost_table(names, reports);

  // Eq-7 factors vs the first (baseline) run: per-round payload ratio and
  // round-count inflation.
  if (reports.size() > 1 && reports[0].rounds_to_target) {
    std::cout << "\nvs " << names[0] << ":\n";
    for (std::size_t i = 1; i < reports.size(); ++i) {
      std::cout << names[i] << ": payload_factor="
                << reports[i].upload_bits_per_client /
                       reports[0].upload_bits_per_client;
      if (reports[i].rounds_to_target)
        std::cout << " round_inflation="
                  << static_cast<double>(*reports[i].rounds_to_target) /
                         *reports[0].rounds_to_target;
      else
        std::cout << " round_inflation=not-reached";
      std::cout << "\n";
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"federated learning sparsification simulator"};
  app.require_subcommand(1);

  RunOptions opt;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", opt.config_path, "JSON config file");
    sub->add_option("--preset", opt.preset, "named experiment preset");
    sub->add_option("--out", opt.out_dir, "output directory override");
    sub->add_option("--seed", opt.seed, "master seed override")
        ->each([&](const std::string&) { opt.seed_set = true; });
    sub->add_option("--rounds", opt.rounds, "round count override");
    sub->add_option("--pipeline", opt.pipeline,
                    "pipeline override: fedavg|flat|thgs|secure");
  };

  CLI::App* run = app.add_subcommand("run", "execute an experiment");
  add_common(run);

  CLI::App* part =
      app.add_subcommand("partition", "print the per-client sample summary");
  add_common(part);

  std::vector<std::string> report_dirs;
  double target_fraction = 0.95;
  CLI::App* report =
      app.add_subcommand("report", "compare completed run directories");
  report->add_option("dirs", report_dirs, "run output directories")
      ->required();
  report->add_option("--target", target_fraction,
                     "fraction of converged accuracy defining n_target");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(opt);
    if (part->parsed()) return cmd_partition(opt);
    if (report->parsed()) return cmd_report(report_dirs, target_fraction);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
