#include <doctest.h>

#include <cmath>
#include <set>

#include "fedsparse/federation.hpp"

using namespace fedsparse;

namespace {

RunConfig synth_config() {
  RunConfig cfg;
  cfg.num_clients = 8;
  cfg.clients_per_round = 4;
  cfg.local_iterations = 3;
  cfg.batch_size = 20;
  cfg.learning_rate = 0.2;
  cfg.rounds = 10;
  cfg.layer_dims = {12, 10, 6};
  cfg.seed = 21;
  return cfg;
}

Dataset small_train() { return synth_dataset(6, 60, 12, 100); }
Dataset small_test() { return synth_dataset(6, 20, 12, 101); }

double max_abs_diff(const LayeredTensor& a, const LayeredTensor& b) {
  double m = 0.0;
  for (std::size_t l = 0; l < a.layers.size(); ++l)
    for (std::size_t j = 0; j < a.layers[l].size(); ++j)
      m = std::max(m, std::fabs(a.layers[l][j] - b.layers[l][j]));
  return m;
}

}  // namespace

TEST_CASE("select_clients basic contracts") {
  const auto ids = select_clients(100, 10, 3, 7);
  CHECK(ids.size() == 10);
  CHECK(std::set<int>(ids.begin(), ids.end()).size() == 10);
  for (int id : ids) CHECK((id >= 0 && id < 100));

  const auto all = select_clients(5, 5, 0, 7);
  CHECK(all == std::vector<int>{0, 1, 2, 3, 4});

  CHECK(select_clients(100, 10, 3, 7) == ids);        // deterministic
  CHECK(select_clients(100, 10, 4, 7) != ids);        // varies per round
}

TEST_CASE("local_train degenerate cases") {
  const Dataset train = small_train();
  RunConfig cfg = synth_config();
  const auto model = init_model(cfg.layer_dims, 3);
  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  cfg.local_iterations = 0;
  const auto zero = local_train(model, train, idx, cfg, 1);
  CHECK(zero.update == LayeredTensor::zeros_like(model));

  cfg.local_iterations = 3;
  cfg.learning_rate = 0.0;
  const auto still = local_train(model, train, idx, cfg, 1);
  CHECK(still.update == LayeredTensor::zeros_like(model));

  CHECK_THROWS(local_train(model, train, {}, cfg, 1));
}

TEST_CASE("one full-batch iteration equals lr times the analytic gradient") {
  const Dataset train = small_train();
  RunConfig cfg = synth_config();
  cfg.local_iterations = 1;
  cfg.batch_size = static_cast<int>(train.size());  // full batch
  const auto model = init_model(cfg.layer_dims, 3);
  std::vector<std::size_t> idx(train.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;

  const auto r = local_train(model, train, idx, cfg, 1);
  Batch all;
  all.inputs = train.samples;
  all.labels = train.labels;
  const auto lg = forward_loss_grad(model, all);
  for (std::size_t l = 0; l < model.layers.size(); ++l)
    for (std::size_t j = 0; j < model.layers[l].size(); ++j)
      CHECK(r.update.layers[l][j] ==
            doctest::Approx(cfg.learning_rate * lg.grad.layers[l][j])
                .epsilon(1e-12));
  CHECK(r.loss == doctest::Approx(lg.loss));
}

TEST_CASE("single-client fedavg round equals centralized SGD") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig cfg = synth_config();
  cfg.num_clients = 1;
  cfg.clients_per_round = 1;
  cfg.rounds = 1;
  const auto result = run_experiment(cfg, train, test);

  // replay: same client seed path, applied directly
  const PartitionSpec parts{{[&] {
                              std::vector<std::size_t> idx(train.size());
                              for (std::size_t i = 0; i < idx.size(); ++i)
                                idx[i] = i;
                              return idx;
                            }()},
                            0};
  FederationState state = init_state(cfg);
  const auto before = state.global_model;
  run_round(state, cfg, train, parts, test, 0);
  CHECK(result.final_model == state.global_model);
  CHECK(max_abs_diff(before, state.global_model) > 0.0);
}

TEST_CASE("experiments are deterministic per master seed") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig cfg = synth_config();
  cfg.pipeline = Pipeline::kThgs;
  cfg.sparsity = 0.3;
  cfg.sparsity_min = 0.05;
  cfg.rounds = 4;
  const auto a = run_experiment(cfg, train, test);
  const auto b = run_experiment(cfg, train, test);
  CHECK(a.final_model == b.final_model);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    CHECK(a.records[i].accuracy == b.records[i].accuracy);
    CHECK(a.records[i].upload_bits == b.records[i].upload_bits);
  }

  cfg.seed = 22;
  const auto c = run_experiment(cfg, train, test);
  CHECK(a.final_model != c.final_model);
}

TEST_CASE("identity sparsification reproduces fedavg bitwise") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig base = synth_config();
  base.rounds = 5;
  const auto fedavg = run_experiment(base, train, test);

  RunConfig thgs = base;
  thgs.pipeline = Pipeline::kThgs;
  thgs.sparsity = 1.0;
  thgs.sparsity_min = 1.0;
  thgs.attenuation = 1.0;
  CHECK(run_experiment(thgs, train, test).final_model == fedavg.final_model);

  RunConfig flat = base;
  flat.pipeline = Pipeline::kFlatSparse;
  flat.sparsity = 1.0;
  CHECK(run_experiment(flat, train, test).final_model == fedavg.final_model);
}

TEST_CASE("zero-mask full-rate secure aggregation matches fedavg") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig base = synth_config();
  base.rounds = 5;
  const auto fedavg = run_experiment(base, train, test);

  RunConfig secure = base;
  secure.pipeline = Pipeline::kSecureAgg;
  secure.rate_initial = 1.0;
  secure.rate_min = 1.0;
  secure.mask_k_ratio = 0.0;  // sigma = p: all masks filtered to zero
  const auto sec = run_experiment(secure, train, test);
  CHECK(max_abs_diff(sec.final_model, fedavg.final_model) < 1e-9);
  for (const auto& r : sec.records) CHECK(r.exposures == 0);
}

TEST_CASE("residual bookkeeping conserves generated updates") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig cfg = synth_config();
  cfg.pipeline = Pipeline::kThgs;
  cfg.sparsity = 0.2;
  cfg.sparsity_min = 0.05;
  cfg.rounds = 6;

  // twin run instrumented round by round
  const PartitionSpec parts =
      partition(train, cfg.num_clients, cfg.labels_per_client, 999);
  FederationState state = init_state(cfg);
  // per-client cumulative transmitted (decoded) and generated updates
  std::vector<LayeredTensor> generated(
      cfg.num_clients, LayeredTensor::zeros_like(state.global_model));
  const SparsitySchedule sched = schedule_rates(
      cfg.sparsity, cfg.attenuation, cfg.sparsity_min,
      state.global_model.layers.size());
  std::vector<ResidualState> residuals(
      cfg.num_clients, ResidualState{LayeredTensor::zeros_like(state.global_model)});
  std::vector<LayeredTensor> transmitted(
      cfg.num_clients, LayeredTensor::zeros_like(state.global_model));

  for (int round = 0; round < cfg.rounds; ++round) {
    const auto selected =
        select_clients(cfg.num_clients, cfg.clients_per_round, round, cfg.seed);
    std::vector<LayeredTensor> dense;
    for (int c : selected) {
      auto r = local_train(state.global_model, train, parts.assignment[c], cfg,
                           std::uint64_t(round) * 1000 + c);
      LayeredTensor effective = r.update;
      for (std::size_t l = 0; l < effective.layers.size(); ++l)
        for (std::size_t j = 0; j < effective.layers[l].size(); ++j)
          effective.layers[l][j] += residuals[c].residual.layers[l][j];
      auto sr = sparsify_layered(effective, sched);
      residuals[c].residual = sr.residual;
      const auto d = decode_dense(sr.sparse);
      for (std::size_t l = 0; l < d.layers.size(); ++l)
        for (std::size_t j = 0; j < d.layers[l].size(); ++j) {
          transmitted[c].layers[l][j] += d.layers[l][j];
          generated[c].layers[l][j] += r.update.layers[l][j];
        }
      dense.push_back(d);
    }
    LayeredTensor sum = dense[0];
    for (std::size_t i = 1; i < dense.size(); ++i)
      for (std::size_t l = 0; l < sum.layers.size(); ++l)
        for (std::size_t j = 0; j < sum.layers[l].size(); ++j)
          sum.layers[l][j] += dense[i].layers[l][j];
    for (auto& layer : sum.layers)
      for (double& v : layer) v /= dense.size();
    state.global_model = apply_update(state.global_model, sum, 1.0);
  }

  for (int c = 0; c < cfg.num_clients; ++c)
    for (std::size_t l = 0; l < generated[c].layers.size(); ++l)
      for (std::size_t j = 0; j < generated[c].layers[l].size(); ++j)
        CHECK(transmitted[c].layers[l][j] + residuals[c].residual.layers[l][j] ==
              doctest::Approx(generated[c].layers[l][j]).epsilon(1e-12));
}

TEST_CASE("fedavg on separable blobs converges") {
  const Dataset train = synth_dataset(10, 100, 20, 55);
  const Dataset test = synth_dataset(10, 30, 20, 56);
  RunConfig cfg;
  cfg.num_clients = 10;
  cfg.clients_per_round = 5;
  cfg.local_iterations = 5;
  cfg.batch_size = 50;
  cfg.learning_rate = 0.3;
  cfg.rounds = 50;
  cfg.layer_dims = {20, 16, 10};
  cfg.seed = 2;
  const auto result = run_experiment(cfg, train, test);
  CHECK(result.records.back().accuracy >= 0.95);
}

TEST_CASE("round records account upload and download bits") {
  const Dataset train = small_train();
  const Dataset test = small_test();
  RunConfig cfg = synth_config();
  cfg.rounds = 2;
  const auto fed = run_experiment(cfg, train, test);
  const std::uint64_t m = fed.final_model.total_len();
  for (const auto& r : fed.records) {
    CHECK(r.upload_bits == std::uint64_t(cfg.clients_per_round) * m * 64);
    CHECK(r.download_bits == std::uint64_t(cfg.clients_per_round) * m * 64);
  }

  cfg.pipeline = Pipeline::kThgs;
  cfg.sparsity = 0.25;
  cfg.sparsity_min = 0.05;
  const auto thgs = run_experiment(cfg, train, test);
  const auto sched =
      schedule_rates(cfg.sparsity, cfg.attenuation, cfg.sparsity_min, 4);
  std::uint64_t per_client = 0;
  const std::vector<std::size_t> sizes{12 * 10, 10, 10 * 6, 6};
  for (std::size_t l = 0; l < sizes.size(); ++l)
    per_client += 96ull * select_count(sizes[l], sched.rates[l]);
  for (const auto& r : thgs.records)
    CHECK(r.upload_bits == per_client * cfg.clients_per_round);
}

TEST_CASE("config validation rejects inconsistent settings") {
  RunConfig cfg = synth_config();
  cfg.clients_per_round = cfg.num_clients + 1;
  CHECK_THROWS(cfg.validate());

  cfg = synth_config();
  cfg.pipeline = Pipeline::kThgs;
  cfg.sparsity = 0.001;
  cfg.sparsity_min = 0.01;  // min above s0
  CHECK_THROWS(cfg.validate());

  cfg = synth_config();
  cfg.pipeline = Pipeline::kSecureAgg;
  cfg.clients_per_round = 1;
  CHECK_THROWS(cfg.validate());
}
