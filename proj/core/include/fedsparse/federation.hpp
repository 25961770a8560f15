#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedsparse/data.hpp"
#include "fedsparse/secure_agg.hpp"
#include "fedsparse/sparsify.hpp"
#include "fedsparse/tensor.hpp"

namespace fedsparse {

enum class Pipeline { kFedAvg, kFlatSparse, kThgs, kSecureAgg };

Pipeline pipeline_from_string(const std::string& name);
std::string pipeline_to_string(Pipeline p);

struct RunConfig {
  int num_clients = 100;
  int clients_per_round = 10;
  int local_iterations = 5;
  int batch_size = 50;
  double learning_rate = 0.1;
  int rounds = 100;
  Pipeline pipeline = Pipeline::kFedAvg;

  // flat / THGS sparsification
  double sparsity = 0.1;        // s (flat) or s_0 (THGS)
  double attenuation = 0.5;     // alpha of the per-layer rate recurrence
  double sparsity_min = 0.01;   // s_min

  // secure aggregation
  double rate_initial = 0.5;    // R_0
  double rate_min = 0.01;       // R_min
  double rate_alpha = 0.8;      // alpha of the dynamic-rate update
  double mask_p = 0.0;
  double mask_q = 1.0;
  double mask_k_ratio = 1.0;

  int labels_per_client = 0;    // 0 = IID
  std::vector<std::size_t> layer_dims = {784, 64, 10};
  std::uint64_t seed = 1;

  void validate() const;
};

struct RoundRecord {
  int round = 0;
  double accuracy = 0.0;
  double loss = 0.0;
  std::uint64_t upload_bits = 0;    // payload bits summed over selected clients
  std::uint64_t download_bits = 0;  // dense model broadcast, summed
  std::uint64_t exposures = 0;      // secure-agg audit flags this round
};

std::vector<int> select_clients(int num_clients, int clients_per_round,
                                int round, std::uint64_t seed);

struct LocalTrainResult {
  LayeredTensor update;  // global - local, the direction to transmit
  double loss = 0.0;     // mean loss over local iterations
};

LocalTrainResult local_train(const LayeredTensor& global_model,
                             const Dataset& data,
                             const std::vector<std::size_t>& sample_indices,
                             const RunConfig& cfg, std::uint64_t rng_seed);

struct FederationState {
  LayeredTensor global_model;
  std::vector<ResidualState> residuals;        // one per client
  std::vector<DynamicRateState> rate_states;   // secure-agg only
  PairSeeds pair_seeds;                        // secure-agg only
};

FederationState init_state(const RunConfig& cfg);

RoundRecord run_round(FederationState& state, const RunConfig& cfg,
                      const Dataset& train, const PartitionSpec& parts,
                      const Dataset& test, int round);

struct ExperimentResult {
  std::vector<RoundRecord> records;
  LayeredTensor final_model;
};

ExperimentResult run_experiment(const RunConfig& cfg, const Dataset& train,
                                const Dataset& test);

}  // namespace fedsparse
