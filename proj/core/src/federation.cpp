#include "fedsparse/federation.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fedsparse {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  return splitmix64(seed ^ splitmix64(a ^ splitmix64(b)));
}

// Stream tags for independent RNG domains derived from the master seed.
enum : std::uint64_t {
  kTagInit = 1,
  kTagPartition = 2,
  kTagSelect = 3,
  kTagClient = 4,
  kTagDh = 5,
};

LayeredTensor average_dense(const std::vector<LayeredTensor>& updates) {
  LayeredTensor sum = updates[0];
  for (std::size_t i = 1; i < updates.size(); ++i)
    for (std::size_t l = 0; l < sum.layers.size(); ++l)
      for (std::size_t j = 0; j < sum.layers[l].size(); ++j)
        sum.layers[l][j] += updates[i].layers[l][j];
  const double inv = 1.0 / static_cast<double>(updates.size());
  for (auto& layer : sum.layers)
    for (double& v : layer) v *= inv;
  return sum;
}

}  // namespace

Pipeline pipeline_from_string(const std::string& name) {
  if (name == "fedavg") return Pipeline::kFedAvg;
  if (name == "flat") return Pipeline::kFlatSparse;
  if (name == "thgs") return Pipeline::kThgs;
  if (name == "secure") return Pipeline::kSecureAgg;
  throw std::invalid_argument("unknown pipeline: " + name);
}

std::string pipeline_to_string(Pipeline p) {
  switch (p) {
    case Pipeline::kFedAvg: return "fedavg";
    case Pipeline::kFlatSparse: return "flat";
    case Pipeline::kThgs: return "thgs";
    case Pipeline::kSecureAgg: return "secure";
  }
  throw std::logic_error("bad pipeline value");
}

void RunConfig::validate() const {
  if (num_clients < 1 || clients_per_round < 1 || batch_size < 1 || rounds < 1)
    throw std::invalid_argument("config: counts must be positive");
  if (local_iterations < 0)
    throw std::invalid_argument("config: local_iterations must be >= 0");
  if (clients_per_round > num_clients)
    throw std::invalid_argument("config: clients_per_round > num_clients");
  if (layer_dims.size() < 2)
    throw std::invalid_argument("config: need at least 2 layer dims");
  if (pipeline == Pipeline::kFlatSparse || pipeline == Pipeline::kThgs) {
    if (!(sparsity > 0.0 && sparsity <= 1.0))
      throw std::invalid_argument("config: sparsity out of (0, 1]");
  }
  if (pipeline == Pipeline::kThgs) {
    if (!(sparsity_min > 0.0 && sparsity_min <= sparsity))
      throw std::invalid_argument("config: need 0 < sparsity_min <= sparsity");
    if (!(attenuation > 0.0 && attenuation <= 1.0))
      throw std::invalid_argument("config: attenuation out of (0, 1]");
  }
  if (pipeline == Pipeline::kSecureAgg) {
    if (!(rate_min > 0.0 && rate_min <= 1.0) ||
        !(rate_initial >= rate_min && rate_initial <= 1.0))
      throw std::invalid_argument("config: need R_min <= R_0 <= 1");
    if (!(mask_q > 0.0))
      throw std::invalid_argument("config: mask_q must be > 0");
    if (mask_k_ratio < 0.0 || mask_k_ratio > clients_per_round)
      throw std::invalid_argument("config: mask_k_ratio out of [0, x]");
    if (clients_per_round < 2)
      throw std::invalid_argument("config: secure pipeline needs >= 2 clients per round");
  }
}

std::vector<int> select_clients(int num_clients, int clients_per_round,
                                int round, std::uint64_t seed) {
  std::vector<int> ids(num_clients);
  std::iota(ids.begin(), ids.end(), 0);
  std::mt19937_64 rng(mix(seed, kTagSelect, static_cast<std::uint64_t>(round)));
  // Partial Fisher-Yates: first clients_per_round slots are the sample.
  for (int i = 0; i < clients_per_round; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng() % (num_clients - i));
    std::swap(ids[i], ids[j]);
  }
  ids.resize(clients_per_round);
  std::sort(ids.begin(), ids.end());
  return ids;
}

LocalTrainResult local_train(const LayeredTensor& global_model,
                             const Dataset& data,
                             const std::vector<std::size_t>& sample_indices,
                             const RunConfig& cfg, std::uint64_t rng_seed) {
  if (sample_indices.empty())
    throw std::invalid_argument("local_train: empty client dataset");

  std::mt19937_64 rng(rng_seed);
  LayeredTensor local = global_model;
  double loss_sum = 0.0;
  for (int it = 0; it < cfg.local_iterations; ++it) {
    std::vector<std::size_t> batch_idx;
    if (sample_indices.size() <= static_cast<std::size_t>(cfg.batch_size)) {
      batch_idx = sample_indices;
    } else {
      std::vector<std::size_t> pool = sample_indices;
      for (int i = 0; i < cfg.batch_size; ++i) {
        const std::size_t j = i + rng() % (pool.size() - i);
        std::swap(pool[i], pool[j]);
      }
      batch_idx.assign(pool.begin(), pool.begin() + cfg.batch_size);
    }
    Batch batch;
    batch.inputs.reserve(batch_idx.size());
    batch.labels.reserve(batch_idx.size());
    for (std::size_t s : batch_idx) {
      batch.inputs.push_back(data.samples[s]);
      batch.labels.push_back(data.labels[s]);
    }
    const LossGrad lg = forward_loss_grad(local, batch);
    loss_sum += lg.loss;
    local = apply_update(local, lg.grad, cfg.learning_rate);
  }

  LocalTrainResult result;
  result.loss = cfg.local_iterations > 0
                    ? loss_sum / cfg.local_iterations
                    : evaluate(global_model,
                               {data.samples[sample_indices[0]]},
                               {data.labels[sample_indices[0]]})
                          .loss;
  result.update = LayeredTensor::zeros_like(global_model);
  for (std::size_t l = 0; l < local.layers.size(); ++l)
    for (std::size_t j = 0; j < local.layers[l].size(); ++j)
      result.update.layers[l][j] =
          global_model.layers[l][j] - local.layers[l][j];
  return result;
}

FederationState init_state(const RunConfig& cfg) {
  FederationState state;
  state.global_model = init_model(cfg.layer_dims, mix(cfg.seed, kTagInit));
  const LayeredTensor zeros = LayeredTensor::zeros_like(state.global_model);
  state.residuals.assign(cfg.num_clients, ResidualState{zeros});
  if (cfg.pipeline == Pipeline::kSecureAgg) {
    state.rate_states.assign(
        cfg.num_clients,
        DynamicRateState{cfg.rate_initial, cfg.rate_min, cfg.rate_alpha,
                         std::nullopt, 0, cfg.rounds});
    std::vector<int> ids(cfg.num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    state.pair_seeds =
        dh_exchange(ids, default_dh_group(), mix(cfg.seed, kTagDh));
  }
  return state;
}

RoundRecord run_round(FederationState& state, const RunConfig& cfg,
                      const Dataset& train, const PartitionSpec& parts,
                      const Dataset& test, int round) {
  const std::vector<int> selected = select_clients(
      cfg.num_clients, cfg.clients_per_round, round, cfg.seed);
  const std::size_t m = state.global_model.total_len();

  RoundRecord record;
  record.round = round;
  record.download_bits = static_cast<std::uint64_t>(selected.size()) * m * 64;

  std::vector<LayeredTensor> dense_updates;
  dense_updates.reserve(selected.size());

  if (cfg.pipeline == Pipeline::kFedAvg) {
    for (int c : selected) {
      auto r = local_train(state.global_model, train, parts.assignment[c], cfg,
                           mix(cfg.seed, kTagClient,
                               (std::uint64_t(round) << 20) | std::uint64_t(c)));
      dense_updates.push_back(std::move(r.update));
      record.upload_bits += m * 64;
    }
  } else if (cfg.pipeline == Pipeline::kFlatSparse ||
             cfg.pipeline == Pipeline::kThgs) {
    const SparsitySchedule schedule =
        cfg.pipeline == Pipeline::kThgs
            ? schedule_rates(cfg.sparsity, cfg.attenuation, cfg.sparsity_min,
                             state.global_model.layers.size())
            : SparsitySchedule{};
    for (int c : selected) {
      auto r = local_train(state.global_model, train, parts.assignment[c], cfg,
                           mix(cfg.seed, kTagClient,
                               (std::uint64_t(round) << 20) | std::uint64_t(c)));
      LayeredTensor effective = r.update;
      for (std::size_t l = 0; l < effective.layers.size(); ++l)
        for (std::size_t j = 0; j < effective.layers[l].size(); ++j)
          effective.layers[l][j] += state.residuals[c].residual.layers[l][j];
      SparsifyResult sr = cfg.pipeline == Pipeline::kThgs
                              ? sparsify_layered(effective, schedule)
                              : sparsify_flat(effective, cfg.sparsity);
      state.residuals[c].residual = std::move(sr.residual);
      const auto wire = encode(sr.sparse);
      record.upload_bits += 96ull * sr.sparse.entry_count();
      dense_updates.push_back(
          decode_dense(decode(wire, state.global_model.shapes)));
    }
  } else {  // secure aggregation
    const MaskParams params{cfg.mask_p, cfg.mask_q, cfg.mask_k_ratio,
                            static_cast<int>(selected.size())};
    const double sigma = params.sigma();
    std::vector<SparseUpdate> updates;
    updates.reserve(selected.size());
    for (int u : selected) {
      auto r = local_train(state.global_model, train, parts.assignment[u], cfg,
                           mix(cfg.seed, kTagClient,
                               (std::uint64_t(round) << 20) | std::uint64_t(u)));
      LayeredTensor effective = r.update;
      for (std::size_t l = 0; l < effective.layers.size(); ++l)
        for (std::size_t j = 0; j < effective.layers[l].size(); ++j)
          effective.layers[l][j] += state.residuals[u].residual.layers[l][j];

      update_rate(state.rate_states[u], r.loss);

      std::vector<LayeredTensor> pair_masks;
      pair_masks.reserve(selected.size() - 1);
      for (int v : selected) {
        if (v == u) continue;
        LayeredTensor filtered = filter_mask(
            gen_mask(state.pair_seeds.at(u, v), state.global_model.shapes,
                     params),
            sigma);
        if (u > v)  // higher id of the pair carries the negative sign
          for (auto& layer : filtered.layers)
            for (double& x : layer) x = -x;
        pair_masks.push_back(std::move(filtered));
      }

      const ClientMaskState mask_state =
          build_masks(effective, state.rate_states[u].rate, pair_masks);
      SparseUpdate sparse = encrypt_encode(effective, mask_state);
      state.residuals[u].residual = masked_residual(effective, mask_state);
      record.upload_bits += 96ull * sparse.entry_count();
      const auto wire = encode(sparse);
      updates.push_back(decode(wire, state.global_model.shapes));
    }
    record.exposures = audit_exposure(updates).count();
    dense_updates.push_back(
        server_aggregate(updates, static_cast<int>(updates.size())));
  }

  const LayeredTensor avg = cfg.pipeline == Pipeline::kSecureAgg
                                ? std::move(dense_updates[0])
                                : average_dense(dense_updates);
  state.global_model = apply_update(state.global_model, avg, 1.0);

  const EvalResult ev = evaluate(state.global_model, test.samples, test.labels);
  record.accuracy = ev.accuracy;
  record.loss = ev.loss;
  return record;
}

ExperimentResult run_experiment(const RunConfig& cfg, const Dataset& train,
                                const Dataset& test) {
  cfg.validate();
  const PartitionSpec parts = partition(train, cfg.num_clients,
                                        cfg.labels_per_client,
                                        mix(cfg.seed, kTagPartition));
  FederationState state = init_state(cfg);
  ExperimentResult result;
  result.records.reserve(cfg.rounds);
  for (int round = 0; round < cfg.rounds; ++round)
    result.records.push_back(
        run_round(state, cfg, train, parts, test, round));
  result.final_model = std::move(state.global_model);
  return result;
}

}  // namespace fedsparse
