#include "fedsparse/secure_agg.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fedsparse {

namespace mp = boost::multiprecision;

DhGroup default_dh_group() {
  // Largest safe prime below 2^256; 2 generates the order-(p-1)/2 subgroup.
  return {
      "1157920892373161954235709850086879078532699846656405640394575840079131"
      "29603823",
      "2"};
}

namespace {

std::uint64_t fnv1a64(const std::string& data) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

mp::cpp_int parse_int(const std::string& s) { return mp::cpp_int(s); }

}  // namespace

std::string dh_shared_secret(const DhGroup& group, std::uint64_t priv_a,
                             std::uint64_t priv_b) {
  const mp::cpp_int p = parse_int(group.prime);
  const mp::cpp_int g = parse_int(group.generator);
  const mp::cpp_int pub_a = mp::powm(g, mp::cpp_int(priv_a), p);
  return mp::cpp_int(mp::powm(pub_a, mp::cpp_int(priv_b), p)).str();
}

std::uint64_t PairSeeds::at(int u, int v) const {
  auto it = seeds.find(std::minmax(u, v));
  if (it == seeds.end())
    throw std::invalid_argument("PairSeeds: unknown participant pair");
  return it->second;
}

PairSeeds dh_exchange(const std::vector<int>& participant_ids,
                      const DhGroup& group, std::uint64_t sim_seed) {
  if (participant_ids.size() < 2)
    throw std::invalid_argument("dh_exchange: need at least 2 participants");

  const mp::cpp_int p = parse_int(group.prime);
  const mp::cpp_int g = parse_int(group.generator);

  std::mt19937_64 rng(sim_seed);
  std::map<int, mp::cpp_int> privates;
  std::map<int, mp::cpp_int> publics;
  for (int id : participant_ids) {
    mp::cpp_int a = (mp::cpp_int(rng()) << 64) | rng();
    a = a % (p - 2) + 2;
    privates[id] = a;
    publics[id] = mp::powm(g, a, p);
  }

  PairSeeds seeds;
  for (std::size_t i = 0; i < participant_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < participant_ids.size(); ++j) {
      const int u = participant_ids[i], v = participant_ids[j];
      const mp::cpp_int shared = mp::powm(publics.at(v), privates.at(u), p);
      seeds.seeds[std::minmax(u, v)] = fnv1a64(shared.str());
    }
  }
  return seeds;
}

namespace {

inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::size_t shape_len(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

LayeredTensor gen_mask(std::uint64_t seed,
                       const std::vector<std::vector<std::size_t>>& shapes,
                       const MaskParams& params) {
  if (!(params.q > 0.0)) throw std::invalid_argument("gen_mask: q must be > 0");
  std::mt19937_64 rng(seed);
  LayeredTensor mask;
  mask.shapes = shapes;
  mask.layers.reserve(shapes.size());
  for (const auto& shape : shapes) {
    std::vector<double> layer(shape_len(shape));
    for (double& v : layer) v = params.p + unit_uniform(rng) * params.q;
    mask.layers.push_back(std::move(layer));
  }
  return mask;
}

LayeredTensor filter_mask(const LayeredTensor& mask, double sigma) {
  LayeredTensor out = mask;
  for (auto& layer : out.layers)
    for (double& v : layer)
      if (!(v < sigma)) v = 0.0;
  return out;
}

void update_rate(DynamicRateState& state, double current_loss) {
  if (state.round >= state.total_rounds)
    throw std::invalid_argument("update_rate: round index past total rounds");
  double beta = 0.0;
  if (state.prev_loss && *state.prev_loss != 0.0)
    beta = (current_loss - *state.prev_loss) / *state.prev_loss;
  const double frac =
      static_cast<double>(state.round) / static_cast<double>(state.total_rounds);
  const double next = (state.alpha + beta - frac) * state.rate;
  state.rate = std::clamp(next, state.rate_min, 1.0);
  state.prev_loss = current_loss;
  ++state.round;
}

ClientMaskState build_masks(const LayeredTensor& grad, double rate,
                            const std::vector<LayeredTensor>& pair_masks) {
  for (const auto& m : pair_masks)
    if (!m.conformable(grad))
      throw std::invalid_argument("build_masks: pair mask not conformable");

  ClientMaskState state;
  state.mask_e = LayeredTensor::zeros_like(grad);
  for (const auto& m : pair_masks)
    for (std::size_t l = 0; l < m.layers.size(); ++l)
      for (std::size_t j = 0; j < m.layers[l].size(); ++j)
        state.mask_e.layers[l][j] += m.layers[l][j];

  state.mask_t.resize(grad.layers.size());
  state.grad_thresholds.resize(grad.layers.size());
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    const auto& g = grad.layers[l];
    const std::size_t k = select_count(g.size(), rate);
    const double thr = topk_threshold(g, k);
    state.grad_thresholds[l] = thr;
    auto& mt = state.mask_t[l];
    mt.assign(g.size(), 0);
    for (std::size_t j = 0; j < g.size(); ++j) {
      bool transmit = std::fabs(g[j]) >= thr;
      for (const auto& m : pair_masks) {
        if (transmit) break;
        if (m.layers[l][j] != 0.0) transmit = true;
      }
      mt[j] = transmit ? 1 : 0;
    }
  }
  return state;
}

SparseUpdate encrypt_encode(const LayeredTensor& grad,
                            const ClientMaskState& state) {
  if (!grad.conformable(state.mask_e))
    throw std::invalid_argument("encrypt_encode: non-conformable state");
  SparseUpdate update;
  update.layer_shapes = grad.shapes;
  update.layers.resize(grad.layers.size());
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    for (std::size_t j = 0; j < grad.layers[l].size(); ++j) {
      if (!state.mask_t[l][j]) continue;
      update.layers[l].push_back({static_cast<std::uint32_t>(j),
                                  grad.layers[l][j] + state.mask_e.layers[l][j]});
    }
  }
  return update;
}

LayeredTensor masked_residual(const LayeredTensor& grad,
                              const ClientMaskState& state) {
  LayeredTensor out = grad;
  for (std::size_t l = 0; l < out.layers.size(); ++l)
    for (std::size_t j = 0; j < out.layers[l].size(); ++j)
      if (state.mask_t[l][j]) out.layers[l][j] = 0.0;
  return out;
}

LayeredTensor server_aggregate(const std::vector<SparseUpdate>& updates,
                               int num_clients) {
  if (updates.empty())
    throw std::invalid_argument("server_aggregate: no updates");
  for (const auto& u : updates)
    if (u.layer_shapes != updates[0].layer_shapes)
      throw std::invalid_argument("server_aggregate: shape mismatch");

  LayeredTensor sum = decode_dense(updates[0]);
  for (std::size_t i = 1; i < updates.size(); ++i) {
    const LayeredTensor dense = decode_dense(updates[i]);
    for (std::size_t l = 0; l < sum.layers.size(); ++l)
      for (std::size_t j = 0; j < sum.layers[l].size(); ++j)
        sum.layers[l][j] += dense.layers[l][j];
  }
  const double inv = 1.0 / static_cast<double>(num_clients);
  for (auto& layer : sum.layers)
    for (double& v : layer) v *= inv;
  return sum;
}

ExposureReport audit_exposure(const std::vector<SparseUpdate>& updates) {
  ExposureReport report;
  if (updates.empty()) return report;
  const std::size_t num_layers = updates[0].layer_shapes.size();
  for (std::size_t l = 0; l < num_layers; ++l) {
    std::map<std::uint32_t, std::vector<double>> by_index;
    for (const auto& u : updates)
      for (const auto& e : u.layers[l]) by_index[e.index].push_back(e.value);
    for (const auto& [idx, values] : by_index) {
      if (values.size() < 2) continue;
      bool exposed = false;
      for (std::size_t a = 0; a < values.size() && !exposed; ++a)
        for (std::size_t b = a + 1; b < values.size() && !exposed; ++b)
          if (values[a] != 0.0 && values[a] == -values[b]) exposed = true;
      if (exposed) report.positions.push_back({l, idx});
    }
  }
  return report;
}

}  // namespace fedsparse
