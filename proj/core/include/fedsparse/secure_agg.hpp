#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedsparse/sparsify.hpp"
#include "fedsparse/tensor.hpp"

namespace fedsparse {

/// Multiplicative group for the Diffie-Hellman key agreement. Values are
/// decimal strings so the header stays free of bignum types.
struct DhGroup {
  std::string prime;
  std::string generator;
};

/// 256-bit safe prime, generator 2 (generates the order-q subgroup).
DhGroup default_dh_group();

/// Shared secret g^(ab) mod p for a single pair; exposed for oracle tests.
std::string dh_shared_secret(const DhGroup& group, std::uint64_t priv_a,
                             std::uint64_t priv_b);

/// Symmetric per-pair 64-bit PRG seeds derived from DH shared secrets.
struct PairSeeds {
  std::map<std::pair<int, int>, std::uint64_t> seeds;

  std::uint64_t at(int u, int v) const;
};

/// In-process exchange: every participant draws a private exponent, publics
/// are broadcast, each pair hashes its shared group element to a 64-bit seed.
PairSeeds dh_exchange(const std::vector<int>& participant_ids,
                      const DhGroup& group, std::uint64_t sim_seed);

/// Mask distribution and filter parameters. sigma() = p + (k_ratio/x) * q is
/// the cutoff below which mask entries are kept nonzero.
struct MaskParams {
  double p = 0.0;
  double q = 1.0;
  double k_ratio = 1.0;
  int participants = 2;

  double sigma() const { return p + (k_ratio / participants) * q; }
};

/// Uniform mask in [p, p+q) from a seeded PRG; both pair members generate
/// the identical matrix from the shared seed.
LayeredTensor gen_mask(std::uint64_t seed,
                       const std::vector<std::vector<std::size_t>>& shapes,
                       const MaskParams& params);

/// Keep entries strictly below sigma, zero the rest.
LayeredTensor filter_mask(const LayeredTensor& mask, double sigma);

/// Per-client dynamic sparsity rate, updated from the local loss trend:
/// R <- clamp((alpha + beta - t/T) * R, R_min, 1) with beta the relative
/// loss change since the previous round.
struct DynamicRateState {
  double rate = 0.5;
  double rate_min = 0.01;
  double alpha = 0.8;
  std::optional<double> prev_loss;
  int round = 0;
  int total_rounds = 1;
};

void update_rate(DynamicRateState& state, double current_loss);

/// Per-round mask bookkeeping for one client.
struct ClientMaskState {
  LayeredTensor mask_e;                            // signed sum of pair masks
  std::vector<std::vector<std::uint8_t>> mask_t;   // transmit positions
  std::vector<double> grad_thresholds;             // per-layer |G| quantile
};

/// pair_masks are the signed, filtered per-pair matrices (+ for the lower
/// id of the pair, - for the higher). A position transmits iff it is in the
/// per-layer Top-(R*len) of |grad| or any pair mask is nonzero there.
ClientMaskState build_masks(const LayeredTensor& grad, double rate,
                            const std::vector<LayeredTensor>& pair_masks);

/// Transmitted entries carry grad[j] + mask_e[j] at exactly the mask_t
/// positions; wire format shared with sparsify::encode.
SparseUpdate encrypt_encode(const LayeredTensor& grad,
                            const ClientMaskState& state);

/// grad zeroed at transmitted positions.
LayeredTensor masked_residual(const LayeredTensor& grad,
                              const ClientMaskState& state);

/// Dense elementwise sum of the decoded updates divided by num_clients.
/// With all clients honest the pairwise masks cancel.
LayeredTensor server_aggregate(const std::vector<SparseUpdate>& updates,
                               int num_clients);

struct ExposurePosition {
  std::size_t layer;
  std::uint32_t index;

  bool operator==(const ExposurePosition&) const = default;
  auto operator<=>(const ExposurePosition&) const = default;
};

struct ExposureReport {
  std::vector<ExposurePosition> positions;

  std::size_t count() const { return positions.size(); }
};

/// Flags positions transmitted by >= 2 clients where two transmitted values
/// are exact nonzero negatives of each other, i.e. every contributing client
/// sent a pure mask value.
ExposureReport audit_exposure(const std::vector<SparseUpdate>& updates);

}  // namespace fedsparse
