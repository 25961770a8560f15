#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fedsparse/federation.hpp"
#include "fedsparse/sparsify.hpp"

namespace fedsparse {

inline constexpr std::uint64_t kValueBits = 64;
inline constexpr std::uint64_t kIndexBits = 32;
inline constexpr std::uint64_t kEntryBits = kValueBits + kIndexBits;

/// Idealized payload for a sparse update of m parameters at rate s:
/// floor(m*s) entries at 96 bits each.
std::uint64_t sparse_bits(std::uint64_t m, double s);

/// Dense update: m * 64 bits.
std::uint64_t dense_bits(std::uint64_t m);

struct WireCost {
  std::uint64_t payload_bits = 0;  // 96 * entry count
  std::uint64_t framing_bits = 0;  // layer-count and entry-count headers
};

WireCost measure_update(const SparseUpdate& update);

struct CostReport {
  std::optional<int> rounds_to_target;   // n_target; empty if never reached
  double target_accuracy = 0.0;          // target_fraction * converged accuracy
  double converged_accuracy = 0.0;       // mean accuracy of the last 10 rounds
  double upload_bits_per_client = 0.0;   // c_up, mean per client per round
  double download_bits_per_client = 0.0; // c_down
  double total_bits = 0.0;               // n_target * CK * (c_up + c_down)
  double upload_ratio_vs_dense = 0.0;    // c_up / dense_bits(m)
};

/// Rounds-to-target accounting: n_target is the first round whose accuracy
/// reaches target_fraction of the converged accuracy (mean of the last 10
/// rounds).
CostReport cost_report(const std::vector<RoundRecord>& records,
                       double target_fraction, int clients_per_round,
                       std::uint64_t model_params);

/// Plain-text cost table for a set of runs; the first run is the baseline
/// for the compression multiplier.
std::string format_cost_table(const std::vector<std::string>& names,
                              const std::vector<CostReport>& reports);

/// Dense update volume in MiB for a parameter count, as reported in model
/// size tables.
double dense_update_mib(std::uint64_t m);

}  // namespace fedsparse
