#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "fedsparse/tensor.hpp"

namespace fedsparse {

/// Per-layer sparsity rates: rates[0] = s0, rates[i] = max(rates[i-1]*alpha,
/// s_min). Non-increasing, bounded by [s_min, s0].
struct SparsitySchedule {
  double s0 = 0.0;
  double alpha = 1.0;
  double s_min = 0.0;
  std::vector<double> rates;
};

SparsitySchedule schedule_rates(double s0, double alpha, double s_min,
                                std::size_t num_layers);

struct SparseEntry {
  std::uint32_t index;  // within-layer position
  double value;

  bool operator==(const SparseEntry&) const = default;
};

/// Encoded sparse update: per layer, (index, value) pairs with strictly
/// increasing indices. One wire entry costs 96 bits (32 index + 64 value).
struct SparseUpdate {
  std::vector<std::vector<SparseEntry>> layers;
  std::vector<std::vector<std::size_t>> layer_shapes;

  std::size_t entry_count() const;

  bool operator==(const SparseUpdate&) const = default;
};

/// Number of entries transmitted for a layer of `len` elements at rate `s`.
std::size_t select_count(std::size_t len, double s);

/// k-th largest absolute value.
double topk_threshold(std::span<const double> values, std::size_t k);

struct SparsifyResult {
  SparseUpdate sparse;
  LayeredTensor residual;  // input with selected positions zeroed
};

/// Hierarchical Top-k: per layer i, keep the max(1, floor(len_i * s_i))
/// largest-magnitude entries (ties broken by lowest index).
SparsifyResult sparsify_layered(const LayeredTensor& grad,
                                const SparsitySchedule& schedule);

/// Flat Top-k over the fully flattened vector at rate s.
SparsifyResult sparsify_flat(const LayeredTensor& grad, double s);

std::vector<std::uint8_t> encode(const SparseUpdate& update);
SparseUpdate decode(std::span<const std::uint8_t> bytes,
                    const std::vector<std::vector<std::size_t>>& layer_shapes);

/// Densify a sparse update back into a LayeredTensor.
LayeredTensor decode_dense(const SparseUpdate& update);

struct ResidualState {
  LayeredTensor residual;
};

/// state.residual += residual. The round loop adds the state to the fresh
/// gradient before selection, then replaces the state with the new residual.
void accumulate_residual(ResidualState& state, const LayeredTensor& residual);

}  // namespace fedsparse
