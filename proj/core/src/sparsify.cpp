#include "fedsparse/sparsify.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <stdexcept>

namespace fedsparse {

SparsitySchedule schedule_rates(double s0, double alpha, double s_min,
                                std::size_t num_layers) {
  if (!(s_min > 0.0 && s_min <= s0 && s0 <= 1.0))
    throw std::invalid_argument("schedule_rates: need 0 < s_min <= s0 <= 1");
  if (!(alpha > 0.0 && alpha <= 1.0))
    throw std::invalid_argument("schedule_rates: need 0 < alpha <= 1");
  if (num_layers < 1)
    throw std::invalid_argument("schedule_rates: need at least one layer");

  SparsitySchedule sched{s0, alpha, s_min, {}};
  sched.rates.reserve(num_layers);
  sched.rates.push_back(s0);
  for (std::size_t i = 1; i < num_layers; ++i)
    sched.rates.push_back(std::max(sched.rates.back() * alpha, s_min));
  return sched;
}

std::size_t SparseUpdate::entry_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.size();
  return n;
}

std::size_t select_count(std::size_t len, double s) {
  return std::max<std::size_t>(
      1, static_cast<std::size_t>(std::floor(static_cast<double>(len) * s)));
}

double topk_threshold(std::span<const double> values, std::size_t k) {
  if (k < 1 || k > values.size())
    throw std::invalid_argument("topk_threshold: k out of range");
  std::vector<double> mags(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) mags[i] = std::fabs(values[i]);
  std::nth_element(mags.begin(), mags.begin() + (k - 1), mags.end(),
                   std::greater<double>());
  return mags[k - 1];
}

namespace {

// Indices of the k largest-magnitude values, ties broken by lowest index,
// returned in ascending index order.
std::vector<std::uint32_t> topk_indices(const std::vector<double>& v,
                                        std::size_t k) {
  std::vector<std::uint32_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0u);
  auto larger = [&](std::uint32_t a, std::uint32_t b) {
    const double ma = std::fabs(v[a]), mb = std::fabs(v[b]);
    return ma != mb ? ma > mb : a < b;
  };
  std::nth_element(idx.begin(), idx.begin() + (k - 1), idx.end(), larger);
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

SparsifyResult select_per_layer(const LayeredTensor& grad,
                                const std::vector<std::size_t>& counts) {
  SparsifyResult out;
  out.sparse.layer_shapes = grad.shapes;
  out.sparse.layers.resize(grad.layers.size());
  out.residual = grad;
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    const auto picked = topk_indices(grad.layers[l], counts[l]);
    auto& entries = out.sparse.layers[l];
    entries.reserve(picked.size());
    for (std::uint32_t j : picked) {
      entries.push_back({j, grad.layers[l][j]});
      out.residual.layers[l][j] = 0.0;
    }
  }
  return out;
}

}  // namespace

SparsifyResult sparsify_layered(const LayeredTensor& grad,
                                const SparsitySchedule& schedule) {
  if (schedule.rates.size() != grad.layers.size())
    throw std::invalid_argument("sparsify_layered: schedule/layer mismatch");
  std::vector<std::size_t> counts(grad.layers.size());
  for (std::size_t l = 0; l < grad.layers.size(); ++l) {
    if (grad.layers[l].empty())
      throw std::invalid_argument("sparsify_layered: empty layer");
    counts[l] = select_count(grad.layers[l].size(), schedule.rates[l]);
  }
  return select_per_layer(grad, counts);
}

SparsifyResult sparsify_flat(const LayeredTensor& grad, double s) {
  if (!(s > 0.0 && s <= 1.0))
    throw std::invalid_argument("sparsify_flat: s out of (0, 1]");
  const std::size_t total = grad.total_len();
  if (total == 0) throw std::invalid_argument("sparsify_flat: empty tensor");
  const std::size_t k = select_count(total, s);

  std::vector<double> flat;
  flat.reserve(total);
  for (const auto& l : grad.layers) flat.insert(flat.end(), l.begin(), l.end());
  const auto picked = topk_indices(flat, k);

  SparsifyResult out;
  out.sparse.layer_shapes = grad.shapes;
  out.sparse.layers.resize(grad.layers.size());
  out.residual = grad;
  std::size_t layer = 0, base = 0;
  for (std::uint32_t j : picked) {
    while (j >= base + grad.layers[layer].size()) {
      base += grad.layers[layer].size();
      ++layer;
    }
    const std::uint32_t local = j - static_cast<std::uint32_t>(base);
    out.sparse.layers[layer].push_back({local, grad.layers[layer][local]});
    out.residual.layers[layer][local] = 0.0;
  }
  return out;
}

namespace {

void put_u32_be(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>(v >> shift));
}

struct ByteReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw std::runtime_error("decode: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | bytes[pos++];
    return v;
  }
  std::uint64_t u64() {
    if (pos + 8 > bytes.size()) throw std::runtime_error("decode: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | bytes[pos++];
    return v;
  }
};

std::size_t shape_len(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

std::vector<std::uint8_t> encode(const SparseUpdate& update) {
  std::vector<std::uint8_t> out;
  put_u32_be(out, static_cast<std::uint32_t>(update.layers.size()));
  for (const auto& layer : update.layers) {
    put_u32_be(out, static_cast<std::uint32_t>(layer.size()));
    for (const auto& e : layer) {
      put_u32_be(out, e.index);
      put_u64_be(out, std::bit_cast<std::uint64_t>(e.value));
    }
  }
  return out;
}

SparseUpdate decode(std::span<const std::uint8_t> bytes,
                    const std::vector<std::vector<std::size_t>>& layer_shapes) {
  ByteReader r{bytes};
  const std::uint32_t num_layers = r.u32();
  if (num_layers != layer_shapes.size())
    throw std::runtime_error("decode: layer count mismatch");
  SparseUpdate update;
  update.layer_shapes = layer_shapes;
  update.layers.resize(num_layers);
  for (std::uint32_t l = 0; l < num_layers; ++l) {
    const std::uint32_t count = r.u32();
    const std::size_t len = shape_len(layer_shapes[l]);
    auto& entries = update.layers[l];
    entries.reserve(count);
    std::int64_t prev = -1;
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint32_t idx = r.u32();
      const double val = std::bit_cast<double>(r.u64());
      if (idx >= len) throw std::runtime_error("decode: index out of range");
      if (static_cast<std::int64_t>(idx) <= prev)
        throw std::runtime_error("decode: indices not strictly increasing");
      prev = idx;
      entries.push_back({idx, val});
    }
  }
  if (r.pos != bytes.size())
    throw std::runtime_error("decode: trailing bytes");
  return update;
}

LayeredTensor decode_dense(const SparseUpdate& update) {
  LayeredTensor out;
  out.shapes = update.layer_shapes;
  out.layers.resize(update.layers.size());
  for (std::size_t l = 0; l < update.layers.size(); ++l) {
    out.layers[l].assign(shape_len(update.layer_shapes[l]), 0.0);
    for (const auto& e : update.layers[l]) out.layers[l][e.index] = e.value;
  }
  return out;
}

void accumulate_residual(ResidualState& state, const LayeredTensor& residual) {
  if (!state.residual.conformable(residual))
    throw std::invalid_argument("accumulate_residual: non-conformable");
  for (std::size_t l = 0; l < residual.layers.size(); ++l)
    for (std::size_t j = 0; j < residual.layers[l].size(); ++j)
      state.residual.layers[l][j] += residual.layers[l][j];
}

}  // namespace fedsparse
