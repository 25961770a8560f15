#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "fedsparse/secure_agg.hpp"
#include "fedsparse/sparsify.hpp"
#include "fedsparse/tensor.hpp"

using namespace fedsparse;

namespace {

LayeredTensor random_tensor(const std::vector<std::size_t>& sizes,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  LayeredTensor t;
  for (std::size_t n : sizes) {
    std::vector<double> layer(n);
    for (double& v : layer) v = dist(rng);
    t.layers.push_back(std::move(layer));
    t.shapes.push_back({n});
  }
  return t;
}

void BM_SparsifyLayered(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto g = random_tensor({n, n / 8, n / 2, n / 16}, 1);
  const auto sched = schedule_rates(0.1, 0.5, 0.01, 4);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparsify_layered(g, sched));
  }
  state.SetItemsProcessed(state.iterations() * g.total_len());
}
BENCHMARK(BM_SparsifyLayered)->Range(1 << 10, 1 << 18);

void BM_SparsifyFlat(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto g = random_tensor({n, n / 8, n / 2, n / 16}, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sparsify_flat(g, 0.1));
  }
  state.SetItemsProcessed(state.iterations() * g.total_len());
}
BENCHMARK(BM_SparsifyFlat)->Range(1 << 10, 1 << 18);

void BM_CodecRoundTrip(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const auto g = random_tensor({n, n / 4}, 3);
  const auto sparse = sparsify_layered(g, schedule_rates(0.1, 0.5, 0.01, 2));
  for (auto _ : state) {
    const auto wire = encode(sparse.sparse);
    benchmark::DoNotOptimize(decode(wire, g.shapes));
  }
  state.SetBytesProcessed(state.iterations() *
                          encode(sparse.sparse).size());
}
BENCHMARK(BM_CodecRoundTrip)->Range(1 << 10, 1 << 18);

void BM_GenMask(benchmark::State& state) {
  const std::size_t n = state.range(0);
  const std::vector<std::vector<std::size_t>> shapes{{n}};
  const MaskParams params{0.0, 1.0, 1.0, 10};
  std::uint64_t seed = 7;
  for (auto _ : state) {
    benchmark::DoNotOptimize(gen_mask(seed++, shapes, params));
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_GenMask)->Range(1 << 10, 1 << 20);

void BM_DhExchange(benchmark::State& state) {
  const int clients = state.range(0);
  std::vector<int> ids(clients);
  for (int i = 0; i < clients; ++i) ids[i] = i;
  const DhGroup group = default_dh_group();
  for (auto _ : state) {
    benchmark::DoNotOptimize(dh_exchange(ids, group, 11));
  }
}
BENCHMARK(BM_DhExchange)->Arg(2)->Arg(10)->Arg(30);

void BM_ForwardBackward(benchmark::State& state) {
  const auto model = init_model({784, 64, 10}, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Batch batch;
  for (int i = 0; i < 50; ++i) {
    std::vector<double> x(784);
    for (double& v : x) v = u(rng);
    batch.inputs.push_back(std::move(x));
    batch.labels.push_back(static_cast<int>(rng() % 10));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(forward_loss_grad(model, batch));
  }
  state.SetItemsProcessed(state.iterations() * batch.inputs.size());
}
BENCHMARK(BM_ForwardBackward);

}  // namespace

BENCHMARK_MAIN();
