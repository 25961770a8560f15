#include "fedsparse/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fedsparse {

std::size_t LayeredTensor::total_len() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.size();
  return n;
}

bool LayeredTensor::conformable(const LayeredTensor& other) const {
  return shapes == other.shapes;
}

LayeredTensor LayeredTensor::zeros_like(const LayeredTensor& ref) {
  LayeredTensor out;
  out.shapes = ref.shapes;
  out.layers.reserve(ref.layers.size());
  for (const auto& l : ref.layers) out.layers.emplace_back(l.size(), 0.0);
  return out;
}

namespace {

// Uniform double in [0,1) from the raw 64-bit stream; keeps init
// reproducible across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

LayeredTensor init_model(const std::vector<std::size_t>& layer_dims,
                         std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("init_model: need at least 2 layer dims");
  for (std::size_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("init_model: zero layer dim");

  std::mt19937_64 rng(seed);
  LayeredTensor model;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const std::size_t in = layer_dims[i], out = layer_dims[i + 1];
    const double lim = 1.0 / std::sqrt(static_cast<double>(in));
    std::vector<double> w(in * out);
    for (double& v : w) v = (2.0 * unit_uniform(rng) - 1.0) * lim;
    model.layers.push_back(std::move(w));
    model.shapes.push_back({in, out});
    model.layers.emplace_back(out, 0.0);  // bias
    model.shapes.push_back({out});
  }
  return model;
}

namespace {

struct Dims {
  std::vector<std::size_t> sizes;  // d0, d1, ..., dk
};

Dims model_dims(const LayeredTensor& model) {
  if (model.layers.empty() || model.layers.size() % 2 != 0)
    throw std::invalid_argument("model must alternate weight/bias layers");
  Dims d;
  d.sizes.push_back(model.shapes[0][0]);
  for (std::size_t i = 0; i < model.shapes.size(); i += 2) {
    if (model.shapes[i].size() != 2 || model.shapes[i + 1].size() != 1 ||
        model.shapes[i][1] != model.shapes[i + 1][0])
      throw std::invalid_argument("malformed model shapes");
    d.sizes.push_back(model.shapes[i][1]);
  }
  return d;
}

void softmax_inplace(std::vector<double>& z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : z) v /= sum;
}

std::vector<double> affine(const std::vector<double>& x,
                           const std::vector<double>& w,
                           const std::vector<double>& b, std::size_t in,
                           std::size_t out) {
  std::vector<double> z(b);
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* wrow = w.data() + i * out;
    for (std::size_t o = 0; o < out; ++o) z[o] += xi * wrow[o];
  }
  return z;
}

}  // namespace

LossGrad forward_loss_grad(const LayeredTensor& model, const Batch& batch) {
  const Dims dims = model_dims(model);
  const std::size_t num_affine = dims.sizes.size() - 1;
  const std::size_t num_classes = dims.sizes.back();
  if (batch.inputs.empty() || batch.inputs.size() != batch.labels.size())
    throw std::invalid_argument("forward_loss_grad: bad batch");
  if (batch.inputs[0].size() != dims.sizes[0])
    throw std::invalid_argument("forward_loss_grad: feature dim mismatch");

  LossGrad result{0.0, LayeredTensor::zeros_like(model)};
  const double inv_n = 1.0 / static_cast<double>(batch.inputs.size());

  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    const int label = batch.labels[s];
    if (label < 0 || static_cast<std::size_t>(label) >= num_classes)
      throw std::invalid_argument("forward_loss_grad: label out of range");

    // Forward, keeping post-activation values per layer.
    std::vector<std::vector<double>> acts;
    acts.push_back(batch.inputs[s]);
    for (std::size_t l = 0; l < num_affine; ++l) {
      auto z = affine(acts.back(), model.layers[2 * l], model.layers[2 * l + 1],
                      dims.sizes[l], dims.sizes[l + 1]);
      if (l + 1 < num_affine)
        for (double& v : z) v = std::max(v, 0.0);
      acts.push_back(std::move(z));
    }
    auto& probs = acts.back();
    softmax_inplace(probs);
    result.loss -= std::log(std::max(probs[label], 1e-300)) * inv_n;

    // Backward: delta starts as (softmax - onehot) / n.
    std::vector<double> delta(num_classes);
    for (std::size_t c = 0; c < num_classes; ++c)
      delta[c] = (probs[c] - (static_cast<std::size_t>(label) == c ? 1.0 : 0.0)) * inv_n;

    for (std::size_t l = num_affine; l-- > 0;) {
      const std::size_t in = dims.sizes[l], out = dims.sizes[l + 1];
      const auto& a = acts[l];
      auto& gw = result.grad.layers[2 * l];
      auto& gb = result.grad.layers[2 * l + 1];
      for (std::size_t o = 0; o < out; ++o) gb[o] += delta[o];
      for (std::size_t i = 0; i < in; ++i) {
        const double ai = a[i];
        if (ai == 0.0) continue;
        double* grow = gw.data() + i * out;
        for (std::size_t o = 0; o < out; ++o) grow[o] += ai * delta[o];
      }
      if (l == 0) break;
      const auto& w = model.layers[2 * l];
      std::vector<double> prev(in, 0.0);
      for (std::size_t i = 0; i < in; ++i) {
        if (a[i] <= 0.0) continue;  // ReLU gate
        const double* wrow = w.data() + i * out;
        double acc = 0.0;
        for (std::size_t o = 0; o < out; ++o) acc += wrow[o] * delta[o];
        prev[i] = acc;
      }
      delta = std::move(prev);
    }
  }
  return result;
}

LayeredTensor apply_update(const LayeredTensor& model,
                           const LayeredTensor& update, double step) {
  if (!model.conformable(update))
    throw std::invalid_argument("apply_update: non-conformable tensors");
  LayeredTensor out = model;
  for (std::size_t l = 0; l < out.layers.size(); ++l)
    for (std::size_t j = 0; j < out.layers[l].size(); ++j)
      out.layers[l][j] -= step * update.layers[l][j];
  return out;
}

std::vector<int> predict(const LayeredTensor& model,
                         const std::vector<std::vector<double>>& inputs) {
  const Dims dims = model_dims(model);
  const std::size_t num_affine = dims.sizes.size() - 1;
  std::vector<int> out;
  out.reserve(inputs.size());
  for (const auto& x : inputs) {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < num_affine; ++l) {
      a = affine(a, model.layers[2 * l], model.layers[2 * l + 1], dims.sizes[l],
                 dims.sizes[l + 1]);
      if (l + 1 < num_affine)
        for (double& v : a) v = std::max(v, 0.0);
    }
    out.push_back(static_cast<int>(
        std::max_element(a.begin(), a.end()) - a.begin()));
  }
  return out;
}

EvalResult evaluate(const LayeredTensor& model,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<int>& labels) {
  const Dims dims = model_dims(model);
  const std::size_t num_affine = dims.sizes.size() - 1;
  std::size_t correct = 0;
  double loss = 0.0;
  for (std::size_t s = 0; s < inputs.size(); ++s) {
    std::vector<double> a = inputs[s];
    for (std::size_t l = 0; l < num_affine; ++l) {
      a = affine(a, model.layers[2 * l], model.layers[2 * l + 1], dims.sizes[l],
                 dims.sizes[l + 1]);
      if (l + 1 < num_affine)
        for (double& v : a) v = std::max(v, 0.0);
    }
    const std::size_t arg = static_cast<std::size_t>(
        std::max_element(a.begin(), a.end()) - a.begin());
    if (static_cast<int>(arg) == labels[s]) ++correct;
    softmax_inplace(a);
    loss -= std::log(std::max(a[labels[s]], 1e-300));
  }
  const double n = static_cast<double>(inputs.size());
  return {static_cast<double>(correct) / n, loss / n};
}

}  // namespace fedsparse
