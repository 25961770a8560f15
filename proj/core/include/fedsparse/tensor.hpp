#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fedsparse {

/// Model parameters or gradients as an ordered list of per-layer dense
/// tensors. Layer order is fixed for the lifetime of a model; two tensors
/// are conformable iff their shapes match exactly.
struct LayeredTensor {
  std::vector<std::vector<double>> layers;
  std::vector<std::vector<std::size_t>> shapes;

  std::size_t total_len() const;
  bool conformable(const LayeredTensor& other) const;

  static LayeredTensor zeros_like(const LayeredTensor& ref);

  bool operator==(const LayeredTensor&) const = default;
};

struct Batch {
  std::vector<std::vector<double>> inputs;  // batch_size x feature_dim
  std::vector<int> labels;                  // class indices
};

/// MLP with ReLU hidden layers and a softmax output. Weights for a layer of
/// dims (in, out) are stored row-major as one flat tensor, followed by the
/// bias tensor, so a [784, 64, 10] net has four layers in the LayeredTensor.
LayeredTensor init_model(const std::vector<std::size_t>& layer_dims,
                         std::uint64_t seed);

/// Mean cross-entropy loss over the batch and its exact analytic gradient.
struct LossGrad {
  double loss;
  LayeredTensor grad;
};
LossGrad forward_loss_grad(const LayeredTensor& model, const Batch& batch);

/// model - step * update, elementwise.
LayeredTensor apply_update(const LayeredTensor& model,
                           const LayeredTensor& update, double step);

/// Predicted class indices for a batch of inputs.
std::vector<int> predict(const LayeredTensor& model,
                         const std::vector<std::vector<double>>& inputs);

struct EvalResult {
  double accuracy;
  double loss;
};
EvalResult evaluate(const LayeredTensor& model,
                    const std::vector<std::vector<double>>& inputs,
                    const std::vector<int>& labels);

}  // namespace fedsparse
