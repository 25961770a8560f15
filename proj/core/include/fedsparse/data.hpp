#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fedsparse {

struct Dataset {
  std::vector<std::vector<double>> samples;
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return samples.size(); }
};

/// Disjoint per-client sample assignment. labels_per_client == 0 means IID.
struct PartitionSpec {
  std::vector<std::vector<std::size_t>> assignment;
  int labels_per_client = 0;
};

/// IDX (big-endian) ingestion. Pixels are scaled to [0,1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Inverse of load_idx for byte-valued data; images written as rows x cols
/// with values round(v * 255).
void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::string& images_path, const std::string& labels_path);

/// Gaussian blobs, one mean per class, separable at 3-sigma spacing.
Dataset synth_dataset(int num_classes, int per_class, int feature_dim,
                      std::uint64_t seed);

/// IID: uniform shuffle into near-equal chunks. Non-IID-n: each client holds
/// samples from exactly n label classes, built by label-aligned sharding.
PartitionSpec partition(const Dataset& ds, int num_clients,
                        int labels_per_client, std::uint64_t seed);

}  // namespace fedsparse
