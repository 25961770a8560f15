#include "fedsparse/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

namespace fedsparse {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

std::uint32_t read_u32_be(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("idx: truncated file reading " + what);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

void write_u32_be(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v)};
  out.write(reinterpret_cast<char*>(b), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path,
                 const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("idx: cannot open " + labels_path);

  const std::uint32_t img_magic = read_u32_be(img, "images magic");
  if (img_magic != kImagesMagic)
    throw std::runtime_error("idx: bad images magic number");
  const std::uint32_t lab_magic = read_u32_be(lab, "labels magic");
  if (lab_magic != kLabelsMagic)
    throw std::runtime_error("idx: bad labels magic number");

  const std::uint32_t n_img = read_u32_be(img, "image count");
  const std::uint32_t rows = read_u32_be(img, "rows");
  const std::uint32_t cols = read_u32_be(img, "cols");
  const std::uint32_t n_lab = read_u32_be(lab, "label count");
  if (n_img != n_lab)
    throw std::runtime_error("idx: image/label count mismatch");

  const std::size_t dim = std::size_t(rows) * cols;
  Dataset ds;
  ds.samples.reserve(n_img);
  ds.labels.reserve(n_img);
  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n_img; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), dim))
      throw std::runtime_error("idx: truncated image data");
    std::vector<double> row(dim);
    for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
    ds.samples.push_back(std::move(row));
    char c;
    if (!lab.get(c)) throw std::runtime_error("idx: truncated label data");
    ds.labels.push_back(static_cast<unsigned char>(c));
  }
  ds.num_classes =
      ds.labels.empty() ? 0 : *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

void write_idx(const Dataset& ds, std::size_t rows, std::size_t cols,
               const std::string& images_path,
               const std::string& labels_path) {
  if (rows * cols == 0 || (!ds.samples.empty() && ds.samples[0].size() != rows * cols))
    throw std::invalid_argument("write_idx: rows*cols must match feature dim");
  std::ofstream img(images_path, std::ios::binary);
  std::ofstream lab(labels_path, std::ios::binary);
  if (!img || !lab) throw std::runtime_error("write_idx: cannot open output");
  write_u32_be(img, kImagesMagic);
  write_u32_be(img, static_cast<std::uint32_t>(ds.size()));
  write_u32_be(img, static_cast<std::uint32_t>(rows));
  write_u32_be(img, static_cast<std::uint32_t>(cols));
  write_u32_be(lab, kLabelsMagic);
  write_u32_be(lab, static_cast<std::uint32_t>(ds.size()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.samples[i]) {
      const auto byte = static_cast<unsigned char>(std::lround(v * 255.0));
      img.put(static_cast<char>(byte));
    }
    lab.put(static_cast<char>(ds.labels[i]));
  }
}

Dataset synth_dataset(int num_classes, int per_class, int feature_dim,
                      std::uint64_t seed) {
  if (num_classes <= 0 || per_class <= 0 || feature_dim <= 0)
    throw std::invalid_argument("synth_dataset: all args must be positive");

  // Class means on scaled coordinate axes, pairwise distance >= 6 sigma
  // with sigma = 1.
  std::vector<std::vector<double>> means(
      num_classes, std::vector<double>(feature_dim, 0.0));
  for (int c = 0; c < num_classes; ++c) {
    const int axis = c % feature_dim;
    const int tier = c / feature_dim;
    means[c][axis] = 6.0 * (tier + 1);
    if (tier > 0) means[c][(axis + 1) % feature_dim] = 6.0;
  }

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset ds;
  ds.num_classes = num_classes;
  ds.samples.reserve(std::size_t(num_classes) * per_class);
  for (int c = 0; c < num_classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      std::vector<double> x(feature_dim);
      for (int j = 0; j < feature_dim; ++j) x[j] = means[c][j] + noise(rng);
      ds.samples.push_back(std::move(x));
      ds.labels.push_back(c);
    }
  }
  return ds;
}

PartitionSpec partition(const Dataset& ds, int num_clients,
                        int labels_per_client, std::uint64_t seed) {
  if (num_clients < 1)
    throw std::invalid_argument("partition: num_clients must be >= 1");
  if (ds.size() < static_cast<std::size_t>(num_clients))
    throw std::invalid_argument("partition: fewer samples than clients");

  std::mt19937_64 rng(seed);
  PartitionSpec spec;
  spec.labels_per_client = labels_per_client;
  spec.assignment.resize(num_clients);

  if (labels_per_client == 0) {  // IID
    std::vector<std::size_t> idx(ds.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i)
      spec.assignment[i % num_clients].push_back(idx[i]);
    for (auto& a : spec.assignment) std::sort(a.begin(), a.end());
    return spec;
  }

  const int n = labels_per_client;
  if (n < 1 || n > ds.num_classes)
    throw std::invalid_argument(
        "partition: labels_per_client must be in [1, num_classes]");

  // Round-robin label claims: client i claims labels (i*n+j) mod C, giving
  // exactly n distinct labels per client. Each label's sample pool is then
  // split label-aligned among its claimants.
  std::vector<std::vector<int>> claimants(ds.num_classes);
  for (int i = 0; i < num_clients; ++i)
    for (int j = 0; j < n; ++j)
      claimants[(std::size_t(i) * n + j) % ds.num_classes].push_back(i);

  std::vector<std::vector<std::size_t>> by_label(ds.num_classes);
  for (std::size_t s = 0; s < ds.size(); ++s)
    by_label[ds.labels[s]].push_back(s);

  for (int lbl = 0; lbl < ds.num_classes; ++lbl) {
    auto& pool = by_label[lbl];
    const std::size_t nclaim = claimants[lbl].size();
    if (nclaim == 0) continue;
    if (pool.size() < nclaim)
      throw std::invalid_argument(
          "partition: not enough samples of a label for its claimants");
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t base = pool.size() / nclaim;
    const std::size_t extra = pool.size() % nclaim;
    std::size_t pos = 0;
    for (std::size_t c = 0; c < nclaim; ++c) {
      const std::size_t take = base + (c < extra ? 1 : 0);
      auto& dst = spec.assignment[claimants[lbl][c]];
      dst.insert(dst.end(), pool.begin() + pos, pool.begin() + pos + take);
      pos += take;
    }
  }
  for (auto& a : spec.assignment) {
    if (a.empty()) throw std::invalid_argument("partition: empty client");
    std::sort(a.begin(), a.end());
  }
  return spec;
}

}  // namespace fedsparse
