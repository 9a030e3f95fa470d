// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rotunroll/tensor.hpp"

namespace rotunroll {

// Images in [0,1], labels in [0,10).
struct Dataset {
  Tensor images;  // [N,C,H,W]; empty when N == 0
  std::vector<std::uint8_t> labels;
  std::string split;       // "train" | "test" | ""
  std::string provenance;  // source paths, plus seed when synthetic
  std::uint64_t seed = 0;

  std::size_t size() const { return labels.size(); }
  std::size_t channels() const { return images.empty() ? 0 : images.dim(1); }
  std::size_t height() const { return images.empty() ? 0 : images.dim(2); }
  std::size_t width() const { return images.empty() ? 0 : images.dim(3); }
};

// IDX format: big-endian magic 0x803 (images) / 0x801 (labels), dimension
// header, unsigned-byte payload. Pixels are divided by 255.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// CIFAR-10 binary batches: records of 1 label byte + 3072 bytes of R,G,B
// planes (row-major 32x32), scaled to [0,1], no whitening. An empty file
// yields an empty dataset.
Dataset load_cifar10(const std::vector<std::string>& batch_paths);

// Rotates every image by an angle drawn uniformly from [0,360) using the
// bilinear rotation machinery (zero fill); deterministic under seed.
Dataset generate_rot_mnist(const Dataset& base, std::uint64_t seed);

// Versioned little-endian binary container; round-trips bit-exactly.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset_container(const std::string& path);

// First N examples of a dataset.
Dataset take(const Dataset& ds, std::size_t n);

// Writers used to build fixtures and export generated datasets in loadable
// IDX form (quantizes pixels back to bytes).
void write_mnist_idx(const Dataset& ds, const std::string& images_path,
                     const std::string& labels_path);

}  // namespace rotunroll
