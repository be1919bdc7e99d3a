#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/core/tensor.hpp"
#include "mdt/data/image.hpp"

namespace mdt::data {

// One domain = one immediate subdirectory of the dataset root.
struct DomainDataset {
  int domain_id = 0;
  std::string name;
  std::vector<std::string> image_paths;
  i64 count() const { return static_cast<i64>(image_paths.size()); }
};

// Scans `<root>/<domain>/*.png`. Domain ids follow lexicographic
// subdirectory order; image paths are sorted lexicographically.
std::vector<DomainDataset> scan_dataset(const std::string& root);

// Uniform-with-replacement index draw from a counter-based stream; the
// sampling schedule is a pure function of (count, batch, rng_seed).
std::vector<i64> sample_indices(i64 count, i64 batch, std::uint64_t rng_seed);

// Loads a batch of images drawn by sample_indices, resized to (h, w).
Tensor<float> sample_batch(const DomainDataset& dataset, i64 batch,
                           std::uint64_t rng_seed, i64 h, i64 w);

// Stacks batch-1 image tensors (shape checked) into one batch.
Tensor<float> stack_images(const std::vector<Tensor<float>>& images);

}  // namespace mdt::data
