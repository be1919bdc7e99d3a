#pragma once

// Deterministic synthetic multi-domain corpus: layered-tissue scans with
// sinusoidal band boundaries and elliptical fluid pockets, rendered under a
// configurable appearance (speckle, contrast, blur, brightness, band gain).
// Geometry depends only on (geometry_seed, sample index), so two styles of
// the same seed share their ground-truth masks exactly.

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/core/tensor.hpp"

namespace mdt::data {

struct DomainStyle {
  float speckle_sigma = 0.0f;       // multiplicative N(1, sigma) noise
  float contrast_gamma = 1.0f;      // > 0
  float brightness_offset = 0.0f;   // [-0.3, 0.3]
  float blur_radius = 0.0f;         // Gaussian sigma, px
  float band_intensity_scale = 1.0f;  // > 0

  std::uint64_t hash() const;
};

void validate_style(const DomainStyle& s);

struct SyntheticSample {
  Tensor<float> image;                   // 1 x H x W, values in [0,1]
  Tensor<std::uint8_t> structure_mask;   // H x W, band index per pixel, 0 = background
  Tensor<std::uint8_t> fluid_mask;       // H x W, 1 inside fluid pockets
};

std::vector<SyntheticSample> generate_synthetic(std::uint64_t geometry_seed,
                                                const DomainStyle& style,
                                                i64 count, i64 height, i64 width);

// Styles used for the stock three-domain corpus (distinct appearance
// regimes standing in for three scanner vendors).
DomainStyle default_style(int domain);

// Writes samples under `<root>/<domain_name>/NNNN.png` with label masks in
// `<root>/<domain_name>/masks/NNNN.png` and `..._fluid.png`.
void export_synthetic(const std::string& root, const std::string& domain_name,
                      const std::vector<SyntheticSample>& samples);

// Merges band labels and fluid pockets into a single label map so that
// fluid boundaries count as structure edges for the consistency score.
Tensor<std::uint8_t> combined_label_map(const Tensor<std::uint8_t>& structure,
                                        const Tensor<std::uint8_t>& fluid);

}  // namespace mdt::data
