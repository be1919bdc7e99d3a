#pragma once

// Raster image handling. All pipeline images are NCHW float tensors in
// [0, 1]; grayscale stays single-channel. PNG is the canonical on-disk
// format (8-bit written, 8- and 16-bit read).

#include <cstdint>
#include <string>
#include <vector>

#include "mdt/core/tensor.hpp"

namespace mdt::data {

// Decoded image, channel-interleaved rows, values already scaled to [0,1]
// by the source format's maximum value.
struct DecodedImage {
  i64 width = 0;
  i64 height = 0;
  i64 channels = 0;  // 1 or 3
  std::vector<float> pixels;
};

DecodedImage read_png(const std::string& path);

// Raw 8-bit single-channel read/write (label masks).
struct RawImage8 {
  i64 width = 0;
  i64 height = 0;
  std::vector<std::uint8_t> pixels;
};

RawImage8 read_png_raw8(const std::string& path);
void write_png_gray8(const std::string& path, i64 width, i64 height,
                     const std::uint8_t* pixels);

// Quantizes [0,1] floats to 8-bit and writes a grayscale PNG.
void write_png_gray(const std::string& path, i64 width, i64 height,
                    const float* values);

// Bilinear resample of a CHW plane stack (half-pixel centers, edge clamp).
// Resampling to the source size is an exact copy.
Tensor<float> resize_bilinear(const Tensor<float>& chw, i64 out_h, i64 out_w);

// Loads one image as a batch-1 NCHW tensor in [0,1], bilinearly resized.
Tensor<float> load_image(const std::string& path, i64 height, i64 width);

// Saves batch element n, channel 0 of an NCHW tensor as 8-bit PNG.
void save_image(const std::string& path, const Tensor<float>& batch, i64 n = 0);

// ImageBatch contract: NCHW, 1 or 3 channels, finite values in [0,1],
// spatial dims >= 32 and divisible by 4. Throws on violation.
void validate_image_batch(const Tensor<float>& t);

}  // namespace mdt::data
