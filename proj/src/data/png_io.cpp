#include <png.h>

#include <cmath>
#include <csetjmp>
#include <cstdio>
#include <memory>
#include <stdexcept>

#include "mdt/core/errors.hpp"
#include "mdt/data/image.hpp"

namespace mdt::data {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void decode_fail(const std::string& path) {
  throw std::runtime_error("cannot decode image: " + path);
}

struct PngRead {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngRead() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWrite {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWrite() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

}  // namespace

DecodedImage read_png(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("cannot open image: " + path);

  png_byte header[8];
  if (std::fread(header, 1, 8, f.get()) != 8 || png_sig_cmp(header, 0, 8) != 0)
    decode_fail(path);

  PngRead ctx;
  ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw std::runtime_error("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png))) decode_fail(path);

  png_init_io(ctx.png, f.get());
  png_set_sig_bytes(ctx.png, 8);
  png_read_info(ctx.png, ctx.info);

  const png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
  const png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
  const int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
  const int color = png_get_color_type(ctx.png, ctx.info);

  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8)
    png_set_expand_gray_1_2_4_to_8(ctx.png);
  if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS))
    png_set_strip_alpha(ctx.png);
  if (bit_depth == 16) png_set_swap(ctx.png);  // little-endian 16-bit rows
  png_read_update_info(ctx.png, ctx.info);

  const int out_depth = png_get_bit_depth(ctx.png, ctx.info);
  const png_byte channels = png_get_channels(ctx.png, ctx.info);
  if ((out_depth != 8 && out_depth != 16) || (channels != 1 && channels != 3))
    decode_fail(path);

  const size_t rowbytes = png_get_rowbytes(ctx.png, ctx.info);
  std::vector<png_byte> raw(rowbytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = raw.data() + y * rowbytes;
  png_read_image(ctx.png, rows.data());
  png_read_end(ctx.png, nullptr);

  DecodedImage img;
  img.width = w;
  img.height = h;
  img.channels = channels;
  img.pixels.resize(static_cast<size_t>(w) * h * channels);
  const float maxval = out_depth == 16 ? 65535.0f : 255.0f;
  size_t idx = 0;
  for (png_uint_32 y = 0; y < h; ++y) {
    if (out_depth == 8) {
      const png_byte* r = rows[y];
      for (size_t x = 0; x < static_cast<size_t>(w) * channels; ++x)
        img.pixels[idx++] = static_cast<float>(r[x]) / maxval;
    } else {
      const auto* r = reinterpret_cast<const std::uint16_t*>(rows[y]);
      for (size_t x = 0; x < static_cast<size_t>(w) * channels; ++x)
        img.pixels[idx++] = static_cast<float>(r[x]) / maxval;
    }
  }
  return img;
}

RawImage8 read_png_raw8(const std::string& path) {
  DecodedImage img = read_png(path);
  if (img.channels != 1)
    throw std::runtime_error("expected single-channel mask: " + path);
  RawImage8 out;
  out.width = img.width;
  out.height = img.height;
  out.pixels.resize(img.pixels.size());
  for (size_t i = 0; i < img.pixels.size(); ++i)
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(img.pixels[i] * 255.0f));
  return out;
}

void write_png_gray8(const std::string& path, i64 width, i64 height,
                     const std::uint8_t* pixels) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("cannot open for writing: " + path);

  PngWrite ctx;
  ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!ctx.png) throw std::runtime_error("libpng init failed");
  ctx.info = png_create_info_struct(ctx.png);
  if (!ctx.info) throw std::runtime_error("libpng init failed");
  if (setjmp(png_jmpbuf(ctx.png)))
    throw std::runtime_error("png write failed: " + path);

  png_init_io(ctx.png, f.get());
  png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), 8, PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(ctx.png, ctx.info);
  std::vector<png_bytep> rows(static_cast<size_t>(height));
  for (i64 y = 0; y < height; ++y)
    rows[static_cast<size_t>(y)] = const_cast<png_bytep>(pixels + y * width);
  png_write_image(ctx.png, rows.data());
  png_write_end(ctx.png, nullptr);
}

void write_png_gray(const std::string& path, i64 width, i64 height,
                    const float* values) {
  std::vector<std::uint8_t> bytes(static_cast<size_t>(width) * height);
  for (size_t i = 0; i < bytes.size(); ++i) {
    float v = values[i];
    v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
    bytes[i] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
  }
  write_png_gray8(path, width, height, bytes.data());
}

}  // namespace mdt::data
