#include "mdt/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "mdt/core/errors.hpp"
#include "mdt/core/rng.hpp"

namespace fs = std::filesystem;

namespace mdt::data {

namespace {

bool is_png(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return ext == ".png";
}

}  // namespace

Tensor<float> resize_bilinear(const Tensor<float>& chw, i64 out_h, i64 out_w) {
  if (chw.ndim() != 3) throw std::invalid_argument("resize expects CHW");
  const i64 c = chw.dim(0), in_h = chw.dim(1), in_w = chw.dim(2);
  if (in_h == out_h && in_w == out_w) return chw;
  Tensor<float> out({c, out_h, out_w});
  const double sy = static_cast<double>(in_h) / static_cast<double>(out_h);
  const double sx = static_cast<double>(in_w) / static_cast<double>(out_w);
  for (i64 ch = 0; ch < c; ++ch) {
    const float* src = chw.data() + ch * in_h * in_w;
    float* dst = out.data() + ch * out_h * out_w;
    for (i64 y = 0; y < out_h; ++y) {
      const double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
      const i64 y0 = std::clamp<i64>(static_cast<i64>(std::floor(fy)), 0, in_h - 1);
      const i64 y1 = std::min(y0 + 1, in_h - 1);
      const double wy = std::clamp(fy - static_cast<double>(y0), 0.0, 1.0);
      for (i64 x = 0; x < out_w; ++x) {
        const double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
        const i64 x0 = std::clamp<i64>(static_cast<i64>(std::floor(fx)), 0, in_w - 1);
        const i64 x1 = std::min(x0 + 1, in_w - 1);
        const double wx = std::clamp(fx - static_cast<double>(x0), 0.0, 1.0);
        const double top = src[y0 * in_w + x0] * (1.0 - wx) + src[y0 * in_w + x1] * wx;
        const double bot = src[y1 * in_w + x0] * (1.0 - wx) + src[y1 * in_w + x1] * wx;
        dst[y * out_w + x] = static_cast<float>(top * (1.0 - wy) + bot * wy);
      }
    }
  }
  return out;
}

Tensor<float> load_image(const std::string& path, i64 height, i64 width) {
  const DecodedImage img = read_png(path);
  // interleaved rows -> CHW planes
  Tensor<float> chw({img.channels, img.height, img.width});
  for (i64 y = 0; y < img.height; ++y)
    for (i64 x = 0; x < img.width; ++x)
      for (i64 c = 0; c < img.channels; ++c)
        chw.data()[(c * img.height + y) * img.width + x] =
            img.pixels[static_cast<size_t>((y * img.width + x) * img.channels + c)];
  Tensor<float> sized = resize_bilinear(chw, height, width);
  Tensor<float> out({1, img.channels, height, width});
  std::memcpy(out.data(), sized.data(), sizeof(float) * static_cast<size_t>(sized.numel()));
  validate_image_batch(out);
  return out;
}

void save_image(const std::string& path, const Tensor<float>& batch, i64 n) {
  if (batch.ndim() != 4) throw std::invalid_argument("save_image expects NCHW");
  const i64 h = batch.dim(2), w = batch.dim(3);
  write_png_gray(path, w, h, batch.data() + ((n * batch.dim(1)) * h) * w);
}

void validate_image_batch(const Tensor<float>& t) {
  if (t.ndim() != 4) throw std::invalid_argument("image batch must be NCHW");
  const i64 c = t.dim(1), h = t.dim(2), w = t.dim(3);
  if (c != 1 && c != 3)
    throw std::invalid_argument("image batch channels must be 1 or 3");
  if (h < 32 || w < 32 || h % 4 != 0 || w % 4 != 0)
    throw std::invalid_argument(
        "image spatial dims must be >= 32 and divisible by 4, got " + t.shape_str());
  const float* p = t.data();
  for (i64 i = 0; i < t.numel(); ++i) {
    if (!(p[i] >= 0.0f && p[i] <= 1.0f))  // catches NaN as well
      throw std::invalid_argument("image values must be finite and within [0,1]");
  }
}

std::vector<DomainDataset> scan_dataset(const std::string& root) {
  if (!fs::is_directory(root))
    throw std::runtime_error("dataset root not found: " + root);

  std::vector<std::string> domains;
  for (const auto& entry : fs::directory_iterator(root))
    if (entry.is_directory()) domains.push_back(entry.path().filename().string());
  std::sort(domains.begin(), domains.end());

  std::vector<DomainDataset> out;
  for (const std::string& name : domains) {
    DomainDataset ds;
    ds.domain_id = static_cast<int>(out.size());
    ds.name = name;
    for (const auto& entry : fs::directory_iterator(fs::path(root) / name))
      if (entry.is_regular_file() && is_png(entry.path()))
        ds.image_paths.push_back(entry.path().string());
    std::sort(ds.image_paths.begin(), ds.image_paths.end());
    if (ds.image_paths.empty())
      throw std::runtime_error("empty domain " + name);
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<i64> sample_indices(i64 count, i64 batch, std::uint64_t rng_seed) {
  if (count < 1) throw std::invalid_argument("cannot sample from empty dataset");
  if (batch < 1) throw std::invalid_argument("batch must be >= 1");
  CounterRng rng(rng_seed, 0x5a3c);
  std::vector<i64> idx(static_cast<size_t>(batch));
  for (auto& v : idx)
    v = static_cast<i64>(rng.next_below(static_cast<std::uint64_t>(count)));
  return idx;
}

Tensor<float> stack_images(const std::vector<Tensor<float>>& images) {
  if (images.empty()) throw std::invalid_argument("cannot stack empty image list");
  const i64 c = images[0].dim(1), h = images[0].dim(2), w = images[0].dim(3);
  Tensor<float> out({static_cast<i64>(images.size()), c, h, w});
  const i64 stride = c * h * w;
  for (size_t i = 0; i < images.size(); ++i) {
    if (images[i].ndim() != 4 || images[i].dim(0) != 1 || images[i].dim(1) != c ||
        images[i].dim(2) != h || images[i].dim(3) != w)
      throw std::invalid_argument("stacked images must share shape 1xCxHxW");
    std::memcpy(out.data() + static_cast<i64>(i) * stride, images[i].data(),
                sizeof(float) * static_cast<size_t>(stride));
  }
  return out;
}

Tensor<float> sample_batch(const DomainDataset& dataset, i64 batch,
                           std::uint64_t rng_seed, i64 h, i64 w) {
  const std::vector<i64> idx = sample_indices(dataset.count(), batch, rng_seed);
  std::vector<Tensor<float>> images;
  images.reserve(idx.size());
  for (i64 i : idx)
    images.push_back(load_image(dataset.image_paths[static_cast<size_t>(i)], h, w));
  return stack_images(images);
}

}  // namespace mdt::data
