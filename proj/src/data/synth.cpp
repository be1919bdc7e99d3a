#include "mdt/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <stdexcept>

#include "mdt/core/archive.hpp"
#include "mdt/core/errors.hpp"
#include "mdt/core/rng.hpp"
#include "mdt/data/image.hpp"

namespace fs = std::filesystem;

namespace mdt::data {

namespace {

constexpr std::uint64_t kGeoStream = 0x1a2b3c01;
constexpr std::uint64_t kNoiseStream = 0x1a2b3c02;
constexpr double kTwoPi = 6.283185307179586476925286766559;

// Band base intensities; adjacent entries contrast so boundaries stay visible.
constexpr float kPalette[] = {0.78f, 0.40f, 0.88f, 0.30f, 0.62f, 0.48f, 0.72f};

void gaussian_blur_inplace(Tensor<float>& img, i64 h, i64 w, float sigma) {
  if (sigma <= 0.0f) return;
  const i64 half = std::max<i64>(1, static_cast<i64>(std::ceil(2.5 * sigma)));
  std::vector<float> kernel(static_cast<size_t>(2 * half + 1));
  double sum = 0.0;
  for (i64 i = -half; i <= half; ++i) {
    const double v = std::exp(-0.5 * (static_cast<double>(i) / sigma) * (static_cast<double>(i) / sigma));
    kernel[static_cast<size_t>(i + half)] = static_cast<float>(v);
    sum += v;
  }
  for (auto& k : kernel) k = static_cast<float>(k / sum);

  auto reflect = [](i64 i, i64 n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - 1 - i;
    return std::clamp<i64>(i, 0, n - 1);
  };

  std::vector<float> tmp(static_cast<size_t>(h * w));
  float* p = img.data();
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      double acc = 0.0;
      for (i64 k = -half; k <= half; ++k)
        acc += kernel[static_cast<size_t>(k + half)] * p[y * w + reflect(x + k, w)];
      tmp[static_cast<size_t>(y * w + x)] = static_cast<float>(acc);
    }
  for (i64 y = 0; y < h; ++y)
    for (i64 x = 0; x < w; ++x) {
      double acc = 0.0;
      for (i64 k = -half; k <= half; ++k)
        acc += kernel[static_cast<size_t>(k + half)] * tmp[static_cast<size_t>(reflect(y + k, h) * w + x)];
      p[y * w + x] = static_cast<float>(acc);
    }
}

SyntheticSample make_sample(std::uint64_t geometry_seed, i64 index,
                            const DomainStyle& style, i64 h, i64 w) {
  CounterRng geo(rng_fold(geometry_seed, kGeoStream), static_cast<std::uint64_t>(index));

  const i64 n_bands = 4 + static_cast<i64>(geo.next_below(4));

  // Monotone band boundaries: jittered even spacing plus low-frequency waves.
  const double top = h * geo.next_uniform(0.10, 0.18);
  const double bottom = h * geo.next_uniform(0.82, 0.90);
  std::vector<double> base(static_cast<size_t>(n_bands + 1));
  std::vector<double> amp(base.size()), freq(base.size()), phase(base.size());
  for (i64 k = 0; k <= n_bands; ++k) {
    const double frac = static_cast<double>(k) / static_cast<double>(n_bands);
    const double jitter = k == 0 || k == n_bands ? 0.0 : geo.next_uniform(-0.25, 0.25) / n_bands;
    base[static_cast<size_t>(k)] = top + (bottom - top) * (frac + jitter);
    amp[static_cast<size_t>(k)] = geo.next_uniform(0.5, 2.5) * h / 64.0;
    freq[static_cast<size_t>(k)] = 1.0 + geo.next_below(3);
    phase[static_cast<size_t>(k)] = geo.next_uniform(0.0, kTwoPi);
  }

  std::vector<float> intensity(static_cast<size_t>(n_bands + 1));
  intensity[0] = static_cast<float>(geo.next_uniform(0.05, 0.12));  // background
  for (i64 k = 1; k <= n_bands; ++k)
    intensity[static_cast<size_t>(k)] =
        kPalette[(k - 1) % 7] + static_cast<float>(geo.next_uniform(-0.04, 0.04));

  SyntheticSample s;
  s.structure_mask = Tensor<std::uint8_t>({h, w});
  s.fluid_mask = Tensor<std::uint8_t>({h, w});
  s.image = Tensor<float>({1, h, w});

  std::vector<double> bound(static_cast<size_t>(n_bands + 1));
  for (i64 x = 0; x < w; ++x) {
    for (i64 k = 0; k <= n_bands; ++k) {
      const size_t ks = static_cast<size_t>(k);
      bound[ks] = base[ks] + amp[ks] * std::sin(kTwoPi * freq[ks] * x / w + phase[ks]);
      if (k > 0) bound[ks] = std::max(bound[ks], bound[ks - 1] + 1.0);
    }
    for (i64 y = 0; y < h; ++y) {
      std::uint8_t label = 0;
      const double yc = y + 0.5;
      for (i64 k = 0; k < n_bands; ++k)
        if (yc >= bound[static_cast<size_t>(k)] && yc < bound[static_cast<size_t>(k + 1)]) {
          label = static_cast<std::uint8_t>(k + 1);
          break;
        }
      s.structure_mask.data()[y * w + x] = label;
    }
  }

  // Fluid pockets: ellipses kept strictly interior to one band.
  const i64 n_fluid = static_cast<i64>(geo.next_below(4));
  for (i64 f = 0; f < n_fluid; ++f) {
    const auto band = static_cast<std::uint8_t>(1 + geo.next_below(static_cast<std::uint64_t>(n_bands)));
    const double cx = geo.next_uniform(0.15, 0.85) * w;
    const double ax = geo.next_uniform(0.05, 0.14) * w;
    const double ay_frac = geo.next_uniform(0.25, 0.55);
    const double tilt = geo.next_uniform(-0.3, 0.3);
    // vertical center from the band extent at the center column
    const i64 cxi = std::clamp<i64>(static_cast<i64>(cx), 0, w - 1);
    i64 ytop = -1, ybot = -1;
    for (i64 y = 0; y < h; ++y)
      if (s.structure_mask.data()[y * w + cxi] == band) {
        if (ytop < 0) ytop = y;
        ybot = y;
      }
    if (ytop < 0) continue;
    const double cy = 0.5 * (ytop + ybot) + geo.next_uniform(-1.0, 1.0);
    const double ay = std::max(1.5, ay_frac * (ybot - ytop));

    for (i64 y = std::max<i64>(0, static_cast<i64>(cy - ay - 2));
         y <= std::min<i64>(h - 1, static_cast<i64>(cy + ay + 2)); ++y)
      for (i64 x = std::max<i64>(0, static_cast<i64>(cx - ax - 2));
           x <= std::min<i64>(w - 1, static_cast<i64>(cx + ax + 2)); ++x) {
        const double dx = (x - cx) / ax;
        const double dy = (y - cy + tilt * (x - cx)) / ay;
        if (dx * dx + dy * dy > 1.0) continue;
        // keep strictly inside the band: pixel and 4-neighbours share it
        if (y == 0 || y == h - 1 || x == 0 || x == w - 1) continue;
        const std::uint8_t* m = s.structure_mask.data();
        if (m[y * w + x] == band && m[(y - 1) * w + x] == band &&
            m[(y + 1) * w + x] == band && m[y * w + x - 1] == band &&
            m[y * w + x + 1] == band)
          s.fluid_mask.data()[y * w + x] = 1;
      }
  }

  // Clean render, then the style chain: band gain, gamma, blur, brightness,
  // multiplicative speckle, clamp.
  float* img = s.image.data();
  for (i64 i = 0; i < h * w; ++i) {
    const std::uint8_t label = s.structure_mask.data()[i];
    float v = intensity[label];
    if (label > 0) v *= style.band_intensity_scale;
    if (s.fluid_mask.data()[i]) v *= 0.35f;
    img[i] = std::max(v, 0.0f);
  }
  if (style.contrast_gamma != 1.0f)
    for (i64 i = 0; i < h * w; ++i)
      img[i] = std::pow(img[i], style.contrast_gamma);
  gaussian_blur_inplace(s.image, h, w, style.blur_radius);
  if (style.brightness_offset != 0.0f)
    for (i64 i = 0; i < h * w; ++i) img[i] += style.brightness_offset;
  if (style.speckle_sigma > 0.0f) {
    CounterRng noise(rng_fold(rng_fold(geometry_seed, kNoiseStream),
                              static_cast<std::uint64_t>(index)),
                     style.hash());
    for (i64 i = 0; i < h * w; ++i)
      img[i] *= 1.0f + style.speckle_sigma * static_cast<float>(noise.next_gaussian());
  }
  for (i64 i = 0; i < h * w; ++i) img[i] = std::clamp(img[i], 0.0f, 1.0f);

  return s;
}

}  // namespace

std::uint64_t DomainStyle::hash() const {
  const float fields[5] = {speckle_sigma, contrast_gamma, brightness_offset,
                           blur_radius, band_intensity_scale};
  return fnv1a64(fields, sizeof(fields));
}

void validate_style(const DomainStyle& s) {
  const float fields[5] = {s.speckle_sigma, s.contrast_gamma, s.brightness_offset,
                           s.blur_radius, s.band_intensity_scale};
  for (float f : fields)
    if (!std::isfinite(f)) throw ConfigError("domain style fields must be finite");
  if (s.speckle_sigma < 0.0f) throw ConfigError("speckle_sigma must be >= 0");
  if (s.contrast_gamma <= 0.0f) throw ConfigError("contrast_gamma must be > 0");
  if (s.brightness_offset < -0.3f || s.brightness_offset > 0.3f)
    throw ConfigError("brightness_offset must lie in [-0.3, 0.3]");
  if (s.blur_radius < 0.0f) throw ConfigError("blur_radius must be >= 0");
  if (s.band_intensity_scale <= 0.0f)
    throw ConfigError("band_intensity_scale must be > 0");
}

std::vector<SyntheticSample> generate_synthetic(std::uint64_t geometry_seed,
                                                const DomainStyle& style,
                                                i64 count, i64 height, i64 width) {
  if (count < 1) throw ConfigError("synthetic sample count must be >= 1");
  if (height % 4 != 0 || width % 4 != 0)
    throw ConfigError("synthetic size must be divisible by 4");
  if (height < 32 || width < 32)
    throw ConfigError("synthetic size must be at least 32x32");
  validate_style(style);

  std::vector<SyntheticSample> out;
  out.reserve(static_cast<size_t>(count));
  for (i64 i = 0; i < count; ++i)
    out.push_back(make_sample(geometry_seed, i, style, height, width));
  return out;
}

DomainStyle default_style(int domain) {
  switch (domain) {
    case 0:
      return {0.05f, 1.0f, 0.0f, 0.0f, 1.0f};
    case 1:
      return {0.20f, 0.7f, 0.0f, 1.0f, 1.0f};
    case 2:
      return {0.10f, 1.4f, 0.1f, 0.0f, 1.0f};
    default: {
      // past the stock three, vary the knobs deterministically
      CounterRng rng(0xd0d0, static_cast<std::uint64_t>(domain));
      DomainStyle s;
      s.speckle_sigma = static_cast<float>(rng.next_uniform(0.02, 0.25));
      s.contrast_gamma = static_cast<float>(rng.next_uniform(0.6, 1.5));
      s.brightness_offset = static_cast<float>(rng.next_uniform(-0.15, 0.15));
      s.blur_radius = static_cast<float>(rng.next_uniform(0.0, 1.2));
      s.band_intensity_scale = static_cast<float>(rng.next_uniform(0.8, 1.2));
      return s;
    }
  }
}

void export_synthetic(const std::string& root, const std::string& domain_name,
                      const std::vector<SyntheticSample>& samples) {
  const fs::path dir = fs::path(root) / domain_name;
  const fs::path masks = dir / "masks";
  fs::create_directories(masks);
  char name[32];
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const i64 h = s.image.dim(1), w = s.image.dim(2);
    std::snprintf(name, sizeof(name), "%04zu.png", i);
    write_png_gray((dir / name).string(), w, h, s.image.data());
    write_png_gray8((masks / name).string(), w, h, s.structure_mask.data());
    std::snprintf(name, sizeof(name), "%04zu_fluid.png", i);
    std::vector<std::uint8_t> fluid(s.fluid_mask.data(),
                                    s.fluid_mask.data() + s.fluid_mask.numel());
    for (auto& v : fluid) v = v ? 255 : 0;
    write_png_gray8((masks / name).string(), w, h, fluid.data());
  }
}

Tensor<std::uint8_t> combined_label_map(const Tensor<std::uint8_t>& structure,
                                        const Tensor<std::uint8_t>& fluid) {
  if (!structure.same_shape(fluid))
    throw std::invalid_argument("mask shapes must match");
  Tensor<std::uint8_t> out = structure;
  for (i64 i = 0; i < out.numel(); ++i)
    if (fluid.data()[i]) out.data()[i] = static_cast<std::uint8_t>(64 + out.data()[i]);
  return out;
}

}  // namespace mdt::data
