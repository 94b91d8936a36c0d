#include "omnic/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "omnic/errors.hpp"

namespace omnic {
namespace {

double unit(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

float bilinear(const float* plane, std::size_t H, std::size_t W, double y, double x) {
  y = std::clamp(y, 0.0, static_cast<double>(H - 1));
  x = std::clamp(x, 0.0, static_cast<double>(W - 1));
  const auto y0 = static_cast<std::size_t>(std::floor(y));
  const auto x0 = static_cast<std::size_t>(std::floor(x));
  const std::size_t y1 = std::min(y0 + 1, H - 1);
  const std::size_t x1 = std::min(x0 + 1, W - 1);
  const double fy = y - static_cast<double>(y0);
  const double fx = x - static_cast<double>(x0);
  if (fy == 0.0 && fx == 0.0) return plane[y0 * W + x0];
  const double top = plane[y0 * W + x0] * (1.0 - fx) + plane[y0 * W + x1] * fx;
  const double bottom = plane[y1 * W + x0] * (1.0 - fx) + plane[y1 * W + x1] * fx;
  return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

void blur_plane(float* plane, std::size_t H, std::size_t W, double sigma) {
  const double w1 = std::exp(-1.0 / (2.0 * sigma * sigma));
  const double norm = 1.0 + 2.0 * w1;
  const double k[3] = {w1 / norm, 1.0 / norm, w1 / norm};
  std::vector<float> tmp(H * W);
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int o = -1; o <= 1; ++o) {
        const auto xx = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(x) + o, 0, static_cast<long>(W) - 1));
        acc += k[o + 1] * plane[y * W + xx];
      }
      tmp[y * W + x] = static_cast<float>(acc);
    }
  }
  for (std::size_t y = 0; y < H; ++y) {
    for (std::size_t x = 0; x < W; ++x) {
      double acc = 0.0;
      for (int o = -1; o <= 1; ++o) {
        const auto yy = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(y) + o, 0, static_cast<long>(H) - 1));
        acc += k[o + 1] * tmp[yy * W + x];
      }
      plane[y * W + x] = static_cast<float>(acc);
    }
  }
}

ImagePayload augment_image(const ImagePayload& in, const ImageAugmentConfig& cfg, std::mt19937_64& rng) {
  const std::size_t H = in.height;
  const std::size_t W = in.width;
  ImagePayload out{H, W, std::vector<float>(in.pixels.size())};

  // Draw every random number up front so the stream does not depend on branches.
  const double scale = cfg.crop_scale_min + (cfg.crop_scale_max - cfg.crop_scale_min) * unit(rng);
  const double log_ratio = std::log(3.0 / 4.0) + (std::log(4.0 / 3.0) - std::log(3.0 / 4.0)) * unit(rng);
  const double u_top = unit(rng);
  const double u_left = unit(rng);
  const bool flip = unit(rng) < cfg.flip_prob;
  double factors[3];
  for (double& f : factors) f = 1.0 + cfg.jitter * (2.0 * unit(rng) - 1.0);
  const bool blur = unit(rng) < cfg.blur_prob;
  const double sigma = 0.1 + 1.9 * unit(rng);

  double crop_h = static_cast<double>(H);
  double crop_w = static_cast<double>(W);
  double top = 0.0;
  double left = 0.0;
  if (scale < 1.0) {
    const double area = scale * static_cast<double>(H * W);
    const double ratio = std::exp(log_ratio);
    crop_h = std::min(std::sqrt(area / ratio), static_cast<double>(H));
    crop_w = std::min(std::sqrt(area * ratio), static_cast<double>(W));
    top = u_top * (static_cast<double>(H) - crop_h);
    left = u_left * (static_cast<double>(W) - crop_w);
  }
  const double sy = crop_h / static_cast<double>(H);
  const double sx = crop_w / static_cast<double>(W);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const float* src = in.pixels.data() + ch * H * W;
    float* dst = out.pixels.data() + ch * H * W;
    for (std::size_t y = 0; y < H; ++y) {
      const double srcy = top + (static_cast<double>(y) + 0.5) * sy - 0.5;
      for (std::size_t x = 0; x < W; ++x) {
        const std::size_t xo = flip ? W - 1 - x : x;
        const double srcx = left + (static_cast<double>(x) + 0.5) * sx - 0.5;
        float v = bilinear(src, H, W, srcy, srcx);
        if (factors[ch] != 1.0) v = static_cast<float>(std::clamp(v * factors[ch], 0.0, 1.0));
        dst[y * W + xo] = v;
      }
    }
    if (blur) blur_plane(dst, H, W, sigma);
  }
  return out;
}

AudioPayload augment_audio(const AudioPayload& in, const AudioAugmentConfig& cfg, std::mt19937_64& rng) {
  if (cfg.max_time_mask > in.frames || cfg.max_freq_mask > in.bins) {
    throw ConfigError("audio mask width exceeds spectrogram extent " + std::to_string(in.frames) + "x" +
                      std::to_string(in.bins));
  }
  AudioPayload out = in;
  auto draw_mask = [&rng](std::size_t max_width, std::size_t extent) {
    if (max_width == 0) return std::pair<std::size_t, std::size_t>{0, 0};
    const std::size_t width = 1 + rng() % max_width;
    const std::size_t start = rng() % (extent - width + 1);
    return std::pair<std::size_t, std::size_t>{start, width};
  };
  for (std::size_t m = 0; m < cfg.masks_per_axis; ++m) {
    const auto [start, width] = draw_mask(cfg.max_time_mask, in.frames);
    for (std::size_t t = start; t < start + width; ++t) {
      std::fill_n(out.values.begin() + static_cast<std::ptrdiff_t>(t * in.bins), in.bins, 0.0f);
    }
  }
  for (std::size_t m = 0; m < cfg.masks_per_axis; ++m) {
    const auto [start, width] = draw_mask(cfg.max_freq_mask, in.bins);
    for (std::size_t t = 0; t < in.frames; ++t) {
      for (std::size_t f = start; f < start + width; ++f) out.values[t * in.bins + f] = 0.0f;
    }
  }
  return out;
}

TextPayload augment_text(const TextPayload& in, const TextAugmentConfig& cfg, std::mt19937_64& rng) {
  TextPayload out = in;
  for (std::int32_t& id : out.ids) {
    if (unit(rng) < cfg.mask_prob) id = cfg.mask_id;
  }
  return out;
}

}  // namespace

AugmentationConfig AugmentationConfig::identity() {
  AugmentationConfig c;
  c.image = {1.0, 1.0, 0.0, 0.0, 0.0};
  c.audio = {0, 0, 0};
  c.text = {0.0, 257};
  return c;
}

AugmentationConfig AugmentationConfig::desk(std::size_t audio_frames, std::size_t audio_bins) {
  AugmentationConfig c;
  c.audio.max_time_mask = audio_frames / 4;
  c.audio.max_freq_mask = audio_bins / 4;
  return c;
}

void AugmentationConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(image.flip_prob, "flip_prob");
  prob(image.blur_prob, "blur_prob");
  prob(text.mask_prob, "text_mask_prob");
  if (!(image.crop_scale_min > 0.0 && image.crop_scale_min <= image.crop_scale_max && image.crop_scale_max <= 1.0)) {
    throw ConfigError("crop scale range must satisfy 0 < min <= max <= 1");
  }
  if (!(image.jitter >= 0.0 && image.jitter < 1.0)) throw ConfigError("jitter must lie in [0, 1)");
}

ModalitySample augment(const ModalitySample& sample, const AugmentationConfig& config, std::mt19937_64& rng) {
  ModalitySample out{sample.payload, sample.label, sample.pair_id};
  switch (sample.modality()) {
    case Modality::kImage:
      out.payload = augment_image(sample.image(), config.image, rng);
      break;
    case Modality::kAudio:
      out.payload = augment_audio(sample.audio(), config.audio, rng);
      break;
    case Modality::kText:
      out.payload = augment_text(sample.text(), config.text, rng);
      break;
  }
  return out;
}

}  // namespace omnic
