#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

#include "omnic/modality.hpp"

namespace omnic {

struct ImageAugmentConfig {
  double crop_scale_min = 0.2;  // area fraction
  double crop_scale_max = 1.0;
  double flip_prob = 0.5;
  double jitter = 0.4;  // per-channel brightness factor drawn from [1 - j, 1 + j]
  double blur_prob = 0.5;
};

struct AudioAugmentConfig {
  std::size_t max_time_mask = 8;  // frames
  std::size_t max_freq_mask = 4;  // bins
  std::size_t masks_per_axis = 2;
};

struct TextAugmentConfig {
  double mask_prob = 0.15;
  std::int32_t mask_id = 257;
};

struct AugmentationConfig {
  ImageAugmentConfig image;
  AudioAugmentConfig audio;
  TextAugmentConfig text;

  /// All probabilities zero, crop fixed at the full image, no masks.
  static AugmentationConfig identity();
  /// Desk defaults, with audio mask widths at 25% of each axis.
  static AugmentationConfig desk(std::size_t audio_frames, std::size_t audio_bins);

  /// Throws ConfigError on probabilities outside [0, 1] or inverted ranges.
  void validate() const;
};

/// Two calls with equal rng state give equal outputs.
ModalitySample augment(const ModalitySample& sample, const AugmentationConfig& config, std::mt19937_64& rng);

}  // namespace omnic
