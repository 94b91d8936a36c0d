#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "omnic/kv.hpp"

namespace omnic {

enum class HeadMode : std::uint8_t { kSeparate = 0, kShared = 1 };

const char* head_mode_name(HeadMode mode);
HeadMode parse_head_mode(std::string_view name);

struct EncoderConfig {
  std::size_t embed_dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  double mlp_ratio = 4.0;

  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t image_patch_h = 8;
  std::size_t image_patch_w = 8;

  // Audio spectrograms are time frames × frequency bins.
  std::size_t audio_frames = 32;
  std::size_t audio_bins = 16;
  std::size_t audio_patch_h = 8;
  std::size_t audio_patch_w = 8;

  std::size_t text_len = 16;
  std::size_t vocab_size = 258;

  std::size_t proj_dim = 32;
  HeadMode head_mode = HeadMode::kSeparate;
  double norm_eps = 1e-5;

  /// Throws ConfigError naming the first violated constraint.
  void validate() const;

  std::size_t mlp_hidden() const;
  std::size_t image_grid_h() const { return image_height / image_patch_h; }
  std::size_t image_grid_w() const { return image_width / image_patch_w; }
  std::size_t audio_grid_h() const { return audio_frames / audio_patch_h; }
  std::size_t audio_grid_w() const { return audio_bins / audio_patch_w; }
  std::size_t image_tokens() const { return image_grid_h() * image_grid_w(); }
  std::size_t audio_tokens() const { return audio_grid_h() * audio_grid_w(); }
  std::size_t head_count() const { return head_mode == HeadMode::kShared ? 1 : 3; }

  /// Small configuration used for tests, acceptance and the CLI defaults.
  static EncoderConfig desk();
  /// ViT-B/32 dimensions: 224×224 images, 256×128 spectrograms, 256 tokens.
  static EncoderConfig vit_b32();

  bool operator==(const EncoderConfig&) const = default;
};

/// Every field as "key=value" text, in declaration order.
KeyValues encoder_config_entries(const EncoderConfig& config);

/// Sets one field from text. Returns false for an unknown key; throws
/// ConfigError naming the key on a malformed value.
bool set_encoder_config_entry(EncoderConfig& config, std::string_view key, std::string_view value);

}  // namespace omnic
