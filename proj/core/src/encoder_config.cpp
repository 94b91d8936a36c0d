#include "omnic/encoder_config.hpp"

#include <cmath>

#include "omnic/errors.hpp"

namespace omnic {

const char* head_mode_name(HeadMode mode) { return mode == HeadMode::kShared ? "shared" : "separate"; }

HeadMode parse_head_mode(std::string_view name) {
  if (name == "separate") return HeadMode::kSeparate;
  if (name == "shared") return HeadMode::kShared;
  throw ConfigError("head_mode must be 'separate' or 'shared', got '" + std::string(name) + "'");
}

std::size_t EncoderConfig::mlp_hidden() const {
  return static_cast<std::size_t>(std::llround(mlp_ratio * static_cast<double>(embed_dim)));
}

void EncoderConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError(msg);
  };
  require(embed_dim > 0, "embed_dim must be positive");
  require(n_layers > 0, "n_layers must be positive");
  require(n_heads > 0, "n_heads must be positive");
  require(embed_dim % n_heads == 0, "embed_dim must be divisible by n_heads");
  require(embed_dim % 4 == 0, "embed_dim must be divisible by 4 for 2d positional encoding");
  require(mlp_ratio > 0 && mlp_hidden() > 0, "mlp_ratio must be positive");
  require(image_patch_h > 0 && image_patch_w > 0, "image patch extents must be positive");
  require(audio_patch_h > 0 && audio_patch_w > 0, "audio patch extents must be positive");
  require(image_height > 0 && image_width > 0, "image size must be positive");
  require(audio_frames > 0 && audio_bins > 0, "audio size must be positive");
  require(image_height % image_patch_h == 0 && image_width % image_patch_w == 0,
          "image size " + std::to_string(image_height) + "x" + std::to_string(image_width) +
              " is not divisible by patch " + std::to_string(image_patch_h) + "x" +
              std::to_string(image_patch_w));
  require(audio_frames % audio_patch_h == 0 && audio_bins % audio_patch_w == 0,
          "audio size " + std::to_string(audio_frames) + "x" + std::to_string(audio_bins) +
              " is not divisible by patch " + std::to_string(audio_patch_h) + "x" +
              std::to_string(audio_patch_w));
  require(text_len > 0, "text_len must be positive");
  require(vocab_size > 0, "vocab_size must be positive");
  require(proj_dim > 0, "proj_dim must be positive");
  require(norm_eps > 0, "norm_eps must be positive");
}

EncoderConfig EncoderConfig::desk() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::vit_b32() {
  EncoderConfig c;
  c.embed_dim = 768;
  c.n_layers = 12;
  c.n_heads = 12;
  c.mlp_ratio = 4.0;
  c.image_height = 224;
  c.image_width = 224;
  c.image_patch_h = 32;
  c.image_patch_w = 32;
  c.audio_frames = 256;
  c.audio_bins = 128;
  c.audio_patch_h = 32;
  c.audio_patch_w = 32;
  c.text_len = 256;
  c.vocab_size = 258;
  c.proj_dim = 128;
  return c;
}

KeyValues encoder_config_entries(const EncoderConfig& c) {
  auto n = [](std::size_t v) { return std::to_string(v); };
  return {
      {"embed_dim", n(c.embed_dim)},
      {"n_layers", n(c.n_layers)},
      {"n_heads", n(c.n_heads)},
      {"mlp_ratio", format_double(c.mlp_ratio)},
      {"image_height", n(c.image_height)},
      {"image_width", n(c.image_width)},
      {"image_patch_h", n(c.image_patch_h)},
      {"image_patch_w", n(c.image_patch_w)},
      {"audio_frames", n(c.audio_frames)},
      {"audio_bins", n(c.audio_bins)},
      {"audio_patch_h", n(c.audio_patch_h)},
      {"audio_patch_w", n(c.audio_patch_w)},
      {"text_len", n(c.text_len)},
      {"vocab_size", n(c.vocab_size)},
      {"proj_dim", n(c.proj_dim)},
      {"head_mode", head_mode_name(c.head_mode)},
      {"norm_eps", format_double(c.norm_eps)},
  };
}

bool set_encoder_config_entry(EncoderConfig& c, std::string_view key, std::string_view value) {
  struct SizeField {
    const char* name;
    std::size_t EncoderConfig::*member;
  };
  static constexpr SizeField kSizes[] = {
      {"embed_dim", &EncoderConfig::embed_dim},         {"n_layers", &EncoderConfig::n_layers},
      {"n_heads", &EncoderConfig::n_heads},             {"image_height", &EncoderConfig::image_height},
      {"image_width", &EncoderConfig::image_width},     {"image_patch_h", &EncoderConfig::image_patch_h},
      {"image_patch_w", &EncoderConfig::image_patch_w}, {"audio_frames", &EncoderConfig::audio_frames},
      {"audio_bins", &EncoderConfig::audio_bins},       {"audio_patch_h", &EncoderConfig::audio_patch_h},
      {"audio_patch_w", &EncoderConfig::audio_patch_w}, {"text_len", &EncoderConfig::text_len},
      {"vocab_size", &EncoderConfig::vocab_size},       {"proj_dim", &EncoderConfig::proj_dim},
  };
  for (const auto& f : kSizes) {
    if (key == f.name) {
      c.*f.member = parse_size_value(key, value);
      return true;
    }
  }
  if (key == "mlp_ratio") {
    c.mlp_ratio = parse_double_value(key, value);
  } else if (key == "norm_eps") {
    c.norm_eps = parse_double_value(key, value);
  } else if (key == "head_mode") {
    c.head_mode = parse_head_mode(value);
  } else {
    return false;
  }
  return true;
}

}  // namespace omnic
