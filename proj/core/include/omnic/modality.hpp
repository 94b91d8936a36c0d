#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace omnic {

enum class Modality : std::uint8_t { kImage = 0, kAudio = 1, kText = 2 };

inline constexpr std::array<Modality, 3> kAllModalities = {Modality::kImage, Modality::kAudio,
                                                          Modality::kText};

const char* modality_name(Modality m);
/// Accepts "image", "audio", "text" (and the single letters I, A, T).
Modality parse_modality(std::string_view name);

/// RGB image, channel-major (3 × height × width), values in [0, 1].
struct ImagePayload {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<float> pixels;
  bool operator==(const ImagePayload&) const = default;
};

/// Single-channel log-mel spectrogram, time frames × frequency bins.
struct AudioPayload {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<float> values;
  bool operator==(const AudioPayload&) const = default;
};

/// Token ids; 0 is padding.
struct TextPayload {
  std::vector<std::int32_t> ids;
  bool operator==(const TextPayload&) const = default;
};

struct ModalitySample {
  std::variant<ImagePayload, AudioPayload, TextPayload> payload;
  std::optional<std::int32_t> label;
  std::optional<std::int64_t> pair_id;

  Modality modality() const { return static_cast<Modality>(payload.index()); }

  const ImagePayload& image() const { return std::get<ImagePayload>(payload); }
  const AudioPayload& audio() const { return std::get<AudioPayload>(payload); }
  const TextPayload& text() const { return std::get<TextPayload>(payload); }
  ImagePayload& image() { return std::get<ImagePayload>(payload); }
  AudioPayload& audio() { return std::get<AudioPayload>(payload); }
  TextPayload& text() { return std::get<TextPayload>(payload); }
};

using ModalityBatch = std::vector<ModalitySample>;

/// Returns the common modality of a non-empty batch; throws ContractError on
/// an empty or mixed batch.
Modality batch_modality(std::span<const ModalitySample> batch);

}  // namespace omnic
