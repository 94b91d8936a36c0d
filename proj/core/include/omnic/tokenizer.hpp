#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace omnic {

/// Byte-level tokenizer: id = byte + 1, 0 pads, 257 is the mask token.
struct ByteTokenizer {
  static constexpr std::int32_t kPadId = 0;
  static constexpr std::int32_t kMaskId = 257;
  static constexpr std::size_t kVocabSize = 258;

  /// Truncates to `length` ids and right-pads with kPadId.
  static std::vector<std::int32_t> encode(std::string_view text, std::size_t length);
  /// Inverse of encode for byte ids; stops at the first padding id, skips mask ids.
  static std::string decode(std::span<const std::int32_t> ids);
};

inline std::vector<std::int32_t> tokenize_text(std::string_view text, std::size_t length) {
  return ByteTokenizer::encode(text, length);
}

}  // namespace omnic
