#include "omnic/tokenizer.hpp"

namespace omnic {

std::vector<std::int32_t> ByteTokenizer::encode(std::string_view text, std::size_t length) {
  std::vector<std::int32_t> ids(length, kPadId);
  const std::size_t n = std::min(length, text.size());
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::int32_t>(static_cast<unsigned char>(text[i])) + 1;
  return ids;
}

std::string ByteTokenizer::decode(std::span<const std::int32_t> ids) {
  std::string out;
  for (std::int32_t id : ids) {
    if (id == kPadId) break;
    if (id >= 1 && id <= 256) out.push_back(static_cast<char>(id - 1));
  }
  return out;
}

}  // namespace omnic
