#pragma once

// Shared binary layout of checkpoint and feature-cache files:
//
//   magic[4] | u32 version | u64 header_len | header text | sha256(header)[32] | payload
//
// Integers are little-endian. The header is key=value text and always ends
// with payload_bytes and payload_sha256 lines, added by write_container.

#include <array>
#include <cstddef>
#include <cstdint>
#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "omnic/kv.hpp"

namespace omnic::detail {

struct ContainerContents {
  KeyValues header;
  std::vector<std::byte> payload;
  std::size_t payload_offset = 0;
};

std::vector<std::byte> encode_container(const std::array<char, 4>& magic, std::uint32_t version,
                                        const KeyValues& header, const std::vector<std::byte>& payload);

/// Throws FormatError with the offending byte offset.
ContainerContents decode_container(const std::vector<std::byte>& file, const std::array<char, 4>& magic,
                                   std::uint32_t version);

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::byte>& bytes);
std::vector<std::byte> read_file(const std::filesystem::path& path);

/// Little-endian append/read of trivially copyable values.
template <typename V>
void put_le(std::vector<std::byte>& out, V value) {
  std::array<std::byte, sizeof(V)> raw;
  std::memcpy(raw.data(), &value, sizeof(V));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.insert(out.end(), raw.begin(), raw.end());
}

template <typename V>
V get_le(const std::byte* p) {
  std::array<std::byte, sizeof(V)> raw;
  std::memcpy(raw.data(), p, sizeof(V));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  V value;
  std::memcpy(&value, raw.data(), sizeof(V));
  return value;
}

/// Header lookup; throws FormatError at header_offset when the key is absent.
const std::string& header_value(const KeyValues& header, const std::string& key, std::size_t header_offset);

}  // namespace omnic::detail
