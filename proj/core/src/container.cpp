#include "container.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "omnic/errors.hpp"
#include "omnic/hash.hpp"

namespace omnic::detail {
namespace {

constexpr std::size_t kPreamble = 4 + 4 + 8;
constexpr std::size_t kDigest = 32;

std::array<std::byte, kDigest> digest_bytes(const std::string& hex) {
  std::array<std::byte, kDigest> out{};
  for (std::size_t i = 0; i < kDigest; ++i) {
    out[i] = static_cast<std::byte>(std::stoi(hex.substr(2 * i, 2), nullptr, 16));
  }
  return out;
}

}  // namespace

std::vector<std::byte> encode_container(const std::array<char, 4>& magic, std::uint32_t version,
                                        const KeyValues& header, const std::vector<std::byte>& payload) {
  KeyValues full = header;
  full.emplace_back("payload_bytes", std::to_string(payload.size()));
  full.emplace_back("payload_sha256", sha256_hex(std::span<const std::byte>(payload)));
  const std::string text = format_key_values(full);

  std::vector<std::byte> out;
  out.reserve(kPreamble + text.size() + kDigest + payload.size());
  for (char c : magic) out.push_back(static_cast<std::byte>(c));
  put_le<std::uint32_t>(out, version);
  put_le<std::uint64_t>(out, text.size());
  for (char c : text) out.push_back(static_cast<std::byte>(c));
  const auto hd = digest_bytes(sha256_hex(text));
  out.insert(out.end(), hd.begin(), hd.end());
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

ContainerContents decode_container(const std::vector<std::byte>& file, const std::array<char, 4>& magic,
                                   std::uint32_t version) {
  if (file.size() < kPreamble) throw FormatError("file truncated inside preamble", file.size());
  for (std::size_t i = 0; i < 4; ++i) {
    if (file[i] != static_cast<std::byte>(magic[i])) {
      throw FormatError("bad magic, expected '" + std::string(magic.data(), 4) + "'", i);
    }
  }
  const auto ver = get_le<std::uint32_t>(file.data() + 4);
  if (ver != version) {
    throw FormatError("unsupported version " + std::to_string(ver) + " (expected " + std::to_string(version) + ")", 4);
  }
  const auto header_len = get_le<std::uint64_t>(file.data() + 8);
  if (header_len > file.size() - kPreamble || file.size() - kPreamble - header_len < kDigest) {
    throw FormatError("header length " + std::to_string(header_len) + " exceeds file size", 8);
  }
  const std::string text(reinterpret_cast<const char*>(file.data() + kPreamble), header_len);
  const std::size_t digest_offset = kPreamble + header_len;
  const auto expected = digest_bytes(sha256_hex(text));
  if (!std::equal(expected.begin(), expected.end(), file.begin() + static_cast<std::ptrdiff_t>(digest_offset))) {
    throw FormatError("header checksum mismatch", kPreamble);
  }
  ContainerContents out;
  try {
    out.header = parse_key_values(text);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed header: ") + e.what(), kPreamble);
  }
  out.payload_offset = digest_offset + kDigest;
  std::size_t payload_bytes = 0;
  try {
    payload_bytes = parse_size_value("payload_bytes", header_value(out.header, "payload_bytes", kPreamble));
  } catch (const ConfigError& e) {
    throw FormatError(e.what(), kPreamble);
  }
  const std::size_t available = file.size() - out.payload_offset;
  if (available < payload_bytes) {
    throw FormatError("payload truncated: " + std::to_string(available) + " of " + std::to_string(payload_bytes) +
                          " bytes present",
                      file.size());
  }
  if (available > payload_bytes) throw FormatError("trailing bytes after payload", out.payload_offset + payload_bytes);
  out.payload.assign(file.begin() + static_cast<std::ptrdiff_t>(out.payload_offset), file.end());
  if (sha256_hex(std::span<const std::byte>(out.payload)) != header_value(out.header, "payload_sha256", kPreamble)) {
    throw FormatError("payload checksum mismatch", out.payload_offset);
  }
  return out;
}

const std::string& header_value(const KeyValues& header, const std::string& key, std::size_t header_offset) {
  for (const auto& [k, v] : header) {
    if (k == key) return v;
  }
  throw FormatError("header lacks key '" + key + "'", header_offset);
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::byte>& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::vector<std::byte> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw DataError("cannot open " + path.string());
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0);
  std::vector<std::byte> out(size);
  in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
  if (!in) throw DataError("read failed for " + path.string());
  return out;
}

}  // namespace omnic::detail
