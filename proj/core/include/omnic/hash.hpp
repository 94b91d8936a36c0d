#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "omnic/encoder.hpp"

namespace omnic {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);
std::string file_sha256(const std::filesystem::path& path);

/// SHA-256 over name, shape and raw bytes of every parameter in the group,
/// in named_parameters order.
std::string parameter_hash(const OmniEncoder<float>& enc, ParamGroup group = ParamGroup::kAll);

inline std::string backbone_hash(const OmniEncoder<float>& enc) { return parameter_hash(enc, ParamGroup::kBackbone); }

}  // namespace omnic
