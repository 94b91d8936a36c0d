#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "omnic/modality.hpp"

namespace omnic {

inline constexpr std::uint32_t kSampleStoreVersion = 1;

/// "OMNS" file holding a homogeneous sample list: per sample an i32 label
/// (−1 absent), an i64 pair_id (−1 absent) and the payload (f32 pixels or
/// spectrogram values, i32 token ids) at the extents given in the header.
std::vector<std::byte> encode_sample_store(std::span<const ModalitySample> samples);
std::vector<ModalitySample> decode_sample_store(const std::vector<std::byte>& file);

void write_sample_store(std::span<const ModalitySample> samples, const std::filesystem::path& path);
std::vector<ModalitySample> read_sample_store(const std::filesystem::path& path);

}  // namespace omnic
