#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "omnic/encoder.hpp"
#include "omnic/kv.hpp"

namespace omnic {

/// One named buffer: dtype "f32", "f64" or "i64", little-endian bytes.
struct CheckpointTensor {
  std::string name;
  std::string dtype;
  Shape shape;
  std::vector<std::byte> bytes;
};

/// In-memory form of an "OMNC" file. `meta` carries free-form run details
/// such as the seed; `adapter_alpha` maps an adapted layer name to its alpha.
struct Checkpoint {
  EncoderConfig config;
  KeyValues meta;
  KeyValues adapter_alpha;
  std::vector<CheckpointTensor> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Every parameter in named_parameters order, plus "sbora.<layer>.idx" (i64)
/// for each adapter.
Checkpoint make_checkpoint(const OmniEncoder<float>& enc, KeyValues meta = {});

/// Rebuilds the encoder, adapters included. Throws FormatError when tensors are
/// missing, unexpected or mis-shaped.
OmniEncoder<float> restore_encoder(const Checkpoint& ckpt);

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::byte>& file);

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Meta value or `fallback` when absent.
std::string checkpoint_meta(const Checkpoint& ckpt, const std::string& key, const std::string& fallback = "");

}  // namespace omnic
