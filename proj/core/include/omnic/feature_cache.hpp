#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "omnic/modality.hpp"

namespace omnic {

struct FeatureRow {
  std::int64_t id = 0;      // pair_id when present, otherwise row index
  std::int32_t label = -1;  // -1 when unlabeled
  std::vector<float> values;
  bool operator==(const FeatureRow&) const = default;
};

/// In-memory form of an "OMNF" file: frozen CLS features of one modality.
struct FeatureCache {
  Modality modality = Modality::kImage;
  std::size_t dim = 0;
  bool has_labels = false;
  bool has_pair_ids = false;
  std::vector<FeatureRow> rows;

  bool operator==(const FeatureCache&) const = default;
};

inline constexpr std::uint32_t kFeatureCacheVersion = 1;

/// Rows are (i64 id, i32 label, dim × f32), little-endian. Throws DimensionError
/// when a row length differs from dim.
std::vector<std::byte> encode_feature_cache(const FeatureCache& cache);
/// Throws FormatError with a byte offset on any corruption.
FeatureCache decode_feature_cache(const std::vector<std::byte>& file);

void write_feature_cache(const FeatureCache& cache, const std::filesystem::path& path);
FeatureCache read_feature_cache(const std::filesystem::path& path);

}  // namespace omnic
