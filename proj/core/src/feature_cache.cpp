#include "omnic/feature_cache.hpp"

#include "container.hpp"
#include "omnic/errors.hpp"

namespace omnic {
namespace {

constexpr std::array<char, 4> kMagic{'O', 'M', 'N', 'F'};
constexpr std::size_t kHeaderOffset = 16;

}  // namespace

std::vector<std::byte> encode_feature_cache(const FeatureCache& cache) {
  const KeyValues header{
      {"format", "omnic-feature-cache"},
      {"modality", modality_name(cache.modality)},
      {"dim", std::to_string(cache.dim)},
      {"rows", std::to_string(cache.rows.size())},
      {"has_labels", cache.has_labels ? "1" : "0"},
      {"has_pair_ids", cache.has_pair_ids ? "1" : "0"},
  };
  std::vector<std::byte> payload;
  payload.reserve(cache.rows.size() * (12 + 4 * cache.dim));
  for (std::size_t i = 0; i < cache.rows.size(); ++i) {
    const auto& r = cache.rows[i];
    if (r.values.size() != cache.dim) {
      throw DimensionError("feature row " + std::to_string(i) + " has " + std::to_string(r.values.size()) +
                           " values, cache dim is " + std::to_string(cache.dim));
    }
    detail::put_le<std::int64_t>(payload, r.id);
    detail::put_le<std::int32_t>(payload, r.label);
    for (float v : r.values) detail::put_le<float>(payload, v);
  }
  return detail::encode_container(kMagic, kFeatureCacheVersion, header, payload);
}

FeatureCache decode_feature_cache(const std::vector<std::byte>& file) {
  const auto contents = detail::decode_container(file, kMagic, kFeatureCacheVersion);
  FeatureCache cache;
  std::size_t rows = 0;
  try {
    const auto& h = contents.header;
    cache.modality = parse_modality(detail::header_value(h, "modality", kHeaderOffset));
    cache.dim = parse_size_value("dim", detail::header_value(h, "dim", kHeaderOffset));
    rows = parse_size_value("rows", detail::header_value(h, "rows", kHeaderOffset));
    cache.has_labels = parse_bool_value("has_labels", detail::header_value(h, "has_labels", kHeaderOffset));
    cache.has_pair_ids = parse_bool_value("has_pair_ids", detail::header_value(h, "has_pair_ids", kHeaderOffset));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& e) {
    throw FormatError(std::string("bad header value: ") + e.what(), kHeaderOffset);
  }
  const std::size_t stride = 12 + 4 * cache.dim;
  if (contents.payload.size() != rows * stride) {
    throw FormatError("payload holds " + std::to_string(contents.payload.size()) + " bytes, header promises " +
                          std::to_string(rows) + " rows of " + std::to_string(stride),
                      contents.payload_offset);
  }
  cache.rows.resize(rows);
  const std::byte* p = contents.payload.data();
  for (auto& r : cache.rows) {
    r.id = detail::get_le<std::int64_t>(p);
    r.label = detail::get_le<std::int32_t>(p + 8);
    r.values.resize(cache.dim);
    for (std::size_t j = 0; j < cache.dim; ++j) r.values[j] = detail::get_le<float>(p + 12 + 4 * j);
    p += stride;
  }
  return cache;
}

void write_feature_cache(const FeatureCache& cache, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_feature_cache(cache));
}

FeatureCache read_feature_cache(const std::filesystem::path& path) {
  return decode_feature_cache(detail::read_file(path));
}

}  // namespace omnic
