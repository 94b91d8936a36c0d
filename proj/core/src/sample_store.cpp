#include "omnic/sample_store.hpp"

#include "container.hpp"
#include "omnic/errors.hpp"

namespace omnic {
namespace {

constexpr std::array<char, 4> kMagic{'O', 'M', 'N', 'S'};
constexpr std::size_t kHeaderOffset = 16;

struct Extents {
  std::size_t a = 0;  // height / frames / length
  std::size_t b = 0;  // width / bins / 1
};

Extents extents_of(const ModalitySample& s) {
  switch (s.modality()) {
    case Modality::kImage:
      return {s.image().height, s.image().width};
    case Modality::kAudio:
      return {s.audio().frames, s.audio().bins};
    case Modality::kText:
      return {s.text().ids.size(), 1};
  }
  return {};
}

std::size_t values_per_sample(Modality m, const Extents& e) { return (m == Modality::kImage ? 3 : 1) * e.a * e.b; }

}  // namespace

std::vector<std::byte> encode_sample_store(std::span<const ModalitySample> samples) {
  const Modality m = samples.empty() ? Modality::kImage : batch_modality(samples);
  const Extents e = samples.empty() ? Extents{} : extents_of(samples.front());
  std::vector<std::byte> payload;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const Extents se = extents_of(s);
    if (se.a != e.a || se.b != e.b) throw DimensionError("sample " + std::to_string(i) + " differs in extent");
    detail::put_le<std::int32_t>(payload, s.label.value_or(-1));
    detail::put_le<std::int64_t>(payload, s.pair_id.value_or(-1));
    switch (m) {
      case Modality::kImage:
        for (float v : s.image().pixels) detail::put_le<float>(payload, v);
        break;
      case Modality::kAudio:
        for (float v : s.audio().values) detail::put_le<float>(payload, v);
        break;
      case Modality::kText:
        for (std::int32_t v : s.text().ids) detail::put_le<std::int32_t>(payload, v);
        break;
    }
  }
  const KeyValues header{{"format", "omnic-sample-store"},
                         {"modality", modality_name(m)},
                         {"count", std::to_string(samples.size())},
                         {"extent_a", std::to_string(e.a)},
                         {"extent_b", std::to_string(e.b)}};
  return detail::encode_container(kMagic, kSampleStoreVersion, header, payload);
}

std::vector<ModalitySample> decode_sample_store(const std::vector<std::byte>& file) {
  const auto contents = detail::decode_container(file, kMagic, kSampleStoreVersion);
  Modality m;
  std::size_t count = 0;
  Extents e;
  try {
    const auto& h = contents.header;
    m = parse_modality(detail::header_value(h, "modality", kHeaderOffset));
    count = parse_size_value("count", detail::header_value(h, "count", kHeaderOffset));
    e.a = parse_size_value("extent_a", detail::header_value(h, "extent_a", kHeaderOffset));
    e.b = parse_size_value("extent_b", detail::header_value(h, "extent_b", kHeaderOffset));
  } catch (const FormatError&) {
    throw;
  } catch (const std::exception& ex) {
    throw FormatError(std::string("bad header value: ") + ex.what(), kHeaderOffset);
  }
  const std::size_t nv = values_per_sample(m, e);
  const std::size_t stride = 12 + 4 * nv;
  if (contents.payload.size() != count * stride) {
    throw FormatError("payload size disagrees with sample count", contents.payload_offset);
  }
  std::vector<ModalitySample> out;
  out.reserve(count);
  const std::byte* p = contents.payload.data();
  for (std::size_t i = 0; i < count; ++i, p += stride) {
    ModalitySample s;
    const auto label = detail::get_le<std::int32_t>(p);
    const auto pair = detail::get_le<std::int64_t>(p + 4);
    if (label >= 0) s.label = label;
    if (pair >= 0) s.pair_id = pair;
    const std::byte* v = p + 12;
    if (m == Modality::kText) {
      TextPayload t{std::vector<std::int32_t>(nv)};
      for (std::size_t j = 0; j < nv; ++j) t.ids[j] = detail::get_le<std::int32_t>(v + 4 * j);
      s.payload = std::move(t);
    } else {
      std::vector<float> vals(nv);
      for (std::size_t j = 0; j < nv; ++j) vals[j] = detail::get_le<float>(v + 4 * j);
      if (m == Modality::kImage) {
        s.payload = ImagePayload{e.a, e.b, std::move(vals)};
      } else {
        s.payload = AudioPayload{e.a, e.b, std::move(vals)};
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

void write_sample_store(std::span<const ModalitySample> samples, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_sample_store(samples));
}

std::vector<ModalitySample> read_sample_store(const std::filesystem::path& path) {
  return decode_sample_store(detail::read_file(path));
}

}  // namespace omnic
