#include "omnic/checkpoint.hpp"

#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "container.hpp"
#include "omnic/errors.hpp"

namespace omnic {
namespace {

constexpr std::array<char, 4> kMagic{'O', 'M', 'N', 'C'};
constexpr std::size_t kHeaderOffset = 16;

std::vector<std::byte> float_bytes(const TensorF& t) {
  std::vector<std::byte> out;
  out.reserve(t.numel() * 4);
  for (float v : t.data()) detail::put_le<float>(out, v);
  return out;
}

std::string dims_text(const Shape& s) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out;
}

Shape parse_dims(const std::string& text) {
  Shape out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = text.find(',', pos);
    const std::string part = text.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    out.push_back(parse_size_value("shape", part));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::size_t dtype_bytes(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64" || dtype == "i64") return 8;
  return 0;
}

}  // namespace

Checkpoint make_checkpoint(const OmniEncoder<float>& enc, KeyValues meta) {
  Checkpoint ckpt{enc.config, std::move(meta), {}, {}};
  for (const auto& p : named_parameters(enc)) {
    ckpt.tensors.push_back({p.name, "f32", p.tensor.shape(), float_bytes(p.tensor)});
  }
  auto& mutable_enc = const_cast<OmniEncoder<float>&>(enc);
  for_each_block_linear<float>(mutable_enc, [&](const std::string& name, Linear<float>& lin) {
    if (!lin.adapter) return;
    CheckpointTensor idx{"sbora." + name + ".idx", "i64", {lin.adapter->basis_indices.size()}, {}};
    for (std::size_t i : lin.adapter->basis_indices) detail::put_le<std::int64_t>(idx.bytes, static_cast<std::int64_t>(i));
    ckpt.tensors.push_back(std::move(idx));
    ckpt.adapter_alpha.emplace_back(name, format_double(lin.adapter->alpha));
  });
  return ckpt;
}

OmniEncoder<float> restore_encoder(const Checkpoint& ckpt) {
  try {
    ckpt.config.validate();
  } catch (const ConfigError& e) {
    throw FormatError(std::string("invalid config in checkpoint: ") + e.what(), kHeaderOffset);
  }
  std::map<std::string, const CheckpointTensor*> by_name;
  for (const auto& t : ckpt.tensors) {
    if (!by_name.emplace(t.name, &t).second) throw FormatError("duplicate tensor " + t.name, kHeaderOffset);
  }
  std::map<std::string, double> alphas;
  for (const auto& [layer, text] : ckpt.adapter_alpha) {
    alphas[layer] = parse_double_value("adapter." + layer + ".alpha", text);
  }

  OmniEncoder<float> enc = OmniEncoder<float>::init(ckpt.config, 0);
  std::set<std::string> used;
  for_each_block_linear<float>(enc, [&](const std::string& name, Linear<float>& lin) {
    const auto it = by_name.find("sbora." + name + ".idx");
    if (it == by_name.end()) return;
    const CheckpointTensor& t = *it->second;
    if (t.dtype != "i64" || t.shape.size() != 1 || t.bytes.size() != t.shape[0] * 8) {
      throw FormatError("bad index tensor " + t.name, kHeaderOffset);
    }
    const auto alpha = alphas.find(name);
    if (alpha == alphas.end()) throw FormatError("missing alpha for adapter " + name, kHeaderOffset);
    SBoRAAdapter<float> adapter;
    adapter.rank = t.shape[0];
    adapter.alpha = alpha->second;
    for (std::size_t i = 0; i < adapter.rank; ++i) {
      const auto v = detail::get_le<std::int64_t>(t.bytes.data() + 8 * i);
      if (v < 0 || static_cast<std::size_t>(v) >= lin.in_features()) {
        throw FormatError("basis index out of range in " + t.name, kHeaderOffset);
      }
      adapter.basis_indices.push_back(static_cast<std::size_t>(v));
    }
    adapter.B = TensorF::zeros({lin.out_features(), adapter.rank});
    adapter.B.set_requires_grad(true);
    lin.adapter = std::move(adapter);
    used.insert(t.name);
  });

  for (auto& p : named_parameters(enc)) {
    const auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint lacks tensor " + p.name, kHeaderOffset);
    const CheckpointTensor& t = *it->second;
    if (t.dtype != "f32" || t.shape != p.tensor.shape() || t.bytes.size() != p.tensor.numel() * 4) {
      throw FormatError("tensor " + p.name + " has " + t.dtype + " " + shape_str(t.shape) + ", expected f32 " +
                            shape_str(p.tensor.shape()),
                        kHeaderOffset);
    }
    auto data = p.tensor.data();
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = detail::get_le<float>(t.bytes.data() + 4 * i);
    used.insert(p.name);
  }
  for (const auto& t : ckpt.tensors) {
    if (!used.count(t.name)) throw FormatError("unexpected tensor " + t.name, kHeaderOffset);
  }
  return enc;
}

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  KeyValues header{{"format", "omnic-checkpoint"}};
  for (const auto& [k, v] : encoder_config_entries(ckpt.config)) header.emplace_back("config." + k, v);
  for (const auto& [k, v] : ckpt.meta) header.emplace_back("meta." + k, v);
  for (const auto& [k, v] : ckpt.adapter_alpha) header.emplace_back("adapter." + k + ".alpha", v);
  header.emplace_back("tensor_count", std::to_string(ckpt.tensors.size()));
  std::vector<std::byte> payload;
  for (std::size_t i = 0; i < ckpt.tensors.size(); ++i) {
    const auto& t = ckpt.tensors[i];
    header.emplace_back("tensor." + std::to_string(i), t.name + " " + t.dtype + " " + dims_text(t.shape) + " " +
                                                           std::to_string(payload.size()) + " " +
                                                           std::to_string(t.bytes.size()));
    payload.insert(payload.end(), t.bytes.begin(), t.bytes.end());
  }
  return detail::encode_container(kMagic, kCheckpointVersion, header, payload);
}

Checkpoint decode_checkpoint(const std::vector<std::byte>& file) {
  const auto contents = detail::decode_container(file, kMagic, kCheckpointVersion);
  Checkpoint ckpt;
  std::size_t count = 0;
  std::map<std::size_t, std::string> entries;
  try {
    for (const auto& [k, v] : contents.header) {
      if (k.rfind("config.", 0) == 0) {
        if (!set_encoder_config_entry(ckpt.config, k.substr(7), v)) {
          throw FormatError("unknown config key " + k, kHeaderOffset);
        }
      } else if (k.rfind("meta.", 0) == 0) {
        ckpt.meta.emplace_back(k.substr(5), v);
      } else if (k.rfind("adapter.", 0) == 0 && k.size() > 14 && k.ends_with(".alpha")) {
        ckpt.adapter_alpha.emplace_back(k.substr(8, k.size() - 8 - 6), v);
      } else if (k == "tensor_count") {
        count = parse_size_value(k, v);
      } else if (k.rfind("tensor.", 0) == 0) {
        entries[parse_size_value(k, k.substr(7))] = v;
      }
    }
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad header value: ") + e.what(), kHeaderOffset);
  }
  if (entries.size() != count) throw FormatError("tensor index does not match tensor_count", kHeaderOffset);
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < count; ++i) {
    const auto it = entries.find(i);
    if (it == entries.end()) throw FormatError("tensor index lacks entry " + std::to_string(i), kHeaderOffset);
    std::istringstream fields(it->second);
    std::string name, dtype, dims;
    std::size_t offset = 0, length = 0;
    if (!(fields >> name >> dtype >> dims >> offset >> length)) {
      throw FormatError("malformed tensor entry " + std::to_string(i), kHeaderOffset);
    }
    CheckpointTensor t{name, dtype, {}, {}};
    try {
      t.shape = parse_dims(dims);
    } catch (const ConfigError&) {
      throw FormatError("malformed shape for tensor " + name, kHeaderOffset);
    }
    if (dtype_bytes(dtype) == 0 || length != shape_numel(t.shape) * dtype_bytes(dtype)) {
      throw FormatError("tensor " + name + " length disagrees with dtype and shape", kHeaderOffset);
    }
    if (offset != expected_offset || offset + length > contents.payload.size()) {
      throw FormatError("tensor " + name + " offset out of order or past payload", contents.payload_offset + offset);
    }
    t.bytes.assign(contents.payload.begin() + static_cast<std::ptrdiff_t>(offset),
                   contents.payload.begin() + static_cast<std::ptrdiff_t>(offset + length));
    expected_offset = offset + length;
    ckpt.tensors.push_back(std::move(t));
  }
  if (expected_offset != contents.payload.size()) {
    throw FormatError("payload has bytes not covered by the tensor index", contents.payload_offset + expected_offset);
  }
  return ckpt;
}

void write_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  detail::write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(detail::read_file(path)); }

std::string checkpoint_meta(const Checkpoint& ckpt, const std::string& key, const std::string& fallback) {
  for (const auto& [k, v] : ckpt.meta) {
    if (k == key) return v;
  }
  return fallback;
}

}  // namespace omnic
