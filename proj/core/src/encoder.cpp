#include "omnic/encoder.hpp"

#include <cmath>
#include <random>

#include "omnic/errors.hpp"
#include "omnic/ops.hpp"
#include "omnic/positional.hpp"

namespace omnic {
namespace {

template <typename T>
LayerNormParams<T> unit_norm(std::size_t d) {
  return {Tensor<T>::full({d}, T{1}, true), Tensor<T>::zeros({d}, true)};
}

const char* head_name(const EncoderConfig& config, std::size_t index) {
  if (config.head_mode == HeadMode::kShared) return "shared";
  return modality_name(static_cast<Modality>(index));
}

template <typename T>
void push_linear(std::vector<NamedParam<T>>& out, const std::string& name, const Linear<T>& lin) {
  out.push_back({name + ".weight", lin.weight});
  out.push_back({name + ".bias", lin.bias});
  if (lin.adapter) out.push_back({"sbora." + name + ".B", lin.adapter->B});
}

template <typename T, typename U, typename F>
Linear<U> map_linear(const Linear<T>& lin, F& f) {
  Linear<U> out{f(lin.weight), f(lin.bias), std::nullopt};
  if (lin.adapter) {
    out.adapter = SBoRAAdapter<U>{lin.adapter->rank, lin.adapter->alpha, lin.adapter->basis_indices,
                                  f(lin.adapter->B)};
  }
  return out;
}

template <typename T, typename U, typename F>
LayerNormParams<U> map_norm(const LayerNormParams<T>& n, F& f) {
  return {f(n.gain), f(n.bias)};
}

template <typename U, typename T, typename F>
OmniEncoder<U> map_encoder(const OmniEncoder<T>& enc, F f) {
  OmniEncoder<U> out;
  out.config = enc.config;
  out.image_embed = map_linear<T, U>(enc.image_embed, f);
  out.audio_embed = map_linear<T, U>(enc.audio_embed, f);
  out.text_embed = f(enc.text_embed);
  out.cls_token = f(enc.cls_token);
  for (const Block<T>& b : enc.blocks) {
    out.blocks.push_back(Block<U>{map_norm<T, U>(b.norm1, f), map_linear<T, U>(b.query, f),
                                  map_linear<T, U>(b.key, f), map_linear<T, U>(b.value, f),
                                  map_linear<T, U>(b.out, f), map_norm<T, U>(b.norm2, f),
                                  map_linear<T, U>(b.mlp_up, f), map_linear<T, U>(b.mlp_down, f)});
  }
  out.final_norm = map_norm<T, U>(enc.final_norm, f);
  for (const ProjectionHead<T>& h : enc.heads) {
    out.heads.push_back(ProjectionHead<U>{map_linear<T, U>(h.fc1, f), map_linear<T, U>(h.fc2, f)});
  }
  return out;
}

// Splits [B, S, d] into per-head [B·H, S, dh].
template <typename T>
Tensor<T> split_heads(Tape<T>& tape, const Tensor<T>& x, std::size_t batch, std::size_t seq, std::size_t heads,
                      std::size_t head_dim) {
  Tensor<T> r = ops::reshape(tape, x, {batch, seq, heads, head_dim});
  r = ops::transpose(tape, r, 1, 2);
  return ops::reshape(tape, r, {batch * heads, seq, head_dim});
}

template <typename T>
Tensor<T> merge_heads(Tape<T>& tape, const Tensor<T>& x, std::size_t batch, std::size_t seq, std::size_t heads,
                      std::size_t head_dim) {
  Tensor<T> r = ops::reshape(tape, x, {batch, heads, seq, head_dim});
  r = ops::transpose(tape, r, 1, 2);
  return ops::reshape(tape, r, {batch, seq, heads * head_dim});
}

template <typename T>
Tensor<T> run_block(Tape<T>& tape, const Block<T>& blk, const EncoderConfig& cfg, const Tensor<T>& x,
                    Tensor<T>* attention_out) {
  const std::size_t batch = x.dim(0);
  const std::size_t seq = x.dim(1);
  const std::size_t d = cfg.embed_dim;
  const std::size_t heads = cfg.n_heads;
  const std::size_t head_dim = d / heads;
  const T eps = static_cast<T>(cfg.norm_eps);

  Tensor<T> h = ops::layer_norm(tape, x, blk.norm1.gain, blk.norm1.bias, eps);
  Tensor<T> q = split_heads(tape, blk.query.forward(tape, h), batch, seq, heads, head_dim);
  Tensor<T> k = split_heads(tape, blk.key.forward(tape, h), batch, seq, heads, head_dim);
  Tensor<T> v = split_heads(tape, blk.value.forward(tape, h), batch, seq, heads, head_dim);
  Tensor<T> scores = ops::scale(tape, ops::matmul(tape, q, k, /*transpose_b=*/true),
                                static_cast<T>(1.0 / std::sqrt(static_cast<double>(head_dim))));
  Tensor<T> attn = ops::softmax_lastdim(tape, scores);
  if (attention_out) *attention_out = Tensor<T>({batch, heads, seq, seq}, std::vector<T>(attn.data().begin(), attn.data().end()));
  Tensor<T> ctx = merge_heads(tape, ops::matmul(tape, attn, v), batch, seq, heads, head_dim);
  Tensor<T> y = ops::add(tape, x, blk.out.forward(tape, ctx));

  Tensor<T> h2 = ops::layer_norm(tape, y, blk.norm2.gain, blk.norm2.bias, eps);
  Tensor<T> m = blk.mlp_down.forward(tape, ops::gelu(tape, blk.mlp_up.forward(tape, h2)));
  return ops::add(tape, y, m);
}

}  // namespace

template <typename T>
OmniEncoder<T> OmniEncoder<T>::init(const EncoderConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config.embed_dim;
  OmniEncoder<T> enc;
  enc.config = config;
  enc.image_embed = Linear<T>::init(3 * config.image_patch_h * config.image_patch_w, d, rng);
  enc.audio_embed = Linear<T>::init(config.audio_patch_h * config.audio_patch_w, d, rng);
  {
    // The lookup table is the one-hot linear map, so fan_in is the vocabulary size.
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.vocab_size));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<T> table(config.vocab_size * d);
    for (T& v : table) v = static_cast<T>(dist(rng));
    enc.text_embed = Tensor<T>({config.vocab_size, d}, std::move(table), true);
  }
  {
    std::normal_distribution<double> dist(0.0, 0.02);
    std::vector<T> cls(d);
    for (T& v : cls) v = static_cast<T>(dist(rng));
    enc.cls_token = Tensor<T>({d}, std::move(cls), true);
  }
  const std::size_t hidden = config.mlp_hidden();
  for (std::size_t i = 0; i < config.n_layers; ++i) {
    Block<T> b{unit_norm<T>(d),
               Linear<T>::init(d, d, rng),
               Linear<T>::init(d, d, rng),
               Linear<T>::init(d, d, rng),
               Linear<T>::init(d, d, rng),
               unit_norm<T>(d),
               Linear<T>::init(d, hidden, rng),
               Linear<T>::init(hidden, d, rng)};
    enc.blocks.push_back(std::move(b));
  }
  enc.final_norm = unit_norm<T>(d);
  for (std::size_t i = 0; i < config.head_count(); ++i) {
    ProjectionHead<T> h{Linear<T>::init(d, d, rng), Linear<T>::init(d, config.proj_dim, rng)};
    enc.heads.push_back(std::move(h));
  }
  return enc;
}

template <typename T>
const ProjectionHead<T>& OmniEncoder<T>::head_for(Modality m) const {
  const auto index = static_cast<std::size_t>(m);
  if (index > 2) throw ContractError("unknown modality tag " + std::to_string(index));
  if (config.head_mode == HeadMode::kShared) return heads.at(0);
  if (heads.size() != 3) throw StateError("separate head mode needs 3 heads, found " + std::to_string(heads.size()));
  return heads[index];
}

template <typename T>
std::vector<NamedParam<T>> named_parameters(const OmniEncoder<T>& enc, ParamGroup group) {
  std::vector<NamedParam<T>> out;
  const bool all = group == ParamGroup::kAll;
  if (all || group == ParamGroup::kEmbedders) {
    push_linear(out, "image_embed", enc.image_embed);
    push_linear(out, "audio_embed", enc.audio_embed);
    out.push_back({"text_embed.weight", enc.text_embed});
  }
  if (all || group == ParamGroup::kBackbone) {
    out.push_back({"cls_token", enc.cls_token});
    for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
      const Block<T>& b = enc.blocks[i];
      const std::string p = "blocks." + std::to_string(i);
      out.push_back({p + ".norm1.gain", b.norm1.gain});
      out.push_back({p + ".norm1.bias", b.norm1.bias});
      push_linear(out, p + ".attn.query", b.query);
      push_linear(out, p + ".attn.key", b.key);
      push_linear(out, p + ".attn.value", b.value);
      push_linear(out, p + ".attn.out", b.out);
      out.push_back({p + ".norm2.gain", b.norm2.gain});
      out.push_back({p + ".norm2.bias", b.norm2.bias});
      push_linear(out, p + ".mlp.up", b.mlp_up);
      push_linear(out, p + ".mlp.down", b.mlp_down);
    }
    out.push_back({"final_norm.gain", enc.final_norm.gain});
    out.push_back({"final_norm.bias", enc.final_norm.bias});
  }
  if (all || group == ParamGroup::kHeads) {
    for (std::size_t i = 0; i < enc.heads.size(); ++i) {
      const std::string p = std::string("heads.") + head_name(enc.config, i);
      push_linear(out, p + ".fc1", enc.heads[i].fc1);
      push_linear(out, p + ".fc2", enc.heads[i].fc2);
    }
  }
  return out;
}

template <typename T>
void for_each_block_linear(OmniEncoder<T>& enc, const std::function<void(const std::string&, Linear<T>&)>& fn) {
  for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
    Block<T>& b = enc.blocks[i];
    const std::string p = "blocks." + std::to_string(i);
    fn(p + ".attn.query", b.query);
    fn(p + ".attn.key", b.key);
    fn(p + ".attn.value", b.value);
    fn(p + ".attn.out", b.out);
    fn(p + ".mlp.up", b.mlp_up);
    fn(p + ".mlp.down", b.mlp_down);
  }
}

template <typename T>
void set_trainable(OmniEncoder<T>& enc, bool trainable) {
  for (NamedParam<T>& p : named_parameters(enc)) p.tensor.set_requires_grad(trainable);
}

template <typename T>
Tensor<T> patchify_embed(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch) {
  const Modality m = batch_modality(batch);
  const EncoderConfig& c = enc.config;
  if (m == Modality::kText) throw ContractError("patchify_embed: text samples use token_embed");
  const bool image = m == Modality::kImage;
  const std::size_t channels = image ? 3 : 1;
  const std::size_t height = image ? c.image_height : c.audio_frames;
  const std::size_t width = image ? c.image_width : c.audio_bins;
  const std::size_t ph = image ? c.image_patch_h : c.audio_patch_h;
  const std::size_t pw = image ? c.image_patch_w : c.audio_patch_w;
  if (height % ph != 0 || width % pw != 0) {
    throw ConfigError("input " + std::to_string(height) + "x" + std::to_string(width) +
                      " is not divisible by patch " + std::to_string(ph) + "x" + std::to_string(pw));
  }
  const std::size_t gh = height / ph;
  const std::size_t gw = width / pw;
  const std::size_t ps = gh * gw;
  const std::size_t patch_len = channels * ph * pw;

  std::vector<T> patches(batch.size() * ps * patch_len);
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const std::vector<float>* values = nullptr;
    if (image) {
      const ImagePayload& p = batch[b].image();
      if (p.height != height || p.width != width || p.pixels.size() != 3 * height * width) {
        throw DimensionError("image sample " + std::to_string(b) + " is " + std::to_string(p.height) + "x" +
                             std::to_string(p.width) + ", expected " + std::to_string(height) + "x" +
                             std::to_string(width));
      }
      values = &p.pixels;
    } else {
      const AudioPayload& p = batch[b].audio();
      if (p.frames != height || p.bins != width || p.values.size() != height * width) {
        throw DimensionError("audio sample " + std::to_string(b) + " is " + std::to_string(p.frames) + "x" +
                             std::to_string(p.bins) + ", expected " + std::to_string(height) + "x" +
                             std::to_string(width));
      }
      values = &p.values;
    }
    for (std::size_t gy = 0; gy < gh; ++gy) {
      for (std::size_t gx = 0; gx < gw; ++gx) {
        T* dst = patches.data() + ((b * ps) + gy * gw + gx) * patch_len;
        for (std::size_t ch = 0; ch < channels; ++ch) {
          for (std::size_t py = 0; py < ph; ++py) {
            const float* src = values->data() + ch * height * width + (gy * ph + py) * width + gx * pw;
            for (std::size_t px = 0; px < pw; ++px) *dst++ = static_cast<T>(src[px]);
          }
        }
      }
    }
  }
  Tensor<T> patch_matrix({batch.size() * ps, patch_len}, std::move(patches));
  const Linear<T>& embedder = image ? enc.image_embed : enc.audio_embed;
  return ops::reshape(tape, embedder.forward(tape, patch_matrix), {batch.size(), ps, c.embed_dim});
}

template <typename T>
Tensor<T> token_embed(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch) {
  if (batch_modality(batch) != Modality::kText) throw ContractError("token_embed: expects text samples");
  const std::size_t len = batch.front().text().ids.size();
  if (len == 0 || len > enc.config.text_len) {
    throw DimensionError("text length " + std::to_string(len) + " outside 1.." + std::to_string(enc.config.text_len));
  }
  std::vector<std::int32_t> ids;
  ids.reserve(batch.size() * len);
  for (const ModalitySample& s : batch) {
    const auto& t = s.text().ids;
    if (t.size() != len) throw ContractError("text batch mixes sequence lengths");
    ids.insert(ids.end(), t.begin(), t.end());
  }
  return ops::reshape(tape, ops::embedding(tape, enc.text_embed, std::span<const std::int32_t>(ids)),
                      {batch.size(), len, enc.config.embed_dim});
}

template <typename T>
EncodeOutput<T> encode_with(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch,
                            const EncodeOptions& options) {
  const Modality m = batch_modality(batch);
  const EncoderConfig& c = enc.config;
  const std::size_t d = c.embed_dim;
  Tensor<T> tokens;
  TensorD pe;
  if (m == Modality::kText) {
    tokens = token_embed(tape, enc, batch);
    pe = positional_encoding(PositionalKind::k1d, tokens.dim(1), 0, d);
  } else {
    tokens = patchify_embed(tape, enc, batch);
    pe = m == Modality::kImage ? positional_encoding(PositionalKind::k2d, c.image_grid_h(), c.image_grid_w(), d)
                               : positional_encoding(PositionalKind::k2d, c.audio_grid_h(), c.audio_grid_w(), d);
  }
  tokens = ops::add(tape, tokens, pe.template cast<T>());

  const std::size_t batch_size = batch.size();
  Tensor<T> cls = ops::expand_leading(tape, ops::reshape(tape, enc.cls_token, {1, d}), batch_size);
  Tensor<T> x = ops::concat(tape, std::vector<Tensor<T>>{cls, tokens}, 1);

  EncodeOutput<T> out;
  for (std::size_t i = 0; i < enc.blocks.size(); ++i) {
    const bool last = i + 1 == enc.blocks.size();
    x = run_block(tape, enc.blocks[i], c, x, options.capture_attention && last ? &out.last_attention : nullptr);
  }
  // Layer norm acts per token, so normalising only position 0 is exact.
  Tensor<T> first = ops::reshape(tape, ops::slice(tape, x, 1, 0, 1), {batch_size, d});
  out.cls = ops::layer_norm(tape, first, enc.final_norm.gain, enc.final_norm.bias, static_cast<T>(c.norm_eps));
  return out;
}

template <typename T>
Tensor<T> project(Tape<T>& tape, const OmniEncoder<T>& enc, const Tensor<T>& cls, Modality modality) {
  const ProjectionHead<T>& head = enc.head_for(modality);
  return head.fc2.forward(tape, ops::relu(tape, head.fc1.forward(tape, cls)));
}

std::vector<std::vector<float>> extract_features(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples,
                                                 std::size_t chunk) {
  std::vector<std::vector<float>> rows;
  rows.reserve(samples.size());
  if (chunk == 0) chunk = 1;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t n = std::min(chunk, samples.size() - start);
    Tape<float> tape = Tape<float>::no_grad();
    TensorF cls = encode(tape, enc, samples.subspan(start, n));
    const std::size_t d = cls.dim(1);
    auto data = cls.data();
    for (std::size_t i = 0; i < n; ++i) rows.emplace_back(data.begin() + i * d, data.begin() + (i + 1) * d);
  }
  return rows;
}

template <typename T>
OmniEncoder<T> clone_encoder(const OmniEncoder<T>& enc) {
  return map_encoder<T>(enc, [](const Tensor<T>& t) { return t.clone(); });
}

template <typename U, typename T>
OmniEncoder<U> cast_encoder(const OmniEncoder<T>& enc) {
  return map_encoder<U>(enc, [](const Tensor<T>& t) { return t.template cast<U>(); });
}

#define OMNIC_INSTANTIATE_ENCODER(T)                                                                          \
  template struct OmniEncoder<T>;                                                                             \
  template std::vector<NamedParam<T>> named_parameters(const OmniEncoder<T>&, ParamGroup);                    \
  template void for_each_block_linear(OmniEncoder<T>&, const std::function<void(const std::string&, Linear<T>&)>&); \
  template void set_trainable(OmniEncoder<T>&, bool);                                                         \
  template Tensor<T> patchify_embed(Tape<T>&, const OmniEncoder<T>&, std::span<const ModalitySample>);        \
  template Tensor<T> token_embed(Tape<T>&, const OmniEncoder<T>&, std::span<const ModalitySample>);           \
  template EncodeOutput<T> encode_with(Tape<T>&, const OmniEncoder<T>&, std::span<const ModalitySample>,      \
                                       const EncodeOptions&);                                                 \
  template Tensor<T> project(Tape<T>&, const OmniEncoder<T>&, const Tensor<T>&, Modality);                    \
  template OmniEncoder<T> clone_encoder(const OmniEncoder<T>&);

OMNIC_INSTANTIATE_ENCODER(float)
OMNIC_INSTANTIATE_ENCODER(double)
#undef OMNIC_INSTANTIATE_ENCODER

template OmniEncoder<double> cast_encoder<double, float>(const OmniEncoder<float>&);
template OmniEncoder<float> cast_encoder<float, double>(const OmniEncoder<double>&);
template OmniEncoder<float> cast_encoder<float, float>(const OmniEncoder<float>&);
template OmniEncoder<double> cast_encoder<double, double>(const OmniEncoder<double>&);

}  // namespace omnic
