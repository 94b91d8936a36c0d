#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "omnic/encoder_config.hpp"
#include "omnic/linear.hpp"
#include "omnic/modality.hpp"
#include "omnic/tape.hpp"
#include "omnic/tensor.hpp"

namespace omnic {

template <typename T>
struct LayerNormParams {
  Tensor<T> gain;
  Tensor<T> bias;
};

/// Pre-norm Transformer block: x += attn(norm1(x)); x += mlp(norm2(x)).
template <typename T>
struct Block {
  LayerNormParams<T> norm1;
  Linear<T> query;
  Linear<T> key;
  Linear<T> value;
  Linear<T> out;
  LayerNormParams<T> norm2;
  Linear<T> mlp_up;
  Linear<T> mlp_down;
};

/// Two-layer MLP d → d → p with ReLU in between.
template <typename T>
struct ProjectionHead {
  Linear<T> fc1;
  Linear<T> fc2;
};

/// Full parameter set of the unified encoder.
///
/// The backbone (cls_token, blocks, final_norm) is shared by every modality;
/// only the embedders and the projection heads are modality specific. In
/// shared head mode `heads` holds a single head.
template <typename T>
struct OmniEncoder {
  EncoderConfig config;
  Linear<T> image_embed;  // 3·h·w → d
  Linear<T> audio_embed;  // h·w → d
  Tensor<T> text_embed;   // [vocab, d]
  Tensor<T> cls_token;    // [d]
  std::vector<Block<T>> blocks;
  LayerNormParams<T> final_norm;
  std::vector<ProjectionHead<T>> heads;

  /// Seeded initialisation: linear maps and embedders U(±1/√fan_in), CLS
  /// token N(0, 0.02²), norms gain 1 / bias 0.
  static OmniEncoder init(const EncoderConfig& config, std::uint64_t seed);

  const ProjectionHead<T>& head_for(Modality m) const;
};

template <typename T>
struct NamedParam {
  std::string name;
  Tensor<T> tensor;
};

enum class ParamGroup { kAll, kBackbone, kEmbedders, kHeads };

/// Handles to parameters in a fixed order, named like "blocks.0.attn.query.weight".
/// SBoRA factors appear as "sbora.<layer>.B" after the weights they adapt.
template <typename T>
std::vector<NamedParam<T>> named_parameters(const OmniEncoder<T>& enc, ParamGroup group = ParamGroup::kAll);

/// Every Linear in the blocks, with its layer name ("blocks.<i>.attn.query", ...).
template <typename T>
void for_each_block_linear(OmniEncoder<T>& enc, const std::function<void(const std::string&, Linear<T>&)>& fn);

/// Sets requires_grad on every parameter (adapters included).
template <typename T>
void set_trainable(OmniEncoder<T>& enc, bool trainable);

/// Non-overlapping patch embedding for an image or audio batch; [B, ps, d]
/// with tokens in row-major grid order.
template <typename T>
Tensor<T> patchify_embed(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch);

/// Token lookup for a text batch; [B, L, d].
template <typename T>
Tensor<T> token_embed(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch);

struct EncodeOptions {
  bool capture_attention = false;
};

template <typename T>
struct EncodeOutput {
  Tensor<T> cls;             // [B, d]
  Tensor<T> last_attention;  // [B, heads, S, S] when captured (S = tokens + 1)
};

/// CLS representation of a single-modality batch.
template <typename T>
EncodeOutput<T> encode_with(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch,
                            const EncodeOptions& options);

template <typename T>
Tensor<T> encode(Tape<T>& tape, const OmniEncoder<T>& enc, std::span<const ModalitySample> batch) {
  return encode_with(tape, enc, batch, EncodeOptions{}).cls;
}

/// Projection head for the modality (the single head in shared mode); [B, p].
template <typename T>
Tensor<T> project(Tape<T>& tape, const OmniEncoder<T>& enc, const Tensor<T>& cls, Modality modality);

/// Frozen-inference CLS features for many samples, one row per sample.
/// Batches internally by `chunk` and requires a homogeneous modality.
std::vector<std::vector<float>> extract_features(const OmniEncoder<float>& enc,
                                                 std::span<const ModalitySample> samples,
                                                 std::size_t chunk = 64);

/// Deep copy: no handles shared with the source.
template <typename T>
OmniEncoder<T> clone_encoder(const OmniEncoder<T>& enc);

template <typename U, typename T>
OmniEncoder<U> cast_encoder(const OmniEncoder<T>& enc);

}  // namespace omnic
