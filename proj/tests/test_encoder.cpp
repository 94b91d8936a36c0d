#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omnic/encoder.hpp"
#include "omnic/errors.hpp"
#include "omnic/ops.hpp"
#include "omnic/positional.hpp"
#include "support/oracles.hpp"

namespace omnic {
namespace {

ModalitySample image_sample(const EncoderConfig& c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ImagePayload p{c.image_height, c.image_width, std::vector<float>(3 * c.image_height * c.image_width)};
  for (float& v : p.pixels) v = u(rng);
  return ModalitySample{p, std::nullopt, std::nullopt};
}

ModalitySample audio_sample(const EncoderConfig& c, std::mt19937_64& rng) {
  std::normal_distribution<float> n(0.0f, 1.0f);
  AudioPayload p{c.audio_frames, c.audio_bins, std::vector<float>(c.audio_frames * c.audio_bins)};
  for (float& v : p.values) v = n(rng);
  return ModalitySample{p, std::nullopt, std::nullopt};
}

ModalitySample text_sample(std::vector<std::int32_t> ids) { return ModalitySample{TextPayload{std::move(ids)}, {}, {}}; }

TEST(EncoderConfig, DeskAndVitValidate) {
  EXPECT_NO_THROW(EncoderConfig::desk().validate());
  EXPECT_NO_THROW(EncoderConfig::vit_b32().validate());
  EncoderConfig bad = EncoderConfig::desk();
  bad.n_heads = 5;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(EncoderConfig, EntriesRoundTrip) {
  EncoderConfig c = EncoderConfig::desk();
  EncoderConfig back;
  back.embed_dim = 8;
  for (const auto& [k, v] : encoder_config_entries(c)) EXPECT_TRUE(set_encoder_config_entry(back, k, v)) << k;
  EXPECT_EQ(back, c);
  EXPECT_FALSE(set_encoder_config_entry(back, "no_such_key", "1"));
  EXPECT_THROW(set_encoder_config_entry(back, "embed_dim", "abc"), ConfigError);
}

TEST(PatchCount, DeskAndVitExtents) {
  EXPECT_EQ(EncoderConfig::desk().image_tokens(), 16u);
  const EncoderConfig vit = EncoderConfig::vit_b32();
  EXPECT_EQ(vit.image_tokens(), 49u);
  EXPECT_EQ(vit.audio_tokens(), 32u);
}

TEST(PatchifyEmbed, ShapeAndRowMajorPatchOrder) {
  EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<double>::init(c, 1);
  std::mt19937_64 rng(2);
  std::vector<ModalitySample> batch{image_sample(c, rng)};
  auto tape = Tape<double>::no_grad();
  const TensorD tokens = patchify_embed(tape, enc, std::span<const ModalitySample>(batch));
  ASSERT_EQ(tokens.shape(), (Shape{1, 2, c.embed_dim}));
  // Token 1 is the right-hand 8×8 block, flattened channel-major.
  const auto& px = batch[0].image().pixels;
  std::vector<double> patch;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 8; x < 16; ++x) patch.push_back(px[ch * 128 + y * 16 + x]);
    }
  }
  for (std::size_t o = 0; o < c.embed_dim; ++o) {
    double want = enc.image_embed.bias.at(o);
    for (std::size_t i = 0; i < patch.size(); ++i) want += enc.image_embed.weight.at(o * patch.size() + i) * patch[i];
    EXPECT_NEAR(tokens.at(c.embed_dim + o), want, 1e-12);
  }
}

TEST(PatchifyEmbed, IndivisibleExtentIsConfigError) {
  EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<float>::init(c, 1);
  enc.config.image_width = 12;
  std::mt19937_64 rng(2);
  ModalitySample s{ImagePayload{8, 12, std::vector<float>(3 * 96)}, {}, {}};
  auto tape = Tape<float>::no_grad();
  EXPECT_THROW(patchify_embed(tape, enc, std::span<const ModalitySample>(&s, 1)), ConfigError);
}

TEST(TokenEmbed, PaddingRowsAndOneHotTable) {
  EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<double>::init(c, 3);
  auto tape = Tape<double>::no_grad();
  ModalitySample pad = text_sample(std::vector<std::int32_t>(c.text_len, 0));
  const TensorD t = token_embed(tape, enc, std::span<const ModalitySample>(&pad, 1));
  for (std::size_t pos = 0; pos < c.text_len; ++pos) {
    for (std::size_t j = 0; j < c.embed_dim; ++j) EXPECT_EQ(t.at(pos * c.embed_dim + j), enc.text_embed.at(j));
  }
  TensorD table = TensorD::zeros({c.vocab_size, c.embed_dim});
  for (std::size_t k = 0; k < c.embed_dim; ++k) table.data()[k * c.embed_dim + k] = 1.0;
  enc.text_embed = table;
  ModalitySample s = text_sample({3, 0, 0, 0, 0, 0});
  const TensorD e = token_embed(tape, enc, std::span<const ModalitySample>(&s, 1));
  for (std::size_t j = 0; j < c.embed_dim; ++j) EXPECT_EQ(e.at(j), j == 3 ? 1.0 : 0.0);
}

TEST(TokenEmbed, OutOfVocabularyIdIsDataError) {
  EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<float>::init(c, 3);
  auto tape = Tape<float>::no_grad();
  ModalitySample s = text_sample({1, 300, 0, 0, 0, 0});
  EXPECT_THROW(token_embed(tape, enc, std::span<const ModalitySample>(&s, 1)), DataError);
}

TEST(Positional, OneDimensionalMatchesFormula) {
  const TensorD pe0 = positional_encoding(PositionalKind::k1d, 2, 0, 4);
  EXPECT_EQ(pe0.at(0), 0.0);
  EXPECT_EQ(pe0.at(1), 1.0);
  EXPECT_EQ(pe0.at(2), 0.0);
  EXPECT_EQ(pe0.at(3), 1.0);
  EXPECT_NEAR(pe0.at(4), std::sin(1.0), 1e-12);
  EXPECT_NEAR(pe0.at(5), std::cos(1.0), 1e-12);
  EXPECT_NEAR(pe0.at(6), std::sin(1e-2), 1e-12);
  EXPECT_NEAR(pe0.at(7), std::cos(1e-2), 1e-12);
}

TEST(Positional, TwoDimensionalConcatenatesRowAndColumnCodes) {
  const std::size_t d = 8;
  const TensorD grid = positional_encoding(PositionalKind::k2d, 3, 4, d);
  const TensorD line = positional_encoding(PositionalKind::k1d, 4, 0, d / 2);
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t col = 0; col < 4; ++col) {
      const std::size_t cell = (r * 4 + col) * d;
      for (std::size_t j = 0; j < d / 2; ++j) {
        EXPECT_EQ(grid.at(cell + j), line.at(r * d / 2 + j));
        EXPECT_EQ(grid.at(cell + d / 2 + j), line.at(col * d / 2 + j));
      }
    }
  }
  EXPECT_THROW(positional_encoding(PositionalKind::k2d, 2, 2, 6), ConfigError);
  EXPECT_THROW(positional_encoding(PositionalKind::k1d, 2, 0, 5), ConfigError);
}

TEST(Encode, AttentionCoversClsPlusPatches) {
  const EncoderConfig c = EncoderConfig::desk();
  auto enc = OmniEncoder<float>::init(c, 4);
  std::mt19937_64 rng(5);
  std::vector<ModalitySample> batch{image_sample(c, rng), image_sample(c, rng)};
  auto tape = Tape<float>::no_grad();
  const auto out = encode_with(tape, enc, std::span<const ModalitySample>(batch), EncodeOptions{true});
  EXPECT_EQ(out.cls.shape(), (Shape{2, c.embed_dim}));
  EXPECT_EQ(out.last_attention.shape(), (Shape{2, c.n_heads, 17, 17}));
}

TEST(Encode, ZeroBlocksReduceToNormalisedClsToken) {
  const EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<double>::init(c, 6);
  for_each_block_linear<double>(enc, [](const std::string&, Linear<double>& lin) {
    lin.weight = TensorD::zeros(lin.weight.shape());
    lin.bias = TensorD::zeros(lin.bias.shape());
  });
  std::mt19937_64 rng(7);
  std::vector<ModalitySample> batch{audio_sample(c, rng)};
  auto tape = Tape<double>::no_grad();
  const TensorD cls = encode(tape, enc, std::span<const ModalitySample>(batch));
  const TensorD want = ops::layer_norm(tape, ops::reshape(tape, enc.cls_token, {1, c.embed_dim}),
                                       enc.final_norm.gain, enc.final_norm.bias, c.norm_eps);
  for (std::size_t j = 0; j < c.embed_dim; ++j) EXPECT_NEAR(cls.at(j), want.at(j), 1e-12);
}

TEST(Encode, MixedBatchIsContractError) {
  const EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<float>::init(c, 6);
  std::mt19937_64 rng(7);
  std::vector<ModalitySample> batch{audio_sample(c, rng), image_sample(c, rng)};
  auto tape = Tape<float>::no_grad();
  EXPECT_THROW(encode(tape, enc, std::span<const ModalitySample>(batch)), ContractError);
}

TEST(Encode, RowsAreIndependentOfBatchComposition) {
  const EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<double>::init(c, 8);
  std::mt19937_64 rng(9);
  std::vector<ModalitySample> batch{image_sample(c, rng), image_sample(c, rng), image_sample(c, rng)};
  auto tape = Tape<double>::no_grad();
  const TensorD all = encode(tape, enc, std::span<const ModalitySample>(batch));
  const TensorD one = encode(tape, enc, std::span<const ModalitySample>(batch).subspan(1, 1));
  for (std::size_t j = 0; j < c.embed_dim; ++j) EXPECT_NEAR(all.at(c.embed_dim + j), one.at(j), 1e-12);
}

TEST(Project, ZeroHeadGivesZeroOutput) {
  const EncoderConfig c = testing::tiny_config();
  auto enc = OmniEncoder<double>::init(c, 10);
  for (auto& h : enc.heads) {
    h.fc1 = Linear<double>::zeros(c.embed_dim, c.embed_dim);
    h.fc2 = Linear<double>::zeros(c.embed_dim, c.proj_dim);
  }
  auto tape = Tape<double>::no_grad();
  const TensorD z = project(tape, enc, TensorD::full({2, c.embed_dim}, 1.0), Modality::kText);
  EXPECT_EQ(z.shape(), (Shape{2, c.proj_dim}));
  for (double v : z.data()) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(project(tape, enc, z, static_cast<Modality>(7)), ContractError);
}

TEST(HeadMode, SharedModeHasOneHead) {
  EncoderConfig c = testing::tiny_config();
  c.head_mode = HeadMode::kShared;
  const auto enc = OmniEncoder<float>::init(c, 1);
  ASSERT_EQ(enc.heads.size(), 1u);
  EXPECT_EQ(&enc.head_for(Modality::kAudio), &enc.head_for(Modality::kImage));
  EXPECT_EQ(parse_head_mode("shared"), HeadMode::kShared);
  EXPECT_THROW(parse_head_mode("both"), ConfigError);
}

TEST(Init, SeedDeterminesParameters) {
  const EncoderConfig c = testing::tiny_config();
  const auto a = named_parameters(OmniEncoder<float>::init(c, 11));
  const auto b = named_parameters(OmniEncoder<float>::init(c, 11));
  const auto other = named_parameters(OmniEncoder<float>::init(c, 12));
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].name, b[i].name);
    EXPECT_TRUE(std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), b[i].tensor.data().begin()));
    differs |= !std::equal(a[i].tensor.data().begin(), a[i].tensor.data().end(), other[i].tensor.data().begin());
  }
  EXPECT_TRUE(differs);
}

TEST(Clone, DeepCopiesEveryTensor) {
  const auto enc = OmniEncoder<float>::init(testing::tiny_config(), 1);
  auto copy = clone_encoder(enc);
  copy.cls_token.data()[0] += 1.0f;
  EXPECT_NE(copy.cls_token.at(0), enc.cls_token.at(0));
}

TEST(ParameterGroups, PartitionTheFullList) {
  const auto enc = OmniEncoder<float>::init(testing::tiny_config(), 1);
  const std::size_t all = named_parameters(enc).size();
  const std::size_t parts = named_parameters(enc, ParamGroup::kBackbone).size() +
                            named_parameters(enc, ParamGroup::kEmbedders).size() +
                            named_parameters(enc, ParamGroup::kHeads).size();
  EXPECT_EQ(all, parts);
}

}  // namespace
}  // namespace omnic
