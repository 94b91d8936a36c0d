#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <set>

#include "omnic/adapt.hpp"
#include "omnic/checkpoint.hpp"
#include "omnic/corpus.hpp"
#include "omnic/errors.hpp"
#include "omnic/feature_cache.hpp"
#include "omnic/hash.hpp"
#include "omnic/kv.hpp"
#include "omnic/sample_store.hpp"
#include "omnic/tokenizer.hpp"
#include "support/oracles.hpp"

namespace omnic {
namespace {

namespace fs = std::filesystem;

class TempDir {
 public:
  TempDir() {
    path_ = fs::temp_directory_path() / ("omnic_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

std::vector<double> flatten(const ModalitySample& s) {
  switch (s.modality()) {
    case Modality::kImage: return {s.image().pixels.begin(), s.image().pixels.end()};
    case Modality::kAudio: return {s.audio().values.begin(), s.audio().values.end()};
    case Modality::kText: {
      // Byte histogram: a bag-of-bytes view of the sequence.
      std::vector<double> h(ByteTokenizer::kVocabSize, 0.0);
      for (auto id : s.text().ids) h[static_cast<std::size_t>(id)] += 1.0;
      return h;
    }
  }
  return {};
}

TEST(Tokenizer, Examples) {
  EXPECT_EQ(tokenize_text("", 3), (std::vector<std::int32_t>{0, 0, 0}));
  EXPECT_EQ(tokenize_text("A", 4), (std::vector<std::int32_t>{66, 0, 0, 0}));
  EXPECT_EQ(tokenize_text("abcdef", 3), (std::vector<std::int32_t>{98, 99, 100}));
}

TEST(Tokenizer, PrintableRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> ch(32, 126), len(0, 16);
  for (int trial = 0; trial < 200; ++trial) {
    std::string s(static_cast<std::size_t>(len(rng)), ' ');
    for (char& c : s) c = static_cast<char>(ch(rng));
    const auto ids = tokenize_text(s, 16);
    EXPECT_EQ(ByteTokenizer::decode(ids), s);
  }
}

TEST(Corpus, SameSpecSameSamples) {
  const auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kAudio, 4, 8, 0.2, 11);
  const auto a = generate_corpus(spec), b = generate_corpus(spec);
  ASSERT_EQ(a.size(), 32u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].audio().values, b[i].audio().values);
    EXPECT_EQ(*a[i].label, static_cast<std::int32_t>(i % 4));
  }
  auto other = spec;
  other.seed = 12;
  EXPECT_NE(generate_corpus(other)[0].audio().values, a[0].audio().values);
}

TEST(Corpus, ZeroNoiseLeavesOnlyClassJitter) {
  // Without the noise term, image background pixels keep the exact base level
  // and audio cells off the class stripes and pulses keep the exact floor.
  auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kImage, 3, 4, 0.0, 4);
  for (const auto& s : generate_corpus(spec)) {
    std::size_t background = 0;
    for (float v : s.image().pixels) background += v == 0.15f;
    EXPECT_GT(background, s.image().pixels.size() / 4);
  }
  spec.modality = Modality::kAudio;
  for (const auto& s : generate_corpus(spec)) {
    std::size_t floor = 0;
    for (float v : s.audio().values) floor += v == 0.1f;
    EXPECT_GT(floor, 0u);
  }
  spec.noise = 0.2;
  for (const auto& s : generate_corpus(spec)) {
    std::size_t floor = 0;
    for (float v : s.audio().values) floor += v == 0.1f;
    EXPECT_EQ(floor, 0u);
  }
}

TEST(Corpus, InvalidSpecIsConfigError) {
  auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kImage, 4, 8, 0.2, 0);
  spec.noise = -0.1;
  EXPECT_THROW(generate_corpus(spec), ConfigError);
  spec.noise = 0.2;
  spec.num_classes = 1;
  EXPECT_THROW(generate_corpus(spec), ConfigError);
}

TEST(Corpus, RawInputsAreLinearlySeparable) {
  for (Modality m : kAllModalities) {
    const auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), m, 4, 256, 0.2, 7);
    const auto split = split_corpus(generate_corpus(spec), 0.75);
    FeatureMatrix tx, hx;
    for (const auto& s : split.train) tx.push_back(flatten(s));
    for (const auto& s : split.held_out) hx.push_back(flatten(s));
    ProbeConfig cfg;
    cfg.optim = OptimizerConfig{1e-2, 1e-3, 0.0, 0.9, 0.999, 1e-8, 2, 30};
    const auto res = train_linear_probe(tx, sample_labels(split.train), hx, sample_labels(split.held_out), cfg);
    EXPECT_GE(res.held_out_accuracy, 0.95) << modality_name(m);
  }
}

TEST(Split, BalancedAndOrdered) {
  const auto samples = generate_corpus(SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kText, 4, 8, 0.2, 0));
  const auto split = split_corpus(samples, 0.75);
  EXPECT_EQ(split.train.size(), 24u);
  EXPECT_EQ(split.held_out.size(), 8u);
  std::array<int, 4> counts{};
  for (const auto& s : split.held_out) ++counts[static_cast<std::size_t>(*s.label)];
  for (int c : counts) EXPECT_EQ(c, 2);
  EXPECT_THROW(split_corpus(samples, 0.0), ConfigError);
}

TEST(PairedCorpus, OneTemplateGivesIdenticalCaptionsPerClass) {
  const auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kImage, 8, 8, 0.2, 3);
  CaptionGrammar g = CaptionGrammar::standard();
  g.templates = {"{class}"};
  const auto corpus = generate_paired_corpus(spec, g);
  ASSERT_EQ(corpus.side_a.size(), 64u);
  ASSERT_EQ(corpus.side_b.size(), 64u);
  for (std::size_t i = 0; i < 64; ++i) {
    EXPECT_EQ(*corpus.side_a[i].pair_id, static_cast<std::int64_t>(i));
    EXPECT_EQ(*corpus.side_b[i].pair_id, static_cast<std::int64_t>(i));
    EXPECT_EQ(corpus.side_b[i].text().ids, corpus.side_b[i % 8].text().ids);
    EXPECT_EQ(ByteTokenizer::decode(corpus.side_b[i].text().ids), g.class_name(i % 8));
  }
}

TEST(PairedCorpus, ClassRecoverableFromCaptionWords) {
  const auto spec = SyntheticCorpusSpec::for_config(EncoderConfig::desk(), Modality::kAudio, 8, 16, 0.2, 5);
  const CaptionGrammar g = CaptionGrammar::standard();
  const auto corpus = generate_paired_corpus(spec, g);
  for (const auto& s : corpus.side_b) {
    const std::string caption = ByteTokenizer::decode(s.text().ids);
    std::vector<std::int32_t> hits;
    for (std::size_t k = 0; k < 8; ++k) {
      if (caption.find(g.class_name(k)) != std::string::npos) hits.push_back(static_cast<std::int32_t>(k));
    }
    ASSERT_EQ(hits.size(), 1u) << caption;
    EXPECT_EQ(hits[0], *s.label);
  }
}

TEST(Manifest, Rows) {
  std::vector<ModalitySample> s{ModalitySample{TextPayload{{1}}, 3, 9}, ModalitySample{TextPayload{{1}}, {}, {}}};
  EXPECT_EQ(corpus_manifest_csv(s), "index,modality,label,pair_id\n0,text,3,9\n1,text,,\n");
}

TEST(KeyValues, ParseAndFormat) {
  const auto kv = parse_key_values("# comment\n a = 1 \n\nb=x=y\n");
  EXPECT_EQ(kv, (KeyValues{{"a", "1"}, {"b", "x=y"}}));
  EXPECT_EQ(format_key_values(kv), "a=1\nb=x=y\n");
  EXPECT_THROW(parse_key_values("novalue\n"), ConfigError);
  EXPECT_THROW(parse_key_values("=3\n"), ConfigError);
}

TEST(KeyValues, ValueParsersNameTheKey) {
  EXPECT_EQ(parse_size_value("n", "12"), 12u);
  EXPECT_EQ(parse_double_value("x", "-2.5e-3"), -2.5e-3);
  EXPECT_TRUE(parse_bool_value("b", "true"));
  try {
    parse_size_value("batch_size", "-3");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("batch_size"), std::string::npos);
  }
  EXPECT_THROW(parse_double_value("x", "1.0abc"), ConfigError);
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(parse_double_value("x", format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Hash, KnownDigest) {
  EXPECT_EQ(sha256_hex(std::string_view("abc")),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Checkpoint, FreshModelRoundTrip) {
  TempDir dir;
  const auto enc = OmniEncoder<float>::init(EncoderConfig::desk(), 3);
  const Checkpoint ckpt = make_checkpoint(enc, {{"seed", "3"}});
  EXPECT_EQ(ckpt.tensors.size(), named_parameters(enc).size());
  write_checkpoint(ckpt, dir / "m.omnc");
  const Checkpoint back = read_checkpoint(dir / "m.omnc");
  EXPECT_EQ(back.config, enc.config);
  EXPECT_EQ(checkpoint_meta(back, "seed"), "3");
  EXPECT_EQ(parameter_hash(restore_encoder(back)), parameter_hash(enc));
  write_checkpoint(back, dir / "again.omnc");
  EXPECT_EQ(file_sha256(dir / "m.omnc"), file_sha256(dir / "again.omnc"));
}

TEST(Checkpoint, AdaptersSurviveRoundTrip) {
  auto enc = OmniEncoder<float>::init(testing::tiny_config(), 3);
  attach_sbora(enc, SBoRAConfig{4, 6.0, {"attn.value", "mlp.down"}, 5});
  enc.blocks[0].value.adapter->B.data()[2] = 0.75f;
  const auto back = restore_encoder(decode_checkpoint(encode_checkpoint(make_checkpoint(enc))));
  ASSERT_TRUE(back.blocks[0].value.adapter);
  EXPECT_EQ(back.blocks[0].value.adapter->basis_indices, enc.blocks[0].value.adapter->basis_indices);
  EXPECT_EQ(back.blocks[0].value.adapter->alpha, 6.0);
  EXPECT_FALSE(back.blocks[0].query.adapter);
  EXPECT_EQ(parameter_hash(back), parameter_hash(enc));
}

TEST(Checkpoint, EveryFlippedByteIsDetected) {
  const auto bytes = encode_checkpoint(make_checkpoint(OmniEncoder<float>::init(testing::tiny_config(), 1)));
  // Magic, version, header and payload regions.
  for (std::size_t pos : {std::size_t{0}, std::size_t{5}, std::size_t{20}, bytes.size() / 2, bytes.size() - 1}) {
    auto bad = bytes;
    bad[pos] ^= std::byte{0x01};
    EXPECT_THROW(decode_checkpoint(bad), FormatError) << pos;
  }
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), FormatError);
  auto extended = bytes;
  extended.push_back(std::byte{0});
  EXPECT_THROW(decode_checkpoint(extended), FormatError);
}

TEST(Checkpoint, MissingTensorIsFormatError) {
  Checkpoint ckpt = make_checkpoint(OmniEncoder<float>::init(testing::tiny_config(), 1));
  ckpt.tensors.pop_back();
  EXPECT_THROW(restore_encoder(ckpt), FormatError);
}

TEST(Checkpoint, MissingFileIsRuntimeError) {
  EXPECT_THROW(read_checkpoint("/nonexistent/dir/model.omnc"), std::runtime_error);
}

FeatureCache random_cache(std::size_t rows, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.0f, 1.0f);
  FeatureCache c{Modality::kAudio, dim, true, true, {}};
  for (std::size_t i = 0; i < rows; ++i) {
    FeatureRow r{static_cast<std::int64_t>(rows - i), static_cast<std::int32_t>(i % 5), std::vector<float>(dim)};
    for (float& v : r.values) v = g(rng);
    c.rows.push_back(std::move(r));
  }
  return c;
}

TEST(FeatureCacheFile, EmptyAndLargeRoundTrips) {
  TempDir dir;
  const FeatureCache empty{Modality::kText, 0, false, false, {}};
  EXPECT_EQ(decode_feature_cache(encode_feature_cache(empty)), empty);
  const FeatureCache big = random_cache(10000, 16, 2);
  write_feature_cache(big, dir / "f.omnf");
  const FeatureCache back = read_feature_cache(dir / "f.omnf");
  EXPECT_EQ(back, big);
  EXPECT_EQ(sha256_hex(encode_feature_cache(back)), file_sha256(dir / "f.omnf"));
  EXPECT_EQ(back.rows[0].id, 10000);
}

TEST(FeatureCacheFile, CorruptionAndShapeErrors) {
  const auto bytes = encode_feature_cache(random_cache(20, 4, 3));
  auto bad = bytes;
  bad[bytes.size() - 3] ^= std::byte{0x80};
  EXPECT_THROW(decode_feature_cache(bad), FormatError);
  FeatureCache ragged = random_cache(3, 4, 1);
  ragged.rows[1].values.pop_back();
  EXPECT_THROW(encode_feature_cache(ragged), DimensionError);
}

TEST(SampleStore, RoundTripsEveryModality) {
  TempDir dir;
  for (Modality m : kAllModalities) {
    auto samples = generate_corpus(SyntheticCorpusSpec::for_config(testing::tiny_config(), m, 2, 3, 0.2, 1));
    samples[1].pair_id = 42;
    samples[2].label.reset();
    const fs::path p = dir / (std::string(modality_name(m)) + ".omns");
    write_sample_store(samples, p);
    const auto back = read_sample_store(p);
    ASSERT_EQ(back.size(), samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      EXPECT_EQ(back[i].payload, samples[i].payload);
      EXPECT_EQ(back[i].label, samples[i].label);
      EXPECT_EQ(back[i].pair_id, samples[i].pair_id);
    }
  }
}

TEST(SampleStore, CorruptionIsDetected) {
  const auto samples = generate_corpus(SyntheticCorpusSpec::for_config(testing::tiny_config(), Modality::kText, 2, 3, 0.2, 1));
  auto bytes = encode_sample_store(samples);
  bytes[bytes.size() - 1] ^= std::byte{0x01};
  EXPECT_THROW(decode_sample_store(bytes), FormatError);
}

}  // namespace
}  // namespace omnic
