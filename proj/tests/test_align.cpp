#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "omnic/align.hpp"
#include "omnic/corpus.hpp"
#include "omnic/errors.hpp"
#include "omnic/hash.hpp"
#include "omnic/losses.hpp"
#include "omnic/tokenizer.hpp"
#include "support/oracles.hpp"

namespace omnic {
namespace {

using testing::Matrix;

double info_nce(const Matrix& a, const Matrix& b, double scale) {
  auto tape = Tape<double>::no_grad();
  const TensorD ls = TensorD::scalar(std::log(scale));
  return symmetric_info_nce(tape, testing::to_tensor<double>(a), testing::to_tensor<double>(b), ls).item();
}

FeatureCache cache_of(const Matrix& rows, Modality m) {
  FeatureCache c{m, rows.empty() ? 0 : rows[0].size(), false, true, {}};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    c.rows.push_back(FeatureRow{static_cast<std::int64_t>(i), -1, {rows[i].begin(), rows[i].end()}});
  }
  return c;
}

// proj_a and proj_b both the identity on d = q, zero bias.
AlignmentHead identity_head(std::size_t d) {
  AlignmentHead h = AlignmentHead::init(d, d, 0);
  for (auto* lin : {&h.proj_a, &h.proj_b}) {
    *lin = Linear<float>::zeros(d, d);
    for (std::size_t i = 0; i < d; ++i) lin->weight.data()[i * d + i] = 1.0f;
  }
  return h;
}

TEST(InfoNce, TwoOrthogonalPairs) {
  const Matrix a{{1, 0}, {0, 1}}, b{{1, 0}, {0, 1}};
  const double s = 10.0;
  const double ce = std::log(1.0 + std::exp(-s));
  EXPECT_NEAR(info_nce(a, b, s), ce, 1e-12);
  EXPECT_NEAR(info_nce(a, b, s), testing::info_nce_oracle(a, b, s), 1e-12);
}

TEST(InfoNce, IdenticalProjectionsGiveLogM) {
  for (std::size_t m : {2u, 5u, 16u}) {
    const Matrix same(m, std::vector<double>{0.3, -0.2, 0.9});
    EXPECT_NEAR(info_nce(same, same, 14.0), std::log(static_cast<double>(m)), 1e-12);
  }
}

TEST(InfoNce, MatchesOracleAndIsSymmetric) {
  std::mt19937_64 rng(1);
  for (std::size_t m = 2; m <= 16; ++m) {
    const Matrix a = testing::random_matrix(m, 6, rng), b = testing::random_matrix(m, 6, rng);
    const double s = 1.0 + static_cast<double>(m);
    EXPECT_NEAR(info_nce(a, b, s), testing::info_nce_oracle(a, b, s), 1e-6);
    EXPECT_NEAR(info_nce(a, b, s), info_nce(b, a, s), 1e-12);
  }
}

TEST(InfoNce, SinglePairIsContractError) {
  EXPECT_THROW(info_nce({{1, 0}}, {{1, 0}}, 2.0), ContractError);
}

TEST(AlignmentHead, InitScaleAndClamp) {
  const AlignmentHead h = AlignmentHead::init(8, 4, 3);
  EXPECT_NEAR(h.logit_scale(), 1.0 / 0.07, 1e-4);
  EXPECT_EQ(h.proj_a.weight.shape(), (Shape{4, 8}));
  EXPECT_NEAR(std::exp(kMaxLogScale), 100.0, 1e-12);
}

TEST(TrainAlignment, ReducesLossAndKeepsScaleClamped) {
  std::mt19937_64 rng(2);
  Matrix a = testing::random_matrix(64, 8, rng);
  Matrix b;
  for (const auto& r : a) {
    std::vector<double> row(8);
    for (int j = 0; j < 8; ++j) row[j] = r[(j + 3) % 8] * 2.0 - r[j] * 0.5;
    b.push_back(row);
  }
  const PairedFeatureCache cache{cache_of(a, Modality::kImage), cache_of(b, Modality::kText)};
  AlignmentHead head = AlignmentHead::init(8, 8, 4);
  const double before = alignment_loss(cache, head);
  AlignConfig cfg;
  cfg.batch_size = 16;
  cfg.optim.total_epochs = 30;
  cfg.optim.warmup_epochs = 2;
  cfg.optim.base_lr = 1e-2;
  const std::string head_before = std::to_string(head.proj_a.weight.at(0));
  const auto res = train_alignment(cache, head, cfg);
  EXPECT_EQ(std::to_string(head.proj_a.weight.at(0)), head_before);
  EXPECT_LT(alignment_loss(cache, res.head), 0.5 * before);
  EXPECT_LE(res.head.log_scale.at(0), kMaxLogScale);
  EXPECT_EQ(res.epoch_loss.size(), 30u);
}

TEST(TrainAlignment, InitialLossNearLogM) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    const PairedFeatureCache cache{cache_of(testing::random_matrix(32, 16, rng), Modality::kAudio),
                                   cache_of(testing::random_matrix(32, 16, rng), Modality::kText)};
    AlignmentHead head = AlignmentHead::init(16, 16, seed);
    head.log_scale.data()[0] = 0.0f;
    total += alignment_loss(cache, head);
  }
  EXPECT_NEAR(total / 3.0, std::log(32.0), 0.1 * std::log(32.0));
}

TEST(TrainAlignment, TooSmallBatchIsContractError) {
  std::mt19937_64 rng(3);
  const PairedFeatureCache cache{cache_of(testing::random_matrix(5, 4, rng), Modality::kImage),
                                 cache_of(testing::random_matrix(5, 4, rng), Modality::kText)};
  AlignConfig cfg;
  cfg.batch_size = 1;
  EXPECT_THROW(train_alignment(cache, AlignmentHead::init(4, 4, 0), cfg), std::invalid_argument);
  const PairedFeatureCache empty{cache_of({}, Modality::kImage), cache_of({}, Modality::kText)};
  EXPECT_THROW(train_alignment(empty, AlignmentHead::init(4, 4, 0), AlignConfig{}), std::exception);
}

TEST(ZeroShot, MatchingPromptWins) {
  const AlignmentHead head = identity_head(3);
  const FeatureMatrix prompts{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  const FeatureMatrix queries{{0, 2, 0}, {0, 0, 0.5}, {3, 0, 0}};
  EXPECT_EQ(zero_shot_from_features(queries, prompts, head), (std::vector<std::int32_t>{1, 2, 0}));
}

TEST(ZeroShot, SingleClassAndTies) {
  const AlignmentHead head = identity_head(2);
  EXPECT_EQ(zero_shot_from_features({{1, 0}, {-1, 3}}, {{0, 1}}, head), (std::vector<std::int32_t>{0, 0}));
  EXPECT_EQ(zero_shot_from_features({{1, 1}}, {{1, 0}, {0, 1}}, head), (std::vector<std::int32_t>{0}));
  EXPECT_THROW(zero_shot_from_features({{1, 1}}, {}, head), ContractError);
}

TEST(ZeroShot, InvariantToQueryRescaling) {
  std::mt19937_64 rng(5);
  const AlignmentHead head = AlignmentHead::init(6, 4, 5);
  FeatureMatrix q = testing::random_matrix(30, 6, rng);
  const FeatureMatrix p = testing::random_matrix(5, 6, rng);
  const auto base = zero_shot_from_features(q, p, head);
  for (std::size_t i = 0; i < q.size(); ++i) {
    for (double& v : q[i]) v *= 0.01 + static_cast<double>(i);
  }
  EXPECT_EQ(zero_shot_from_features(q, p, head), base);
}

TEST(ZeroShot, PromptsRunThroughTheTextEncoder) {
  const EncoderConfig c = testing::tiny_config();
  const auto enc = OmniEncoder<float>::init(c, 1);
  const AlignmentHead head = AlignmentHead::init(c.embed_dim, 4, 2);
  std::vector<ModalitySample> prompts;
  for (const char* p : {"cat", "dog"}) prompts.push_back(ModalitySample{TextPayload{tokenize_text(p, c.text_len)}, {}, {}});
  const FeatureMatrix pf = to_double(extract_features(enc, prompts));
  const FeatureMatrix queries{pf[1], pf[0]};
  EXPECT_EQ(zero_shot_classify(queries, {"cat", "dog"}, enc, head),
            zero_shot_from_features(queries, pf, head));
}

TEST(Retrieval, TrivialCases) {
  std::mt19937_64 rng(6);
  const Matrix x = testing::random_matrix(20, 5, rng);
  const PairedFeatureCache same{cache_of(x, Modality::kImage), cache_of(x, Modality::kText)};
  const AlignmentHead head = identity_head(5);
  const auto r1 = retrieval_at_k(same, head, 1);
  EXPECT_EQ(r1.a_to_b, 1.0);
  EXPECT_EQ(r1.b_to_a, 1.0);
  const PairedFeatureCache other{cache_of(x, Modality::kImage),
                                 cache_of(testing::random_matrix(20, 5, rng), Modality::kText)};
  const auto all = retrieval_at_k(other, head, 20);
  EXPECT_EQ(all.a_to_b, 1.0);
  EXPECT_EQ(all.b_to_a, 1.0);
  EXPECT_THROW(retrieval_at_k(other, head, 0), ContractError);
  EXPECT_THROW(retrieval_at_k(other, head, 21), ContractError);
}

TEST(Retrieval, RandomHeadNearChance) {
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);
    const PairedFeatureCache cache{cache_of(testing::random_matrix(400, 8, rng), Modality::kImage),
                                   cache_of(testing::random_matrix(400, 8, rng), Modality::kText)};
    total += retrieval_at_k(cache, AlignmentHead::init(8, 8, seed), 1).a_to_b;
  }
  EXPECT_LT(total / 3.0, 5.0 / 400.0);
}

TEST(CacheFeatures, SortedByPairIdAndEqualToEncode) {
  const EncoderConfig c = testing::tiny_config();
  const auto enc = OmniEncoder<float>::init(c, 2);
  SyntheticCorpusSpec spec = SyntheticCorpusSpec::for_config(c, Modality::kImage, 3, 4, 0.2, 5);
  PairedCorpus corpus = generate_paired_corpus(spec, CaptionGrammar::standard());
  std::reverse(corpus.side_b.begin(), corpus.side_b.end());
  const std::string before = backbone_hash(enc);
  const auto cache = cache_features(enc, corpus.side_a, corpus.side_b);
  EXPECT_EQ(backbone_hash(enc), before);
  ASSERT_EQ(cache.pairs(), 12u);
  const auto direct = extract_features(enc, corpus.side_a);
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(cache.a.rows[i].id, static_cast<std::int64_t>(i));
    EXPECT_EQ(cache.b.rows[i].id, static_cast<std::int64_t>(i));
    EXPECT_EQ(cache.a.rows[i].values, direct[i]);
  }
  const auto again = cache_features(enc, corpus.side_a, corpus.side_b);
  EXPECT_EQ(again.a, cache.a);
  EXPECT_EQ(again.b, cache.b);
}

TEST(CacheFeatures, MissingHalfNamesPairId) {
  const EncoderConfig c = testing::tiny_config();
  const auto enc = OmniEncoder<float>::init(c, 2);
  PairedCorpus corpus =
      generate_paired_corpus(SyntheticCorpusSpec::for_config(c, Modality::kAudio, 2, 3, 0.2, 5), CaptionGrammar::standard());
  corpus.side_b.erase(corpus.side_b.begin() + 4);
  try {
    cache_features(enc, corpus.side_a, corpus.side_b);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("4"), std::string::npos);
  }
}

TEST(CacheFeatures, EmptyCorpusGivesEmptyCache) {
  const auto enc = OmniEncoder<float>::init(testing::tiny_config(), 2);
  const auto cache = cache_features(enc, {}, {});
  EXPECT_EQ(cache.pairs(), 0u);
  EXPECT_TRUE(cache.b.rows.empty());
}

TEST(HeadCheckpoint, RoundTrip) {
  const AlignmentHead head = AlignmentHead::init(6, 3, 9);
  const AlignmentHead back = restore_alignment_head(alignment_head_checkpoint(head, testing::tiny_config()));
  EXPECT_TRUE(std::equal(head.proj_b.weight.data().begin(), head.proj_b.weight.data().end(),
                         back.proj_b.weight.data().begin()));
  EXPECT_EQ(back.log_scale.at(0), head.log_scale.at(0));
}

}  // namespace
}  // namespace omnic
