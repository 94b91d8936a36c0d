#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "omnic/checkpoint.hpp"
#include "omnic/encoder.hpp"
#include "omnic/eval.hpp"
#include "omnic/feature_cache.hpp"
#include "omnic/optim.hpp"

namespace omnic {

/// Frozen features of both sides of a paired corpus, rows sorted by pair_id
/// so row i of `a` and row i of `b` form a pair.
struct PairedFeatureCache {
  FeatureCache a;
  FeatureCache b;

  std::size_t pairs() const { return a.rows.size(); }
};

/// Throws DataError naming the pair_id when a pair lacks one side or a
/// pair_id repeats.
PairedFeatureCache cache_features(const OmniEncoder<float>& enc, std::span<const ModalitySample> side_a,
                                  std::span<const ModalitySample> side_b);

/// Frozen features of a single-modality list; ids are pair_ids when every
/// sample has one, otherwise row indices.
FeatureCache cache_single(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples);

FeatureMatrix cache_matrix(const FeatureCache& cache);

/// Pair of bias-free linear maps d → q and a learnable log logit scale. The
/// Linear biases exist for the checkpoint layout but stay zero.
struct AlignmentHead {
  Linear<float> proj_a;
  Linear<float> proj_b;
  TensorF log_scale;  // [1]

  static AlignmentHead init(std::size_t d, std::size_t q, std::uint64_t seed);
  double logit_scale() const;
};

/// ln(100): the largest allowed log logit scale.
inline constexpr double kMaxLogScale = 4.605170185988092;

struct AlignConfig {
  OptimizerConfig optim{1e-3, 1e-4, 0.1, 0.9, 0.999, 1e-8, 10, 100};
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct AlignResult {
  AlignmentHead head;
  std::vector<double> epoch_loss;
};

/// Symmetric InfoNCE over shuffled batches of pairs. Only the head changes.
/// Throws ContractError when a batch would hold fewer than two pairs.
AlignResult train_alignment(const PairedFeatureCache& cache, AlignmentHead head, const AlignConfig& config);

/// Loss of the head on the whole cache as a single batch, without training.
double alignment_loss(const PairedFeatureCache& cache, const AlignmentHead& head);

/// Projected, l2-normalised side-A or side-B rows.
FeatureMatrix project_side(const AlignmentHead& head, const FeatureMatrix& feats, bool side_a);

/// Argmax cosine between projected queries (side A) and projected prompt
/// features (side B), ties to the lowest class id. Throws ContractError on
/// an empty prompt list.
std::vector<std::int32_t> zero_shot_from_features(const FeatureMatrix& queries, const FeatureMatrix& prompt_feats,
                                                  const AlignmentHead& head);

/// Tokenizes and encodes each prompt with the frozen encoder, then classifies.
std::vector<std::int32_t> zero_shot_classify(const FeatureMatrix& queries, const std::vector<std::string>& prompts,
                                             const OmniEncoder<float>& enc, const AlignmentHead& head);

struct RetrievalResult {
  double a_to_b = 0.0;
  double b_to_a = 0.0;
};

/// Fraction of queries whose partner ranks in the top k by cosine after
/// projection. The rank counts candidates scoring strictly higher than the
/// partner, so duplicates of the partner do not push it down. Throws
/// ContractError for k < 1 or k beyond the candidate count.
RetrievalResult retrieval_at_k(const PairedFeatureCache& cache, const AlignmentHead& head, std::size_t k);

/// Head tensors in checkpoint form ("proj_a.weight", ..., "log_scale"); the
/// encoder config is kept for reference.
Checkpoint alignment_head_checkpoint(const AlignmentHead& head, const EncoderConfig& config, KeyValues meta = {});
AlignmentHead restore_alignment_head(const Checkpoint& ckpt);

}  // namespace omnic
