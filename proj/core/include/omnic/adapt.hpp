#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "omnic/encoder.hpp"
#include "omnic/eval.hpp"
#include "omnic/optim.hpp"

namespace omnic {

/// Linear classifier on frozen CLS features; weight is [K, d] (Linear layout).
struct LinearProbeHead {
  Linear<float> linear;
  std::size_t num_classes() const { return linear.out_features(); }
};

struct ProbeConfig {
  OptimizerConfig optim{1e-4, 1e-5, 0.1, 0.9, 0.999, 1e-8, 10, 40};
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ProbeResult {
  LinearProbeHead head;
  double train_accuracy = 0.0;
  double held_out_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

/// Labels of a sample list; throws DataError on an unlabeled sample.
std::vector<std::int32_t> sample_labels(std::span<const ModalitySample> samples);

/// Cross-entropy training of a zero-initialised linear head on fixed
/// features. Throws DataError when the training labels hold a single class.
ProbeResult train_linear_probe(const FeatureMatrix& train, std::span<const std::int32_t> train_labels,
                               const FeatureMatrix& held_out, std::span<const std::int32_t> held_out_labels,
                               const ProbeConfig& config);

/// Extracts frozen features with the encoder, then probes. The encoder is
/// only read.
ProbeResult train_linear_probe(const OmniEncoder<float>& enc, std::span<const ModalitySample> train,
                               std::span<const ModalitySample> held_out, const ProbeConfig& config);

std::vector<std::int32_t> probe_predict(const LinearProbeHead& head, const FeatureMatrix& feats);

/// The six per-block linear maps.
const std::vector<std::string>& sbora_default_targets();

struct SBoRAConfig {
  std::size_t rank = 8;
  double alpha = 8.0;
  std::vector<std::string> targets = sbora_default_targets();  // suffixes such as "attn.query"
  std::uint64_t seed = 0;
};

/// Adds a zero-initialised adapter to every targeted block linear, with basis
/// indices drawn without replacement from the layer's input dimensions.
/// Afterwards only the B factors require gradients. Throws ConfigError for an
/// unknown target or rank outside [1, d_in].
template <typename T>
void attach_sbora(OmniEncoder<T>& enc, const SBoRAConfig& config);

/// Copy with W' = W + (alpha / r)·B·A folded into each adapted weight and no
/// adapters left.
template <typename T>
OmniEncoder<T> merge_sbora(const OmniEncoder<T>& enc);

/// Trainable backbone parameters over base backbone parameters (adapter
/// factors excluded from the denominator; embedders and heads excluded).
template <typename T>
double count_trainable_fraction(const OmniEncoder<T>& enc);

struct SBoRATrainConfig {
  SBoRAConfig adapter;
  OptimizerConfig optim{1e-4, 1e-5, 0.1, 0.9, 0.999, 1e-8, 10, 40};
  std::size_t batch_size = 32;
};

struct SBoRAResult {
  OmniEncoder<float> adapted;
  LinearProbeHead head;
  double held_out_accuracy = 0.0;
  std::vector<double> epoch_loss;
};

/// Attaches adapters to a copy of the encoder and trains B factors plus a
/// linear head on CLS outputs by cross-entropy.
SBoRAResult train_sbora_classifier(const OmniEncoder<float>& enc, std::span<const ModalitySample> train,
                                   std::span<const ModalitySample> held_out, const SBoRATrainConfig& config);

}  // namespace omnic
