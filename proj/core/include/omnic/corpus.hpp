#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "omnic/encoder_config.hpp"
#include "omnic/modality.hpp"

namespace omnic {

/// Parameters of a synthetic single-modality corpus. Dimensions come from the
/// encoder configuration the corpus is meant for.
struct SyntheticCorpusSpec {
  Modality modality = Modality::kImage;
  std::size_t num_classes = 4;
  std::size_t samples_per_class = 256;
  double noise = 0.2;
  std::uint64_t seed = 0;

  std::size_t image_height = 32;
  std::size_t image_width = 32;
  std::size_t audio_frames = 32;
  std::size_t audio_bins = 16;
  std::size_t text_len = 16;

  static SyntheticCorpusSpec for_config(const EncoderConfig& config, Modality modality, std::size_t num_classes,
                                        std::size_t samples_per_class, double noise, std::uint64_t seed);
  void validate() const;
};

/// Labeled samples, interleaved by class (sample i has label i mod K).
///
/// image: 2-3 coloured discs per class at class-specific positions over a noisy
///   background, jittered per sample.
/// audio: class-specific harmonic stripes (constant-frequency bins) plus
///   periodic broadband pulses over a noise floor.
/// text: tokens drawn from a class-specific unigram distribution concentrated
///   on a small set of bytes.
std::vector<ModalitySample> generate_corpus(const SyntheticCorpusSpec& spec);

/// Template grammar for captions; "{class}" is replaced by the class name.
struct CaptionGrammar {
  std::vector<std::string> templates;
  std::vector<std::string> class_names;

  static CaptionGrammar standard();
  /// Class name for id k, or "class<k>" past the end of class_names.
  std::string class_name(std::size_t k) const;
};

struct PairedCorpus {
  std::vector<ModalitySample> side_a;  // image or audio
  std::vector<ModalitySample> side_b;  // captions
};

/// Paired corpus of `spec.num_classes * spec.samples_per_class` pairs. Pair i
/// shares latent class i mod K and carries pair_id i on both sides.
PairedCorpus generate_paired_corpus(const SyntheticCorpusSpec& spec, const CaptionGrammar& grammar);

struct CorpusSplit {
  std::vector<ModalitySample> train;
  std::vector<ModalitySample> held_out;
};

/// Leading `train_fraction` of the samples train, the rest held out. With an
/// interleaved corpus both halves stay class balanced.
CorpusSplit split_corpus(const std::vector<ModalitySample>& samples, double train_fraction);

/// Lines "index,modality,label,pair_id" with a header row.
std::string corpus_manifest_csv(const std::vector<ModalitySample>& samples);

}  // namespace omnic
