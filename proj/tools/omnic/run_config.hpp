#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "omnic/adapt.hpp"
#include "omnic/align.hpp"
#include "omnic/corpus.hpp"
#include "omnic/encoder_config.hpp"
#include "omnic/eval.hpp"
#include "omnic/kv.hpp"
#include "omnic/pretrain.hpp"

namespace omnic::cli {

/// Every known key with its default value and validation, after merging
/// defaults, OMNIC_SEED, the config file and --set overrides (in rising
/// precedence).
class RunConfig {
 public:
  /// Throws ConfigError naming the key on an unknown key, a malformed value
  /// or a range violation.
  static RunConfig resolve(const KeyValues& file, const KeyValues& overrides,
                           const std::optional<std::string>& env_seed);

  const std::string& get(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  double number(const std::string& key) const;
  std::uint64_t seed() const;

  /// Resolved document in key order, one "key=value" per line.
  std::string dump() const;
  const KeyValues& entries() const { return entries_; }

  EncoderConfig encoder() const;
  SyntheticCorpusSpec corpus_spec(Modality modality) const;
  SyntheticCorpusSpec paired_spec() const;
  CaptionGrammar grammar() const;
  PretrainConfig pretrain() const;
  KnnOptions knn() const;
  ProbeConfig probe() const;
  SBoRATrainConfig sbora() const;
  AlignConfig align() const;

  /// Path-valued key; throws ConfigError when it is empty.
  std::filesystem::path require_path(const std::string& key, const std::string& command) const;
  std::vector<Modality> modalities(const std::string& key) const;

 private:
  KeyValues entries_;
};

/// Names of every accepted key, in document order.
std::vector<std::string> known_keys();

/// Parses "key=value" into a pair; throws ConfigError when '=' is missing.
std::pair<std::string, std::string> parse_override(const std::string& text);

}  // namespace omnic::cli
