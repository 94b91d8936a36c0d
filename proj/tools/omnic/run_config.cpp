#include "run_config.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <sstream>

#include "omnic/errors.hpp"

namespace omnic::cli {
namespace {

using Check = std::function<void(const std::string& key, const std::string& value)>;

struct KeySpec {
  std::string name;
  std::string fallback;
  Check check;
};

[[noreturn]] void range_error(const std::string& key, const std::string& value, const std::string& rule) {
  throw ConfigError("key '" + key + "': value " + value + " " + rule);
}

Check positive_int() {
  return [](const std::string& k, const std::string& v) {
    if (parse_size_value(k, v) == 0) range_error(k, v, "must be positive");
  };
}

Check any_int() {
  return [](const std::string& k, const std::string& v) { parse_u64_value(k, v); };
}

Check positive_real() {
  return [](const std::string& k, const std::string& v) {
    if (!(parse_double_value(k, v) > 0.0)) range_error(k, v, "must be positive");
  };
}

Check nonneg_real() {
  return [](const std::string& k, const std::string& v) {
    if (!(parse_double_value(k, v) >= 0.0)) range_error(k, v, "must be non-negative");
  };
}

Check probability() {
  return [](const std::string& k, const std::string& v) {
    const double x = parse_double_value(k, v);
    if (!(x >= 0.0 && x <= 1.0)) range_error(k, v, "must lie in [0, 1]");
  };
}

Check open_unit() {
  return [](const std::string& k, const std::string& v) {
    const double x = parse_double_value(k, v);
    if (!(x > 0.0 && x <= 1.0)) range_error(k, v, "must lie in (0, 1]");
  };
}

Check one_of(std::vector<std::string> choices) {
  return [choices](const std::string& k, const std::string& v) {
    if (std::find(choices.begin(), choices.end(), v) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      range_error(k, v, "must be one of {" + list + "}");
    }
  };
}

Check modality_list() {
  return [](const std::string& k, const std::string& v) {
    if (v.empty()) range_error(k, "''", "must name at least one modality");
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        parse_modality(item);
      } catch (const std::exception&) {
        range_error(k, v, "must be a comma list of image/audio/text");
      }
    }
  };
}

Check any_text() {
  return [](const std::string&, const std::string&) {};
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(item);
  return out;
}

const std::vector<KeySpec>& specs() {
  static const std::vector<KeySpec> kSpecs = [] {
    const EncoderConfig enc = EncoderConfig::desk();
    std::vector<KeySpec> s{
        {"seed", "0", any_int()},
        // encoder
        {"embed_dim", std::to_string(enc.embed_dim), positive_int()},
        {"n_layers", std::to_string(enc.n_layers), positive_int()},
        {"n_heads", std::to_string(enc.n_heads), positive_int()},
        {"mlp_ratio", format_double(enc.mlp_ratio), positive_real()},
        {"image_height", std::to_string(enc.image_height), positive_int()},
        {"image_width", std::to_string(enc.image_width), positive_int()},
        {"image_patch_h", std::to_string(enc.image_patch_h), positive_int()},
        {"image_patch_w", std::to_string(enc.image_patch_w), positive_int()},
        {"audio_frames", std::to_string(enc.audio_frames), positive_int()},
        {"audio_bins", std::to_string(enc.audio_bins), positive_int()},
        {"audio_patch_h", std::to_string(enc.audio_patch_h), positive_int()},
        {"audio_patch_w", std::to_string(enc.audio_patch_w), positive_int()},
        {"text_len", std::to_string(enc.text_len), positive_int()},
        {"vocab_size", std::to_string(enc.vocab_size), positive_int()},
        {"proj_dim", std::to_string(enc.proj_dim), positive_int()},
        {"head_mode", "separate", one_of({"separate", "shared"})},
        {"norm_eps", format_double(enc.norm_eps), positive_real()},
        // data
        {"data_dir", "data", any_text()},
        {"num_classes", "4", [](const std::string& k, const std::string& v) {
           if (parse_size_value(k, v) < 2) range_error(k, v, "must be at least 2");
         }},
        {"samples_per_class", "256", positive_int()},
        {"noise", "0.2", nonneg_real()},
        {"train_fraction", "0.75", open_unit()},
        {"paired_modality", "image", one_of({"image", "audio"})},
        {"paired_classes", "8", [](const std::string& k, const std::string& v) {
           if (parse_size_value(k, v) < 2) range_error(k, v, "must be at least 2");
         }},
        {"paired_samples_per_class", "64", positive_int()},
        {"caption_templates", "{class}", any_text()},
        {"class_names", "apple,river,tiger,cloud,piano,stone,maple,ocean", any_text()},
        // pretraining
        {"temperature", "0.05", positive_real()},
        {"batch_size", "16", positive_int()},
        {"epochs", "30", any_int()},
        {"lr", "0.001", positive_real()},
        {"min_lr", "0.0001", nonneg_real()},
        {"weight_decay", "0.1", nonneg_real()},
        {"warmup_epochs", "5", any_int()},
        {"schedule", "cyclic", one_of({"cyclic", "random"})},
        {"balance_target", "0", any_int()},
        {"crop_scale_min", "0.2", open_unit()},
        {"crop_scale_max", "1", open_unit()},
        {"flip_prob", "0.5", probability()},
        {"jitter", "0.4", [](const std::string& k, const std::string& v) {
           const double x = parse_double_value(k, v);
           if (!(x >= 0.0 && x < 1.0)) range_error(k, v, "must lie in [0, 1)");
         }},
        {"blur_prob", "0.5", probability()},
        {"time_mask_max", std::to_string(enc.audio_frames / 4), any_int()},
        {"freq_mask_max", std::to_string(enc.audio_bins / 4), any_int()},
        {"masks_per_axis", "2", any_int()},
        {"text_mask_prob", "0.15", probability()},
        // evaluation and adaptation
        {"checkpoint", "", any_text()},
        {"knn_k", "20", positive_int()},
        {"knn_temperature", "0.07", positive_real()},
        {"probe_lr", "0.0001", positive_real()},
        {"probe_min_lr", "0.00001", nonneg_real()},
        {"probe_weight_decay", "0.1", nonneg_real()},
        {"probe_epochs", "40", any_int()},
        {"probe_warmup_epochs", "10", any_int()},
        {"probe_batch_size", "32", positive_int()},
        {"sbora_modalities", "image", modality_list()},
        {"sbora_rank", "8", positive_int()},
        {"sbora_alpha", "8", positive_real()},
        {"sbora_targets", "attn.query,attn.key,attn.value,attn.out,mlp.up,mlp.down", any_text()},
        {"sbora_lr", "0.0001", positive_real()},
        {"sbora_min_lr", "0.00001", nonneg_real()},
        {"sbora_weight_decay", "0.1", nonneg_real()},
        {"sbora_epochs", "40", any_int()},
        {"sbora_warmup_epochs", "10", any_int()},
        {"sbora_batch_size", "32", positive_int()},
        {"align_lr", "0.001", positive_real()},
        {"align_min_lr", "0.0001", nonneg_real()},
        {"align_weight_decay", "0.1", nonneg_real()},
        {"align_epochs", "100", any_int()},
        {"align_warmup_epochs", "10", any_int()},
        {"align_batch_size", "128", [](const std::string& k, const std::string& v) {
           const auto n = parse_size_value(k, v);
           if (n < 2 || n > 256) range_error(k, v, "must lie in [2, 256]");
         }},
        {"align_dim", "32", positive_int()},
        {"align_head", "", any_text()},
        {"prompt_template", "{class}", any_text()},
        {"retrieval_k", "1,5", any_text()},
        {"metric_modalities", "image,audio,text", modality_list()},
        {"attn_modalities", "image,audio,text", modality_list()},
        {"attn_samples", "256", positive_int()},
        {"export_method", "pca", one_of({"pca", "raw"})},
    };
    return s;
  }();
  return kSpecs;
}

const KeySpec* find_spec(const std::string& key) {
  for (const auto& s : specs()) {
    if (s.name == key) return &s;
  }
  return nullptr;
}

}  // namespace

std::vector<std::string> known_keys() {
  std::vector<std::string> out;
  for (const auto& s : specs()) out.push_back(s.name);
  return out;
}

std::pair<std::string, std::string> parse_override(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

RunConfig RunConfig::resolve(const KeyValues& file, const KeyValues& overrides,
                             const std::optional<std::string>& env_seed) {
  std::map<std::string, std::string> values;
  for (const auto& s : specs()) values[s.name] = s.fallback;
  auto apply = [&](const std::string& key, const std::string& value, const char* source) {
    const KeySpec* spec = find_spec(key);
    if (!spec) throw ConfigError("unknown key '" + key + "' (" + source + ")");
    spec->check(key, value);
    values[key] = value;
  };
  if (env_seed) apply("seed", *env_seed, "OMNIC_SEED");
  for (const auto& [k, v] : file) apply(k, v, "config file");
  for (const auto& [k, v] : overrides) apply(k, v, "--set");

  RunConfig rc;
  for (const auto& s : specs()) rc.entries_.emplace_back(s.name, values[s.name]);
  // Cross-field checks surface through the typed builders.
  rc.encoder();
  rc.pretrain();
  rc.probe();
  rc.sbora();
  rc.align();
  for (Modality m : kAllModalities) rc.corpus_spec(m);
  rc.paired_spec();
  return rc;
}

const std::string& RunConfig::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  throw ConfigError("unknown key '" + key + "'");
}

std::size_t RunConfig::size(const std::string& key) const { return parse_size_value(key, get(key)); }
double RunConfig::number(const std::string& key) const { return parse_double_value(key, get(key)); }
std::uint64_t RunConfig::seed() const { return parse_u64_value("seed", get("seed")); }

std::string RunConfig::dump() const { return format_key_values(entries_); }

EncoderConfig RunConfig::encoder() const {
  EncoderConfig c;
  for (const auto& [k, v] : encoder_config_entries(c)) set_encoder_config_entry(c, k, get(k));
  c.validate();
  return c;
}

SyntheticCorpusSpec RunConfig::corpus_spec(Modality modality) const {
  // Each modality gets its own stream so corpora differ across modalities.
  auto spec = SyntheticCorpusSpec::for_config(encoder(), modality, size("num_classes"), size("samples_per_class"),
                                              number("noise"), seed() * 1000 + static_cast<std::uint64_t>(modality));
  spec.validate();
  return spec;
}

SyntheticCorpusSpec RunConfig::paired_spec() const {
  auto spec = SyntheticCorpusSpec::for_config(encoder(), parse_modality(get("paired_modality")),
                                              size("paired_classes"), size("paired_samples_per_class"),
                                              number("noise"), seed() * 1000 + 77);
  spec.validate();
  return spec;
}

CaptionGrammar RunConfig::grammar() const {
  CaptionGrammar g{split(get("caption_templates"), '|'), split(get("class_names"), ',')};
  if (g.templates.empty()) throw ConfigError("key 'caption_templates' must hold at least one template");
  return g;
}

PretrainConfig RunConfig::pretrain() const {
  PretrainConfig c;
  c.contrastive.temperature = number("temperature");
  c.contrastive.batch_size = size("batch_size");
  c.augment.image = {number("crop_scale_min"), number("crop_scale_max"), number("flip_prob"), number("jitter"),
                     number("blur_prob")};
  c.augment.audio = {size("time_mask_max"), size("freq_mask_max"), size("masks_per_axis")};
  c.augment.text = {number("text_mask_prob"), 257};
  c.optim.base_lr = number("lr");
  c.optim.min_lr = number("min_lr");
  c.optim.weight_decay = number("weight_decay");
  c.optim.total_epochs = size("epochs");
  c.optim.warmup_epochs = std::min(size("warmup_epochs"), c.optim.total_epochs);
  c.schedule = parse_schedule_mode(get("schedule"));
  c.seed = seed();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("pretraining keys: ") + e.what());
  }
  const EncoderConfig enc = encoder();
  if (c.augment.audio.max_time_mask > enc.audio_frames) {
    range_error("time_mask_max", get("time_mask_max"), "exceeds audio_frames");
  }
  if (c.augment.audio.max_freq_mask > enc.audio_bins) {
    range_error("freq_mask_max", get("freq_mask_max"), "exceeds audio_bins");
  }
  return c;
}

KnnOptions RunConfig::knn() const { return {size("knn_k"), number("knn_temperature")}; }

ProbeConfig RunConfig::probe() const {
  ProbeConfig c;
  c.optim.base_lr = number("probe_lr");
  c.optim.min_lr = number("probe_min_lr");
  c.optim.weight_decay = number("probe_weight_decay");
  c.optim.total_epochs = size("probe_epochs");
  c.optim.warmup_epochs = std::min(size("probe_warmup_epochs"), c.optim.total_epochs);
  c.batch_size = size("probe_batch_size");
  c.seed = seed();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("probe keys: ") + e.what());
  }
  return c;
}

SBoRATrainConfig RunConfig::sbora() const {
  SBoRATrainConfig c;
  c.adapter.rank = size("sbora_rank");
  c.adapter.alpha = number("sbora_alpha");
  c.adapter.targets = split(get("sbora_targets"), ',');
  c.adapter.seed = seed();
  for (const auto& t : c.adapter.targets) {
    const auto& all = sbora_default_targets();
    if (std::find(all.begin(), all.end(), t) == all.end()) range_error("sbora_targets", t, "is not a block linear");
  }
  const EncoderConfig enc = encoder();
  if (c.adapter.rank > enc.embed_dim) range_error("sbora_rank", get("sbora_rank"), "exceeds the smallest d_in");
  c.optim.base_lr = number("sbora_lr");
  c.optim.min_lr = number("sbora_min_lr");
  c.optim.weight_decay = number("sbora_weight_decay");
  c.optim.total_epochs = size("sbora_epochs");
  c.optim.warmup_epochs = std::min(size("sbora_warmup_epochs"), c.optim.total_epochs);
  c.batch_size = size("sbora_batch_size");
  try {
    c.optim.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("sbora keys: ") + e.what());
  }
  return c;
}

AlignConfig RunConfig::align() const {
  AlignConfig c;
  c.optim.base_lr = number("align_lr");
  c.optim.min_lr = number("align_min_lr");
  c.optim.weight_decay = number("align_weight_decay");
  c.optim.total_epochs = size("align_epochs");
  c.optim.warmup_epochs = std::min(size("align_warmup_epochs"), c.optim.total_epochs);
  c.batch_size = size("align_batch_size");
  c.seed = seed();
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("align keys: ") + e.what());
  }
  return c;
}

std::filesystem::path RunConfig::require_path(const std::string& key, const std::string& command) const {
  const std::string& v = get(key);
  if (v.empty()) throw ConfigError("key '" + key + "' must be set for " + command);
  return v;
}

std::vector<Modality> RunConfig::modalities(const std::string& key) const {
  std::vector<Modality> out;
  for (const auto& item : split(get(key), ',')) out.push_back(parse_modality(item));
  return out;
}

}  // namespace omnic::cli
