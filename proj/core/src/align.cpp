#include "omnic/align.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "container.hpp"
#include "omnic/errors.hpp"
#include "omnic/losses.hpp"
#include "omnic/ops.hpp"
#include "omnic/tokenizer.hpp"

namespace omnic {
namespace {

TensorF rows_tensor(const std::vector<FeatureRow>& rows, std::span<const std::size_t> idx, std::size_t d) {
  std::vector<float> buf(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(rows[idx[i]].values.begin(), rows[idx[i]].values.end(), buf.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return TensorF({idx.size(), d}, std::move(buf));
}

TensorF matrix_tensor(const FeatureMatrix& m) {
  const std::size_t d = m.empty() ? 0 : m.front().size();
  std::vector<float> buf;
  buf.reserve(m.size() * d);
  for (const auto& r : m) {
    if (r.size() != d) throw DimensionError("ragged feature rows");
    for (double v : r) buf.push_back(static_cast<float>(v));
  }
  return TensorF({m.size(), d}, std::move(buf));
}

FeatureMatrix tensor_rows(const TensorF& t) {
  const std::size_t n = t.dim(0);
  const std::size_t d = t.dim(1);
  const auto data = t.data();
  FeatureMatrix out(n);
  for (std::size_t i = 0; i < n; ++i) out[i].assign(data.begin() + static_cast<std::ptrdiff_t>(i * d),
                                                    data.begin() + static_cast<std::ptrdiff_t>((i + 1) * d));
  return out;
}

double cosine_rows(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

std::vector<NamedParam<float>> head_params(const AlignmentHead& h) {
  return {{"proj_a.weight", h.proj_a.weight},
          {"proj_a.bias", h.proj_a.bias},
          {"proj_b.weight", h.proj_b.weight},
          {"proj_b.bias", h.proj_b.bias},
          {"log_scale", h.log_scale}};
}

double recall_direction(const FeatureMatrix& queries, const FeatureMatrix& candidates, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const double target = cosine_rows(queries[i], candidates[i]);
    std::size_t higher = 0;
    for (std::size_t j = 0; j < candidates.size(); ++j) {
      if (cosine_rows(queries[i], candidates[j]) > target) ++higher;
    }
    hits += higher < k;
  }
  return static_cast<double>(hits) / static_cast<double>(queries.size());
}

}  // namespace

FeatureCache cache_single(const OmniEncoder<float>& enc, std::span<const ModalitySample> samples) {
  FeatureCache cache;
  cache.dim = enc.config.embed_dim;
  if (samples.empty()) return cache;
  cache.modality = samples.front().modality();
  cache.has_labels = std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.label.has_value(); });
  cache.has_pair_ids =
      std::all_of(samples.begin(), samples.end(), [](const auto& s) { return s.pair_id.has_value(); });
  const auto feats = extract_features(enc, samples);
  cache.rows.resize(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    auto& r = cache.rows[i];
    r.id = cache.has_pair_ids ? *samples[i].pair_id : static_cast<std::int64_t>(i);
    r.label = samples[i].label.value_or(-1);
    r.values = feats[i];
  }
  return cache;
}

PairedFeatureCache cache_features(const OmniEncoder<float>& enc, std::span<const ModalitySample> side_a,
                                  std::span<const ModalitySample> side_b) {
  auto index_side = [](std::span<const ModalitySample> side, const char* name) {
    std::map<std::int64_t, std::size_t> by_id;
    for (std::size_t i = 0; i < side.size(); ++i) {
      if (!side[i].pair_id) throw DataError(std::string("side ") + name + " sample " + std::to_string(i) + " has no pair_id");
      if (!by_id.emplace(*side[i].pair_id, i).second) {
        throw DataError(std::string("pair_id ") + std::to_string(*side[i].pair_id) + " repeats on side " + name);
      }
    }
    return by_id;
  };
  const auto ia = index_side(side_a, "a");
  const auto ib = index_side(side_b, "b");
  for (const auto& [id, _] : ia) {
    if (!ib.count(id)) throw DataError("pair_id " + std::to_string(id) + " lacks its side-b half");
  }
  for (const auto& [id, _] : ib) {
    if (!ia.count(id)) throw DataError("pair_id " + std::to_string(id) + " lacks its side-a half");
  }
  std::vector<ModalitySample> sorted_a;
  std::vector<ModalitySample> sorted_b;
  for (const auto& [id, i] : ia) sorted_a.push_back(side_a[i]);
  for (const auto& [id, i] : ib) sorted_b.push_back(side_b[i]);
  PairedFeatureCache out{cache_single(enc, sorted_a), cache_single(enc, sorted_b)};
  if (sorted_b.empty()) out.b.modality = Modality::kText;
  return out;
}

FeatureMatrix cache_matrix(const FeatureCache& cache) {
  FeatureMatrix out(cache.rows.size());
  for (std::size_t i = 0; i < cache.rows.size(); ++i) out[i].assign(cache.rows[i].values.begin(), cache.rows[i].values.end());
  return out;
}

AlignmentHead AlignmentHead::init(std::size_t d, std::size_t q, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  AlignmentHead h{Linear<float>::init(d, q, rng), Linear<float>::init(d, q, rng),
                  TensorF::scalar(static_cast<float>(std::log(1.0 / 0.07)), true)};
  // Plain linear maps: the bias stays zero and is never trained.
  h.proj_a.bias = TensorF::zeros({q});
  h.proj_b.bias = TensorF::zeros({q});
  return h;
}

double AlignmentHead::logit_scale() const { return std::exp(static_cast<double>(log_scale.item())); }

void AlignConfig::validate() const {
  optim.validate();
  if (batch_size < 2) throw ConfigError("align batch_size must be at least 2");
}

AlignResult train_alignment(const PairedFeatureCache& cache, AlignmentHead head, const AlignConfig& config) {
  config.validate();
  const std::size_t n = cache.pairs();
  if (n == 0) throw ContractError("train_alignment: empty cache");
  if (cache.b.rows.size() != n) throw ContractError("train_alignment: sides differ in row count");
  if (n < 2) throw ContractError("train_alignment: need at least 2 pairs");
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t spe = n / batch;  // a short final batch is dropped
  // Work on private copies so the caller's head is left untouched.
  for (Linear<float>* lin : {&head.proj_a, &head.proj_b}) {
    lin->weight = lin->weight.clone();
    lin->bias = lin->bias.clone();
  }
  head.log_scale = head.log_scale.clone();
  const std::vector<NamedParam<float>> params{
      {"proj_a.weight", head.proj_a.weight}, {"proj_b.weight", head.proj_b.weight}, {"log_scale", head.log_scale}};
  for (auto p : params) p.tensor.set_requires_grad(true);
  OptimizerState opt(config.optim);
  std::mt19937_64 rng(config.seed);
  AlignResult result{head, {}};
  std::vector<std::size_t> order(n);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.optim.total_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b = 0; b < spe; ++b) {
      const std::span<const std::size_t> idx(order.data() + b * batch, batch);
      for (auto p : params) p.tensor.clear_grad();
      Tape<float> tape;
      const TensorF za = head.proj_a.forward(tape, rows_tensor(cache.a.rows, idx, cache.a.dim));
      const TensorF zb = head.proj_b.forward(tape, rows_tensor(cache.b.rows, idx, cache.b.dim));
      TensorF loss = symmetric_info_nce(tape, za, zb, head.log_scale);
      total += loss.item();
      tape.backward(loss);
      adamw_step(std::span<const NamedParam<float>>(params), opt, lr_at_step(opt, step++, spe));
      float& ls = head.log_scale.data()[0];
      ls = std::min(ls, static_cast<float>(kMaxLogScale));
    }
    result.epoch_loss.push_back(total / static_cast<double>(spe));
  }
  for (auto p : params) p.tensor.clear_grad();
  result.head = head;
  return result;
}

double alignment_loss(const PairedFeatureCache& cache, const AlignmentHead& head) {
  const std::size_t n = cache.pairs();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto tape = Tape<float>::no_grad();
  const TensorF za = head.proj_a.forward(tape, rows_tensor(cache.a.rows, idx, cache.a.dim));
  const TensorF zb = head.proj_b.forward(tape, rows_tensor(cache.b.rows, idx, cache.b.dim));
  return symmetric_info_nce(tape, za, zb, head.log_scale).item();
}

FeatureMatrix project_side(const AlignmentHead& head, const FeatureMatrix& feats, bool side_a) {
  if (feats.empty()) return {};
  auto tape = Tape<float>::no_grad();
  const TensorF z = (side_a ? head.proj_a : head.proj_b).forward(tape, matrix_tensor(feats));
  return l2_normalize_rows(tensor_rows(z));
}

std::vector<std::int32_t> zero_shot_from_features(const FeatureMatrix& queries, const FeatureMatrix& prompt_feats,
                                                  const AlignmentHead& head) {
  if (prompt_feats.empty()) throw ContractError("zero_shot_classify: empty class list");
  const FeatureMatrix q = project_side(head, queries, true);
  const FeatureMatrix p = project_side(head, prompt_feats, false);
  std::vector<std::int32_t> out;
  out.reserve(q.size());
  for (const auto& row : q) {
    std::size_t best = 0;
    double best_s = cosine_rows(row, p[0]);
    for (std::size_t c = 1; c < p.size(); ++c) {
      const double s = cosine_rows(row, p[c]);
      if (s > best_s) {
        best = c;
        best_s = s;
      }
    }
    out.push_back(static_cast<std::int32_t>(best));
  }
  return out;
}

std::vector<std::int32_t> zero_shot_classify(const FeatureMatrix& queries, const std::vector<std::string>& prompts,
                                             const OmniEncoder<float>& enc, const AlignmentHead& head) {
  if (prompts.empty()) throw ContractError("zero_shot_classify: empty class list");
  std::vector<ModalitySample> texts;
  for (const auto& p : prompts) {
    if (p.size() > enc.config.text_len) {
      throw ContractError("prompt '" + p + "' exceeds text length " + std::to_string(enc.config.text_len));
    }
    texts.push_back({TextPayload{tokenize_text(p, enc.config.text_len)}, std::nullopt, std::nullopt});
  }
  return zero_shot_from_features(queries, to_double(extract_features(enc, texts)), head);
}

RetrievalResult retrieval_at_k(const PairedFeatureCache& cache, const AlignmentHead& head, std::size_t k) {
  const std::size_t n = cache.pairs();
  if (k < 1) throw ContractError("retrieval_at_k: k must be at least 1");
  if (k > n) throw ContractError("retrieval_at_k: k exceeds the candidate count " + std::to_string(n));
  const FeatureMatrix a = project_side(head, cache_matrix(cache.a), true);
  const FeatureMatrix b = project_side(head, cache_matrix(cache.b), false);
  return {recall_direction(a, b, k), recall_direction(b, a, k)};
}

Checkpoint alignment_head_checkpoint(const AlignmentHead& head, const EncoderConfig& config, KeyValues meta) {
  Checkpoint ckpt{config, std::move(meta), {}, {}};
  for (const auto& p : head_params(head)) {
    CheckpointTensor t{p.name, "f32", p.tensor.shape(), {}};
    for (float v : p.tensor.data()) detail::put_le<float>(t.bytes, v);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

AlignmentHead restore_alignment_head(const Checkpoint& ckpt) {
  auto find = [&](const std::string& name) -> TensorF {
    for (const auto& t : ckpt.tensors) {
      if (t.name != name) continue;
      if (t.dtype != "f32" || t.bytes.size() != shape_numel(t.shape) * 4) {
        throw FormatError("tensor " + name + " is not a well-formed f32 buffer", 16);
      }
      std::vector<float> vals(shape_numel(t.shape));
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = detail::get_le<float>(t.bytes.data() + 4 * i);
      return TensorF(t.shape, std::move(vals));
    }
    throw FormatError("alignment head lacks tensor " + name, 16);
  };
  AlignmentHead head{{find("proj_a.weight"), find("proj_a.bias"), std::nullopt},
                     {find("proj_b.weight"), find("proj_b.bias"), std::nullopt},
                     find("log_scale")};
  if (head.proj_a.weight.rank() != 2 || head.proj_b.weight.rank() != 2 ||
      head.proj_a.out_features() != head.proj_b.out_features() || head.log_scale.numel() != 1) {
    throw FormatError("alignment head tensors have inconsistent shapes", 16);
  }
  return head;
}

}  // namespace omnic
