#include "omnic/adapt.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "omnic/errors.hpp"
#include "omnic/ops.hpp"

namespace omnic {
namespace {

std::size_t class_count(std::span<const std::int32_t> labels) {
  std::set<std::int32_t> distinct;
  std::int32_t max_label = -1;
  for (std::int32_t l : labels) {
    if (l < 0) throw DataError("negative class label " + std::to_string(l));
    distinct.insert(l);
    max_label = std::max(max_label, l);
  }
  if (distinct.size() < 2) throw DataError("training labels hold a single class");
  return static_cast<std::size_t>(max_label) + 1;
}

TensorF gather_rows(const FeatureMatrix& feats, std::span<const std::size_t> idx) {
  const std::size_t d = feats.front().size();
  std::vector<float> buf(idx.size() * d);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::transform(feats[idx[i]].begin(), feats[idx[i]].end(), buf.begin() + static_cast<std::ptrdiff_t>(i * d),
                   [](double v) { return static_cast<float>(v); });
  }
  return TensorF({idx.size(), d}, std::move(buf));
}

std::vector<std::int32_t> argmax_rows(const TensorF& logits) {
  const std::size_t n = logits.dim(0);
  const std::size_t k = logits.dim(1);
  const auto data = logits.data();
  std::vector<std::int32_t> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = data.subspan(i * k, k);
    out[i] = static_cast<std::int32_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

/// Minibatch index lists for one epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(s),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, s + batch)));
  }
  return out;
}

std::size_t batches_per_epoch(std::size_t n, std::size_t batch) { return (n + batch - 1) / batch; }

}  // namespace

void ProbeConfig::validate() const {
  optim.validate();
  if (batch_size == 0) throw ConfigError("probe batch_size must be positive");
}

std::vector<std::int32_t> sample_labels(std::span<const ModalitySample> samples) {
  std::vector<std::int32_t> out;
  out.reserve(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].label) throw DataError("sample " + std::to_string(i) + " has no label");
    out.push_back(*samples[i].label);
  }
  return out;
}

std::vector<std::int32_t> probe_predict(const LinearProbeHead& head, const FeatureMatrix& feats) {
  if (feats.empty()) return {};
  std::vector<std::size_t> all(feats.size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  auto tape = Tape<float>::no_grad();
  return argmax_rows(head.linear.forward(tape, gather_rows(feats, all)));
}

ProbeResult train_linear_probe(const FeatureMatrix& train, std::span<const std::int32_t> train_labels,
                               const FeatureMatrix& held_out, std::span<const std::int32_t> held_out_labels,
                               const ProbeConfig& config) {
  config.validate();
  if (train.empty()) throw DataError("empty probe training set");
  if (train.size() != train_labels.size() || held_out.size() != held_out_labels.size()) {
    throw ContractError("train_linear_probe: feature and label counts differ");
  }
  const std::size_t k = std::max(class_count(train_labels),
                                 held_out_labels.empty()
                                     ? std::size_t{0}
                                     : static_cast<std::size_t>(*std::max_element(held_out_labels.begin(),
                                                                                  held_out_labels.end())) + 1);
  const std::size_t d = train.front().size();
  ProbeResult result{{Linear<float>::zeros(d, k)}, 0.0, 0.0, {}};
  result.head.linear.weight.set_requires_grad(true);
  result.head.linear.bias.set_requires_grad(true);
  const std::vector<NamedParam<float>> params{{"probe.weight", result.head.linear.weight},
                                              {"probe.bias", result.head.linear.bias}};
  OptimizerState opt(config.optim);
  std::mt19937_64 rng(config.seed);
  const std::size_t spe = batches_per_epoch(train.size(), config.batch_size);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.optim.total_epochs; ++epoch) {
    double total = 0.0;
    const auto batches = epoch_batches(train.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      std::vector<std::int32_t> y(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) y[i] = train_labels[idx[i]];
      for (auto p : params) p.tensor.clear_grad();
      Tape<float> tape;
      TensorF loss = ops::cross_entropy(tape, result.head.linear.forward(tape, gather_rows(train, idx)), y);
      total += loss.item();
      tape.backward(loss);
      adamw_step(std::span<const NamedParam<float>>(params), opt, lr_at_step(opt, step++, spe));
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches.size()));
  }
  for (auto p : params) {
    p.tensor.clear_grad();
    p.tensor.set_requires_grad(false);
  }
  result.train_accuracy = accuracy(probe_predict(result.head, train), train_labels);
  if (!held_out.empty()) result.held_out_accuracy = accuracy(probe_predict(result.head, held_out), held_out_labels);
  return result;
}

ProbeResult train_linear_probe(const OmniEncoder<float>& enc, std::span<const ModalitySample> train,
                               std::span<const ModalitySample> held_out, const ProbeConfig& config) {
  const auto train_labels = sample_labels(train);
  const auto held_labels = sample_labels(held_out);
  return train_linear_probe(to_double(extract_features(enc, train)), train_labels,
                            to_double(extract_features(enc, held_out)), held_labels, config);
}

const std::vector<std::string>& sbora_default_targets() {
  static const std::vector<std::string> kTargets{"attn.query", "attn.key", "attn.value",
                                                 "attn.out",   "mlp.up",   "mlp.down"};
  return kTargets;
}

template <typename T>
void attach_sbora(OmniEncoder<T>& enc, const SBoRAConfig& config) {
  if (!(config.alpha > 0.0)) throw ConfigError("sbora alpha must be positive");
  for (const auto& t : config.targets) {
    const auto& all = sbora_default_targets();
    if (std::find(all.begin(), all.end(), t) == all.end()) throw ConfigError("unknown sbora target '" + t + "'");
  }
  // Validate every layer before mutating any.
  for_each_block_linear<T>(enc, [&](const std::string& name, Linear<T>& lin) {
    const std::string suffix = name.substr(name.find('.', 7) + 1);
    if (std::find(config.targets.begin(), config.targets.end(), suffix) == config.targets.end()) return;
    if (config.rank == 0 || config.rank > lin.in_features()) {
      throw ConfigError("sbora rank " + std::to_string(config.rank) + " outside [1, " +
                        std::to_string(lin.in_features()) + "] for " + name);
    }
    if (lin.adapter) throw StateError(name + " already carries an adapter");
  });
  set_trainable(enc, false);
  std::mt19937_64 rng(config.seed);
  for_each_block_linear<T>(enc, [&](const std::string& name, Linear<T>& lin) {
    const std::string suffix = name.substr(name.find('.', 7) + 1);
    if (std::find(config.targets.begin(), config.targets.end(), suffix) == config.targets.end()) return;
    std::vector<std::size_t> pool(lin.in_features());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(config.rank);
    lin.adapter = SBoRAAdapter<T>{config.rank, config.alpha, std::move(pool),
                                  Tensor<T>::zeros({lin.out_features(), config.rank}, true)};
  });
}

template <typename T>
OmniEncoder<T> merge_sbora(const OmniEncoder<T>& enc) {
  OmniEncoder<T> out = clone_encoder(enc);
  for_each_block_linear<T>(out, [](const std::string&, Linear<T>& lin) {
    if (!lin.adapter) return;
    const auto& a = *lin.adapter;
    const std::size_t rows = lin.out_features();
    const std::size_t cols = lin.in_features();
    const T s = a.scaling();
    auto w = lin.weight.data();
    const auto b = a.B.data();
    for (std::size_t j = 0; j < a.rank; ++j) {
      const std::size_t c = a.basis_indices[j];
      for (std::size_t i = 0; i < rows; ++i) w[i * cols + c] += s * b[i * a.rank + j];
    }
    lin.adapter.reset();
  });
  return out;
}

template <typename T>
double count_trainable_fraction(const OmniEncoder<T>& enc) {
  double trainable = 0.0;
  double base = 0.0;
  for (const auto& p : named_parameters(enc, ParamGroup::kBackbone)) {
    const auto n = static_cast<double>(p.tensor.numel());
    if (p.tensor.requires_grad()) trainable += n;
    if (p.name.rfind("sbora.", 0) != 0) base += n;
  }
  return base > 0.0 ? trainable / base : 0.0;
}

SBoRAResult train_sbora_classifier(const OmniEncoder<float>& enc, std::span<const ModalitySample> train,
                                   std::span<const ModalitySample> held_out, const SBoRATrainConfig& config) {
  config.optim.validate();
  if (config.batch_size == 0) throw ConfigError("sbora batch_size must be positive");
  if (train.empty()) throw DataError("empty sbora training set");
  const auto train_labels = sample_labels(train);
  const auto held_labels = sample_labels(held_out);
  const std::size_t k = class_count(train_labels);
  SBoRAResult result{clone_encoder(enc), {}, 0.0, {}};
  attach_sbora(result.adapted, config.adapter);
  result.head.linear = Linear<float>::zeros(enc.config.embed_dim, k);
  result.head.linear.weight.set_requires_grad(true);
  result.head.linear.bias.set_requires_grad(true);

  std::vector<NamedParam<float>> params;
  for (auto& p : named_parameters(result.adapted)) {
    if (p.tensor.requires_grad()) params.push_back(p);
  }
  params.push_back({"head.weight", result.head.linear.weight});
  params.push_back({"head.bias", result.head.linear.bias});

  OptimizerState opt(config.optim);
  std::mt19937_64 rng(config.adapter.seed ^ 0x5B0Au);
  const std::size_t spe = batches_per_epoch(train.size(), config.batch_size);
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.optim.total_epochs; ++epoch) {
    double total = 0.0;
    const auto batches = epoch_batches(train.size(), config.batch_size, rng);
    for (const auto& idx : batches) {
      ModalityBatch batch;
      std::vector<std::int32_t> y;
      for (std::size_t i : idx) {
        batch.push_back(train[i]);
        y.push_back(train_labels[i]);
      }
      for (auto p : params) p.tensor.clear_grad();
      Tape<float> tape;
      const TensorF cls = encode(tape, result.adapted, std::span<const ModalitySample>(batch));
      TensorF loss = ops::cross_entropy(tape, result.head.linear.forward(tape, cls), y);
      total += loss.item();
      tape.backward(loss);
      adamw_step(std::span<const NamedParam<float>>(params), opt, lr_at_step(opt, step++, spe));
    }
    result.epoch_loss.push_back(total / static_cast<double>(batches.size()));
  }
  for (auto p : params) p.tensor.clear_grad();
  if (!held_out.empty()) {
    const auto feats = to_double(extract_features(result.adapted, held_out));
    result.held_out_accuracy = accuracy(probe_predict(result.head, feats), held_labels);
  }
  return result;
}

template void attach_sbora(OmniEncoder<float>&, const SBoRAConfig&);
template void attach_sbora(OmniEncoder<double>&, const SBoRAConfig&);
template OmniEncoder<float> merge_sbora(const OmniEncoder<float>&);
template OmniEncoder<double> merge_sbora(const OmniEncoder<double>&);
template double count_trainable_fraction(const OmniEncoder<float>&);
template double count_trainable_fraction(const OmniEncoder<double>&);

}  // namespace omnic
