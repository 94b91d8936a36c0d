#include "omnic/pretrain.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>

#include "omnic/errors.hpp"
#include "omnic/ops.hpp"

namespace omnic {
namespace {

std::size_t slot(Modality m) { return static_cast<std::size_t>(m); }

std::string shortest(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace

const char* schedule_mode_name(ScheduleMode mode) { return mode == ScheduleMode::kCyclic ? "cyclic" : "random"; }

ScheduleMode parse_schedule_mode(const std::string& text) {
  if (text == "cyclic") return ScheduleMode::kCyclic;
  if (text == "random") return ScheduleMode::kRandom;
  throw ConfigError("unknown schedule mode '" + text + "' (expected cyclic or random)");
}

ModalityScheduler::ModalityScheduler(const std::array<std::size_t, 3>& store_sizes, std::size_t batch_size,
                                     ScheduleMode mode, std::uint64_t seed)
    : sizes_(store_sizes), batch_size_(batch_size), mode_(mode), rng_(seed) {
  if (batch_size_ == 0) throw ConfigError("batch_size must be positive");
  for (Modality m : kAllModalities) {
    const std::size_t n = sizes_[slot(m)];
    if (n == 0) continue;
    if (n < batch_size_) {
      throw DataError(std::string(modality_name(m)) + " store holds " + std::to_string(n) +
                      " samples, fewer than batch size " + std::to_string(batch_size_));
    }
    active_.push_back(m);
    reshuffle(slot(m));
  }
  if (active_.empty()) throw DataError("every modality store is empty");
}

void ModalityScheduler::reshuffle(std::size_t m) {
  order_[m].resize(sizes_[m]);
  std::iota(order_[m].begin(), order_[m].end(), std::size_t{0});
  std::shuffle(order_[m].begin(), order_[m].end(), rng_);
  cursor_[m] = 0;
}

ModalityScheduler::Draw ModalityScheduler::next() {
  Modality m;
  if (mode_ == ScheduleMode::kCyclic) {
    m = active_[turn_ % active_.size()];
    ++turn_;
  } else {
    m = active_[std::uniform_int_distribution<std::size_t>(0, active_.size() - 1)(rng_)];
  }
  const std::size_t s = slot(m);
  if (cursor_[s] + batch_size_ > sizes_[s]) reshuffle(s);
  Draw draw{m, {}};
  draw.indices.assign(order_[s].begin() + static_cast<std::ptrdiff_t>(cursor_[s]),
                      order_[s].begin() + static_cast<std::ptrdiff_t>(cursor_[s] + batch_size_));
  cursor_[s] += batch_size_;
  return draw;
}

std::size_t ModalityScheduler::batches_per_epoch() const {
  std::size_t total = 0;
  for (Modality m : active_) total += sizes_[slot(m)] / batch_size_;
  return total;
}

ModalityBatch sample_modality_minibatch(ModalityScheduler& sched, const ModalityStores& stores) {
  const auto draw = sched.next();
  const auto& store = stores[slot(draw.modality)];
  ModalityBatch batch;
  batch.reserve(draw.indices.size());
  for (std::size_t i : draw.indices) {
    if (i >= store.size()) throw DataError("scheduler index past the end of the store");
    batch.push_back(store[i]);
  }
  return batch;
}

ModalityStores balance_datasets(const ModalityStores& stores, std::size_t target, std::mt19937_64& rng) {
  ModalityStores out;
  for (std::size_t m = 0; m < stores.size(); ++m) {
    const auto& store = stores[m];
    if (store.size() <= target) {
      out[m] = store;
      continue;
    }
    std::vector<std::size_t> idx(store.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(target);
    std::sort(idx.begin(), idx.end());
    out[m].reserve(target);
    for (std::size_t i : idx) out[m].push_back(store[i]);
  }
  return out;
}

void PretrainConfig::validate() const {
  contrastive.validate();
  augment.validate();
  optim.validate();
}

std::string loss_log_header() { return "epoch,step,modality,loss,lr"; }

std::string format_loss_record(const LossRecord& r) {
  return std::to_string(r.epoch) + "," + std::to_string(r.step) + "," + modality_name(r.modality) + "," +
         shortest(r.loss) + "," + shortest(r.lr);
}

PretrainResult run_pretraining(OmniEncoder<float> encoder, const ModalityStores& stores,
                               const PretrainConfig& config,
                               const std::function<void(const LossRecord&)>& on_record) {
  config.validate();
  PretrainResult result{std::move(encoder), {}, 0, false, {}};
  const std::size_t epochs = config.optim.total_epochs;
  if (epochs == 0) return result;

  std::array<std::size_t, 3> sizes{};
  for (std::size_t m = 0; m < 3; ++m) sizes[m] = stores[m].size();
  ModalityScheduler sched(sizes, config.contrastive.batch_size, config.schedule, config.seed ^ 0x5CEDu);
  std::mt19937_64 aug_rng(config.seed ^ 0xA116u);
  result.steps_per_epoch = sched.batches_per_epoch();

  OmniEncoder<float>& model = result.model;
  const auto params = named_parameters(model);
  OptimizerState opt(config.optim);
  const auto pairing = nt_xent_pairing(config.contrastive.batch_size);
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    for (std::size_t b = 0; b < result.steps_per_epoch; ++b, ++step) {
      const ModalityBatch batch = sample_modality_minibatch(sched, stores);
      const Modality modality = batch.front().modality();
      ModalityBatch view1;
      ModalityBatch view2;
      view1.reserve(batch.size());
      view2.reserve(batch.size());
      for (const auto& s : batch) {
        view1.push_back(augment(s, config.augment, aug_rng));
        view2.push_back(augment(s, config.augment, aug_rng));
      }
      for (auto p : params) p.tensor.clear_grad();

      Tape<float> tape;
      const double lr = lr_at_step(opt, step, result.steps_per_epoch);
      double loss_value = 0.0;
      try {
        const TensorF z1 =
            project(tape, model, encode(tape, model, std::span<const ModalitySample>(view1)), modality);
        const TensorF z2 =
            project(tape, model, encode(tape, model, std::span<const ModalitySample>(view2)), modality);
        TensorF loss = nt_xent_loss(tape, ops::concat(tape, {z1, z2}, 0), pairing, config.contrastive.temperature);
        loss_value = loss.item();
        if (!std::isfinite(loss_value)) throw NumericError("non-finite loss");
        tape.backward(loss);
        adamw_step(std::span<const NamedParam<float>>(params), opt, lr);
      } catch (const NumericError& e) {
        // adamw_step validates every gradient before writing, so the model is still the last good state.
        result.diverged = true;
        result.message = std::string(e.what()) + " at epoch " + std::to_string(epoch) + " step " + std::to_string(step);
        for (auto p : params) p.tensor.clear_grad();
        return result;
      }
      LossRecord rec{epoch, step, modality, loss_value, lr};
      result.log.push_back(rec);
      if (on_record) on_record(rec);
    }
  }
  for (auto p : params) p.tensor.clear_grad();
  return result;
}

std::array<double, 3> epoch_modality_means(const std::vector<LossRecord>& log, std::size_t epoch) {
  std::array<double, 3> sum{};
  std::array<std::size_t, 3> count{};
  for (const auto& r : log) {
    if (r.epoch != epoch) continue;
    sum[slot(r.modality)] += r.loss;
    ++count[slot(r.modality)];
  }
  std::array<double, 3> out{};
  for (std::size_t m = 0; m < 3; ++m) {
    out[m] = count[m] ? sum[m] / static_cast<double>(count[m]) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace omnic
