#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "omnic/augment.hpp"
#include "omnic/encoder.hpp"
#include "omnic/losses.hpp"
#include "omnic/modality.hpp"
#include "omnic/optim.hpp"

namespace omnic {

/// One sample store per modality, indexed by static_cast<size_t>(Modality).
using ModalityStores = std::array<std::vector<ModalitySample>, 3>;

enum class ScheduleMode { kCyclic, kRandom };

const char* schedule_mode_name(ScheduleMode mode);
ScheduleMode parse_schedule_mode(const std::string& text);

/// Picks the modality of each minibatch and the store indices that fill it.
///
/// Empty stores are left out of the schedule. Every non-empty store keeps its
/// own permutation; indices are handed out without replacement and the
/// permutation is redrawn once fewer than N remain.
class ModalityScheduler {
 public:
  struct Draw {
    Modality modality;
    std::vector<std::size_t> indices;
  };

  /// Throws DataError when a non-empty store holds fewer than batch_size
  /// samples or every store is empty.
  ModalityScheduler(const std::array<std::size_t, 3>& store_sizes, std::size_t batch_size, ScheduleMode mode,
                    std::uint64_t seed);

  Draw next();

  /// Σ floor(size / N) over the scheduled modalities.
  std::size_t batches_per_epoch() const;
  const std::vector<Modality>& active() const { return active_; }

 private:
  void reshuffle(std::size_t m);

  std::array<std::size_t, 3> sizes_;
  std::size_t batch_size_;
  ScheduleMode mode_;
  std::mt19937_64 rng_;
  std::vector<Modality> active_;
  std::size_t turn_ = 0;
  std::array<std::vector<std::size_t>, 3> order_;
  std::array<std::size_t, 3> cursor_{};
};

ModalityBatch sample_modality_minibatch(ModalityScheduler& sched, const ModalityStores& stores);

/// Each store downsampled without replacement to min(target, size), keeping
/// the original relative order.
ModalityStores balance_datasets(const ModalityStores& stores, std::size_t target, std::mt19937_64& rng);

struct PretrainConfig {
  ContrastiveConfig contrastive;
  AugmentationConfig augment;
  OptimizerConfig optim;
  ScheduleMode schedule = ScheduleMode::kCyclic;
  std::uint64_t seed = 0;

  void validate() const;
};

struct LossRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;
  Modality modality = Modality::kImage;
  double loss = 0.0;
  double lr = 0.0;
};

/// "epoch,step,modality,loss,lr" with round-trip decimal precision.
std::string format_loss_record(const LossRecord& record);
std::string loss_log_header();

struct PretrainResult {
  OmniEncoder<float> model;
  std::vector<LossRecord> log;
  std::size_t steps_per_epoch = 0;
  bool diverged = false;
  std::string message;
};

/// Contrastive pretraining for optim.total_epochs epochs. On a non-finite loss
/// or gradient the run stops before the offending update and the returned
/// model is the last good state.
PretrainResult run_pretraining(OmniEncoder<float> encoder, const ModalityStores& stores,
                               const PretrainConfig& config,
                               const std::function<void(const LossRecord&)>& on_record = {});

/// Mean loss per modality over one epoch of the log; NaN where a modality has
/// no entries.
std::array<double, 3> epoch_modality_means(const std::vector<LossRecord>& log, std::size_t epoch);

}  // namespace omnic
