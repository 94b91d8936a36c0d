#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "omnic/encoder.hpp"

namespace omnic {

struct OptimizerConfig {
  double base_lr = 1e-4;
  double min_lr = 1e-5;
  double weight_decay = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t warmup_epochs = 5;
  std::size_t total_epochs = 30;

  void validate() const;
};

/// AdamW moments, allocated on first use and kept in f64 regardless of the
/// parameter dtype.
struct OptimizerState {
  OptimizerConfig config;
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;

  explicit OptimizerState(OptimizerConfig cfg = {}) : config(cfg) {}
};

/// Linear warmup from 0 to base_lr over warmup_epochs, then cosine decay that
/// reaches min_lr on the last step of total_epochs.
double lr_at_step(const OptimizerState& opt, std::size_t step, std::size_t steps_per_epoch);

/// Decoupled weight decay then a bias-corrected Adam update on every
/// parameter that requires a gradient and has a gradient buffer. Parameters
/// without a buffer were not reached by backward and are skipped. Every
/// gradient is checked before any parameter changes; a non-finite entry
/// throws NumericError naming the parameter.
template <typename T>
void adamw_step(std::span<const NamedParam<T>> params, OptimizerState& opt, double lr);

}  // namespace omnic
