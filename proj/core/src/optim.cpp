#include "omnic/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "omnic/errors.hpp"

namespace omnic {

void OptimizerConfig::validate() const {
  if (!(base_lr > 0.0)) throw ConfigError("base_lr must be positive");
  if (!(min_lr >= 0.0 && min_lr <= base_lr)) throw ConfigError("min_lr must lie in [0, base_lr]");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be positive");
  if (warmup_epochs > total_epochs) throw ConfigError("warmup_epochs exceeds total_epochs");
}

double lr_at_step(const OptimizerState& opt, std::size_t step, std::size_t steps_per_epoch) {
  const auto& c = opt.config;
  const std::size_t warmup = c.warmup_epochs * steps_per_epoch;
  const std::size_t total = c.total_epochs * steps_per_epoch;
  if (step < warmup) return c.base_lr * static_cast<double>(step) / static_cast<double>(warmup);
  if (total <= warmup + 1) return step == warmup ? c.base_lr : c.min_lr;
  const double span = static_cast<double>(total - 1 - warmup);
  const double progress = std::min(1.0, static_cast<double>(step - warmup) / span);
  return c.min_lr + 0.5 * (c.base_lr - c.min_lr) * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
void adamw_step(std::span<const NamedParam<T>> params, OptimizerState& opt, double lr) {
  for (const auto& p : params) {
    if (!p.tensor.requires_grad() || !p.tensor.has_grad()) continue;
    for (T g : p.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + p.name);
    }
  }
  const auto& c = opt.config;
  if (opt.m.size() < params.size()) {
    opt.m.resize(params.size());
    opt.v.resize(params.size());
  }
  ++opt.step;
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(opt.step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(opt.step));
  const double decay = 1.0 - lr * c.weight_decay;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T> w = params[k].tensor;
    if (!w.requires_grad() || !w.has_grad()) continue;
    auto& m = opt.m[k];
    auto& v = opt.v[k];
    if (m.size() != w.numel()) {
      m.assign(w.numel(), 0.0);
      v.assign(w.numel(), 0.0);
    }
    auto data = w.data();
    auto grad = w.grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double g = grad[i];
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      double x = static_cast<double>(data[i]) * decay;
      x -= lr * mhat / (std::sqrt(vhat) + c.eps);
      data[i] = static_cast<T>(x);
    }
  }
}

template void adamw_step(std::span<const NamedParam<float>>, OptimizerState&, double);
template void adamw_step(std::span<const NamedParam<double>>, OptimizerState&, double);

}  // namespace omnic
