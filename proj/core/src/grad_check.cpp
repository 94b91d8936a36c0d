#include "omnic/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "omnic/errors.hpp"

namespace omnic {
namespace {

double evaluate(const std::function<TensorD(Tape<double>&)>& fn) {
  Tape<double> tape = Tape<double>::no_grad();
  const double value = fn(tape).item();
  if (!std::isfinite(value)) throw NumericError("grad check: function returned a non-finite value");
  return value;
}

}  // namespace

GradCheckReport finite_diff_grad_check(const std::function<TensorD(Tape<double>&)>& fn,
                                       std::vector<NamedTensorD> params,
                                       const GradCheckOptions& options) {
  for (NamedTensorD& p : params) {
    p.tensor.set_requires_grad(true);
    p.tensor.clear_grad();
  }
  {
    Tape<double> tape;
    TensorD loss = fn(tape);
    if (!std::isfinite(loss.item())) throw NumericError("grad check: function returned a non-finite value");
    backward(loss, tape);
  }

  std::mt19937_64 rng(options.seed);
  GradCheckReport report;
  for (NamedTensorD& p : params) {
    GradCheckEntry entry{p.name};
    std::vector<double> analytic(p.tensor.numel(), 0.0);
    if (p.tensor.has_grad()) {
      auto g = p.tensor.grad();
      std::copy(g.begin(), g.end(), analytic.begin());
    }
    std::vector<std::size_t> coords(p.tensor.numel());
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (options.max_coords_per_tensor > 0 && coords.size() > options.max_coords_per_tensor) {
      std::shuffle(coords.begin(), coords.end(), rng);
      coords.resize(options.max_coords_per_tensor);
      std::sort(coords.begin(), coords.end());
    }
    auto values = p.tensor.data();
    for (std::size_t c : coords) {
      const double original = values[c];
      values[c] = original + options.h;
      const double up = evaluate(fn);
      values[c] = original - options.h;
      const double down = evaluate(fn);
      values[c] = original;
      const double numeric = (up - down) / (2.0 * options.h);
      const double abs_err = std::abs(analytic[c] - numeric);
      const double denom = std::max({std::abs(analytic[c]), std::abs(numeric), options.rel_floor});
      entry.max_abs_error = std::max(entry.max_abs_error, abs_err);
      entry.max_rel_error = std::max(entry.max_rel_error, abs_err / denom);
      ++entry.checked;
    }
    report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
    report.entries.push_back(std::move(entry));
  }
  report.passed = report.max_rel_error < options.tol;
  return report;
}

}  // namespace omnic
