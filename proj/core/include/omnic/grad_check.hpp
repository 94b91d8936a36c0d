#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "omnic/tape.hpp"
#include "omnic/tensor.hpp"

namespace omnic {

struct NamedTensorD {
  std::string name;
  TensorD tensor;
};

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;  // coordinates compared
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
  bool passed = false;
};

struct GradCheckOptions {
  double h = 1e-5;
  double tol = 1e-4;
  /// Denominator floor for the relative error |a - n| / max(|a|, |n|, floor).
  double rel_floor = 1e-6;
  /// 0 checks every coordinate; otherwise a seeded sample of this many per tensor.
  std::size_t max_coords_per_tensor = 0;
  std::uint64_t seed = 0;
};

/// Compares tape gradients against central differences (f(θ+h) − f(θ−h)) / 2h.
///
/// `fn` must build a scalar loss from the given params on the tape it is
/// handed; it is called once with a recording tape and then repeatedly with
/// non-recording tapes.
GradCheckReport finite_diff_grad_check(const std::function<TensorD(Tape<double>&)>& fn,
                                       std::vector<NamedTensorD> params,
                                       const GradCheckOptions& options = {});

}  // namespace omnic
