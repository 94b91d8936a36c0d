#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "omnic/tensor.hpp"

namespace omnic {

/// Ordered record of differentiable operations.
///
/// Operators append a backward closure when recording is enabled and at least
/// one operand requires a gradient. backward() replays the closures in exact
/// reverse order, after which the tape is consumed. A tape belongs to a single
/// thread of execution.
template <typename T>
class Tape {
 public:
  struct Entry {
    std::string op;
    std::function<void()> backward;
  };

  explicit Tape(bool recording = true) : recording_(recording) {}

  /// A tape that never records; used for inference.
  static Tape no_grad() { return Tape(false); }

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  bool recording() const { return recording_ && !consumed_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }

  void record(std::string op, std::function<void()> backward_fn);

  /// Seeds d(loss)/d(loss) = 1 and runs every recorded closure newest-first.
  void backward(Tensor<T>& loss);

 private:
  bool recording_;
  bool consumed_ = false;
  std::vector<Entry> entries_;
};

template <typename T>
void backward(Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace omnic
