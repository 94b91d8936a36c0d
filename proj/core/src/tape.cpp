#include "omnic/tape.hpp"

#include "omnic/errors.hpp"

namespace omnic {

template <typename T>
void Tape<T>::record(std::string op, std::function<void()> backward_fn) {
  if (consumed_) throw StateError("cannot record '" + op + "' on a consumed tape");
  entries_.push_back({std::move(op), std::move(backward_fn)});
}

template <typename T>
void Tape<T>::backward(Tensor<T>& loss) {
  if (consumed_) throw StateError("tape already consumed by a previous backward pass");
  if (!loss.defined() || loss.numel() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  consumed_ = true;
  if (!loss.requires_grad()) return;
  loss.grad()[0] += T{1};
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  entries_.clear();
}

template class Tape<float>;
template class Tape<double>;

}  // namespace omnic
