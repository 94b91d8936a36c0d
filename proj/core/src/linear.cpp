#include "omnic/linear.hpp"

#include <cmath>

#include "omnic/ops.hpp"

namespace omnic {

template <typename T>
Tensor<T> Linear<T>::forward(Tape<T>& tape, const Tensor<T>& x) const {
  Tensor<T> y = ops::add(tape, ops::matmul(tape, x, weight, /*transpose_b=*/true), bias);
  if (adapter) {
    Tensor<T> picked = ops::index_select_lastdim(tape, x, std::span<const std::size_t>(adapter->basis_indices));
    Tensor<T> delta = ops::matmul(tape, picked, adapter->B, /*transpose_b=*/true);
    y = ops::add(tape, y, ops::scale(tape, delta, adapter->scaling()));
  }
  return y;
}

template <typename T>
Linear<T> Linear<T>::init(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<T> w(in * out);
  for (T& v : w) v = static_cast<T>(dist(rng));
  std::vector<T> b(out);
  for (T& v : b) v = static_cast<T>(dist(rng));
  return Linear{Tensor<T>({out, in}, std::move(w), true), Tensor<T>({out}, std::move(b), true), std::nullopt};
}

template <typename T>
Linear<T> Linear<T>::zeros(std::size_t in, std::size_t out) {
  return Linear{Tensor<T>::zeros({out, in}, true), Tensor<T>::zeros({out}, true), std::nullopt};
}

template struct Linear<float>;
template struct Linear<double>;

}  // namespace omnic
