#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <vector>

#include "omnic/tape.hpp"
#include "omnic/tensor.hpp"

namespace omnic {

/// Low-rank update with a fixed standard-basis factor.
///
/// The implicit A factor has row j equal to e_{basis_indices[j]}, so the
/// update (alpha / r) · B · A only touches the selected input columns. B is
/// [out, r] and starts at zero.
template <typename T>
struct SBoRAAdapter {
  std::size_t rank = 0;
  double alpha = 0.0;
  std::vector<std::size_t> basis_indices;
  Tensor<T> B;

  T scaling() const { return static_cast<T>(alpha / static_cast<double>(rank)); }
};

/// y = x · Wᵀ + b (+ adapter path), with W stored [out, in].
template <typename T>
struct Linear {
  Tensor<T> weight;
  Tensor<T> bias;
  std::optional<SBoRAAdapter<T>> adapter;

  std::size_t in_features() const { return weight.dim(1); }
  std::size_t out_features() const { return weight.dim(0); }

  Tensor<T> forward(Tape<T>& tape, const Tensor<T>& x) const;

  /// Weight and bias drawn from U(−1/√in, 1/√in).
  static Linear init(std::size_t in, std::size_t out, std::mt19937_64& rng);
  static Linear zeros(std::size_t in, std::size_t out);
};

extern template struct Linear<float>;
extern template struct Linear<double>;

}  // namespace omnic
