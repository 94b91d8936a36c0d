#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "omnic/tape.hpp"
#include "omnic/tensor.hpp"

namespace omnic {

struct ContrastiveConfig {
  double temperature = 0.05;
  std::size_t batch_size = 16;

  void validate() const;
};

/// uᵀv / (‖u‖‖v‖). Throws NumericError on a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);

/// Positive index for every row of a [2N, p] matrix laid out as
/// [view1 rows; view2 rows]: row i pairs with (i + N) mod 2N.
std::vector<std::int32_t> nt_xent_pairing(std::size_t n);

/// Mean NT-Xent over all 2N anchors. The identity term is excluded from each
/// denominator. Throws ContractError for fewer than two rows.
template <typename T>
Tensor<T> nt_xent_loss(Tape<T>& tape, const Tensor<T>& z, std::span<const std::int32_t> pairing, double tau);

/// ½(CE over rows + CE over columns) of exp(log_scale)·cos(a_i, b_j) with
/// diagonal targets. a and b are [M, q]; log_scale is a scalar tensor.
/// Throws ContractError when M < 2.
template <typename T>
Tensor<T> symmetric_info_nce(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& log_scale);

}  // namespace omnic
