#include "omnic/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "omnic/errors.hpp"
#include "omnic/ops.hpp"

namespace omnic {

void ContrastiveConfig::validate() const {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) throw ConfigError("temperature must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw DimensionError("cosine_similarity: lengths " + std::to_string(u.size()) + " and " + std::to_string(v.size()));
  }
  const double uv = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
  const double uu = std::inner_product(u.begin(), u.end(), u.begin(), 0.0);
  const double vv = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
  if (uu == 0.0 || vv == 0.0) throw NumericError("cosine_similarity: zero vector");
  return std::clamp(uv / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

std::vector<std::int32_t> nt_xent_pairing(std::size_t n) {
  std::vector<std::int32_t> pairing(2 * n);
  for (std::size_t i = 0; i < 2 * n; ++i) pairing[i] = static_cast<std::int32_t>((i + n) % (2 * n));
  return pairing;
}

template <typename T>
Tensor<T> nt_xent_loss(Tape<T>& tape, const Tensor<T>& z, std::span<const std::int32_t> pairing, double tau) {
  if (z.rank() != 2) throw DimensionError("nt_xent_loss: z must be rank 2, got " + shape_str(z.shape()));
  const std::size_t rows = z.dim(0);
  if (rows < 2) throw ContractError("nt_xent_loss: need at least 2 rows (one positive pair)");
  if (pairing.size() != rows) throw ContractError("nt_xent_loss: pairing length must equal row count");
  if (!(tau > 0.0)) throw ContractError("nt_xent_loss: temperature must be positive");
  for (std::size_t i = 0; i < rows; ++i) {
    const auto j = pairing[i];
    if (j < 0 || static_cast<std::size_t>(j) >= rows || static_cast<std::size_t>(j) == i) {
      throw ContractError("nt_xent_loss: invalid positive index for row " + std::to_string(i));
    }
  }
  const Tensor<T> zn = ops::l2_normalize(tape, z);
  const Tensor<T> logits = ops::scale(tape, ops::matmul(tape, zn, zn, true), static_cast<T>(1.0 / tau));
  Tensor<T> mask = Tensor<T>::zeros({rows, rows});
  for (std::size_t i = 0; i < rows; ++i) mask.data()[i * rows + i] = static_cast<T>(-1e9);
  return ops::cross_entropy(tape, ops::add(tape, logits, mask), pairing);
}

template <typename T>
Tensor<T> symmetric_info_nce(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, const Tensor<T>& log_scale) {
  if (a.rank() != 2 || a.shape() != b.shape()) {
    throw DimensionError("symmetric_info_nce: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0);
  if (m < 2) throw ContractError("symmetric_info_nce: need at least 2 pairs");
  const Tensor<T> an = ops::l2_normalize(tape, a);
  const Tensor<T> bn = ops::l2_normalize(tape, b);
  const Tensor<T> logits = ops::scale_by(tape, ops::matmul(tape, an, bn, true), ops::exp(tape, log_scale));
  std::vector<std::int32_t> diag(m);
  std::iota(diag.begin(), diag.end(), 0);
  const Tensor<T> rows = ops::cross_entropy(tape, logits, diag);
  const Tensor<T> cols = ops::cross_entropy(tape, ops::transpose(tape, logits, 0, 1), diag);
  return ops::scale(tape, ops::add(tape, rows, cols), static_cast<T>(0.5));
}

template Tensor<float> nt_xent_loss(Tape<float>&, const Tensor<float>&, std::span<const std::int32_t>, double);
template Tensor<double> nt_xent_loss(Tape<double>&, const Tensor<double>&, std::span<const std::int32_t>, double);
template Tensor<float> symmetric_info_nce(Tape<float>&, const Tensor<float>&, const Tensor<float>&,
                                          const Tensor<float>&);
template Tensor<double> symmetric_info_nce(Tape<double>&, const Tensor<double>&, const Tensor<double>&,
                                           const Tensor<double>&);

}  // namespace omnic
