#include "omnic/positional.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "omnic/errors.hpp"

namespace omnic {
namespace {

void fill_1d(double pos, std::size_t d, double* out) {
  for (std::size_t i = 0; 2 * i < d; ++i) {
    const double freq = std::pow(10000.0, -static_cast<double>(2 * i) / static_cast<double>(d));
    out[2 * i] = std::sin(pos * freq);
    if (2 * i + 1 < d) out[2 * i + 1] = std::cos(pos * freq);
  }
}

}  // namespace

TensorD positional_encoding(PositionalKind kind, std::size_t rows, std::size_t cols, std::size_t d) {
  if (d == 0 || rows == 0) throw ConfigError("positional encoding needs positive extents");
  if (kind == PositionalKind::k1d) {
    if (d % 2 != 0) throw ConfigError("1d positional encoding needs an even dimension, got " + std::to_string(d));
    std::vector<double> table(rows * d);
    for (std::size_t p = 0; p < rows; ++p) fill_1d(static_cast<double>(p), d, table.data() + p * d);
    return TensorD({rows, d}, std::move(table));
  }
  if (d % 4 != 0) throw ConfigError("2d positional encoding needs dimension divisible by 4, got " + std::to_string(d));
  if (cols == 0) throw ConfigError("positional encoding needs positive extents");
  const std::size_t half = d / 2;
  std::vector<double> table(rows * cols * d);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double* cell = table.data() + (r * cols + c) * d;
      fill_1d(static_cast<double>(r), half, cell);
      fill_1d(static_cast<double>(c), half, cell + half);
    }
  }
  return TensorD({rows * cols, d}, std::move(table));
}

}  // namespace omnic
