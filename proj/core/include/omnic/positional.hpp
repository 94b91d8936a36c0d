#pragma once

#include <cstddef>

#include "omnic/tensor.hpp"

namespace omnic {

enum class PositionalKind { k1d, k2d };

/// Fixed sinusoidal positional table.
///
/// 1d: PE[pos, 2i] = sin(pos / 10000^(2i/d)), PE[pos, 2i+1] = cos(same), for
/// `rows` positions (cols is ignored).
/// 2d: a rows × cols grid in row-major order; each entry is the d/2 1d code of
/// its row index followed by the d/2 1d code of its column index. Needs d % 4 == 0.
TensorD positional_encoding(PositionalKind kind, std::size_t rows, std::size_t cols, std::size_t d);

}  // namespace omnic
