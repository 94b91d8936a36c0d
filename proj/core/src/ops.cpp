#include "omnic/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/Core>

#include "omnic/errors.hpp"

namespace omnic::ops {
namespace {

template <typename T>
bool wants_grad(const Tape<T>& tape, std::initializer_list<const Tensor<T>*> inputs) {
  if (!tape.recording()) return false;
  for (const Tensor<T>* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

// C (+)= op(A) · op(B) with op = optional transpose; op(A) is m×k, op(B) is
// k×n, all buffers row-major.
template <typename T>
void gemm(const T* a, bool trans_a, const T* b, bool trans_b, T* c, std::size_t m, std::size_t n,
          std::size_t k, bool accumulate) {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using CMap = Eigen::Map<const Mat>;
  const auto rows = static_cast<Eigen::Index>(m);
  const auto cols = static_cast<Eigen::Index>(n);
  const auto inner = static_cast<Eigen::Index>(k);
  Eigen::Map<Mat> cm(c, rows, cols);
  if (!accumulate) cm.setZero();
  if (!trans_a && !trans_b) {
    cm.noalias() += CMap(a, rows, inner) * CMap(b, inner, cols);
  } else if (!trans_a && trans_b) {
    cm.noalias() += CMap(a, rows, inner) * CMap(b, cols, inner).transpose();
  } else if (trans_a && !trans_b) {
    cm.noalias() += CMap(a, inner, rows).transpose() * CMap(b, inner, cols);
  } else {
    cm.noalias() += CMap(a, inner, rows).transpose() * CMap(b, cols, inner).transpose();
  }
}

std::vector<std::size_t> strides_of(const Shape& shape) {
  std::vector<std::size_t> strides(shape.size(), 1);
  for (std::size_t i = shape.size(); i-- > 1;) strides[i - 1] = strides[i] * shape[i];
  return strides;
}

std::size_t prod(const Shape& shape, std::size_t begin, std::size_t end) {
  std::size_t p = 1;
  for (std::size_t i = begin; i < end; ++i) p *= shape[i];
  return p;
}

template <typename T>
void check_finite(std::span<const T> values, const char* op) {
  for (T v : values) {
    if (!std::isfinite(v)) throw NumericError(std::string(op) + ": non-finite input");
  }
}

}  // namespace

template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() < 2 || bs.size() < 2 || bs.size() > 3) {
    throw DimensionError("matmul: unsupported ranks " + shape_str(as) + " x " + shape_str(bs));
  }
  const bool batched = bs.size() == 3;
  if (batched && as.size() != 3) {
    throw DimensionError("matmul: batched right operand needs rank-3 left, got " + shape_str(as) +
                         " x " + shape_str(bs));
  }
  const std::size_t groups = batched ? as[0] : 1;
  if (batched && bs[0] != groups) {
    throw DimensionError("matmul: batch mismatch " + shape_str(as) + " x " + shape_str(bs));
  }
  const std::size_t k = as.back();
  const std::size_t m = batched ? as[1] : a.numel() / k;
  const std::size_t b_rows = bs[bs.size() - 2];
  const std::size_t b_cols = bs.back();
  const std::size_t kb = transpose_b ? b_cols : b_rows;
  const std::size_t n = transpose_b ? b_rows : b_cols;
  if (kb != k) {
    throw DimensionError("matmul: inner dimensions differ " + shape_str(as) + " x " +
                         shape_str(bs) + (transpose_b ? "^T" : ""));
  }

  Shape out_shape(as.begin(), as.end() - 1);
  out_shape.push_back(n);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  for (std::size_t g = 0; g < groups; ++g) {
    gemm(a.data().data() + g * m * k, false, b.data().data() + g * k * n, transpose_b,
         out.data().data() + g * m * n, m, n, k, false);
  }

  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("matmul", [a = Tensor<T>(a), b = Tensor<T>(b), out, groups, m, n, k, transpose_b]() mutable {
      const T* dc = out.grad().data();
      for (std::size_t g = 0; g < groups; ++g) {
        const T* dcg = dc + g * m * n;
        const std::size_t boff = groups > 1 ? g * k * n : 0;
        if (a.requires_grad()) {
          // dA[m,k] += dC[m,n] · op(B)^T
          const T* bg = b.data().data() + boff;
          gemm(dcg, false, bg, !transpose_b, a.grad().data() + g * m * k, m, k, n, true);
        }
        if (b.requires_grad()) {
          const T* ag = a.data().data() + g * m * k;
          T* db = b.grad().data() + boff;
          if (transpose_b) {
            // dB[n,k] += dC^T[n,m] · A[m,k]
            gemm(dcg, true, ag, false, db, n, k, m, true);
          } else {
            // dB[k,n] += A^T[k,m] · dC[m,n]
            gemm(ag, true, dcg, false, db, k, n, m, true);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (bs.size() > as.size() || !std::equal(bs.begin(), bs.end(), as.end() - bs.size())) {
    throw DimensionError("add: " + shape_str(bs) + " is not a suffix of " + shape_str(as));
  }
  const std::size_t inner = b.numel();
  const std::size_t outer = a.numel() / inner;
  Tensor<T> out = a.detach();
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t o = 0; o < outer; ++o) {
    T* row = od.data() + o * inner;
    for (std::size_t i = 0; i < inner; ++i) row[i] += bd[i];
  }
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("add", [a = Tensor<T>(a), b = Tensor<T>(b), out, outer, inner]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        for (std::size_t o = 0; o < outer; ++o) {
          const T* row = g.data() + o * inner;
          for (std::size_t i = 0; i < inner; ++i) gb[i] += row[i];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw DimensionError("mul: shapes differ " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out = a.detach();
  auto od = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] *= bd[i];
  if (wants_grad(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape.record("mul", [a = Tensor<T>(a), b = Tensor<T>(b), out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ga = a.grad();
        auto bd = b.data();
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
      }
      if (b.requires_grad()) {
        auto gb = b.grad();
        auto ad = a.data();
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T s) {
  Tensor<T> out = x.detach();
  for (T& v : out.data()) v *= s;
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("scale", [x = Tensor<T>(x), out, s]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * s;
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& s) {
  if (s.numel() != 1) throw DimensionError("scale_by: factor must have one element, got " + shape_str(s.shape()));
  const T sv = s.item();
  Tensor<T> out = x.detach();
  for (T& v : out.data()) v *= sv;
  if (wants_grad(tape, {&x, &s})) {
    out.set_requires_grad(true);
    tape.record("scale_by", [x = Tensor<T>(x), s = Tensor<T>(s), out, sv]() mutable {
      auto g = out.grad();
      if (x.requires_grad()) {
        auto gx = x.grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * sv;
      }
      if (s.requires_grad()) {
        auto xd = x.data();
        T acc{0};
        for (std::size_t i = 0; i < g.size(); ++i) acc += g[i] * xd[i];
        s.grad()[0] += acc;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out = x.detach();
  for (T& v : out.data()) v = std::exp(v);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("exp", [x = Tensor<T>(x), out]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x) {
  Tensor<T> out = x.detach();
  for (T& v : out.data()) v = v > T{0} ? v : T{0};
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("relu", [x = Tensor<T>(x), out]() mutable {
      auto g = out.grad();
      auto xd = x.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (xd[i] > T{0}) gx[i] += g[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x) {
  // 0.5·x·(1 + tanh(u)) == x·σ(2u), which needs a single exp.
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T k = static_cast<T>(0.044715);
  Tensor<T> out = x.detach();
  for (T& v : out.data()) {
    const T u = c * (v + k * v * v * v);
    v = v / (T{1} + std::exp(T{-2} * u));
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("gelu", [x = Tensor<T>(x), out, c, k]() mutable {
      auto g = out.grad();
      auto xd = x.data();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        const T v = xd[i];
        const T sig = T{1} / (T{1} + std::exp(T{-2} * c * (v + k * v * v * v)));
        const T th = T{2} * sig - T{1};
        const T du = c * (T{1} + T{3} * k * v * v);
        gx[i] += g[i] * (sig + T{0.5} * v * (T{1} - th * th) * du);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> softmax_lastdim(Tape<T>& tape, const Tensor<T>& x) {
  check_finite<T>(x.data(), "softmax_lastdim");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.numel() / n;
  Tensor<T> out = x.detach();
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = od.data() + r * n;
    const T mx = *std::max_element(row, row + n);
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      row[j] = std::exp(row[j] - mx);
      total += row[j];
    }
    for (std::size_t j = 0; j < n; ++j) row[j] /= total;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("softmax_lastdim", [x = Tensor<T>(x), out, n, rows]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        const T* yr = y.data() + r * n;
        const T* gr = g.data() + r * n;
        T dot{0};
        for (std::size_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
        T* dst = gx.data() + r * n;
        for (std::size_t j = 0; j < n; ++j) dst[j] += yr[j] * (gr[j] - dot);
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias,
                     T eps) {
  if (!(eps > T{0})) throw ContractError("layer_norm: eps must be positive");
  const std::size_t d = x.shape().back();
  if (gain.numel() != d || bias.numel() != d || gain.rank() != 1 || bias.rank() != 1) {
    throw DimensionError("layer_norm: feature size " + std::to_string(d) + " vs gain " +
                         shape_str(gain.shape()) + " and bias " + shape_str(bias.shape()));
  }
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = Tensor<T>::zeros(x.shape());
  std::vector<T> xhat(x.numel());
  std::vector<T> rstd(rows);
  auto xd = x.data();
  auto od = out.data();
  auto gd = gain.data();
  auto bd = bias.data();
  for (std::size_t r = 0; r < rows; ++r) {
    const T* xr = xd.data() + r * d;
    T mu{0};
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<T>(d);
    T var{0};
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<T>(d);
    const T rs = T{1} / std::sqrt(var + eps);
    rstd[r] = rs;
    for (std::size_t j = 0; j < d; ++j) {
      const T h = (xr[j] - mu) * rs;
      xhat[r * d + j] = h;
      od[r * d + j] = h * gd[j] + bd[j];
    }
  }
  if (wants_grad(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape.record("layer_norm", [x = Tensor<T>(x), gain = Tensor<T>(gain), bias = Tensor<T>(bias), out, xhat = std::move(xhat), rstd = std::move(rstd), d, rows]() mutable {
      auto g = out.grad();
      auto gd = gain.data();
      if (gain.requires_grad() || bias.requires_grad()) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < d; ++j) {
            if (gain.requires_grad()) gain.grad()[j] += g[r * d + j] * xhat[r * d + j];
            if (bias.requires_grad()) bias.grad()[j] += g[r * d + j];
          }
        }
      }
      if (x.requires_grad()) {
        auto gx = x.grad();
        std::vector<T> dh(d);
        for (std::size_t r = 0; r < rows; ++r) {
          T mean_dh{0};
          T mean_dh_h{0};
          for (std::size_t j = 0; j < d; ++j) {
            dh[j] = g[r * d + j] * gd[j];
            mean_dh += dh[j];
            mean_dh_h += dh[j] * xhat[r * d + j];
          }
          mean_dh /= static_cast<T>(d);
          mean_dh_h /= static_cast<T>(d);
          for (std::size_t j = 0; j < d; ++j) {
            gx[r * d + j] += rstd[r] * (dh[j] - mean_dh - xhat[r * d + j] * mean_dh_h);
          }
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x) {
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  Tensor<T> out = x.detach();
  std::vector<T> norms(rows);
  auto od = out.data();
  for (std::size_t r = 0; r < rows; ++r) {
    T* row = od.data() + r * d;
    T ss{0};
    for (std::size_t j = 0; j < d; ++j) ss += row[j] * row[j];
    const T nrm = std::sqrt(ss);
    if (!(nrm > T{0}) || !std::isfinite(nrm)) {
      throw NumericError("l2_normalize: row " + std::to_string(r) + " has zero or non-finite norm");
    }
    norms[r] = nrm;
    for (std::size_t j = 0; j < d; ++j) row[j] /= nrm;
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("l2_normalize", [x = Tensor<T>(x), out, norms = std::move(norms), d, rows]() mutable {
      auto g = out.grad();
      auto y = out.data();
      auto gx = x.grad();
      for (std::size_t r = 0; r < rows; ++r) {
        T dot{0};
        for (std::size_t j = 0; j < d; ++j) dot += y[r * d + j] * g[r * d + j];
        for (std::size_t j = 0; j < d; ++j) {
          gx[r * d + j] += (g[r * d + j] - y[r * d + j] * dot) / norms[r];
        }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x) {
  T total{0};
  for (T v : x.data()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("sum", [x = Tensor<T>(x), out]() mutable {
      const T g = out.grad()[0];
      for (T& v : x.grad()) v += g;
    });
  }
  return out;
}

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x) {
  return scale(tape, sum(tape, x), T{1} / static_cast<T>(x.numel()));
}

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    throw DimensionError("reshape: " + shape_str(x.shape()) + " to " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("reshape", [x = Tensor<T>(x), out]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    });
  }
  return out;
}

namespace {

// Visits every element of `in_shape` in row-major order and reports the flat
// index it lands on after swapping axes a0 and a1.
template <typename F>
void for_each_swapped(const Shape& in_shape, std::size_t a0, std::size_t a1, F&& f) {
  Shape out_shape = in_shape;
  std::swap(out_shape[a0], out_shape[a1]);
  std::vector<std::size_t> out_strides = strides_of(out_shape);
  std::swap(out_strides[a0], out_strides[a1]);
  const std::size_t rank = in_shape.size();
  std::vector<std::size_t> idx(rank, 0);
  const std::size_t total = shape_numel(in_shape);
  std::size_t dst = 0;
  for (std::size_t src = 0; src < total; ++src) {
    f(src, dst);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      dst += out_strides[ax];
      if (idx[ax] < in_shape[ax]) break;
      dst -= out_strides[ax] * in_shape[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace

template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x, std::size_t axis0, std::size_t axis1) {
  const Shape& s = x.shape();
  if (axis0 >= s.size() || axis1 >= s.size()) {
    throw DimensionError("transpose: axes out of range for " + shape_str(s));
  }
  Shape out_shape = s;
  std::swap(out_shape[axis0], out_shape[axis1]);
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto xd = x.data();
  auto od = out.data();
  for_each_swapped(s, axis0, axis1, [&](std::size_t src, std::size_t dst) { od[dst] = xd[src]; });
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("transpose", [x = Tensor<T>(x), out, axis0, axis1]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for_each_swapped(x.shape(), axis0, axis1,
                       [&](std::size_t src, std::size_t dst) { gx[src] += g[dst]; });
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw DimensionError("concat: axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const Tensor<T>& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t i = 0; ok && i < s.size(); ++i) ok = i == axis || s[i] == first[i];
    if (!ok) throw DimensionError("concat: " + shape_str(s) + " incompatible with " + shape_str(first));
    out_shape[axis] += s[axis];
  }
  const std::size_t outer = prod(first, 0, axis);
  const std::size_t inner = prod(first, axis + 1, first.size());
  const std::size_t out_row = out_shape[axis] * inner;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto od = out.data();
  std::size_t offset = 0;
  bool any_grad = false;
  for (const Tensor<T>& p : parts) {
    const std::size_t chunk = p.shape()[axis] * inner;
    auto pd = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(pd.data() + o * chunk, chunk, od.data() + o * out_row + offset);
    }
    offset += chunk;
    any_grad = any_grad || p.requires_grad();
  }
  if (tape.recording() && any_grad) {
    out.set_requires_grad(true);
    tape.record("concat", [parts = std::vector<Tensor<T>>(parts), out, axis, outer, inner, out_row]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (Tensor<T>& p : parts) {
        const std::size_t chunk = p.shape()[axis] * inner;
        if (p.requires_grad()) {
          auto gp = p.grad();
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t i = 0; i < chunk; ++i) gp[o * chunk + i] += g[o * out_row + offset + i];
          }
        }
        offset += chunk;
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t start, std::size_t length) {
  const Shape& s = x.shape();
  if (axis >= s.size() || length == 0 || start + length > s[axis]) {
    throw DimensionError("slice: [" + std::to_string(start) + ", +" + std::to_string(length) +
                         ") on axis " + std::to_string(axis) + " of " + shape_str(s));
  }
  Shape out_shape = s;
  out_shape[axis] = length;
  const std::size_t outer = prod(s, 0, axis);
  const std::size_t inner = prod(s, axis + 1, s.size());
  const std::size_t in_row = s[axis] * inner;
  const std::size_t chunk = length * inner;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    std::copy_n(xd.data() + o * in_row + start * inner, chunk, od.data() + o * chunk);
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("slice", [x = Tensor<T>(x), out, outer, inner, in_row, chunk, start]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t i = 0; i < chunk; ++i) gx[o * in_row + start * inner + i] += g[o * chunk + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> index_select_lastdim(Tape<T>& tape, const Tensor<T>& x, std::span<const std::size_t> indices) {
  const std::size_t d = x.shape().back();
  if (indices.empty()) throw ContractError("index_select_lastdim: empty index list");
  for (std::size_t i : indices) {
    if (i >= d) throw DimensionError("index_select_lastdim: index " + std::to_string(i) + " >= " + std::to_string(d));
  }
  const std::size_t rows = x.numel() / d;
  const std::size_t r = indices.size();
  Shape out_shape = x.shape();
  out_shape.back() = r;
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto xd = x.data();
  auto od = out.data();
  for (std::size_t row = 0; row < rows; ++row) {
    for (std::size_t j = 0; j < r; ++j) od[row * r + j] = xd[row * d + indices[j]];
  }
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    std::vector<std::size_t> idx(indices.begin(), indices.end());
    tape.record("index_select_lastdim", [x = Tensor<T>(x), out, idx = std::move(idx), rows, d, r]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t row = 0; row < rows; ++row) {
        for (std::size_t j = 0; j < r; ++j) gx[row * d + idx[j]] += g[row * r + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> expand_leading(Tape<T>& tape, const Tensor<T>& x, std::size_t count) {
  if (count == 0) throw DimensionError("expand_leading: count must be positive");
  Shape out_shape{count};
  out_shape.insert(out_shape.end(), x.shape().begin(), x.shape().end());
  Tensor<T> out = Tensor<T>::zeros(out_shape);
  auto xd = x.data();
  auto od = out.data();
  const std::size_t n = x.numel();
  for (std::size_t c = 0; c < count; ++c) std::copy(xd.begin(), xd.end(), od.begin() + c * n);
  if (wants_grad(tape, {&x})) {
    out.set_requires_grad(true);
    tape.record("expand_leading", [x = Tensor<T>(x), out, count, n]() mutable {
      auto g = out.grad();
      auto gx = x.grad();
      for (std::size_t c = 0; c < count; ++c) {
        for (std::size_t i = 0; i < n; ++i) gx[i] += g[c * n + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids) {
  if (table.rank() != 2) throw DimensionError("embedding: table must be rank 2, got " + shape_str(table.shape()));
  if (ids.empty()) throw ContractError("embedding: empty id sequence");
  const std::size_t vocab = table.dim(0);
  const std::size_t d = table.dim(1);
  for (std::int32_t id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
      throw DataError("embedding: token id " + std::to_string(id) + " outside vocabulary of " +
                      std::to_string(vocab));
    }
  }
  Tensor<T> out = Tensor<T>::zeros({ids.size(), d});
  auto td = table.data();
  auto od = out.data();
  for (std::size_t i = 0; i < ids.size(); ++i) {
    std::copy_n(td.data() + static_cast<std::size_t>(ids[i]) * d, d, od.data() + i * d);
  }
  if (wants_grad(tape, {&table})) {
    out.set_requires_grad(true);
    std::vector<std::int32_t> id_copy(ids.begin(), ids.end());
    tape.record("embedding", [table = Tensor<T>(table), out, id_copy = std::move(id_copy), d]() mutable {
      auto g = out.grad();
      auto gt = table.grad();
      for (std::size_t i = 0; i < id_copy.size(); ++i) {
        T* dst = gt.data() + static_cast<std::size_t>(id_copy[i]) * d;
        for (std::size_t j = 0; j < d; ++j) dst[j] += g[i * d + j];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets) {
  if (logits.rank() != 2) throw DimensionError("cross_entropy: logits must be [n, K], got " + shape_str(logits.shape()));
  const std::size_t n = logits.dim(0);
  const std::size_t classes = logits.dim(1);
  if (targets.size() != n) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(n) + " rows");
  }
  check_finite<T>(logits.data(), "cross_entropy");
  auto ld = logits.data();
  std::vector<T> probs(ld.begin(), ld.end());
  T total{0};
  for (std::size_t r = 0; r < n; ++r) {
    const std::int32_t t = targets[r];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) {
      throw DataError("cross_entropy: target " + std::to_string(t) + " outside " + std::to_string(classes) + " classes");
    }
    T* row = probs.data() + r * classes;
    const T mx = *std::max_element(row, row + classes);
    T z{0};
    for (std::size_t j = 0; j < classes; ++j) z += std::exp(row[j] - mx);
    const T lse = mx + std::log(z);
    total += lse - row[t];
    for (std::size_t j = 0; j < classes; ++j) row[j] = std::exp(row[j] - lse);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (wants_grad(tape, {&logits})) {
    out.set_requires_grad(true);
    std::vector<std::int32_t> tgt(targets.begin(), targets.end());
    tape.record("cross_entropy", [logits = Tensor<T>(logits), out, probs = std::move(probs), tgt = std::move(tgt), n, classes]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      auto gl = logits.grad();
      for (std::size_t r = 0; r < n; ++r) {
        for (std::size_t j = 0; j < classes; ++j) {
          T p = probs[r * classes + j];
          if (static_cast<std::int32_t>(j) == tgt[r]) p -= T{1};
          gl[r * classes + j] += g * p;
        }
      }
    });
  }
  return out;
}

#define OMNIC_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> matmul(Tape<T>&, const Tensor<T>&, const Tensor<T>&, bool);                   \
  template Tensor<T> add(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> mul(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> scale(Tape<T>&, const Tensor<T>&, T);                                         \
  template Tensor<T> scale_by(Tape<T>&, const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> exp(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> relu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> gelu(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> softmax_lastdim(Tape<T>&, const Tensor<T>&);                                  \
  template Tensor<T> layer_norm(Tape<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, T); \
  template Tensor<T> l2_normalize(Tape<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sum(Tape<T>&, const Tensor<T>&);                                              \
  template Tensor<T> mean(Tape<T>&, const Tensor<T>&);                                             \
  template Tensor<T> reshape(Tape<T>&, const Tensor<T>&, Shape);                                   \
  template Tensor<T> transpose(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> concat(Tape<T>&, const std::vector<Tensor<T>>&, std::size_t);                 \
  template Tensor<T> slice(Tape<T>&, const Tensor<T>&, std::size_t, std::size_t, std::size_t);     \
  template Tensor<T> index_select_lastdim(Tape<T>&, const Tensor<T>&, std::span<const std::size_t>); \
  template Tensor<T> expand_leading(Tape<T>&, const Tensor<T>&, std::size_t);                      \
  template Tensor<T> embedding(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>);         \
  template Tensor<T> cross_entropy(Tape<T>&, const Tensor<T>&, std::span<const std::int32_t>);

OMNIC_INSTANTIATE_OPS(float)
OMNIC_INSTANTIATE_OPS(double)

#undef OMNIC_INSTANTIATE_OPS

}  // namespace omnic::ops
