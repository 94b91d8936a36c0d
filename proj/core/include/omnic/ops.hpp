#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "omnic/tape.hpp"
#include "omnic/tensor.hpp"

// Differentiable operators. Each takes the tape it records onto; a
// non-recording tape (Tape<T>::no_grad()) gives plain inference.
//
// Broadcasting is deliberately narrow: add() accepts a right operand whose
// shape is a suffix of the left operand's shape (bias rows, positional tables),
// and nothing else.

namespace omnic::ops {

/// c = a · b over the last two axes.
///
/// Supported forms: a[..., m, k] · b[k, n] (leading axes of a are flattened),
/// and batched a[g, m, k] · b[g, k, n]. With transpose_b the right operand is
/// given as [n, k] (resp. [g, n, k]).
template <typename T>
Tensor<T> matmul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b, bool transpose_b = false);

/// a + b where shape(b) == shape(a) or shape(b) is a suffix of shape(a).
template <typename T>
Tensor<T> add(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// Elementwise product of equally shaped tensors.
template <typename T>
Tensor<T> mul(Tape<T>& tape, const Tensor<T>& a, const Tensor<T>& b);

/// x · s for a constant s.
template <typename T>
Tensor<T> scale(Tape<T>& tape, const Tensor<T>& x, T s);

/// x · s for a one-element tensor s (differentiable in s).
template <typename T>
Tensor<T> scale_by(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& s);

template <typename T>
Tensor<T> exp(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> relu(Tape<T>& tape, const Tensor<T>& x);

/// Tanh approximation of GELU.
template <typename T>
Tensor<T> gelu(Tape<T>& tape, const Tensor<T>& x);

/// Max-subtracted softmax over the last axis. Throws NumericError on
/// non-finite input.
template <typename T>
Tensor<T> softmax_lastdim(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> layer_norm(Tape<T>& tape, const Tensor<T>& x, const Tensor<T>& gain,
                     const Tensor<T>& bias, T eps);

/// Rows of the last axis scaled to unit euclidean norm. Zero rows are a
/// NumericError.
template <typename T>
Tensor<T> l2_normalize(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> sum(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> mean(Tape<T>& tape, const Tensor<T>& x);

template <typename T>
Tensor<T> reshape(Tape<T>& tape, const Tensor<T>& x, Shape shape);

/// Swaps two axes.
template <typename T>
Tensor<T> transpose(Tape<T>& tape, const Tensor<T>& x, std::size_t axis0, std::size_t axis1);

template <typename T>
Tensor<T> concat(Tape<T>& tape, const std::vector<Tensor<T>>& parts, std::size_t axis);

template <typename T>
Tensor<T> slice(Tape<T>& tape, const Tensor<T>& x, std::size_t axis, std::size_t start,
                std::size_t length);

/// Picks the given positions of the last axis, in order.
template <typename T>
Tensor<T> index_select_lastdim(Tape<T>& tape, const Tensor<T>& x,
                               std::span<const std::size_t> indices);

/// Repeats x `count` times along a new leading axis.
template <typename T>
Tensor<T> expand_leading(Tape<T>& tape, const Tensor<T>& x, std::size_t count);

/// Rows of table[vocab, d] selected by ids; result [ids.size(), d].
template <typename T>
Tensor<T> embedding(Tape<T>& tape, const Tensor<T>& table, std::span<const std::int32_t> ids);

/// Mean negative log-likelihood of `targets` under softmax(logits[n, K]).
template <typename T>
Tensor<T> cross_entropy(Tape<T>& tape, const Tensor<T>& logits, std::span<const std::int32_t> targets);

}  // namespace omnic::ops
