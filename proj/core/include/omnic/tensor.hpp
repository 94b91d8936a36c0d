#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace omnic {

enum class DType : std::uint8_t { kF32 = 0, kF64 = 1 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "tensors hold f32 or f64");
  return std::is_same_v<T, float> ? DType::kF32 : DType::kF64;
}

const char* dtype_name(DType dtype);
std::size_t dtype_size(DType dtype);

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Dense row-major array with optional gradient buffer.
///
/// A Tensor is a handle: copies share the same storage, which is what lets the
/// tape refer back to operands during the backward pass. Use clone() for an
/// independent value.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor();
  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, T value, bool requires_grad = false);
  static Tensor scalar(T value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;
  static constexpr DType dtype() { return dtype_of<T>(); }

  std::span<T> data();
  std::span<const T> data() const;
  T item() const;
  T& at(std::size_t flat_index);
  T at(std::size_t flat_index) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);

  bool has_grad() const;
  /// Gradient buffer; allocated (zero-filled) on first access.
  std::span<T> grad();
  std::span<const T> grad() const;
  void zero_grad();
  void clear_grad();

  /// Deep copy of values; the copy carries the same requires_grad flag but no grad.
  Tensor clone() const;
  /// Deep copy with requires_grad off.
  Tensor detach() const;

  /// Identity of the underlying storage, stable across handle copies.
  const void* id() const { return impl_.get(); }

  template <typename U>
  Tensor<U> cast() const;

 private:
  struct Impl {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

extern template class Tensor<float>;
extern template class Tensor<double>;

}  // namespace omnic
