#include "groupemo/tensor.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

namespace groupemo {

std::string shape_to_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

ShapeError::ShapeError(std::string what, std::vector<std::size_t> expected,
                       std::vector<std::size_t> actual,
                       std::optional<std::size_t> layer_index)
    : InputError((layer_index ? "layer " + std::to_string(*layer_index) + ": " : std::string()) +
                 what + " (expected " + shape_to_string(expected) + ", got " +
                 shape_to_string(actual) + ")"),
      detail_(std::move(what)),
      expected_(std::move(expected)),
      actual_(std::move(actual)),
      layer_index_(layer_index) {}

ShapeError ShapeError::at_layer(std::size_t index) const {
  return ShapeError(detail_, expected_, actual_, index);
}

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size()) {
    throw ShapeError("tensor data does not match its extents", shape_, {data_.size()});
  }
}

template <typename T>
void Tensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
Tensor<T> Tensor<T>::reshaped(Shape shape) const {
  Tensor out = *this;
  out.reshape(std::move(shape));
  return out;
}

template <typename T>
void Tensor<T>::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw ShapeError("reshape changes the element count", shape, shape_);
  }
  shape_ = std::move(shape);
}

template <typename T>
Tensor<T> stack(std::span<const Tensor<T>* const> items) {
  if (items.empty()) throw Error("stack: no tensors");
  const Shape& inner = items.front()->shape();
  Shape shape{items.size()};
  shape.insert(shape.end(), inner.begin(), inner.end());
  Tensor<T> out(shape);
  const std::size_t n = items.front()->size();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i]->shape() != inner) {
      throw ShapeError("stack: mismatched sample", inner, items[i]->shape());
    }
    std::memcpy(out.data() + i * n, items[i]->data(), n * sizeof(T));
  }
  return out;
}

template <typename T>
Tensor<T> unstack(const Tensor<T>& batch, std::size_t index) {
  Shape inner(batch.shape().begin() + 1, batch.shape().end());
  Tensor<T> out(inner);
  const std::size_t n = out.size();
  std::memcpy(out.data(), batch.data() + index * n, n * sizeof(T));
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> stack(std::span<const Tensor<float>* const>);
template Tensor<double> stack(std::span<const Tensor<double>* const>);
template Tensor<float> unstack(const Tensor<float>&, std::size_t);
template Tensor<double> unstack(const Tensor<double>&, std::size_t);

}  // namespace groupemo
