#include "deformreg/nd/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "deformreg/error.hpp"

namespace deformreg::nd {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (auto d : shape) {
    if (d < 0) throw ShapeError("negative dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0f, requires_grad); }

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  auto impl = std::make_shared<Impl>();
  impl->data.assign(static_cast<std::size_t>(shape_numel(shape)), value);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  if (shape_numel(shape) != static_cast<std::int64_t>(data.size())) {
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return Tensor(std::move(impl));
}

Tensor Tensor::scalar(float value, bool requires_grad) { return full({1}, value, requires_grad); }

const Tensor::Impl& Tensor::impl() const {
  if (!impl_) throw Error("access to an undefined tensor");
  return *impl_;
}

Tensor::Impl& Tensor::impl() {
  if (!impl_) throw Error("access to an undefined tensor");
  return *impl_;
}

const Shape& Tensor::shape() const { return impl().shape; }

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  return s[axis];
}

std::int64_t Tensor::numel() const { return static_cast<std::int64_t>(impl().data.size()); }

std::span<const float> Tensor::data() const { return impl().data; }
std::span<float> Tensor::mutable_data() { return impl().data; }

float Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl().data[0];
}

bool Tensor::requires_grad() const { return impl().requires_grad; }
void Tensor::set_requires_grad(bool flag) { impl().requires_grad = flag; }

bool Tensor::has_grad() const { return !impl().grad.empty(); }

std::span<const float> Tensor::grad() const { return impl().grad; }

std::span<float> Tensor::grad_buffer() const {
  auto& i = const_cast<Impl&>(impl());
  if (i.grad.empty()) i.grad.assign(i.data.size(), 0.0f);
  return i.grad;
}

void Tensor::zero_grad() const {
  auto& g = const_cast<Impl&>(impl()).grad;
  std::fill(g.begin(), g.end(), 0.0f);
}

void Tensor::release_grad() const {
  auto& g = const_cast<Impl&>(impl()).grad;
  g.clear();
  g.shrink_to_fit();
}

Tensor Tensor::detach() const { return from_data(shape(), std::vector<float>(data().begin(), data().end())); }

}  // namespace deformreg::nd
