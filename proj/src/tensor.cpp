#include "bevbench/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bevbench {

int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(s));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

static std::shared_ptr<detail::TensorData> make_data(Shape shape, bool requires_grad) {
  auto d = std::make_shared<detail::TensorData>();
  int n = 1;
  for (int dim : shape) {
    if (dim <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= dim;
  }
  d->shape = std::move(shape);
  d->value.assign(static_cast<std::size_t>(n), 0.0);
  d->requires_grad = requires_grad;
  if (requires_grad) d->grad.assign(static_cast<std::size_t>(n), 0.0);
  return d;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(make_data(std::move(shape), requires_grad));
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (double& v : t.d_->value) v = fill;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  Tensor t(make_data(std::move(shape), requires_grad));
  if (data.size() != t.d_->value.size())
    throw ShapeError("data length " + std::to_string(data.size()) + " does not fill shape " +
                     shape_str(t.shape()));
  t.d_->value = std::move(data);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({1}, {v}, requires_grad);
}

std::span<double> Tensor::grad() {
  if (!requires_grad()) throw DataError("grad requested on tensor without requires_grad");
  return d_->grad;
}

std::span<const double> Tensor::grad() const {
  if (!requires_grad()) throw DataError("grad requested on tensor without requires_grad");
  return d_->grad;
}

double Tensor::item() const {
  if (!d_ || d_->value.size() != 1) throw ShapeError("item() on non-scalar tensor");
  return d_->value[0];
}

void Tensor::zero_grad() {
  if (requires_grad())
    for (double& g : d_->grad) g = 0.0;
}

void Tensor::check_finite(const char* op_name) const {
  for (double v : d_->value)
    if (!std::isfinite(v))
      throw DataError(std::string("non-finite value produced by ") + op_name);
}

void Tape::record(const Tensor& output, std::function<void()> backward_fn) {
  if (!recording()) return;
  outputs_.push_back(output.d_);
  nodes_.push_back(std::move(backward_fn));
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1)
    throw ShapeError("backward requires a scalar loss");
  if (!loss.requires_grad())
    throw DataError("backward on a loss that does not require grad");
  for (const auto& out : outputs_)
    if (out->requires_grad) std::fill(out->grad.begin(), out->grad.end(), 0.0);
  loss.d_->grad[0] += 1.0;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

}  // namespace bevbench
