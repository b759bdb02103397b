#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "bevbench/errors.hpp"

namespace bevbench {

using Shape = std::vector<int>;

int shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {
struct TensorData {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // same length as value iff requires_grad
  bool requires_grad = false;
};
}  // namespace detail

// Dense n-dimensional array of 64-bit reals, row-major. Value-semantic handle
// to shared storage: copies alias the same buffer, which is what weight
// sharing across views relies on.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double fill, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return d_ != nullptr; }
  const Shape& shape() const { return d_->shape; }
  int size() const { return static_cast<int>(d_->value.size()); }
  bool requires_grad() const { return d_ && d_->requires_grad; }

  std::span<double> values() { return d_->value; }
  std::span<const double> values() const { return d_->value; }
  std::span<double> grad();
  std::span<const double> grad() const;

  double operator[](int i) const { return d_->value[static_cast<std::size_t>(i)]; }
  double& operator[](int i) { return d_->value[static_cast<std::size_t>(i)]; }

  // Scalar contents; throws ShapeError on non-scalars.
  double item() const;

  void zero_grad();

  // Stable identity of the underlying buffer (weight-sharing checks).
  const void* id() const { return d_.get(); }

  // Throws DataError if any value is non-finite.
  void check_finite(const char* op_name) const;

 private:
  friend class Tape;
  explicit Tensor(std::shared_ptr<detail::TensorData> d) : d_(std::move(d)) {}
  std::shared_ptr<detail::TensorData> d_;
};

// Reverse-mode tape. Ops append nodes in execution order, so inputs always
// precede their consumers; backward replays the closures once, in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return pause_depth_ == 0; }
  void record(const Tensor& output, std::function<void()> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and accumulates into every requires_grad tensor
  // reachable from the recorded graph. Grads of op outputs are reset first,
  // so repeated calls each add exactly one pass worth of gradient to leaves
  // (callers zero leaf grads between optimizer steps).
  void backward(const Tensor& loss);

  void clear() {
    nodes_.clear();
    outputs_.clear();
  }
  std::size_t node_count() const { return nodes_.size(); }

  // RAII guard: ops called while any guard is alive record nothing.
  class NoGrad {
   public:
    explicit NoGrad(Tape& t) : t_(t) { ++t_.pause_depth_; }
    ~NoGrad() { --t_.pause_depth_; }
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

   private:
    Tape& t_;
  };

 private:
  std::vector<std::function<void()>> nodes_;
  std::vector<std::shared_ptr<detail::TensorData>> outputs_;
  int pause_depth_ = 0;
};

}  // namespace bevbench
