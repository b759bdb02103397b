#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bevbench/tensor.hpp"

namespace bevbench {

// Named parameter collection with per-parameter Adam moment buffers.
// Iteration order is sorted by name, which fixes checkpoint layout and makes
// optimizer replay deterministic.
class ParamSet {
 public:
  struct Entry {
    Tensor tensor;
    std::vector<double> m;  // first moment, lazily sized
    std::vector<double> v;  // second moment
  };

  Tensor& add(const std::string& name, Tensor t);
  // Registers a tensor that is already shared elsewhere (shared encoders).
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const { return entries_.count(name) > 0; }
  std::size_t size() const { return entries_.size(); }

  // Total number of scalar parameters.
  long long numel() const;

  void zero_grad();

  std::map<std::string, Entry>& entries() { return entries_; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::int64_t step_count() const { return step_count_; }
  void set_step_count(std::int64_t t) { step_count_ = t; }

  // Merges another set's entries under a name prefix; tensors are shared.
  void adopt(const std::string& prefix, const ParamSet& other);

 private:
  friend void adam_step(ParamSet&, double, double, double, double);
  std::map<std::string, Entry> entries_;
  std::int64_t step_count_ = 0;
};

void sgd_step(ParamSet& params, double lr);
void adam_step(ParamSet& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

// Central finite differences per coordinate of x against the tape gradient.
// f must map (tape, x) to a scalar tensor. Returns the max relative error,
// with relative error |a-b| / max(|a|, |b|, 1e-6).
double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                         double step);

}  // namespace bevbench
