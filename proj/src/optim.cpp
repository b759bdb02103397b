#include "bevbench/optim.hpp"

#include <cmath>

namespace bevbench {

Tensor& ParamSet::add(const std::string& name, Tensor t) {
  if (!t.defined() || !t.requires_grad())
    throw ConfigError("parameter '" + name + "' must be a defined tensor with requires_grad");
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(t), {}, {}});
  if (!inserted) throw ConfigError("duplicate parameter name '" + name + "'");
  return it->second.tensor;
}

Tensor& ParamSet::at(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second.tensor;
}

const Tensor& ParamSet::at(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw ConfigError("unknown parameter '" + name + "'");
  return it->second.tensor;
}

long long ParamSet::numel() const {
  long long n = 0;
  for (const auto& [name, e] : entries_) n += e.tensor.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [name, e] : entries_) e.tensor.zero_grad();
}

void ParamSet::adopt(const std::string& prefix, const ParamSet& other) {
  for (const auto& [name, e] : other.entries_) add(prefix + name, e.tensor);
}

void sgd_step(ParamSet& params, double lr) {
  for (auto& [name, e] : params.entries()) {
    double* v = e.tensor.values().data();
    const double* g = e.tensor.grad().data();
    const int n = e.tensor.size();
    for (int i = 0; i < n; ++i) v[i] -= lr * g[i];
  }
  params.set_step_count(params.step_count() + 1);
}

void adam_step(ParamSet& params, double lr, double beta1, double beta2, double eps) {
  const std::int64_t t = params.step_count() + 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (auto& [name, e] : params.entries()) {
    const int n = e.tensor.size();
    if (e.m.empty()) {
      e.m.assign(static_cast<std::size_t>(n), 0.0);
      e.v.assign(static_cast<std::size_t>(n), 0.0);
    }
    double* val = e.tensor.values().data();
    const double* g = e.tensor.grad().data();
    for (int i = 0; i < n; ++i) {
      e.m[i] = beta1 * e.m[i] + (1.0 - beta1) * g[i];
      e.v[i] = beta2 * e.v[i] + (1.0 - beta2) * g[i] * g[i];
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      val[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
  params.set_step_count(t);
}

double finite_diff_check(const std::function<Tensor(Tape&, const Tensor&)>& f, Tensor x,
                         double step) {
  Tape tape;
  Tensor probe = Tensor::from_data(x.shape(),
                                   std::vector<double>(x.values().begin(), x.values().end()),
                                   /*requires_grad=*/true);
  Tensor y = f(tape, probe);
  if (y.size() != 1) throw ShapeError("finite_diff_check: f must be scalar-valued");
  tape.backward(y);
  std::vector<double> analytic(probe.grad().begin(), probe.grad().end());

  double max_rel = 0.0;
  Tensor xeval = Tensor::from_data(x.shape(),
                                   std::vector<double>(x.values().begin(), x.values().end()),
                                   /*requires_grad=*/false);
  for (int i = 0; i < xeval.size(); ++i) {
    const double orig = xeval[i];
    Tape scratch;
    Tape::NoGrad pause(scratch);
    xeval[i] = orig + step;
    const double fp = f(scratch, xeval).item();
    xeval[i] = orig - step;
    const double fm = f(scratch, xeval).item();
    xeval[i] = orig;
    const double fd = (fp - fm) / (2.0 * step);
    const double a = analytic[static_cast<std::size_t>(i)];
    const double denom = std::max({std::abs(a), std::abs(fd), 1e-6});
    max_rel = std::max(max_rel, std::abs(a - fd) / denom);
  }
  return max_rel;
}

}  // namespace bevbench
