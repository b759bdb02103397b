#include "bevbench/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "bevbench/gemm.hpp"

namespace bevbench {

namespace {

bool is_scalar(const Tensor& t) { return t.size() == 1; }

bool track(const Tape& tape, const Tensor& a) { return tape.recording() && a.requires_grad(); }
bool track(const Tape& tape, const Tensor& a, const Tensor& b) {
  return tape.recording() && (a.requires_grad() || b.requires_grad());
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                     shape_str(b.shape()));
}

enum class EwOp { Add, Sub, Mul };

Tensor elementwise(Tape& tape, const Tensor& a, const Tensor& b, EwOp op, const char* name) {
  const bool a_scalar = is_scalar(a);
  const bool b_scalar = is_scalar(b);
  if (!a_scalar && !b_scalar) require_same_shape(a, b, name);

  const Shape& out_shape = a_scalar && !b_scalar ? b.shape() : a.shape();
  const int n = shape_numel(out_shape);
  Tensor out = Tensor::zeros(out_shape, track(tape, a, b));
  const double* av = a.values().data();
  const double* bv = b.values().data();
  double* ov = out.values().data();
  for (int i = 0; i < n; ++i) {
    const double x = av[a_scalar ? 0 : i];
    const double y = bv[b_scalar ? 0 : i];
    ov[i] = op == EwOp::Add ? x + y : op == EwOp::Sub ? x - y : x * y;
  }
  out.check_finite(name);

  if (out.requires_grad()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record(oc, [ac, bc, oc, op, a_scalar, b_scalar, n]() mutable {
      auto og = oc.grad();
      if (ac.requires_grad()) {
        auto ag = ac.grad();
        for (int i = 0; i < n; ++i) {
          double g = og[i];
          if (op == EwOp::Mul) g *= bc.values()[b_scalar ? 0 : i];
          ag[a_scalar ? 0 : i] += g;
        }
      }
      if (bc.requires_grad()) {
        auto bg = bc.grad();
        for (int i = 0; i < n; ++i) {
          double g = og[i];
          if (op == EwOp::Sub)
            g = -g;
          else if (op == EwOp::Mul)
            g *= ac.values()[a_scalar ? 0 : i];
          bg[b_scalar ? 0 : i] += g;
        }
      }
    });
  }
  return out;
}

}  // namespace

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, a, b, EwOp::Add, "add");
}
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, a, b, EwOp::Sub, "sub");
}
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return elementwise(tape, a, b, EwOp::Mul, "mul");
}

Tensor mul_scalar(Tape& tape, const Tensor& a, double s) {
  return mul(tape, a, Tensor::scalar(s));
}

Tensor sum(Tape& tape, const Tensor& a) {
  double acc = 0.0;
  for (double v : a.values()) acc += v;
  Tensor out = Tensor::from_data({1}, {acc}, track(tape, a));
  out.check_finite("sum");
  if (out.requires_grad()) {
    Tensor ac = a, oc = out;
    tape.record(oc, [ac, oc]() mutable {
      if (!ac.requires_grad()) return;
      const double g = oc.grad()[0];
      for (double& v : ac.grad()) v += g;
    });
  }
  return out;
}

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2)
    throw ShapeError("matmul: expects rank-2 tensors");
  const int m = a.shape()[0], k = a.shape()[1];
  const int k2 = b.shape()[0], n = b.shape()[1];
  if (k != k2)
    throw ShapeError("matmul: inner dims disagree " + shape_str(a.shape()) + " · " +
                     shape_str(b.shape()));

  Tensor out = Tensor::zeros({m, n}, track(tape, a, b));
  detail::gemm_nn(a.values().data(), b.values().data(), out.values().data(), m, k, n);
  out.check_finite("matmul");

  if (out.requires_grad()) {
    Tensor ac = a, bc = b, oc = out;
    tape.record(oc, [ac, bc, oc, m, k, n]() mutable {
      const double* og = oc.grad().data();
      if (ac.requires_grad())
        detail::gemm_nt(og, bc.values().data(), ac.grad().data(), m, n, k);
      if (bc.requires_grad())
        detail::gemm_tn(ac.values().data(), og, bc.grad().data(), k, m, n);
    });
  }
  return out;
}

Tensor add_row_bias(Tape& tape, const Tensor& m, const Tensor& bias) {
  if (m.shape().size() != 2 || bias.shape().size() != 1 || bias.shape()[0] != m.shape()[1])
    throw ShapeError("add_row_bias: need [r×n] + [n]");
  const int r = m.shape()[0], n = m.shape()[1];
  Tensor out = Tensor::zeros({r, n}, track(tape, m, bias));
  const double* mv = m.values().data();
  const double* bv = bias.values().data();
  double* ov = out.values().data();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < n; ++j) ov[static_cast<std::size_t>(i) * n + j] = mv[static_cast<std::size_t>(i) * n + j] + bv[j];
  out.check_finite("add_row_bias");

  if (out.requires_grad()) {
    Tensor mc = m, bc = bias, oc = out;
    tape.record(oc, [mc, bc, oc, r, n]() mutable {
      const double* og = oc.grad().data();
      if (mc.requires_grad()) {
        double* mg = mc.grad().data();
        for (int i = 0; i < r * n; ++i) mg[i] += og[i];
      }
      if (bc.requires_grad()) {
        double* bg = bc.grad().data();
        for (int i = 0; i < r; ++i)
          for (int j = 0; j < n; ++j) bg[j] += og[static_cast<std::size_t>(i) * n + j];
      }
    });
  }
  return out;
}

namespace {

struct ConvDims {
  int cin, h, w, cout, k, stride, pad, oh, ow;
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, int stride, int pad) {
  if (x.shape().size() != 3 || w.shape().size() != 4)
    throw ShapeError("conv2d: expects x[Cin×H×W], w[Cout×Cin×k×k]");
  ConvDims d{};
  d.cin = x.shape()[0];
  d.h = x.shape()[1];
  d.w = x.shape()[2];
  d.cout = w.shape()[0];
  d.k = w.shape()[2];
  if (w.shape()[1] != d.cin)
    throw ShapeError("conv2d: weight expects " + std::to_string(w.shape()[1]) +
                     " input channels, got " + std::to_string(d.cin));
  if (w.shape()[3] != d.k) throw ShapeError("conv2d: kernel must be square");
  if (stride < 1 || pad < 0 || d.k < 1) throw ShapeError("conv2d: bad stride/pad/kernel");
  d.stride = stride;
  d.pad = pad;
  // Floor sizing: trailing rows/cols that do not fit a full stride step are
  // dropped, matching standard learning-framework convention.
  if (d.h + 2 * pad < d.k || d.w + 2 * pad < d.k)
    throw ShapeError("conv2d: kernel larger than padded input");
  d.oh = (d.h + 2 * pad - d.k) / stride + 1;
  d.ow = (d.w + 2 * pad - d.k) / stride + 1;
  if (d.oh <= 0 || d.ow <= 0) throw ShapeError("conv2d: empty output");
  return d;
}

// col[(c·k+ky)·k+kx][oy·OW+ox] = x[c][oy·s−p+ky][ox·s−p+kx], zero outside.
void im2col(const double* x, const ConvDims& d, double* col) {
  const int hw = d.oh * d.ow;
  for (int c = 0; c < d.cin; ++c) {
    const double* xc = x + static_cast<std::size_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        double* row = col + (static_cast<std::size_t>(c) * d.k * d.k + ky * d.k + kx) * hw;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          double* out = row + static_cast<std::size_t>(oy) * d.ow;
          if (iy < 0 || iy >= d.h) {
            std::fill(out, out + d.ow, 0.0);
            continue;
          }
          const double* xrow = xc + static_cast<std::size_t>(iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            out[ox] = (ix >= 0 && ix < d.w) ? xrow[ix] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_accumulate(const double* col, const ConvDims& d, double* dx) {
  const int hw = d.oh * d.ow;
  for (int c = 0; c < d.cin; ++c) {
    double* xc = dx + static_cast<std::size_t>(c) * d.h * d.w;
    for (int ky = 0; ky < d.k; ++ky) {
      for (int kx = 0; kx < d.k; ++kx) {
        const double* row = col + (static_cast<std::size_t>(c) * d.k * d.k + ky * d.k + kx) * hw;
        for (int oy = 0; oy < d.oh; ++oy) {
          const int iy = oy * d.stride - d.pad + ky;
          if (iy < 0 || iy >= d.h) continue;
          const double* in = row + static_cast<std::size_t>(oy) * d.ow;
          double* xrow = xc + static_cast<std::size_t>(iy) * d.w;
          for (int ox = 0; ox < d.ow; ++ox) {
            const int ix = ox * d.stride - d.pad + kx;
            if (ix >= 0 && ix < d.w) xrow[ix] += in[ox];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad) {
  const ConvDims d = conv_dims(x, w, stride, pad);
  if (bias.defined() && (bias.shape().size() != 1 || bias.shape()[0] != d.cout))
    throw ShapeError("conv2d: bias must be [Cout]");

  const int hw = d.oh * d.ow;
  const int krows = d.cin * d.k * d.k;
  auto col = std::make_shared<std::vector<double>>(static_cast<std::size_t>(krows) * hw);
  im2col(x.values().data(), d, col->data());

  bool rg = tape.recording() && (x.requires_grad() || w.requires_grad() ||
                                 (bias.defined() && bias.requires_grad()));
  Tensor out = Tensor::zeros({d.cout, d.oh, d.ow}, rg);
  detail::gemm_nn(w.values().data(), col->data(), out.values().data(), d.cout, krows, hw);
  if (bias.defined()) {
    double* ov = out.values().data();
    const double* bv = bias.values().data();
    for (int c = 0; c < d.cout; ++c) {
      double* row = ov + static_cast<std::size_t>(c) * hw;
      for (int i = 0; i < hw; ++i) row[i] += bv[c];
    }
  }
  out.check_finite("conv2d");

  if (out.requires_grad()) {
    Tensor xc = x, wc = w, bc = bias, oc = out;
    tape.record(oc, [xc, wc, bc, oc, d, col, hw, krows]() mutable {
      const double* og = oc.grad().data();
      if (wc.requires_grad())
        detail::gemm_nt(og, col->data(), wc.grad().data(), d.cout, hw, krows);
      if (bc.defined() && bc.requires_grad()) {
        double* bg = bc.grad().data();
        for (int c = 0; c < d.cout; ++c) {
          const double* row = og + static_cast<std::size_t>(c) * hw;
          double acc = 0.0;
          for (int i = 0; i < hw; ++i) acc += row[i];
          bg[c] += acc;
        }
      }
      if (xc.requires_grad()) {
        std::vector<double> dcol(static_cast<std::size_t>(krows) * hw, 0.0);
        detail::gemm_tn(wc.values().data(), og, dcol.data(), krows, d.cout, hw);
        col2im_accumulate(dcol.data(), d, xc.grad().data());
      }
    });
  }
  return out;
}

namespace {

Tensor rectify(Tape& tape, const Tensor& x, double slope, const char* name) {
  const int n = x.size();
  Tensor out = Tensor::zeros(x.shape(), track(tape, x));
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (int i = 0; i < n; ++i) ov[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  out.check_finite(name);

  if (out.requires_grad()) {
    Tensor xc = x, oc = out;
    tape.record(oc, [xc, oc, slope, n]() mutable {
      if (!xc.requires_grad()) return;
      const double* xv = xc.values().data();
      const double* og = oc.grad().data();
      double* xg = xc.grad().data();
      // Subgradient at exactly 0 is 0.
      for (int i = 0; i < n; ++i)
        xg[i] += xv[i] > 0.0 ? og[i] : (xv[i] < 0.0 ? slope * og[i] : 0.0);
    });
  }
  return out;
}

}  // namespace

Tensor relu(Tape& tape, const Tensor& x) { return rectify(tape, x, 0.0, "relu"); }

Tensor leaky_relu(Tape& tape, const Tensor& x, double slope) {
  return rectify(tape, x, slope, "leaky_relu");
}

Tensor upsample_nearest(Tape& tape, const Tensor& x, int factor) {
  if (x.shape().size() != 3) throw ShapeError("upsample_nearest: expects C×H×W");
  if (factor < 1) throw ShapeError("upsample_nearest: factor must be >= 1");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int oh = h * factor, ow = w * factor;
  Tensor out = Tensor::zeros({c, oh, ow}, track(tape, x));
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < oh; ++i) {
      const double* xrow = xv + (static_cast<std::size_t>(ch) * h + i / factor) * w;
      double* orow = ov + (static_cast<std::size_t>(ch) * oh + i) * ow;
      for (int j = 0; j < ow; ++j) orow[j] = xrow[j / factor];
    }

  if (out.requires_grad()) {
    Tensor xc = x, oc = out;
    tape.record(oc, [xc, oc, c, h, w, factor]() mutable {
      if (!xc.requires_grad()) return;
      const int oh = h * factor, ow = w * factor;
      const double* og = oc.grad().data();
      double* xg = xc.grad().data();
      for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < oh; ++i) {
          double* xrow = xg + (static_cast<std::size_t>(ch) * h + i / factor) * w;
          const double* orow = og + (static_cast<std::size_t>(ch) * oh + i) * ow;
          for (int j = 0; j < ow; ++j) xrow[j / factor] += orow[j];
        }
    });
  }
  return out;
}

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.size())
    throw ShapeError("reshape: element count mismatch " + shape_str(x.shape()) + " -> " +
                     shape_str(new_shape));
  Tensor out = Tensor::from_data(std::move(new_shape),
                                 std::vector<double>(x.values().begin(), x.values().end()),
                                 track(tape, x));
  if (out.requires_grad()) {
    Tensor xc = x, oc = out;
    tape.record(oc, [xc, oc]() mutable {
      if (!xc.requires_grad()) return;
      auto og = oc.grad();
      auto xg = xc.grad();
      for (std::size_t i = 0; i < xg.size(); ++i) xg[i] += og[i];
    });
  }
  return out;
}

namespace {

std::vector<int> strides_of(const Shape& s) {
  std::vector<int> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i) st[i] = st[i + 1] * s[i + 1];
  return st;
}

// out[j] = in[perm-mapped j]; returns the scatter table in -> out.
std::vector<int> permute_index_table(const Shape& in_shape, const std::vector<int>& perm) {
  const int rank = static_cast<int>(in_shape.size());
  Shape out_shape(rank);
  for (int i = 0; i < rank; ++i) out_shape[i] = in_shape[perm[i]];
  const auto out_strides = strides_of(out_shape);
  const int n = shape_numel(in_shape);
  const auto in_strides = strides_of(in_shape);
  std::vector<int> table(n);
  std::vector<int> md(rank, 0);
  for (int flat = 0; flat < n; ++flat) {
    int rem = flat;
    int out_flat = 0;
    for (int i = 0; i < rank; ++i) {
      md[i] = rem / in_strides[i];
      rem %= in_strides[i];
    }
    for (int i = 0; i < rank; ++i) out_flat += md[perm[i]] * out_strides[i];
    table[flat] = out_flat;
  }
  return table;
}

}  // namespace

Tensor permute_axes(Tape& tape, const Tensor& x, const std::vector<int>& perm) {
  const int rank = static_cast<int>(x.shape().size());
  if (static_cast<int>(perm.size()) != rank) throw ShapeError("permute_axes: rank mismatch");
  std::vector<bool> seen(rank, false);
  for (int p : perm) {
    if (p < 0 || p >= rank || seen[p]) throw ShapeError("permute_axes: invalid permutation");
    seen[p] = true;
  }
  Shape out_shape(rank);
  for (int i = 0; i < rank; ++i) out_shape[i] = x.shape()[perm[i]];

  auto table = std::make_shared<std::vector<int>>(permute_index_table(x.shape(), perm));
  Tensor out = Tensor::zeros(out_shape, track(tape, x));
  const double* xv = x.values().data();
  double* ov = out.values().data();
  for (int i = 0; i < x.size(); ++i) ov[(*table)[i]] = xv[i];

  if (out.requires_grad()) {
    Tensor xc = x, oc = out;
    tape.record(oc, [xc, oc, table]() mutable {
      if (!xc.requires_grad()) return;
      const double* og = oc.grad().data();
      double* xg = xc.grad().data();
      for (std::size_t i = 0; i < table->size(); ++i) xg[i] += og[(*table)[i]];
    });
  }
  return out;
}

Tensor flatten_spatial(Tape& tape, const Tensor& x) {
  if (x.shape().size() != 3) throw ShapeError("flatten_spatial: expects C×H×W");
  return reshape(tape, x, {x.shape()[0], x.shape()[1] * x.shape()[2]});
}

Tensor softmax_channels(Tape& tape, const Tensor& logits) {
  if (logits.shape().size() != 3) throw ShapeError("softmax_channels: expects K×H×W");
  const int k = logits.shape()[0];
  const int hw = logits.shape()[1] * logits.shape()[2];
  Tensor out = Tensor::zeros(logits.shape(), track(tape, logits));
  const double* lv = logits.values().data();
  double* ov = out.values().data();
  for (int px = 0; px < hw; ++px) {
    double m = lv[px];
    for (int c = 1; c < k; ++c) m = std::max(m, lv[static_cast<std::size_t>(c) * hw + px]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) {
      const double e = std::exp(lv[static_cast<std::size_t>(c) * hw + px] - m);
      ov[static_cast<std::size_t>(c) * hw + px] = e;
      z += e;
    }
    for (int c = 0; c < k; ++c) ov[static_cast<std::size_t>(c) * hw + px] /= z;
  }
  out.check_finite("softmax_channels");

  if (out.requires_grad()) {
    Tensor lc = logits, oc = out;
    tape.record(oc, [lc, oc, k, hw]() mutable {
      if (!lc.requires_grad()) return;
      const double* p = oc.values().data();
      const double* og = oc.grad().data();
      double* lg = lc.grad().data();
      for (int px = 0; px < hw; ++px) {
        double dot = 0.0;
        for (int c = 0; c < k; ++c)
          dot += og[static_cast<std::size_t>(c) * hw + px] * p[static_cast<std::size_t>(c) * hw + px];
        for (int c = 0; c < k; ++c) {
          const std::size_t i = static_cast<std::size_t>(c) * hw + px;
          lg[i] += p[i] * (og[i] - dot);
        }
      }
    });
  }
  return out;
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const LabelMap& labels,
                             ClassId ignore_label) {
  if (logits.shape().size() != 3) throw ShapeError("softmax_cross_entropy: expects K×H×W");
  const int k = logits.shape()[0], h = logits.shape()[1], w = logits.shape()[2];
  if (labels.h != h || labels.w != w)
    throw ShapeError("softmax_cross_entropy: label map size mismatch");
  const int hw = h * w;

  const double* lv = logits.values().data();
  auto probs = std::make_shared<std::vector<double>>(static_cast<std::size_t>(k) * hw);
  double loss_sum = 0.0;
  long count = 0;
  for (int px = 0; px < hw; ++px) {
    const ClassId lab = labels.v[static_cast<std::size_t>(px)];
    if (lab != ignore_label && lab >= k)
      throw LabelError("label " + std::to_string(int(lab)) + " out of range for K=" +
                       std::to_string(k));
    double m = lv[px];
    for (int c = 1; c < k; ++c) m = std::max(m, lv[static_cast<std::size_t>(c) * hw + px]);
    double z = 0.0;
    for (int c = 0; c < k; ++c) {
      const double e = std::exp(lv[static_cast<std::size_t>(c) * hw + px] - m);
      (*probs)[static_cast<std::size_t>(c) * hw + px] = e;
      z += e;
    }
    for (int c = 0; c < k; ++c) (*probs)[static_cast<std::size_t>(c) * hw + px] /= z;
    if (lab == ignore_label) continue;
    ++count;
    loss_sum += std::log(z) - (lv[static_cast<std::size_t>(lab) * hw + px] - m);
  }

  const double loss = count > 0 ? loss_sum / static_cast<double>(count) : 0.0;
  Tensor out = Tensor::from_data({1}, {loss}, track(tape, logits));
  out.check_finite("softmax_cross_entropy");

  if (out.requires_grad() && count > 0) {
    Tensor lc = logits, oc = out;
    LabelMap labs = labels;
    ClassId ign = ignore_label;
    tape.record(oc, [lc, oc, probs, labs, ign, k, hw, count]() mutable {
      if (!lc.requires_grad()) return;
      const double g = oc.grad()[0] / static_cast<double>(count);
      double* lg = lc.grad().data();
      for (int px = 0; px < hw; ++px) {
        const ClassId lab = labs.v[static_cast<std::size_t>(px)];
        if (lab == ign) continue;
        for (int c = 0; c < k; ++c) {
          const std::size_t i = static_cast<std::size_t>(c) * hw + px;
          lg[i] += ((*probs)[i] - (c == lab ? 1.0 : 0.0)) * g;
        }
      }
    });
  }
  return out;
}

Tensor bce_with_logits(Tape& tape, const Tensor& logits, double target) {
  if (target != 0.0 && target != 1.0)
    throw DataError("bce_with_logits: target must be 0 or 1");
  const int n = logits.size();
  const double* zv = logits.values().data();
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = zv[i];
    acc += std::max(z, 0.0) - z * target + std::log1p(std::exp(-std::abs(z)));
  }
  Tensor out = Tensor::from_data({1}, {acc / n}, track(tape, logits));
  out.check_finite("bce_with_logits");

  if (out.requires_grad()) {
    Tensor lc = logits, oc = out;
    tape.record(oc, [lc, oc, target, n]() mutable {
      if (!lc.requires_grad()) return;
      const double g = oc.grad()[0] / n;
      const double* zv = lc.values().data();
      double* lg = lc.grad().data();
      for (int i = 0; i < n; ++i) {
        const double sig = 1.0 / (1.0 + std::exp(-zv[i]));
        lg[i] += (sig - target) * g;
      }
    });
  }
  return out;
}

}  // namespace bevbench
