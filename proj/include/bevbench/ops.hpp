#pragma once

#include "bevbench/label_map.hpp"
#include "bevbench/tensor.hpp"

namespace bevbench {

// Elementwise ops. Shapes must match exactly; the only broadcast is a true
// scalar (shape {1} or {}) against anything.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul_scalar(Tape& tape, const Tensor& a, double s);

// Sum of all elements -> scalar.
Tensor sum(Tape& tape, const Tensor& a);

// a[m×k] · b[k×n] -> [m×n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

// m[r×n] + bias[n] added to every row.
Tensor add_row_bias(Tape& tape, const Tensor& m, const Tensor& bias);

// x[C_in×H×W], w[C_out×C_in×k×k], bias[C_out] (may be undefined for none).
// Cross-correlation orientation; output is floor((H+2·pad-k)/stride)+1 per
// axis and the kernel must fit inside the padded input.
Tensor conv2d(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias, int stride,
              int pad);

Tensor relu(Tape& tape, const Tensor& x);
Tensor leaky_relu(Tape& tape, const Tensor& x, double slope);

// x[C×H×W] -> [C×fH×fW], each pixel replicated factor× per axis.
Tensor upsample_nearest(Tape& tape, const Tensor& x, int factor);

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);
Tensor permute_axes(Tape& tape, const Tensor& x, const std::vector<int>& perm);
// x[C×H×W] -> [C×HW]; row-major spatial order.
Tensor flatten_spatial(Tape& tape, const Tensor& x);

// Channel softmax over axis 0 of [K×H×W].
Tensor softmax_channels(Tape& tape, const Tensor& logits);

// Mean over non-ignored pixels of -log softmax(logits)[label]. Labels must be
// < K or equal to ignore_label. Returns a scalar; if every pixel is ignored
// the loss is 0 with zero gradient.
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, const LabelMap& labels,
                             ClassId ignore_label);

// Mean binary cross-entropy of logits against a constant target (0 or 1),
// in the stabilized log-sum-exp form.
Tensor bce_with_logits(Tape& tape, const Tensor& logits, double target);

}  // namespace bevbench
