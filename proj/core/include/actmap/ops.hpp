#pragma once

#include <vector>

#include "actmap/autograd.hpp"
#include "actmap/tensor.hpp"

namespace actmap {

// Elementwise. Binary ops require equal shapes or one scalar (1-element)
// operand; the scalar is broadcast.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& x, double c);
Tensor scale(const Tensor& x, double c);
Tensor relu(const Tensor& x);
// x^alpha, defined for x >= 0 only; callers wanting a robust penalty pass
// x^2 + eps^2.
Tensor power(const Tensor& x, double alpha);
Tensor clamp(const Tensor& x, double lo, double hi);

// Reductions and layout.
Tensor reduce_mean(const Tensor& x);
Tensor reshape(const Tensor& x, std::vector<int> shape);
Tensor concat_channels(const std::vector<Tensor>& parts);
Tensor slice_channels(const Tensor& x, int c0, int c1);

// Spatial ops on NCHW tensors.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias,
              int stride, int pad);
// Transposed convolution; only the kernel-4 / stride-2 / implicit-pad-1
// configuration (exact x2 upsampling) is supported. weight is [Cin,Cout,4,4].
Tensor deconv2d(const Tensor& input, const Tensor& weight, int stride);
Tensor maxpool2d(const Tensor& input, int k, int stride);
Tensor avgpool2d(const Tensor& input, int k, int stride);
// Bilinear x2 upsampling (half-pixel-centre sampling, borders replicated).
Tensor upsample2x(const Tensor& input);

// Forward differences along the last (x) or second-to-last (y) axis; the
// final column/row of the result is zero, keeping the output shape equal to
// the input shape.
Tensor forward_diff_x(const Tensor& input);
Tensor forward_diff_y(const Tensor& input);

// Dense layer on [N,D] with weight [D,O], bias [O].
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// Mean over the batch of -log softmax(logits)[label].
Tensor softmax_cross_entropy(const Tensor& logits,
                             const std::vector<int>& labels);

// Plain softmax of a logit vector; inference helper, not recorded on a tape.
std::vector<double> softmax_vector(std::span<const double> logits);

}  // namespace actmap
