#pragma once

// Small set of dense CPU kernels with hand-written adjoints. Every op here is
// deterministic: loop order is fixed so forward results are bitwise stable.

#include <cmath>
#include <span>
#include <vector>

#include "stylemix/tensor.hpp"

namespace stylemix::nn {

inline constexpr double kLeakySlope = 0.2;

/// Same-padded (zero) stride-1 convolution. `weights` is Cout x Cin x k x k.
Tensor4 conv2d(const Tensor4& x, std::span<const double> weights, int out_channels, int kernel);

/// d(loss)/d(x) for conv2d given d(loss)/d(y).
Tensor4 conv2d_grad_input(const Tensor4& dy, std::span<const double> weights, int in_channels, int kernel);

/// Accumulates d(loss)/d(weights) into `dw` (Cout x Cin x k x k).
void conv2d_grad_weights(const Tensor4& x, const Tensor4& dy, int kernel, std::span<double> dw);

Tensor4 upsample_nearest2x(const Tensor4& x);
Tensor4 upsample_nearest2x_grad(const Tensor4& dy);

/// 2x2 mean pooling; odd trailing rows/columns are dropped.
Tensor4 avg_pool2x(const Tensor4& x);
Tensor4 avg_pool2x_grad(const Tensor4& dy, int in_height, int in_width);

/// y = gain * leaky_relu(x), in place.
void leaky_relu_inplace(Tensor4& x, double gain);
/// Multiplies `grad` by the local derivative evaluated at pre-activation `pre`.
void leaky_relu_grad_inplace(const Tensor4& pre, Tensor4& grad, double gain);

inline double softplus(double x) { return x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x))); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace stylemix::nn
