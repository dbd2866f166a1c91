#include "stylemix/nn.hpp"

#include <algorithm>

#include "stylemix/errors.hpp"

namespace stylemix::nn {

Tensor4 conv2d(const Tensor4& x, std::span<const double> weights, int out_channels, int kernel) {
  const int cin = x.channels();
  const int h = x.height();
  const int w = x.width();
  const int pad = kernel / 2;
  if (weights.size() != static_cast<std::size_t>(out_channels) * cin * kernel * kernel)
    throw DomainError("conv2d: weight size does not match channels");
  Tensor4 y(x.batch(), out_channels, h, w);
  for (int b = 0; b < x.batch(); ++b) {
    for (int o = 0; o < out_channels; ++o) {
      auto out = y.plane(b, o);
      for (int c = 0; c < cin; ++c) {
        const auto in = x.plane(b, c);
        const double* wk = weights.data() + (static_cast<std::size_t>(o) * cin + c) * kernel * kernel;
        for (int ky = 0; ky < kernel; ++ky) {
          const int dy = ky - pad;
          const int y0 = std::max(0, -dy);
          const int y1 = std::min(h, h - dy);
          for (int kx = 0; kx < kernel; ++kx) {
            const int dx = kx - pad;
            const int x0 = std::max(0, -dx);
            const int x1 = std::min(w, w - dx);
            const double wv = wk[ky * kernel + kx];
            for (int yy = y0; yy < y1; ++yy) {
              double* orow = out.data() + static_cast<std::size_t>(yy) * w;
              const double* irow = in.data() + static_cast<std::size_t>(yy + dy) * w + dx;
              for (int xx = x0; xx < x1; ++xx) orow[xx] += wv * irow[xx];
            }
          }
        }
      }
    }
  }
  return y;
}

Tensor4 conv2d_grad_input(const Tensor4& dy, std::span<const double> weights, int in_channels, int kernel) {
  const int cout = dy.channels();
  const int h = dy.height();
  const int w = dy.width();
  const int pad = kernel / 2;
  Tensor4 dx(dy.batch(), in_channels, h, w);
  for (int b = 0; b < dy.batch(); ++b) {
    for (int c = 0; c < in_channels; ++c) {
      auto gin = dx.plane(b, c);
      for (int o = 0; o < cout; ++o) {
        const auto gout = dy.plane(b, o);
        const double* wk = weights.data() + (static_cast<std::size_t>(o) * in_channels + c) * kernel * kernel;
        for (int ky = 0; ky < kernel; ++ky) {
          const int oy = ky - pad;
          const int y0 = std::max(0, -oy);
          const int y1 = std::min(h, h - oy);
          for (int kx = 0; kx < kernel; ++kx) {
            const int ox = kx - pad;
            const int x0 = std::max(0, -ox);
            const int x1 = std::min(w, w - ox);
            const double wv = wk[ky * kernel + kx];
            for (int yy = y0; yy < y1; ++yy) {
              const double* grow = gout.data() + static_cast<std::size_t>(yy) * w;
              double* irow = gin.data() + static_cast<std::size_t>(yy + oy) * w + ox;
              for (int xx = x0; xx < x1; ++xx) irow[xx] += wv * grow[xx];
            }
          }
        }
      }
    }
  }
  return dx;
}

void conv2d_grad_weights(const Tensor4& x, const Tensor4& dy, int kernel, std::span<double> dw) {
  const int cin = x.channels();
  const int cout = dy.channels();
  const int h = x.height();
  const int w = x.width();
  const int pad = kernel / 2;
  for (int b = 0; b < x.batch(); ++b) {
    for (int o = 0; o < cout; ++o) {
      const auto gout = dy.plane(b, o);
      for (int c = 0; c < cin; ++c) {
        const auto in = x.plane(b, c);
        double* wk = dw.data() + (static_cast<std::size_t>(o) * cin + c) * kernel * kernel;
        for (int ky = 0; ky < kernel; ++ky) {
          const int oy = ky - pad;
          const int y0 = std::max(0, -oy);
          const int y1 = std::min(h, h - oy);
          for (int kx = 0; kx < kernel; ++kx) {
            const int ox = kx - pad;
            const int x0 = std::max(0, -ox);
            const int x1 = std::min(w, w - ox);
            double acc = 0.0;
            for (int yy = y0; yy < y1; ++yy) {
              const double* grow = gout.data() + static_cast<std::size_t>(yy) * w;
              const double* irow = in.data() + static_cast<std::size_t>(yy + oy) * w + ox;
              for (int xx = x0; xx < x1; ++xx) acc += grow[xx] * irow[xx];
            }
            wk[ky * kernel + kx] += acc;
          }
        }
      }
    }
  }
}

Tensor4 upsample_nearest2x(const Tensor4& x) {
  Tensor4 y(x.batch(), x.channels(), x.height() * 2, x.width() * 2);
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx) y.at(b, c, yy, xx) = x.at(b, c, yy / 2, xx / 2);
  return y;
}

Tensor4 upsample_nearest2x_grad(const Tensor4& dy) {
  Tensor4 dx(dy.batch(), dy.channels(), dy.height() / 2, dy.width() / 2);
  for (int b = 0; b < dy.batch(); ++b)
    for (int c = 0; c < dy.channels(); ++c)
      for (int yy = 0; yy < dy.height(); ++yy)
        for (int xx = 0; xx < dy.width(); ++xx) dx.at(b, c, yy / 2, xx / 2) += dy.at(b, c, yy, xx);
  return dx;
}

Tensor4 avg_pool2x(const Tensor4& x) {
  Tensor4 y(x.batch(), x.channels(), x.height() / 2, x.width() / 2);
  for (int b = 0; b < x.batch(); ++b)
    for (int c = 0; c < x.channels(); ++c)
      for (int yy = 0; yy < y.height(); ++yy)
        for (int xx = 0; xx < y.width(); ++xx)
          y.at(b, c, yy, xx) = 0.25 * (x.at(b, c, 2 * yy, 2 * xx) + x.at(b, c, 2 * yy, 2 * xx + 1) +
                                       x.at(b, c, 2 * yy + 1, 2 * xx) + x.at(b, c, 2 * yy + 1, 2 * xx + 1));
  return y;
}

Tensor4 avg_pool2x_grad(const Tensor4& dy, int in_height, int in_width) {
  Tensor4 dx(dy.batch(), dy.channels(), in_height, in_width);
  for (int b = 0; b < dy.batch(); ++b)
    for (int c = 0; c < dy.channels(); ++c)
      for (int yy = 0; yy < dy.height(); ++yy)
        for (int xx = 0; xx < dy.width(); ++xx) {
          const double g = 0.25 * dy.at(b, c, yy, xx);
          dx.at(b, c, 2 * yy, 2 * xx) += g;
          dx.at(b, c, 2 * yy, 2 * xx + 1) += g;
          dx.at(b, c, 2 * yy + 1, 2 * xx) += g;
          dx.at(b, c, 2 * yy + 1, 2 * xx + 1) += g;
        }
  return dx;
}

void leaky_relu_inplace(Tensor4& x, double gain) {
  for (double& v : x.values()) v = gain * (v >= 0.0 ? v : kLeakySlope * v);
}

void leaky_relu_grad_inplace(const Tensor4& pre, Tensor4& grad, double gain) {
  const auto p = pre.values();
  auto g = grad.values();
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= gain * (p[i] >= 0.0 ? 1.0 : kLeakySlope);
}

}  // namespace stylemix::nn
