#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "stylemix/generator.hpp"
#include "stylemix/spatial_ops.hpp"
#include "stylemix/tensor.hpp"

namespace stylemix::testing {

// Index oracles written from the mode definitions over an explicitly
// extended index sequence rather than closed-form arithmetic.
inline int oracle_index(PadMode mode, int i, int before, int n) {
  std::vector<int> seq;
  switch (mode) {
    case PadMode::replicate:
      for (int k = 0; k < before; ++k) seq.push_back(0);
      for (int k = 0; k < n; ++k) seq.push_back(k);
      for (int k = 0; k < 4 * n + 8; ++k) seq.push_back(n - 1);
      break;
    case PadMode::zero:
      for (int k = 0; k < before; ++k) seq.push_back(-1);
      for (int k = 0; k < n; ++k) seq.push_back(k);
      for (int k = 0; k < 4 * n + 8; ++k) seq.push_back(-1);
      break;
    case PadMode::circular:
      for (int k = 0; k < before; ++k) seq.push_back(((k - before) % n + n) % n);
      for (int k = 0; k < 5 * n + 8; ++k) seq.push_back(k % n);
      break;
    case PadMode::reflect: {
      // Mirror without repeating the edge: ... 2 1 | 0 1 2 ... n-1 | n-2 n-3 ...
      std::vector<int> left;
      for (int k = 1; k <= before; ++k) left.push_back(k);
      for (auto it = left.rbegin(); it != left.rend(); ++it) seq.push_back(*it);
      for (int k = 0; k < n; ++k) seq.push_back(k);
      for (int k = n - 2; k >= 0; --k) seq.push_back(k);
      break;
    }
  }
  return seq.at(i);
}

inline Tensor4 oracle_pad(const Tensor4& t, const PadSpec& s) {
  Tensor4 out(t.batch(), t.channels(), t.height() + s.top + s.bottom, t.width() + s.left + s.right);
  for (int b = 0; b < t.batch(); ++b)
    for (int c = 0; c < t.channels(); ++c)
      for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
          const int sy = oracle_index(s.mode, y, s.top, t.height());
          const int sx = oracle_index(s.mode, x, s.left, t.width());
          out.at(b, c, y, x) = (sy < 0 || sx < 0) ? 0.0 : t.at(b, c, sy, sx);
        }
  return out;
}

inline Tensor4 oracle_nearest(const Tensor4& t, int oh, int ow) {
  Tensor4 out(t.batch(), t.channels(), oh, ow);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        // Output cell y covers source interval [y*h/oh, (y+1)*h/oh); take the cell containing its left edge.
        const double sy = static_cast<double>(y) * t.height() / oh;
        const double sx = static_cast<double>(x) * t.width() / ow;
        out.at(0, c, y, x) = t.at(0, c, static_cast<int>(std::floor(sy + 1e-9)), static_cast<int>(std::floor(sx + 1e-9)));
      }
  return out;
}

inline Tensor4 oracle_bilinear(const Tensor4& t, int oh, int ow) {
  auto coord = [](int d, int in, int out, int& i0, int& i1, double& wt) {
    double s = (d + 0.5) * in / out - 0.5;
    if (s < 0) s = 0;
    i0 = static_cast<int>(s);
    if (i0 > in - 1) i0 = in - 1;
    i1 = i0 + 1 < in ? i0 + 1 : in - 1;
    wt = s - i0;
  };
  Tensor4 out(t.batch(), t.channels(), oh, ow);
  for (int c = 0; c < t.channels(); ++c)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x) {
        int y0, y1, x0, x1;
        double wy, wx;
        coord(y, t.height(), oh, y0, y1, wy);
        coord(x, t.width(), ow, x0, x1, wx);
        out.at(0, c, y, x) = (1 - wy) * (1 - wx) * t.at(0, c, y0, x0) + (1 - wy) * wx * t.at(0, c, y0, x1) +
                             wy * (1 - wx) * t.at(0, c, y1, x0) + wy * wx * t.at(0, c, y1, x1);
      }
  return out;
}

inline std::vector<StyleVector> random_sequence(std::mt19937_64& rng, int n, int dim) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<StyleVector> seq(n);
  for (auto& s : seq) {
    s.values.resize(dim);
    for (double& v : s.values) v = normal(rng);
  }
  return seq;
}

inline double adjacent_energy(const std::vector<StyleVector>& seq) {
  double e = 0.0;
  for (std::size_t j = 0; j + 1 < seq.size(); ++j)
    for (std::size_t k = 0; k < seq[j].values.size(); ++k) {
      const double d = seq[j + 1].values[k] - seq[j].values[k];
      e += d * d;
    }
  return e;
}

}  // namespace stylemix::testing
