// SPDX-License-Identifier: Apache-2.0
#include <array>
#include <cmath>
#include <vector>

#include "semsplat/error.hpp"
#include "semsplat/losses.hpp"

namespace semsplat {
namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

const std::array<double, 2 * kRadius + 1>& window() {
  static const auto w = [] {
    std::array<double, 2 * kRadius + 1> k{};
    double sum = 0.0;
    for (int i = -kRadius; i <= kRadius; ++i) {
      k[std::size_t(i + kRadius)] = std::exp(-double(i * i) / (2.0 * 1.5 * 1.5));
      sum += k[std::size_t(i + kRadius)];
    }
    for (double& v : k) v /= sum;
    return k;
  }();
  return w;
}

/// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
int reflect(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i >= n ? period - 1 - i : i;
}

using Plane = std::vector<double>;

/// Reflected source index for every (position, tap) pair along an axis.
std::vector<int> tap_table(int n) {
  std::vector<int> t(std::size_t(n) * (2 * kRadius + 1));
  for (int i = 0; i < n; ++i)
    for (int d = -kRadius; d <= kRadius; ++d) t[std::size_t(i) * (2 * kRadius + 1) + std::size_t(d + kRadius)] = reflect(i + d, n);
  return t;
}

/// out = G * in. `adjoint` applies the transpose (scatter instead of gather).
Plane blur(const Plane& in, int w, int h, bool adjoint) {
  constexpr int kTaps = 2 * kRadius + 1;
  const auto& k = window();
  const std::vector<int> tx = tap_table(w), ty = tap_table(h);
  Plane tmp(in.size(), 0.0), out(in.size(), 0.0);
  if (!adjoint) {
    for (int y = 0; y < h; ++y) {
      const double* row = in.data() + std::size_t(y) * w;
      for (int x = 0; x < w; ++x) {
        const int* src = tx.data() + std::size_t(x) * kTaps;
        double s = 0.0;
        for (int d = 0; d < kTaps; ++d) s += k[std::size_t(d)] * row[src[d]];
        tmp[std::size_t(y) * w + x] = s;
      }
    }
    for (int y = 0; y < h; ++y) {
      const int* src = ty.data() + std::size_t(y) * kTaps;
      double* dst = out.data() + std::size_t(y) * w;
      for (int d = 0; d < kTaps; ++d) {
        const double* row = tmp.data() + std::size_t(src[d]) * w;
        for (int x = 0; x < w; ++x) dst[x] += k[std::size_t(d)] * row[x];
      }
    }
    return out;
  }
  for (int y = 0; y < h; ++y) {
    const int* dst = ty.data() + std::size_t(y) * kTaps;
    const double* row = in.data() + std::size_t(y) * w;
    for (int d = 0; d < kTaps; ++d) {
      double* t = tmp.data() + std::size_t(dst[d]) * w;
      for (int x = 0; x < w; ++x) t[x] += k[std::size_t(d)] * row[x];
    }
  }
  for (int y = 0; y < h; ++y) {
    const double* row = tmp.data() + std::size_t(y) * w;
    double* o = out.data() + std::size_t(y) * w;
    for (int x = 0; x < w; ++x) {
      const int* dst = tx.data() + std::size_t(x) * kTaps;
      for (int d = 0; d < kTaps; ++d) o[dst[d]] += k[std::size_t(d)] * row[x];
    }
  }
  return out;
}

}  // namespace

LossValue ssim(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ContractViolation("ssim: shape mismatch");
  LossValue out;
  out.grad = Image(a.width, a.height, a.channels);
  const int w = a.width, h = a.height;
  const std::size_t n = a.pixel_count();
  if (n == 0 || a.channels == 0) return out;
  const double scale = 1.0 / double(n * std::size_t(a.channels));

  double total = 0.0;
  Plane pa(n), pb(n), paa(n), pbb(n), pab(n);
  for (int c = 0; c < a.channels; ++c) {
    for (std::size_t p = 0; p < n; ++p) {
      pa[p] = a.data[p * a.channels + c];
      pb[p] = b.data[p * b.channels + c];
      paa[p] = pa[p] * pa[p];
      pbb[p] = pb[p] * pb[p];
      pab[p] = pa[p] * pb[p];
    }
    const Plane mu_a = blur(pa, w, h, false), mu_b = blur(pb, w, h, false);
    const Plane e_aa = blur(paa, w, h, false), e_bb = blur(pbb, w, h, false), e_ab = blur(pab, w, h, false);
    Plane d_mu(n), d_eaa(n), d_eab(n);
    for (std::size_t p = 0; p < n; ++p) {
      const double ma = mu_a[p], mb = mu_b[p];
      const double num1 = 2 * ma * mb + kC1;
      const double num2 = 2 * (e_ab[p] - ma * mb) + kC2;
      const double den1 = ma * ma + mb * mb + kC1;
      const double den2 = (e_aa[p] - ma * ma) + (e_bb[p] - mb * mb) + kC2;
      const double s = num1 * num2 / (den1 * den2);
      total += s;
      d_mu[p] = scale * s * (2 * mb / num1 - 2 * mb / num2 - 2 * ma / den1 + 2 * ma / den2);
      d_eaa[p] = -scale * s / den2;
      d_eab[p] = scale * 2 * s / num2;
    }
    const Plane g_mu = blur(d_mu, w, h, true), g_eaa = blur(d_eaa, w, h, true), g_eab = blur(d_eab, w, h, true);
    for (std::size_t p = 0; p < n; ++p) {
      out.grad.data[p * a.channels + c] = g_mu[p] + 2 * pa[p] * g_eaa[p] + pb[p] * g_eab[p];
    }
  }
  out.value = total * scale;
  return out;
}

}  // namespace semsplat
