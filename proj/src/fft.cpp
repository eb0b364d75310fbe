#include "pift/fft.hpp"

#include <cmath>
#include <map>
#include <vector>

namespace pift {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

struct Twiddles {
  std::vector<std::complex<double>> forward;  // exp(-2*pi*i*j/n), j < n/2
  std::vector<int> reversed;                  // bit-reversal permutation
};

const Twiddles& twiddles_for(int n) {
  thread_local std::map<int, Twiddles> cache;
  auto it = cache.find(n);
  if (it != cache.end()) return it->second;

  Twiddles t;
  t.forward.resize(n / 2);
  for (int j = 0; j < n / 2; ++j) {
    const double angle = -kTwoPi * j / n;
    t.forward[j] = {std::cos(angle), std::sin(angle)};
  }
  t.reversed.resize(n);
  int bits = 0;
  while ((1 << bits) < n) ++bits;
  for (int i = 0; i < n; ++i) {
    int r = 0;
    for (int b = 0; b < bits; ++b) {
      if (i & (1 << b)) r |= 1 << (bits - 1 - b);
    }
    t.reversed[i] = r;
  }
  return cache.emplace(n, std::move(t)).first->second;
}

void fft1d_pow2(std::complex<double>* data, int n, bool inverse) {
  const Twiddles& t = twiddles_for(n);
  for (int i = 0; i < n; ++i) {
    const int r = t.reversed[i];
    if (r > i) std::swap(data[i], data[r]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const int half = len >> 1;
    const int step = n / len;
    for (int start = 0; start < n; start += len) {
      for (int k = 0; k < half; ++k) {
        std::complex<double> w = t.forward[k * step];
        if (inverse) w = std::conj(w);
        const std::complex<double> a = data[start + k];
        const std::complex<double> b = data[start + k + half] * w;
        data[start + k] = a + b;
        data[start + k + half] = a - b;
      }
    }
  }
}

void dft1d_direct(std::complex<double>* data, int n, bool inverse) {
  thread_local std::vector<std::complex<double>> tmp;
  tmp.assign(data, data + n);
  const double sign = inverse ? 1.0 : -1.0;
  for (int k = 0; k < n; ++k) {
    std::complex<double> acc = 0.0;
    for (int j = 0; j < n; ++j) {
      const double angle = sign * kTwoPi * static_cast<double>(k) * j / n;
      acc += tmp[j] * std::complex<double>(std::cos(angle), std::sin(angle));
    }
    data[k] = acc;
  }
}

void fft1d(std::complex<double>* data, int n, bool inverse) {
  if (is_pow2(n)) {
    fft1d_pow2(data, n, inverse);
  } else {
    dft1d_direct(data, n, inverse);
  }
}

}  // namespace

void fft2(std::complex<double>* data, int n, bool inverse) {
  for (int row = 0; row < n; ++row) {
    fft1d(data + static_cast<std::size_t>(row) * n, n, inverse);
  }
  thread_local std::vector<std::complex<double>> column;
  column.resize(n);
  for (int col = 0; col < n; ++col) {
    for (int row = 0; row < n; ++row) {
      column[row] = data[static_cast<std::size_t>(row) * n + col];
    }
    fft1d(column.data(), n, inverse);
    for (int row = 0; row < n; ++row) {
      data[static_cast<std::size_t>(row) * n + col] = column[row];
    }
  }
}

}  // namespace pift
