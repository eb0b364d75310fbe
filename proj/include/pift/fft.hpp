#pragma once

#include <complex>

namespace pift {

/// In-place 2-D DFT of an n x n row-major complex buffer.
/// Forward uses the e^{-i...} kernel, inverse the e^{+i...} kernel; neither
/// applies the 1/n^2 normalization (callers scale explicitly).
/// Power-of-two sizes take the radix-2 path; other sizes fall back to a
/// direct O(n^2) transform per line.
void fft2(std::complex<double>* data, int n, bool inverse);

inline void fft2_forward(std::complex<double>* data, int n) { fft2(data, n, false); }
inline void fft2_inverse_unnorm(std::complex<double>* data, int n) { fft2(data, n, true); }

}  // namespace pift
