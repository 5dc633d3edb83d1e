#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace s5 {

// Iterative in-place radix-2 complex FFT. n must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a, bool inverse);

// Smallest power of two >= n.
size_t next_pow2(size_t n);

// Causal linear convolution y[k] = sum_{i<=k} kernel[i] * u[k-i], truncated to
// u.size(); computed by zero-padding to the next power of two >= 2L-1.
std::vector<double> fft_causal_conv(const std::vector<double>& kernel,
                                    const std::vector<double>& u);

// Linear correlation c[j] = sum_{k>=j} g[k] * h[k-j] for j in [0, h_len);
// the adjoint of fft_causal_conv in either argument.
std::vector<double> fft_correlate(const std::vector<double>& g,
                                  const std::vector<double>& h, size_t out_len);

} // namespace s5
