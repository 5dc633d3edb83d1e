#include "s5/fft.hpp"

#include <cmath>
#include <map>

#include "s5/error.hpp"

namespace s5 {

namespace {

// Twiddle tables per transform size, built once.
const std::vector<std::complex<double>>& twiddles(size_t n) {
    static std::map<size_t, std::vector<std::complex<double>>> cache;
    auto it = cache.find(n);
    if (it != cache.end()) {
        return it->second;
    }
    std::vector<std::complex<double>> w(n / 2);
    const double step = -2.0 * 3.14159265358979323846 / static_cast<double>(n);
    for (size_t i = 0; i < n / 2; ++i) {
        w[i] = std::polar(1.0, step * static_cast<double>(i));
    }
    return cache.emplace(n, std::move(w)).first->second;
}

} // namespace

size_t next_pow2(size_t n) {
    size_t p = 1;
    while (p < n) {
        p <<= 1;
    }
    return p;
}

void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
    const size_t n = a.size();
    if (n == 0 || (n & (n - 1)) != 0) {
        throw ArgError("fft: length must be a power of two");
    }
    // Bit-reversal permutation.
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) {
            j ^= bit;
        }
        j ^= bit;
        if (i < j) {
            std::swap(a[i], a[j]);
        }
    }
    const std::vector<std::complex<double>>& w = twiddles(n);
    for (size_t len = 2; len <= n; len <<= 1) {
        const size_t half = len >> 1;
        const size_t stride = n / len;
        for (size_t start = 0; start < n; start += len) {
            for (size_t k = 0; k < half; ++k) {
                std::complex<double> tw = w[k * stride];
                if (inverse) {
                    tw = std::conj(tw);
                }
                const std::complex<double> u = a[start + k];
                const std::complex<double> v = a[start + k + half] * tw;
                a[start + k] = u + v;
                a[start + k + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::complex<double>& x : a) {
            x *= inv_n;
        }
    }
}

std::vector<double> fft_causal_conv(const std::vector<double>& kernel,
                                    const std::vector<double>& u) {
    if (kernel.size() != u.size()) {
        throw ShapeError("fft_causal_conv: kernel length must equal sequence length");
    }
    const size_t l = u.size();
    if (l == 0) {
        return {};
    }
    const size_t p = next_pow2(2 * l - 1);
    std::vector<std::complex<double>> fa(p), fb(p);
    for (size_t i = 0; i < l; ++i) {
        fa[i] = kernel[i];
        fb[i] = u[i];
    }
    fft_inplace(fa, false);
    fft_inplace(fb, false);
    for (size_t i = 0; i < p; ++i) {
        fa[i] *= fb[i];
    }
    fft_inplace(fa, true);
    std::vector<double> out(l);
    for (size_t i = 0; i < l; ++i) {
        out[i] = fa[i].real();
    }
    return out;
}

std::vector<double> fft_correlate(const std::vector<double>& g,
                                  const std::vector<double>& h, size_t out_len) {
    const size_t l = g.size();
    if (h.size() != l) {
        throw ShapeError("fft_correlate: length mismatch");
    }
    if (l == 0) {
        return {};
    }
    const size_t p = next_pow2(2 * l - 1);
    std::vector<std::complex<double>> fg(p), fh(p);
    for (size_t i = 0; i < l; ++i) {
        fg[i] = g[i];
        fh[i] = h[i];
    }
    fft_inplace(fg, false);
    fft_inplace(fh, false);
    for (size_t i = 0; i < p; ++i) {
        fg[i] *= std::conj(fh[i]);
    }
    fft_inplace(fg, true);
    std::vector<double> out(out_len);
    for (size_t j = 0; j < out_len; ++j) {
        out[j] = fg[j].real();
    }
    return out;
}

} // namespace s5
