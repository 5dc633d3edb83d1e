#include "s5/rng.hpp"

#include <cmath>

#include "s5/error.hpp"

namespace s5 {

namespace {

// splitmix64 finalizer; full-period bijection on 64 bits.
inline uint64_t mix64(uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace

uint64_t Rng::next_u64() noexcept {
    uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * ++counter_;
    z ^= mix64(stream_ + 0xd1b54a32d192ed03ULL);
    return mix64(z);
}

double Rng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() noexcept {
    if (has_cached_normal_) {
        has_cached_normal_ = false;
        return cached_normal_;
    }
    // Box-Muller; 1-u keeps the log argument in (0, 1].
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    cached_normal_ = r * std::sin(theta);
    has_cached_normal_ = true;
    return r * std::cos(theta);
}

uint64_t Rng::below(uint64_t n) noexcept {
    // Lemire's multiply-shift; bias below 2^-64 per call is irrelevant here.
    unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
    return static_cast<uint64_t>(m >> 64);
}

std::vector<int> Rng::sample_without_replacement(int n, int k) {
    if (k < 0 || k > n) {
        throw ArgError("sample_without_replacement: k out of range");
    }
    // Floyd's algorithm, then sort ascending.
    std::vector<int> chosen;
    chosen.reserve(static_cast<size_t>(k));
    std::vector<bool> used(static_cast<size_t>(n), false);
    for (int j = n - k; j < n; ++j) {
        int t = static_cast<int>(below(static_cast<uint64_t>(j) + 1));
        if (used[static_cast<size_t>(t)]) {
            t = j;
        }
        used[static_cast<size_t>(t)] = true;
        chosen.push_back(t);
    }
    std::vector<int> out;
    out.reserve(chosen.size());
    for (int i = 0; i < n; ++i) {
        if (used[static_cast<size_t>(i)]) {
            out.push_back(i);
        }
    }
    return out;
}

Rng Rng::split(uint64_t substream) const noexcept {
    return Rng(seed_, mix64(stream_ ^ mix64(substream + 0x9e3779b97f4a7c15ULL)));
}

uint64_t stream_id(std::string_view tag, uint64_t a, uint64_t b) noexcept {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
    }
    h = mix64(h ^ mix64(a));
    h = mix64(h ^ mix64(b + 0x632be59bd9b4e019ULL));
    return h;
}

} // namespace s5
