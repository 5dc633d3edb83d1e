#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace s5 {

// Counter-based generator: draw i of a given (seed, stream) is a pure hash of
// (seed, stream, i), so streams can be split freely without cross-talk and a
// resumed run replays the exact same values.
class Rng {
  public:
    explicit Rng(uint64_t seed, uint64_t stream = 0) noexcept
        : seed_(seed), stream_(stream) {}

    uint64_t next_u64() noexcept;

    // Half-open [0, 1), 53-bit resolution.
    double uniform() noexcept;

    // Standard normal via Box-Muller (second value cached).
    double normal() noexcept;

    // Uniform integer in [0, n), n > 0.
    uint64_t below(uint64_t n) noexcept;

    // k distinct values from [0, n), ascending. Requires 0 <= k <= n.
    std::vector<int> sample_without_replacement(int n, int k);

    template <typename T>
    void shuffle(std::vector<T>& v) noexcept {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent generator; derived streams never collide with this one for
    // distinct substream ids.
    Rng split(uint64_t substream) const noexcept;

    uint64_t seed() const noexcept { return seed_; }
    uint64_t stream() const noexcept { return stream_; }

  private:
    uint64_t seed_;
    uint64_t stream_;
    uint64_t counter_ = 0;
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// FNV-1a over a tag plus up to two integers; used to key purpose-specific
// streams ("shuffle", epoch) so that consuming one stream never shifts another.
uint64_t stream_id(std::string_view tag, uint64_t a = 0, uint64_t b = 0) noexcept;

} // namespace s5
