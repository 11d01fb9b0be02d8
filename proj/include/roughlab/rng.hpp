#pragma once

#include <cstdint>
#include <random>

namespace roughlab {

/// Random stream keyed by (seed, stream id). Identical keys reproduce the
/// same output; distinct ids give independent streams.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                          0x5eedu};
        engine_.seed(seq);
    }

    /// Stream id built from a tag and up to two indices, for nested replica keys.
    [[nodiscard]] static std::uint64_t key(std::uint64_t tag, std::uint64_t a, std::uint64_t b = 0) {
        return (tag << 56) ^ (a << 28) ^ b;
    }

    [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
    [[nodiscard]] std::uint64_t stream() const noexcept { return stream_; }
    [[nodiscard]] std::mt19937_64& engine() noexcept { return engine_; }

    double normal() { return normal_(engine_); }
    double uniform() { return uniform_(engine_); }
    std::uint64_t bits() { return engine_(); }

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace roughlab
