#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace mdbsde {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static Counter single_round(const Counter& c, const Key& k) {
        const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * c[0];
        const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * c[2];
        const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const auto lo0 = static_cast<std::uint32_t>(p0);
        const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const auto lo1 = static_cast<std::uint32_t>(p1);
        return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    }
};

/// Random draws for one path. Every draw is addressed by (stream, index), so the
/// values do not depend on the order or the thread in which they are requested.
class PathRandom {
public:
    enum Stream : std::uint32_t { brownian = 0, threshold = 1 };

    PathRandom(std::uint64_t seed, std::uint64_t path)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          path_lo_(static_cast<std::uint32_t>(path)),
          path_hi_(static_cast<std::uint32_t>(path >> 32)) {}

    /// Pair of independent standard normals for block b of the stream.
    std::array<double, 2> normal_pair(Stream s, std::uint32_t block) const {
        const auto r = Philox4x32::generate({block, path_lo_, path_hi_, s}, key_);
        const double u1 = open_left(r[0], r[1]);
        const double u2 = closed_left(r[2], r[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    /// Uniform on (0, 1].
    double uniform(Stream s, std::uint32_t block) const {
        const auto r = Philox4x32::generate({block, path_lo_, path_hi_, s}, key_);
        return open_left(r[0], r[1]);
    }

    /// Standard exponential, strictly positive.
    double exponential(Stream s, std::uint32_t block) const {
        const auto r = Philox4x32::generate({block, path_lo_, path_hi_, s}, key_);
        return -std::log((static_cast<double>(join(r[0], r[1]) >> 11) + 0.5) * 0x1p-53);
    }

private:
    static std::uint64_t join(std::uint32_t a, std::uint32_t b) {
        return (std::uint64_t{a} << 32) | b;
    }
    // (0, 1] with 53 bits
    static double open_left(std::uint32_t a, std::uint32_t b) {
        return (static_cast<double>(join(a, b) >> 11) + 1.0) * 0x1p-53;
    }
    // [0, 1) with 53 bits
    static double closed_left(std::uint32_t a, std::uint32_t b) {
        return static_cast<double>(join(a, b) >> 11) * 0x1p-53;
    }

    Philox4x32::Key key_;
    std::uint32_t path_lo_;
    std::uint32_t path_hi_;
};

}  // namespace mdbsde
