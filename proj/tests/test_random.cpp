#include "mdbsde/random.hpp"

#include <gtest/gtest.h>

#include <cmath>

using mdbsde::Philox4x32;
using mdbsde::PathRandom;

// Known-answer vectors of the Random123 distribution (philox4x32_10).
TEST(Philox, KnownAnswers) {
    EXPECT_EQ(Philox4x32::generate({0, 0, 0, 0}, {0, 0}),
              (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(PathRandom, DrawsAreAddressable) {
    const PathRandom a(42, 7), b(42, 7), c(42, 8);
    EXPECT_EQ(a.normal_pair(PathRandom::brownian, 3), b.normal_pair(PathRandom::brownian, 3));
    EXPECT_NE(a.normal_pair(PathRandom::brownian, 3), c.normal_pair(PathRandom::brownian, 3));
    EXPECT_NE(a.uniform(PathRandom::brownian, 0), a.uniform(PathRandom::threshold, 0));
}

TEST(PathRandom, MomentsOfNormalsAndExponentials) {
    const PathRandom r(2024, 0);
    const int n = 200000;
    double s1 = 0, s2 = 0, e1 = 0;
    for (int i = 0; i < n / 2; ++i) {
        auto z = r.normal_pair(PathRandom::brownian, static_cast<std::uint32_t>(i));
        s1 += z[0] + z[1];
        s2 += z[0] * z[0] + z[1] * z[1];
    }
    for (int i = 0; i < n; ++i) {
        const double e = r.exponential(PathRandom::threshold, static_cast<std::uint32_t>(i));
        ASSERT_GT(e, 0.0);
        e1 += e;
    }
    EXPECT_NEAR(s1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(s2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
    EXPECT_NEAR(e1 / n, 1.0, 4.0 / std::sqrt(n));
}
