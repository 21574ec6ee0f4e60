#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "filterlab/rng.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/time_grid.hpp"

using namespace filterlab;

TEST(Philox, KnownAnswerVectors)
{
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::block(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::block(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::block(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, PureFunctionOfSeedAndId)
{
    RngStream a(42, {Purpose::signal_noise, 7, 3});
    RngStream b(42, {Purpose::signal_noise, 7, 3});
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.gaussian(), b.gaussian());
}

TEST(RngStream, DistinctIdsDiffer)
{
    RngStream a(42, {Purpose::signal_noise, 7, 3});
    RngStream b(42, {Purpose::signal_noise, 8, 3});
    RngStream c(42, {Purpose::observation_noise, 7, 3});
    RngStream d(43, {Purpose::signal_noise, 7, 3});
    const double x = a.uniform();
    EXPECT_NE(x, b.uniform());
    EXPECT_NE(x, c.uniform());
    EXPECT_NE(x, d.uniform());
}

TEST(RngStream, UniformInOpenInterval)
{
    RngStream a(1, {Purpose::probe, 0, 0});
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = a.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    EXPECT_GT(lo, 0.0);
    EXPECT_LT(hi, 1.0);
}

TEST(RngStream, IndependentStreamsUncorrelated)
{
    const int n = 200000;
    std::vector<double> a(n), b(n);
    RngStream sa(9, {Purpose::signal_noise, 0, 0});
    RngStream sb(9, {Purpose::observation_q, 0, 0});
    for (int i = 0; i < n; ++i) {
        a[static_cast<std::size_t>(i)] = sa.gaussian();
        b[static_cast<std::size_t>(i)] = sb.gaussian();
    }
    EXPECT_LT(std::abs(stats::correlation(a, b)), 4.0 / std::sqrt(n));
}

TEST(GaussianIncrements, MeanAndVariance)
{
    const auto grid = TimeGrid::make(1.0, 1000, 1);
    // 1000 x 1000 = 10^6 draws
    const auto table = gaussian_increments(RngStream(5, {Purpose::probe, 1, 0}), grid, 1000);
    std::vector<double> v(table.data(), table.data() + table.size());
    const double m = stats::mean(v);
    EXPECT_LT(std::abs(m), 4.0 * stats::standard_error(v));
    EXPECT_NEAR(stats::variance(v) / grid.dt(), 1.0, 0.01);
}

TEST(GaussianIncrements, BitIdenticalRepeat)
{
    const auto grid = TimeGrid::make(1.0, 64, 4);
    RngStream s(11, {Purpose::observation_q, 2, 5});
    const auto a = gaussian_increments(s, grid, 3);
    const auto b = gaussian_increments(s, grid, 3);
    EXPECT_TRUE((a.array() == b.array()).all());
}
