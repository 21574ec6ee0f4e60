#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "filterlab/ensemble.hpp"
#include "filterlab/filter.hpp"
#include "filterlab/spatial_model.hpp"
#include "filterlab/stats.hpp"

using namespace filterlab;

namespace {
ObservationPath q_path(const SpatialModel& m, const TimeGrid& grid, std::uint32_t rep)
{
    return simulate_observation_Q(grid, RngStream(5, {Purpose::observation_q, 0, rep}), m.channels(), m.mass);
}

EnsembleOptions opts(std::size_t n, std::vector<double> checkpoints = {}, std::uint32_t rep = 0)
{
    EnsembleOptions o;
    o.particles = n;
    o.checkpoints = std::move(checkpoints);
    o.seed = 23;
    o.replicate = rep;
    return o;
}

const std::vector<ScalarTestFunction> battery{phi::constant<1>(), phi::identity(), phi::square(),
                                              phi::hyperbolic_tangent()};
}  // namespace

TEST(SpatialRho, OneCellZeroAlphaMatchesModelOne)
{
    const BoundedTanhModel m;
    const auto sm = spatial_from_scalar(m);
    const auto grid = TimeGrid::make(1.0, 128, 1);
    const auto y = q_path(sm, grid, 0);
    const std::vector<double> cps{0.5, 1.0};
    const auto a = build_ensemble(m, grid, y, opts(2000, cps));
    const auto b = build_spatial_ensemble(sm, grid, y, opts(2000, cps));
    for (double t : cps) {
        for (const auto& f : battery) {
            EXPECT_NEAR(a.estimate(f, t).rho, b.estimate(f, t).rho, 1e-12);
            EXPECT_NEAR(a.estimate(f, t).pi, b.estimate(f, t).pi, 1e-12);
        }
    }
    const auto za = zakai_residual(a, phi::square(), cps);
    const auto zb = zakai_residual(b, phi::square(), cps);
    const auto ka = ks_residual(a, phi::square(), cps);
    const auto kb = ks_residual(b, phi::square(), cps);
    for (std::size_t c = 0; c < cps.size(); ++c) {
        EXPECT_NEAR(za.value[c], zb.value[c], 1e-12);
        EXPECT_NEAR(ka.value[c], kb.value[c], 1e-12);
    }
}

TEST(SpatialRho, ZeroSensorUnitWeights)
{
    auto sm = bounded_spatial_model(2);
    sm.sensor_fn = [](double, int) { return 0.0; };
    const auto grid = TimeGrid::make(1.0, 64, 1);
    const auto ens = build_spatial_ensemble(sm, grid, q_path(sm, grid, 1), opts(300));
    EXPECT_EQ(ens.estimate(phi::constant<1>(), 1.0).rho, 1.0);
    for (double w : ens.weights(1.0)) EXPECT_EQ(w, 1.0);
}

TEST(SpatialRho, TotalMassMartingale)
{
    const auto sm = bounded_spatial_model(2);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    std::vector<double> v;
    for (std::uint32_t r = 0; r < 400; ++r) {
        v.push_back(build_spatial_ensemble(sm, grid, q_path(sm, grid, 100 + r), opts(200, {}, r))
                        .estimate(phi::constant<1>(), 1.0)
                        .rho);
    }
    EXPECT_LT(std::abs(stats::mean(v) - 1.0), 4.0 * stats::standard_error(v));
}

TEST(SpatialRho, RejectsChannelMismatchAndPicard)
{
    const auto sm = bounded_spatial_model(2);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto y1 = simulate_observation_Q(grid, RngStream(1, {Purpose::observation_q, 0, 0}), 1);
    EXPECT_THROW((void)build_spatial_ensemble(sm, grid, y1, opts(10)), DimensionError);
    auto o = opts(10);
    o.picard = {4};
    EXPECT_THROW((void)build_spatial_ensemble(sm, grid, q_path(sm, grid, 0), o), ConfigError);
}

TEST(SpatialZakai, ZeroAlphaReducesToModelOneResidual)
{
    auto sm = bounded_spatial_model(2);
    sm.alpha_fn = [](double, int) { return 0.0; };
    const auto grid = TimeGrid::make(1.0, 128, 1);
    const std::vector<double> cps{1.0};
    const auto ens = build_spatial_ensemble(sm, grid, q_path(sm, grid, 2), opts(5000, cps));
    for (const auto& r : zakai_residual(ens, std::span<const ScalarTestFunction>(battery), cps)) {
        EXPECT_TRUE(r.within(4.0)) << r.phi << " z=" << r.max_abs_z();
    }
}

class SpatialCells : public ::testing::TestWithParam<int> {};

TEST_P(SpatialCells, ZakaiAndKsResidualsWithinBootstrapBand)
{
    const int J = GetParam();
    const auto sm = bounded_spatial_model(J);
    const auto grid = TimeGrid::make(1.0, 256, 1);
    const std::vector<double> cps{0.25, 0.5, 0.75, 1.0};
    const auto ens = build_spatial_ensemble(sm, grid, q_path(sm, grid, 10 + static_cast<std::uint32_t>(J)),
                                            opts(J == 8 ? 5000 : 10000, cps));
    for (const auto& r : zakai_residual(ens, std::span<const ScalarTestFunction>(battery), cps)) {
        EXPECT_TRUE(r.within(4.0)) << "zakai " << r.phi << " z=" << r.max_abs_z();
    }
    const auto ks = ks_residual(ens, std::span<const ScalarTestFunction>(battery), cps);
    for (const auto& r : ks) EXPECT_TRUE(r.within(4.0)) << "ks " << r.phi << " z=" << r.max_abs_z();
    for (double v : ks.front().value) EXPECT_EQ(v, 0.0);
}

INSTANTIATE_TEST_SUITE_P(Partitions, SpatialCells, ::testing::Values(1, 2, 8));
