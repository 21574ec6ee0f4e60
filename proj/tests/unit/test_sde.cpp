#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "filterlab/models.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"

using namespace filterlab;

namespace {
RngStream noise(std::uint32_t k, std::uint32_t rep = 0) { return RngStream(77, {Purpose::signal_noise, k, rep}); }
}  // namespace

TEST(SimulateSignal, NoDynamicsIsConstant)
{
    const auto m = constant_coefficient_model(0.0, 0.0, 0.0, 1.25);
    const auto p = simulate_signal(m, TimeGrid::make(1.0, 16, 1), noise(0));
    for (const auto& x : p.states) EXPECT_EQ(x[0], 1.25);
}

TEST(SimulateSignal, DeterministicOde)
{
    const auto m = constant_coefficient_model(0.0, 1.0, 0.0);
    const auto p = simulate_signal(m, TimeGrid::make(1.0, 64, 1), noise(0));
    EXPECT_EQ(p.steps(), 64);
    EXPECT_NEAR(p[64][0], 1.0, 1e-14);
}

TEST(SimulateSignal, BrownianVariance)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 16, 1);
    std::vector<double> ends;
    for (std::uint32_t k = 0; k < 100000; ++k) ends.push_back(simulate_signal(m, grid, noise(k)).states.back()[0]);
    EXPECT_NEAR(stats::variance(ends), 1.0, 0.02);
}

TEST(SimulateSignal, OrnsteinUhlenbeckWeakOrderOne)
{
    // dX = -X dt + dB, X0 = 1: E X_T = e^{-T}; Euler mean (1 - dt)^M.
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    LinearGaussianModel ou;
    ou.initial_mean = 1.0;
    ou.initial_variance = 0.0;
    const double exact = std::exp(-1.0);
    auto error = [&](int M) {
        const auto grid = TimeGrid::make(1.0, M, 1);
        double s = 0.0;
        const int n = 200000;
        for (int k = 0; k < n; ++k) s += simulate_signal(ou, grid, noise(static_cast<std::uint32_t>(k), 1)).states.back()[0];
        return s / n - exact;
    };
    // Deterministic part of the Euler mean is (1 - dt)^M; check it and the sampled bias ratio.
    EXPECT_NEAR(std::pow(1.0 - 1.0 / 8, 8) - exact, -0.0245, 1e-3);
    const double e8 = error(8), e16 = error(16);
    EXPECT_NEAR(e8 / e16, 2.0, 0.5);
    (void)m;
}

TEST(SimulateSignal, SupMomentsStayBounded)
{
    const BoundedTanhModel m;
    double prev = 0.0;
    for (int M : {32, 128, 512}) {
        const auto grid = TimeGrid::make(1.0, M, 1);
        double s = 0.0;
        for (std::uint32_t k = 0; k < 4000; ++k) {
            double sup = 0.0;
            for (const auto& x : simulate_signal(m, grid, noise(k, 2)).states) sup = std::max(sup, std::abs(x[0]));
            s += std::pow(sup, 4);
        }
        s /= 4000;
        if (prev > 0.0) {
            EXPECT_LT(s, 1.5 * prev);
        }
        prev = s;
    }
}

TEST(SimulateObservation, ZeroSensorIsBrownian)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto x = simulate_signal(m, grid, noise(0));
    const RngStream w(5, {Purpose::observation_noise, 0, 0});
    const auto y = simulate_observation_P(m, x, grid, w);
    const auto inc = gaussian_increments(w, grid, 1);
    EXPECT_TRUE((y.increments().array() == inc.array()).all());
    EXPECT_EQ(y.value(0, 0), 0.0);
}

TEST(SimulateObservation, FrozenNoiseConstantSensor)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.7);
    const auto grid = TimeGrid::make(2.0, 64, 1);
    const auto x = simulate_signal(m, grid, noise(0));
    const auto y = simulate_observation_P(m, x, grid, Eigen::MatrixXd::Zero(64, 1));
    EXPECT_NEAR(y.value(64, 0), 1.4, 1e-13);
}

TEST(SimulateObservation, CenteredAgainstSignalIntegral)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 1);
    std::vector<double> d;
    for (std::uint32_t k = 0; k < 100000; ++k) {
        const auto x = simulate_signal(m, grid, noise(k, 3));
        const auto y = simulate_observation_P(m, x, grid, RngStream(5, {Purpose::observation_noise, k, 3}));
        double integral = 0.0;
        for (int s = 0; s < 16; ++s) integral += m.sensor(x[s])[0] * grid.dt();
        d.push_back(y.value(16, 0) - integral);
    }
    EXPECT_LT(std::abs(stats::mean(d)), 4.0 * stats::standard_error(d));
}

TEST(SimulateObservationQ, CovarianceAndStart)
{
    const auto grid = TimeGrid::make(1.0, 500000, 1);
    const auto y = simulate_observation_Q(grid, RngStream(8, {Purpose::observation_q, 0, 0}), 2);
    EXPECT_EQ(y.value(0, 0), 0.0);
    const auto& inc = y.increments();
    const double v0 = inc.col(0).squaredNorm() / inc.rows() / grid.dt();
    const double v1 = inc.col(1).squaredNorm() / inc.rows() / grid.dt();
    const double c01 = inc.col(0).dot(inc.col(1)) / inc.rows() / grid.dt();
    EXPECT_NEAR(v0, 1.0, 0.02);
    EXPECT_NEAR(v1, 1.0, 0.02);
    EXPECT_LT(std::abs(c01), 4.0 / std::sqrt(500000.0));
}

TEST(SimulateObservationQ, IndependentOfSignalStream)
{
    const auto grid = TimeGrid::make(1.0, 200000, 1);
    const auto y = simulate_observation_Q(grid, RngStream(8, {Purpose::observation_q, 0, 0}), 1);
    const auto b = gaussian_increments(noise(0), grid, 1);
    std::vector<double> a(y.increments().data(), y.increments().data() + 200000);
    std::vector<double> c(b.data(), b.data() + 200000);
    EXPECT_LT(std::abs(stats::correlation(a, c)), 4.0 / std::sqrt(200000.0));
}

TEST(SimulateSignalSpatial, ZeroAlphaMatchesScalar)
{
    const BoundedTanhModel m;
    auto sm = spatial_from_scalar(m);
    const auto grid = TimeGrid::make(1.0, 64, 1);
    const auto y = simulate_observation_Q(grid, RngStream(8, {Purpose::observation_q, 0, 0}), 1);
    const auto a = simulate_signal(m, grid, noise(3));
    const auto b = simulate_signal_spatial(sm, grid, noise(3), y);
    for (int k = 0; k <= 64; ++k) EXPECT_EQ(a[k][0], b[k][0]);
}

TEST(SimulateSignalSpatial, DeterministicTransport)
{
    SpatialModel sm;
    sm.cells = {0.5};
    sm.mass = {1.0};
    sm.drift_fn = [](double) { return 0.0; };
    sm.diffusion_fn = [](double) { return 0.0; };
    sm.alpha_fn = [](double, int) { return 1.0; };
    sm.sensor_fn = [](double, int) { return 0.0; };
    sm.initial_fn = [](RngStream&) { return 0.5; };
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto y = ObservationPath::linear(grid, {2.0});
    const auto p = simulate_signal_spatial(sm, grid, noise(0), y);
    EXPECT_NEAR(p[32][0], 2.5, 1e-13);
    EXPECT_THROW((void)simulate_signal_spatial(sm, grid, noise(0), ObservationPath::linear(grid, {1.0, 1.0})),
                 DimensionError);
}

TEST(SimulateSignalSpatial, ZeroSensorDependsOnYOnlyThroughAlpha)
{
    auto sm = bounded_spatial_model(2);
    sm.sensor_fn = [](double, int) { return 0.0; };
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto y = ObservationPath::zero(grid, 2);
    auto no_alpha = sm;
    no_alpha.alpha_fn = [](double, int) { return 0.0; };
    const auto a = simulate_signal_spatial(sm, grid, noise(1), y);
    const auto b = simulate_signal_spatial(no_alpha, grid, noise(1), y);
    for (int k = 0; k <= 32; ++k) EXPECT_EQ(a[k][0], b[k][0]);
}

TEST(Csv, SignalAndObservationHeaders)
{
    const auto grid = TimeGrid::make(1.0, 4, 1);
    const auto y = ObservationPath::linear(grid, {1.0, 2.0});
    std::ostringstream os;
    write_csv(os, y, grid);
    EXPECT_EQ(os.str().substr(0, 15), "time,y_1,y_2\n0,");
}
