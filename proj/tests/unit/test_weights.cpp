#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "filterlab/models.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/weights.hpp"

using namespace filterlab;

namespace {
RngStream noise(std::uint32_t k, std::uint32_t rep = 0) { return RngStream(91, {Purpose::signal_noise, k, rep}); }
RngStream qobs(std::uint32_t k, std::uint32_t rep = 0) { return RngStream(91, {Purpose::observation_q, k, rep}); }

FunctionalModel<1, 1, 1> deterministic_tanh_model()
{
    FunctionalModel<1, 1, 1> m;
    m.label = "ode_tanh";
    m.drift_fn = [](const Vec<1>& x) { return Vec<1>{-x[0]}; };
    m.diffusion_fn = [](const Vec<1>&) { return Mat<1, 1>{0.0}; };
    m.sensor_fn = [](const Vec<1>& x) { return Vec<1>{std::tanh(x[0])}; };
    m.sensor_jacobian_fn = [](const Vec<1>& x) { return Mat<1, 1>{1.0 - std::pow(std::tanh(x[0]), 2)}; };
    m.sensor_hessian_fn = [](const Vec<1>&, int) { return Mat<1, 1>{0.0}; };
    m.initial_fn = [](RngStream& r) { return Vec<1>{r.gaussian()}; };
    m.h_max = 1.0;
    return m;
}

/// sqrt(E sup_t |L^n - L|^2) over Q replicates.
template <DiffusionModel M>
double strong_weight_error(const M& m, int n, int M_steps, std::uint32_t reps)
{
    const auto grid = TimeGrid::make(1.0, M_steps, n);
    double s = 0.0;
    for (std::uint32_t r = 0; r < reps; ++r) {
        const auto x = simulate_signal(m, grid, noise(r, 9));
        const auto y = simulate_observation_Q(grid, qobs(r, 9), 1);
        const auto L = weight_exact(m, x, y, grid);
        const auto Ln = weight_picard(m, x, y, grid);
        double sup = 0.0;
        for (int k = 0; k <= M_steps; ++k) sup = std::max(sup, std::abs(L.L(k) - Ln.L(k)));
        s += sup * sup;
    }
    return std::sqrt(s / reps);
}
}  // namespace

TEST(WeightExact, ZeroSensorGivesUnitWeight)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto w = weight_exact(m, simulate_signal(m, grid, noise(0)), simulate_observation_Q(grid, qobs(0), 1), grid);
    for (double l : w.log) EXPECT_EQ(l, 0.0);
}

TEST(WeightExact, FrozenLinearObservation)
{
    const double c = 0.8;
    const auto m = constant_coefficient_model(1.0, 0.0, c);
    const auto grid = TimeGrid::make(1.5, 96, 2);
    const auto w = weight_exact(m, simulate_signal(m, grid, noise(0)), ObservationPath::linear(grid, {c}), grid);
    EXPECT_NEAR(w.L(96), std::exp(c * c * 1.5 / 2), 1e-12);
}

TEST(WeightExact, MartingaleUnderQ)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 1);
    std::vector<double> q1, q2, q4;
    for (std::uint32_t r = 0; r < 100000; ++r) {
        const auto w = weight_exact(m, simulate_signal(m, grid, noise(r, 1)), simulate_observation_Q(grid, qobs(r, 1), 1), grid);
        q1.push_back(w.L(4));
        q2.push_back(w.L(8));
        q4.push_back(w.L(16));
    }
    for (const auto* v : {&q1, &q2, &q4}) {
        EXPECT_LT(std::abs(stats::mean(*v) - 1.0), 4.0 * stats::standard_error(*v));
    }
}

TEST(WeightExact, GridMismatchRejected)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 1);
    const auto x = simulate_signal(m, grid, noise(0));
    EXPECT_THROW((void)weight_exact(m, x, ObservationPath::zero(TimeGrid::make(1.0, 32, 1), 1), grid), DimensionError);
}

TEST(WeightPicard, ConstantSensorUnchanged)
{
    const auto m = constant_coefficient_model(1.0, -0.3, 0.6);
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto x = simulate_signal(m, grid, noise(2));
    const auto y = simulate_observation_Q(grid, qobs(2), 1);
    EXPECT_EQ(weight_exact(m, x, y, grid).log, weight_picard(m, x, y, grid, 4).log);
}

TEST(WeightPicard, IdentityCoarseGridIsExactBitForBit)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::identity(1.0, 64);
    const auto x = simulate_signal(m, grid, noise(3));
    const auto y = simulate_observation_Q(grid, qobs(3), 1);
    EXPECT_EQ(weight_exact(m, x, y, grid).log, weight_picard(m, x, y, grid).log);
}

TEST(WeightPicard, RequestedStepMustMatchGrid)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto x = simulate_signal(m, grid, noise(3));
    const auto y = simulate_observation_Q(grid, qobs(3), 1);
    EXPECT_THROW((void)weight_picard(m, x, y, grid, 8), std::invalid_argument);
}

TEST(WeightPicard, FrozenAtCoarsePoints)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 4);
    const auto x = simulate_signal(m, grid, noise(4));
    const auto y = simulate_observation_Q(grid, qobs(4), 1);
    const auto w = weight_picard(m, x, y, grid);
    double expect = 0.0;
    for (int k = 0; k < 16; ++k) {
        const double h = m.sensor(x[k / 4 * 4])[0];
        expect += h * y.increment(k, 0) - 0.5 * h * h * grid.dt();
    }
    EXPECT_NEAR(w.log[16], expect, 1e-14);
}

// The pathwise error L - L^n is O(n^{-1/2}) when sigma != 0 because
// h(X_s) - h(X_tau(s)) is driven by dB over an interval of length 1/n; with a
// deterministic signal it is O(1/n).
TEST(WeightPicard, StrongErrorRates)
{
    const std::vector<double> ns{4, 8, 16, 32, 64};
    std::vector<double> diffusive, deterministic;
    const BoundedTanhModel m;
    const auto ode = deterministic_tanh_model();
    for (double n : ns) {
        diffusive.push_back(strong_weight_error(m, static_cast<int>(n), 1024, 2000));
        deterministic.push_back(strong_weight_error(ode, static_cast<int>(n), 1024, 2000));
    }
    EXPECT_NEAR(stats::loglog_slope(ns, diffusive).slope, -0.5, 0.2);
    EXPECT_NEAR(stats::loglog_slope(ns, deterministic).slope, -1.0, 0.2);
}

TEST(WeightPicard, ScaledErrorSecondMomentStableUnderRefinement)
{
    const BoundedTanhModel m;
    std::vector<double> second;
    for (int M : {256, 512, 1024}) {
        const auto grid = TimeGrid::make(1.0, M, 8);
        double s = 0.0;
        for (std::uint32_t r = 0; r < 2000; ++r) {
            const auto x = simulate_signal(m, grid, noise(r, 5));
            const auto y = simulate_observation_Q(grid, qobs(r, 5), 1);
            const double e = 8.0 * (weight_exact(m, x, y, grid).L(M) - weight_picard(m, x, y, grid).L(M));
            s += e * e;
        }
        second.push_back(s / 2000);
    }
    EXPECT_LT(second[2], 1.5 * second[0]);
    EXPECT_GT(second[2], second[0] / 1.5);
}

TEST(WeightSpatial, ZeroSensorAndOneCellEquivalence)
{
    const BoundedTanhModel m;
    const auto sm = spatial_from_scalar(m);
    const auto grid = TimeGrid::make(1.0, 64, 1);
    const auto y = simulate_observation_Q(grid, qobs(6), 1);
    const auto x = simulate_signal_spatial(sm, grid, noise(6), y);
    EXPECT_EQ(weight_spatial(sm, x, y, grid).log, weight_exact(m, x, y, grid).log);

    auto zero = bounded_spatial_model(3);
    zero.sensor_fn = [](double, int) { return 0.0; };
    const auto y3 = simulate_observation_Q(grid, qobs(7), 3, zero.mass);
    const auto x3 = simulate_signal_spatial(zero, grid, noise(7), y3);
    for (double l : weight_spatial(zero, x3, y3, grid).log) EXPECT_EQ(l, 0.0);
    EXPECT_THROW((void)weight_spatial(zero, x3, y, grid), DimensionError);
}

TEST(WeightSpatial, MartingaleUnderQ)
{
    const auto sm = bounded_spatial_model(2);
    const auto grid = TimeGrid::make(1.0, 16, 1);
    std::vector<double> v;
    for (std::uint32_t r = 0; r < 100000; ++r) {
        const auto y = simulate_observation_Q(grid, qobs(r, 8), 2, sm.mass);
        v.push_back(weight_spatial(sm, simulate_signal_spatial(sm, grid, noise(r, 8), y), y, grid).L(16));
    }
    EXPECT_LT(std::abs(stats::mean(v) - 1.0), 4.0 * stats::standard_error(v));
}

TEST(WeightPath, CsvExport)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 4, 2);
    const auto x = simulate_signal(m, grid, noise(0));
    const auto y = simulate_observation_Q(grid, qobs(0), 1);
    std::ostringstream os;
    write_csv(os, weight_exact(m, x, y, grid), weight_picard(m, x, y, grid), grid);
    EXPECT_EQ(os.str().substr(0, 21), "time,log_L,log_Ln\n0,0");
}
