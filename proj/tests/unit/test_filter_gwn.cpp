#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "filterlab/ensemble.hpp"
#include "filterlab/filter.hpp"
#include "filterlab/models.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"

using namespace filterlab;

namespace {
ObservationPath q_path(const TimeGrid& grid, std::uint32_t rep, int dy = 1)
{
    return simulate_observation_Q(grid, RngStream(3, {Purpose::observation_q, 0, rep}), dy);
}

/// Signal and observation under P for replicate `rep`.
template <DiffusionModel M>
ObservationPath p_path(const M& m, const TimeGrid& grid, std::uint32_t rep)
{
    const auto x = simulate_signal(m, grid, RngStream(4, {Purpose::signal_noise, 0, rep}));
    return simulate_observation_P(m, x, grid, RngStream(4, {Purpose::observation_noise, 0, rep}));
}

EnsembleOptions opts(std::size_t n, std::vector<double> checkpoints = {}, std::vector<int> picard = {})
{
    EnsembleOptions o;
    o.particles = n;
    o.checkpoints = std::move(checkpoints);
    o.picard = std::move(picard);
    o.seed = 17;
    return o;
}

const std::vector<ScalarTestFunction> battery{phi::constant<1>(), phi::identity(), phi::square(),
                                              phi::hyperbolic_tangent()};
}  // namespace

TEST(Ensemble, SingleParticleIsItsOwnAverage)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto y = q_path(grid, 0);
    const auto ens = build_ensemble(m, grid, y, opts(1));
    const auto x = simulate_signal(m, grid, ens.kernel().noise_stream(0));
    const auto w = weight_exact(m, x, y, grid);
    const auto e = ens.estimate(phi::square(), 1.0);
    EXPECT_DOUBLE_EQ(e.rho, x[64][0] * x[64][0] * w.L(64));
    EXPECT_DOUBLE_EQ(e.pi, x[64][0] * x[64][0]);
}

TEST(Ensemble, ZeroSensorGivesPlainEmpiricalLaw)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 32, 4);
    const auto ens = build_ensemble(m, grid, q_path(grid, 0), opts(500));
    const auto one = ens.estimate(phi::constant<1>(), 1.0);
    EXPECT_EQ(one.rho, 1.0);
    EXPECT_EQ(one.pi, 1.0);
    const auto xs = ens.values(phi::identity(), 1.0);
    EXPECT_NEAR(ens.estimate(phi::identity(), 1.0).rho, stats::mean(xs), 1e-15);
}

TEST(Ensemble, NormalizationPositivityAndScaleEquivariance)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto ens = build_ensemble(m, grid, q_path(grid, 1), opts(2000, {0.25, 0.5, 1.0}, {4, 8}));
    for (double t : {0.25, 0.5, 1.0}) {
        for (int n : {0, 4, 8}) {
            const auto e1 = ens.estimate(phi::constant<1>(), t, n);
            EXPECT_EQ(e1.pi, 1.0);
            EXPECT_GT(e1.rho, 0.0);
        }
        const auto v = ens.values(phi::square(), t);
        const auto a = weighted_estimate(v, ens.weights(t), 100);
        const auto b = weighted_estimate(v, ens.weights(t, 0, std::log(3.7)), 100);
        EXPECT_NEAR(a.pi, b.pi, 1e-14 * std::abs(a.pi));
        EXPECT_NEAR(b.rho, 3.7 * a.rho, 1e-12 * b.rho);
    }
}

TEST(Ensemble, PicardAtFineResolutionEqualsExact)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto ens = build_ensemble(m, grid, q_path(grid, 2), opts(300, {0.5, 1.0}, {64}));
    for (double t : {0.5, 1.0}) {
        const auto a = ens.estimate(phi::hyperbolic_tangent(), t, 0);
        const auto b = ens.estimate(phi::hyperbolic_tangent(), t, 64);
        EXPECT_EQ(a.rho, b.rho);
        EXPECT_EQ(a.pi, b.pi);
    }
}

TEST(Ensemble, ThreadCountDoesNotChangeResults)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    const auto y = q_path(grid, 3);
    auto o = opts(3000, {0.5, 1.0}, {4});
    const auto a = build_ensemble(m, grid, y, o);
    o.parallel.threads = 4;
    const auto b = build_ensemble(m, grid, y, o);
    EXPECT_EQ(a.estimate(phi::square(), 1.0, 4).rho, b.estimate(phi::square(), 1.0, 4).rho);
    EXPECT_EQ(a.estimate(phi::square(), 0.5).se_pi, b.estimate(phi::square(), 0.5).se_pi);
    const std::vector<double> cps{0.5, 1.0};
    EXPECT_EQ(ks_residual(a, phi::identity(), cps).value, ks_residual(b, phi::identity(), cps).value);
}

TEST(Ensemble, OffGridCheckpointAndBudget)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 4);
    EXPECT_THROW((void)build_ensemble(m, grid, q_path(grid, 0), opts(10, {0.3})), std::invalid_argument);
    auto o = opts(1000);
    o.budget = 1000.0;
    EXPECT_THROW((void)build_ensemble(m, grid, q_path(grid, 0), o), BudgetError);
    const auto ens = build_ensemble(m, grid, q_path(grid, 0), opts(10));
    EXPECT_THROW((void)ens.estimate(phi::identity(), 0.5), std::invalid_argument);
}

TEST(Ensemble, VarianceHalvesWhenParticlesDouble)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 1);
    const auto y = q_path(grid, 4);
    std::vector<double> small, large;
    for (std::uint32_t r = 0; r < 200; ++r) {
        auto o = opts(1000);
        o.replicate = r;
        small.push_back(build_ensemble(m, grid, y, o).estimate(phi::square(), 1.0).rho);
        o.particles = 2000;
        o.replicate = 1000 + r;
        large.push_back(build_ensemble(m, grid, y, o).estimate(phi::square(), 1.0).rho);
    }
    const double ratio = stats::variance(small) / stats::variance(large);
    EXPECT_GT(ratio, 1.7 * 0.75);  // 200 replicates: the ratio itself has ~14% sampling error
    EXPECT_LT(ratio, 2.3 / 0.75);
}

TEST(ZakaiResidual, ZeroSensorConstantIsExactlyZero)
{
    const auto m = constant_coefficient_model(1.0, 0.2, 0.0);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto ens = build_ensemble(m, grid, q_path(grid, 5), opts(100));
    const std::vector<double> cps{0.5, 1.0};
    for (double v : zakai_residual(ens, phi::constant<1>(), cps).value) EXPECT_EQ(v, 0.0);
}

TEST(ZakaiResidual, DeterministicSignalConstantSensor)
{
    const double c = 0.9, x0 = 1.3;
    const auto m = constant_coefficient_model(0.0, 0.0, c, x0);
    const auto grid = TimeGrid::make(1.0, 256, 1);
    const auto y = q_path(grid, 6);
    const auto ens = build_ensemble(m, grid, y, opts(20));
    const std::vector<double> cps{1.0};
    EXPECT_LT(std::abs(zakai_residual(ens, phi::identity(), cps).value[0]), 1e-10);
    // Closed form rho_t(x) = x0 exp(c y_t - c^2 t / 2) up to left-point quadrature.
    EXPECT_NEAR(ens.estimate(phi::identity(), 1.0).rho, x0 * std::exp(c * y.value(256, 0) - c * c / 2), 1e-12);
}

TEST(ZakaiResidual, BoundedModelWithinBootstrapBand)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 256, 1);
    const std::vector<double> cps{0.25, 0.5, 0.75, 1.0};
    const auto ens = build_ensemble(m, grid, q_path(grid, 7), opts(20000, cps));
    for (const auto& r : zakai_residual(ens, std::span<const ScalarTestFunction>(battery), cps)) {
        EXPECT_TRUE(r.within(4.0)) << r.phi << " z=" << r.max_abs_z();
    }
}

TEST(KsResidual, ConstantIsExactlyZero)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 1);
    const auto ens = build_ensemble(m, grid, q_path(grid, 8), opts(500));
    const std::vector<double> cps{0.5, 1.0};
    for (double v : ks_residual(ens, phi::constant<1>(), cps).value) EXPECT_EQ(v, 0.0);
}

TEST(KsResidual, ZeroSensorForwardEquation)
{
    const auto m = constant_coefficient_model(1.0, -0.5, 0.0);
    const auto grid = TimeGrid::make(1.0, 128, 1);
    const std::vector<double> cps{0.5, 1.0};
    const auto ens = build_ensemble(m, grid, q_path(grid, 9), opts(20000, cps));
    for (const auto& r : ks_residual(ens, std::span<const ScalarTestFunction>(battery), cps)) {
        EXPECT_TRUE(r.within(4.0)) << r.phi << " z=" << r.max_abs_z();
    }
}

TEST(KsResidual, BoundedModelWithinBootstrapBand)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 256, 1);
    const std::vector<double> cps{0.25, 0.5, 0.75, 1.0};
    const auto ens = build_ensemble(m, grid, p_path(m, grid, 10), opts(20000, cps));
    for (const auto& r : ks_residual(ens, std::span<const ScalarTestFunction>(battery), cps)) {
        EXPECT_TRUE(r.within(4.0)) << r.phi << " z=" << r.max_abs_z();
    }
}

TEST(Innovation, ZeroSensorIsTheObservation)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 32, 1);
    const auto y = p_path(m, grid, 0);
    const auto ens = build_ensemble(m, grid, y, opts(50));
    const auto path = innovation_path(y, innovation_drift(ens), grid.dt());
    for (int k = 0; k <= 32; ++k) EXPECT_EQ(path(k, 0), y.value(k, 0));
}

TEST(Innovation, BrownianNullsUnderP)
{
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 64, 1);
    std::vector<Eigen::MatrixXd> paths;
    for (std::uint32_t r = 0; r < 1000; ++r) {
        const auto y = p_path(m, grid, r);
        auto o = opts(200);
        o.replicate = r;
        const auto ens = build_ensemble(m, grid, y, o);
        paths.push_back(innovation_path(y, innovation_drift(ens), grid.dt()));
    }
    const auto st = innovation_statistics(paths, 1.0, 16);
    EXPECT_TRUE(st.mean_ok) << st.mean << " +- " << st.mean_se;
    EXPECT_TRUE(st.variance_ok) << st.variance;
    EXPECT_NEAR(st.variance, 1.0, 0.1);
    EXPECT_TRUE(st.autocorrelation_ok) << st.autocorrelation;
}

TEST(ExchangeableAverage, TrivialCases)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 16, 1);
    const auto ens = build_ensemble(m, grid, q_path(grid, 0), opts(800, {0.5, 1.0}));
    for (const auto& row : exchangeable_average_convergence(ens, phi::constant<1>())) EXPECT_EQ(row.sup_error, 0.0);
    const auto rows = exchangeable_average_convergence(ens, phi::identity());
    EXPECT_EQ(rows.back().subset, 800u);
    EXPECT_EQ(rows.back().sup_error, 0.0);
}

TEST(ExchangeableAverage, RateIsInverseSquareRoot)
{
    // Average squared sup-errors over independent ensembles; the difference of a
    // prefix average and the full average has variance ~ (1/N' - 1/N).
    const BoundedTanhModel m;
    const auto grid = TimeGrid::make(1.0, 16, 1);
    const auto y = q_path(grid, 11);
    std::vector<double> ms(3, 0.0), eff;
    const std::size_t N = 8192;
    const int reps = 60;
    for (int r = 0; r < reps; ++r) {
        auto o = opts(N, {0.5, 1.0});
        o.replicate = static_cast<std::uint32_t>(r);
        const auto rows = exchangeable_average_convergence(build_ensemble(m, grid, y, o), phi::square());
        for (int i = 0; i < 3; ++i) ms[static_cast<std::size_t>(i)] += rows[static_cast<std::size_t>(i)].sup_error * rows[static_cast<std::size_t>(i)].sup_error / reps;
    }
    std::vector<double> rms;
    for (std::size_t div : {8u, 4u, 2u}) {
        const double sub = static_cast<double>(N / div);
        eff.push_back(1.0 / (1.0 / sub - 1.0 / static_cast<double>(N)));
    }
    for (double v : ms) rms.push_back(std::sqrt(v));
    EXPECT_NEAR(stats::loglog_slope(eff, rms).slope, -0.5, 0.15);
}
