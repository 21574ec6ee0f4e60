#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "filterlab/error_expansion.hpp"
#include "filterlab/experiments.hpp"

using namespace filterlab;

TEST(RPath, ZeroObservationGivesZero)
{
    const auto grid = TimeGrid::make(1.0, 256, 8);
    const auto r = r_path(ObservationPath::zero(grid, 2), grid);
    EXPECT_EQ(r.values.cwiseAbs().maxCoeff(), 0.0);
}

TEST(RPath, StartsAtZeroAndIsDeterministic)
{
    const auto grid = TimeGrid::make(1.0, 512, 16);
    const auto y = simulate_observation_Q(grid, RngStream(3, {Purpose::observation_q, 0, 0}), 1);
    const auto a = r_path(y, grid);
    const auto b = r_path(y, grid);
    EXPECT_EQ(a.value(0), 0.0);
    EXPECT_TRUE(a.values == b.values);
}

TEST(RPath, SawtoothCoefficient)
{
    const auto grid = TimeGrid::make(1.0, 64, 4);
    EXPECT_DOUBLE_EQ(r_coefficient(grid, 0), -std::sqrt(3.0));
    EXPECT_DOUBLE_EQ(r_coefficient(grid, 8), 0.0);
    EXPECT_DOUBLE_EQ(r_coefficient(grid, 16), -std::sqrt(3.0));
}

class QuadraticVariation : public ::testing::TestWithParam<std::pair<int, int>> {};

TEST_P(QuadraticVariation, CoarsePointIdentity)
{
    const auto [M, n] = GetParam();
    const auto grid = TimeGrid::make(1.0, M, n);
    const int S = grid.steps_per_coarse();
    for (int k = 1; k <= n; ++k) {
        const double sum = rn_quadratic_variation_sum(grid, k * S);
        EXPECT_NEAR(sum, rn_quadratic_variation_closed_form(grid, k), 1e-12);
        EXPECT_NEAR(sum, static_cast<double>(k) / n, 2.0 * k * grid.dt() / S + 1e-12);
        EXPECT_NEAR(rn_cross_variation_sum(grid, k * S), -std::sqrt(3.0) * k * grid.dt(), 1e-12);
    }
}

INSTANTIATE_TEST_SUITE_P(Grids, QuadraticVariation,
                         ::testing::Values(std::pair{64, 4}, std::pair{1024, 16}, std::pair{4096, 64}, std::pair{64, 64}));

TEST(RPath, QuadraticVariationTendsToHorizon)
{
    double prev = 1.0;
    for (int M : {128, 512, 2048}) {
        const auto grid = TimeGrid::make(1.0, M, 8);
        const double err = std::abs(rn_quadratic_variation_sum(grid, M) - 1.0);
        EXPECT_LT(err, prev);
        prev = err;
    }
}

TEST(RLimit, VarianceAndIndependence)
{
    const auto grid = TimeGrid::make(1.0, 4096, 64);
    const auto reps = reference_observations(grid, 2, 10000, 21);
    const std::vector<int> ns{64};
    const auto s = r_limit_test(reps, grid, ns).front();
    EXPECT_TRUE(s.variance_within(1.0, 0.05)) << s.variance;
    EXPECT_TRUE(s.uncorrelated(4.0)) << s.corr_y_r << " " << s.corr_r_r;
}

namespace {

std::vector<TestFunction<1>> battery() { return {phi::identity(), phi::square(), phi::hyperbolic_tangent()}; }

}  // namespace

TEST(ErrorSeries, ConstantSensorGivesZero)
{
    const auto model = constant_coefficient_model(1.0, -0.5, 0.7);
    const auto grid = TimeGrid::make(1.0, 256, 4);
    const auto y = simulate_observation_Q(grid, RngStream(4, {Purpose::observation_q, 0, 0}), 1);
    EnsembleOptions o;
    o.particles = 500;
    o.picard = {4, 8};
    o.checkpoints = {0.5, 1.0};
    const auto ens = build_ensemble(model, grid, y, o);
    const auto b = battery();
    const std::vector<int> ns{4, 8};
    for (const auto& s : u_n_series(ens, std::span<const TestFunction<1>>(b), ns, o.checkpoints))
        for (double v : s.value) EXPECT_EQ(v, 0.0);
}

TEST(ErrorSeries, AverageOfContributions)
{
    BoundedTanhModel model;
    const auto grid = TimeGrid::make(1.0, 256, 4);
    const auto y = simulate_observation_Q(grid, RngStream(5, {Purpose::observation_q, 0, 0}), 1);
    EnsembleOptions o;
    o.particles = 400;
    o.picard = {4};
    o.checkpoints = {1.0};
    const auto ens = build_ensemble(model, grid, y, o);
    const std::vector<TestFunction<1>> b{phi::identity()};
    const std::vector<int> ns{4};
    const auto s = u_n_series(ens, std::span<const TestFunction<1>>(b), ns, o.checkpoints, true).front();
    EXPECT_NEAR(s.value[0], stats::mean(s.contributions[0]), 1e-12);
    const auto exact = ens.estimate(b[0], 1.0, 0).rho, picard = ens.estimate(b[0], 1.0, 4).rho;
    EXPECT_NEAR(s.value[0], 4.0 * (exact - picard), 1e-10);
    EXPECT_GT(s.se[0], 0.0);
}

TEST(Convergence, FirstOrderAndBounded)
{
    BoundedTanhModel model;
    const auto grid = TimeGrid::make(1.0, 1024, 1);
    ConvergenceOptions o;
    o.n_set = {4, 8, 16, 32};
    o.particles = 4000;
    o.replicates = 16;
    o.checkpoints = {0.25, 0.5, 0.75};
    o.seed = 6;
    const std::vector<TestFunction<1>> b{phi::identity()};
    const auto rep = run_convergence(model, grid, std::span<const TestFunction<1>>(b), o);
    const auto& pc = rep.phis.front();
    EXPECT_NEAR(pc.fit.slope, -1.0, 0.2);
    const auto [lo, hi] = pc.sup_ratio_range();
    EXPECT_GT(lo, 0.5);
    EXPECT_LT(hi, 2.0);
    std::ostringstream os;
    write_convergence_csv(os, rep);
    EXPECT_EQ(os.str().substr(0, 42), "phi_id,n,checkpoint,abs_error,se,slope_fit");
}

TEST(Richardson, AffineCombination)
{
    const std::vector<double> a{1.0, 2.0}, b{1.5, 2.5};
    const auto r = richardson(a, b);
    EXPECT_DOUBLE_EQ(r[0], 2.0);
    EXPECT_DOUBLE_EQ(r[1], 3.0);
    EXPECT_THROW(richardson(a, std::vector<double>{1.0}), DimensionError);
}

TEST(Richardson, ConstantSensorReturnsExact)
{
    const auto model = constant_coefficient_model(1.0, 0.0, 0.0);
    const auto grid = TimeGrid::make(1.0, 128, 4);
    const auto y = simulate_observation_Q(grid, RngStream(7, {Purpose::observation_q, 0, 0}), 1);
    EnsembleOptions o;
    o.particles = 300;
    o.picard = {4, 8};
    const auto ens = build_ensemble(model, grid, y, o);
    const auto one = phi::constant<1>();
    const std::vector<FilterEstimate> a{ens.estimate(one, 1.0, 4)}, b{ens.estimate(one, 1.0, 8)};
    const auto r = richardson(a, b);
    EXPECT_DOUBLE_EQ(r[0].rho, 1.0);
    EXPECT_DOUBLE_EQ(r[0].rho, ens.estimate(one, 1.0, 0).rho);
}

TEST(NodalBasis, ConservesMassAndRejectsLargeSteps)
{
    BoundedTanhModel model;
    NodalBasis basis(model, -3.0, 3.0, 0.1);
    EXPECT_EQ(basis.size(), 61);
    EXPECT_LT(basis.generator().colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
    const auto grid = TimeGrid::make(1.0, 16, 1);
    GalerkinSources src;
    src.resize(16, basis.size());
    const std::vector<double> at{1.0};
    EXPECT_THROW(galerkin_limit_u(basis, src, ObservationPath::zero(grid, 1), grid, at, LimitNoise::independent,
                                  RngStream(1, {Purpose::limit_noise, 0, 0})),
                 ConfigError);
}

TEST(NodalBasis, DepositIsLinearInterpolation)
{
    BoundedTanhModel model;
    NodalBasis basis(model, -1.0, 1.0, 0.5);
    std::vector<double> v(5, 0.0), d(5, 0.0);
    basis.deposit(0.1, 1.0, 1.0, v.data(), d.data());
    EXPECT_NEAR(v[2], 0.8, 1e-12);
    EXPECT_NEAR(v[3], 0.2, 1e-12);
    EXPECT_NEAR(d[2], -2.0, 1e-12);
    EXPECT_NEAR(d[3], 2.0, 1e-12);
    Eigen::VectorXd u = Eigen::VectorXd::Map(v.data(), 5);
    EXPECT_NEAR(basis.evaluate(u, phi::identity()), 0.1, 1e-12);
}

TEST(PolynomialBasis, LinearGaussianHierarchy)
{
    LinearGaussianModel lg;
    lg.F = -0.5;
    lg.G = 0.8;
    lg.H = 1.2;
    PolynomialBasis basis(*lg.polynomial_form(), 6);
    EXPECT_NEAR(basis.generator()(2, 2), 2.0 * -0.5, 1e-15);
    EXPECT_NEAR(basis.generator()(2, 0), 0.64, 1e-15);
    EXPECT_NEAR(basis.sensor()(3, 4), 1.2, 1e-15);
    EXPECT_GT(basis.dropped_fraction(), 0.0);
    EXPECT_LT(basis.dropped_fraction(), 0.2);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(7);
    u[1] = 2.0;
    u[2] = 3.0;
    EXPECT_NEAR(basis.evaluate(u, phi::square()), 3.0, 1e-9);
    EXPECT_THROW(PolynomialBasis(*lg.polynomial_form(), 6, 0.01), ConfigError);
    EXPECT_THROW(make_basis(BoundedTanhModel{}, GalerkinOptions{"polynomial"}), ConfigError);
}

TEST(Galerkin, ConstantSensorStaysZero)
{
    const auto model = constant_coefficient_model(1.0, -1.0, 0.4);
    const auto grid = TimeGrid::make(1.0, 512, 8);
    const auto y = simulate_observation_Q(grid, RngStream(8, {Purpose::observation_q, 0, 0}), 1);
    EnsembleOptions o;
    o.particles = 200;
    o.picard = {8};
    const auto ens = build_ensemble(model, grid, y, o);
    NodalBasis basis(model, -4.0, 4.0, 0.1);
    const auto src = galerkin_sources(ens, basis, 8);
    const std::vector<double> at{0.5, 1.0};
    for (auto mode : {LimitNoise::independent, LimitNoise::pre_limit}) {
        const auto run = galerkin_limit_u(basis, src[mode == LimitNoise::independent ? 0 : 1], y, grid, at, mode,
                                          RngStream(8, {Purpose::limit_noise, 0, 0}));
        for (const auto& u : run.u) EXPECT_EQ(u.cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(Galerkin, PureDriftSignalHasNoTraceSource)
{
    FunctionalModel<1, 1, 1> m;
    m.label = "drift_only";
    m.drift_fn = [](const Vec<1>& x) { return Vec<1>{-x[0]}; };
    m.diffusion_fn = [](const Vec<1>&) { return Mat<1, 1>{0.0}; };
    m.sensor_fn = [](const Vec<1>& x) { return Vec<1>{std::tanh(x[0])}; };
    m.sensor_jacobian_fn = [](const Vec<1>& x) { return Mat<1, 1>{1.0 - std::tanh(x[0]) * std::tanh(x[0])}; };
    m.sensor_hessian_fn = [](const Vec<1>& x, int) {
        const double t = std::tanh(x[0]);
        return Mat<1, 1>{-2.0 * t * (1.0 - t * t)};
    };
    m.initial_fn = [](RngStream& r) { return Vec<1>{r.gaussian()}; };
    m.growth = {1.0, 1.0};
    m.h_max = 1.0;
    const auto grid = TimeGrid::make(1.0, 256, 4);
    const auto y = simulate_observation_Q(grid, RngStream(9, {Purpose::observation_q, 0, 0}), 1);
    EnsembleOptions o;
    o.particles = 200;
    o.picard = {4};
    const auto ens = build_ensemble(m, grid, y, o);
    NodalBasis basis(m, -4.0, 4.0, 0.1);
    const auto src = galerkin_sources(ens, basis, 4);
    for (double v : src[0].otilde) EXPECT_EQ(v, 0.0);
    double ah = 0.0;
    for (double v : src[0].ah) ah += std::abs(v);
    EXPECT_GT(ah, 0.0);
}

TEST(Galerkin, PreLimitTracksParticleError)
{
    BoundedTanhModel model;
    const auto grid = TimeGrid::make(1.0, 1024, 16);
    NodalBasis basis(model, -6.0, 6.0, 0.05);
    const auto x = phi::identity();
    const std::vector<double> at{1.0};
    std::vector<double> u, g;
    for (std::uint32_t r = 0; r < 10; ++r) {
        const auto y = simulate_observation_Q(grid, RngStream(10, {Purpose::observation_q, 0, r}), 1);
        EnsembleOptions o;
        o.particles = 2000;
        o.picard = {16};
        o.seed = 11;
        o.replicate = r;
        const auto ens = build_ensemble(model, grid, y, o);
        u.push_back(stats::mean(ens.error_contributions(x, 1.0, 16)));
        const auto src = galerkin_sources(ens, basis, 16);
        g.push_back(galerkin_limit_u(basis, src[1], y, grid, at, LimitNoise::pre_limit,
                                     RngStream(10, {Purpose::limit_noise, 0, r}))
                        .value(0, basis, x));
    }
    EXPECT_GT(stats::correlation(u, g), 0.8);
    const auto fit = stats::fit_line(u, g);
    EXPECT_NEAR(fit.slope, 1.0, 0.3);
}

TEST(Galerkin, SourcesIndependentOfThreadCount)
{
    BoundedTanhModel model;
    const auto grid = TimeGrid::make(1.0, 128, 4);
    const auto y = simulate_observation_Q(grid, RngStream(12, {Purpose::observation_q, 0, 0}), 1);
    NodalBasis basis(model, -4.0, 4.0, 0.2);
    EnsembleOptions o;
    o.particles = 300;
    o.picard = {4};
    const auto a = galerkin_sources(build_ensemble(model, grid, y, o), basis, 4);
    o.parallel.threads = 3;
    const auto b = galerkin_sources(build_ensemble(model, grid, y, o), basis, 4);
    EXPECT_EQ(a[0].ah, b[0].ah);
    EXPECT_EQ(a[1].otilde, b[1].otilde);
}

TEST(Galerkin, CsvHeader)
{
    BoundedTanhModel model;
    NodalBasis basis(model, -1.0, 1.0, 0.5);
    GalerkinRun run;
    run.times = {1.0};
    run.u = {Eigen::VectorXd::Zero(5)};
    const std::vector<TestFunction<1>> b{phi::identity()};
    std::ostringstream os;
    write_galerkin_csv(os, run, basis, b);
    EXPECT_EQ(os.str(), "t,phi_id,U_value\n1,x,0\n");
}
