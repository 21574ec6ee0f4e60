#include <gtest/gtest.h>

#include <cmath>

#include "filterlab/models.hpp"
#include "filterlab/spatial_model.hpp"

using namespace filterlab;

namespace {
RngStream probe(std::uint32_t i) { return RngStream(2024, {Purpose::probe, i, 0}); }

FunctionalModel<1, 1, 1> scalar_model(std::function<double(double)> sigma, std::function<double(double)> b,
                                      std::function<double(double)> h)
{
    FunctionalModel<1, 1, 1> m;
    m.drift_fn = [b](const Vec<1>& x) { return Vec<1>{b(x[0])}; };
    m.diffusion_fn = [sigma](const Vec<1>& x) { return Mat<1, 1>{sigma(x[0])}; };
    m.sensor_fn = [h](const Vec<1>& x) { return Vec<1>{h(x[0])}; };
    m.sensor_jacobian_fn = [](const Vec<1>&) { return Mat<1, 1>{1.0}; };
    m.sensor_hessian_fn = [](const Vec<1>&, int) { return Mat<1, 1>{0.0}; };
    m.initial_fn = [](RngStream&) { return Vec<1>{0.0}; };
    return m;
}
}  // namespace

TEST(Generator, KillsConstants)
{
    const BoundedTanhModel m;
    for (double x : {-3.0, -0.2, 0.0, 1.7}) EXPECT_EQ(apply_generator(m, phi::constant<1>(), Vec<1>{x}), 0.0);
}

TEST(Generator, BrownianSquare)
{
    const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
    EXPECT_DOUBLE_EQ(apply_generator(m, phi::square(), Vec<1>{0.7}), 1.0);
}

TEST(Generator, StateDependentCoefficients)
{
    const auto m = scalar_model([](double x) { return x; }, [](double x) { return -x; }, [](double x) { return x; });
    for (double x : {-2.0, 0.5, 3.0}) EXPECT_NEAR(apply_generator(m, phi::square(), Vec<1>{x}), -x * x, 1e-14);
}

TEST(Generator, Linear)
{
    const BoundedTanhModel m;
    const auto f = phi::square();
    const auto g = phi::hyperbolic_tangent();
    const auto combo = phi::combine(2.5, f, -1.25, g);
    RngStream rng = probe(1);
    for (int i = 0; i < 50; ++i) {
        const Vec<1> x{2.0 * rng.gaussian()};
        EXPECT_NEAR(apply_generator(m, combo, x),
                    2.5 * apply_generator(m, f, x) - 1.25 * apply_generator(m, g, x), 1e-12);
    }
}

TEST(OTilde, ConstantSensorVanishes)
{
    const auto m = constant_coefficient_model(1.3, 0.2, 0.8);
    for (double x : {-1.0, 0.0, 2.0}) EXPECT_EQ(apply_o_tilde(m, phi::square(), 0, Vec<1>{x}), 0.0);
}

TEST(OTilde, ScalarUnitCase)
{
    const auto m = scalar_model([](double) { return 1.0; }, [](double) { return 0.0; }, [](double x) { return x; });
    EXPECT_DOUBLE_EQ(apply_o_tilde(m, phi::identity(), 0, Vec<1>{0.4}), 1.0);
}

TEST(OTilde, TwoDimensionalProduct)
{
    FunctionalModel<2, 2, 1> m;
    m.diffusion_fn = [](const Vec<2>&) { return Mat<2, 2>::Identity().eval(); };
    m.drift_fn = [](const Vec<2>&) { return Vec<2>::Zero().eval(); };
    m.sensor_fn = [](const Vec<2>& x) { return Vec<1>{x[0]}; };
    m.sensor_jacobian_fn = [](const Vec<2>&) { return Mat<1, 2>{1.0, 0.0}; };
    m.sensor_hessian_fn = [](const Vec<2>&, int) { return Mat<2, 2>::Zero().eval(); };
    m.initial_fn = [](RngStream&) { return Vec<2>::Zero().eval(); };
    const auto f = phi::product<2>(0, 1);
    EXPECT_DOUBLE_EQ(apply_o_tilde(m, f, 0, Vec<2>{0.3, -1.7}), -1.7);
    EXPECT_THROW((void)apply_o_tilde(m, f, 1, Vec<2>{0.3, -1.7}), std::out_of_range);
}

TEST(TestFunctions, DerivativesMatchFiniteDifferences)
{
    for (const auto& f : {phi::constant<1>(), phi::identity(), phi::square(), phi::hyperbolic_tangent(),
                          phi::polynomial("p", Polynomial({1.0, -2.0, 0.5, 0.25}))}) {
        const auto rep = check_test_function_derivatives(f, probe(2));
        EXPECT_TRUE(rep.passed) << f.name << " max rel err " << rep.max_relative_error;
    }
    const auto rep = check_test_function_derivatives(phi::product<2>(0, 1), probe(3));
    EXPECT_TRUE(rep.passed);
}

TEST(Models, SensorDerivativesMatchFiniteDifferences)
{
    EXPECT_TRUE(check_sensor_derivatives(BoundedTanhModel{}, probe(4)).passed);
    EXPECT_TRUE(check_sensor_derivatives(LinearGaussianModel{}, probe(5)).passed);
}

TEST(Models, GrowthAndSensorBounds)
{
    EXPECT_TRUE(check_growth_and_bounds(BoundedTanhModel{}, probe(6)));
    LinearGaussianModel clipped;
    clipped.clip = 4.0;
    EXPECT_TRUE(check_growth_and_bounds(clipped, probe(7)));
    EXPECT_TRUE(std::isinf(LinearGaussianModel{}.sensor_bound()));
}

TEST(Models, BoundedTanhSensorGenerator)
{
    const BoundedTanhModel m;
    for (double x : {-1.5, 0.0, 0.8}) {
        const double t = std::tanh(x), s = 1.0 + 0.5 * std::cos(x);
        const double expect = 0.5 * s * s * (-2.0 * t * (1 - t * t)) - x * (1 - t * t);
        EXPECT_NEAR(sensor_generator(m, 0, Vec<1>{x}), expect, 1e-14);
    }
}

TEST(Models, PolynomialForm)
{
    LinearGaussianModel lg;
    lg.F = -0.5;
    lg.G = 2.0;
    ASSERT_TRUE(lg.polynomial_form().has_value());
    EXPECT_DOUBLE_EQ(lg.polynomial_form()->diffusion_squared.coefficient(0), 4.0);
    lg.clip = 3.0;
    EXPECT_FALSE(lg.polynomial_form().has_value());
}

TEST(Models, TabulatedPiecewise)
{
    TabulatedModel m;
    m.drift_table = PiecewisePolynomial(Polynomial({0.0, -1.0}));
    m.diffusion_table = PiecewisePolynomial(Polynomial({1.0}));
    m.sensor_table = PiecewisePolynomial({-10.0, 0.0, 10.0}, {Polynomial({0.0, 0.5}), Polynomial({0.0, 1.0})});
    EXPECT_DOUBLE_EQ(m.sensor(Vec<1>{-2.0})[0], -1.0);
    EXPECT_DOUBLE_EQ(m.sensor(Vec<1>{2.0})[0], 2.0);
    EXPECT_DOUBLE_EQ(m.sensor_jacobian(Vec<1>{-2.0})(0, 0), 0.5);
    EXPECT_FALSE(m.polynomial_form().has_value());
}

TEST(SpatialModel, EffectiveDiffusionAndReferenceDrift)
{
    const auto m = bounded_spatial_model(2);
    for (double x : {-1.0, 0.3}) {
        double a = 0.8 * 0.8, c = m.drift(x);
        for (int j = 0; j < 2; ++j) {
            a += m.alpha(x, j) * m.alpha(x, j) * 0.5;
            c -= m.alpha(x, j) * m.sensor(x, j) * 0.5;
        }
        EXPECT_DOUBLE_EQ(m.effective_diffusion(x), a);
        EXPECT_DOUBLE_EQ(m.reference_drift(x), c);
    }
    EXPECT_DOUBLE_EQ(m.total_mass(), 1.0);
    SpatialModel bad = m;
    bad.mass[0] = 0.0;
    EXPECT_THROW(bad.validate(), ConfigError);
}
