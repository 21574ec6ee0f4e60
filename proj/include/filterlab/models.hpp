#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/errors.hpp"
#include "filterlab/polynomial.hpp"
#include "filterlab/rng.hpp"

namespace filterlab {

template <int N>
using Vec = Eigen::Matrix<double, N, 1>;
template <int R, int C>
using Mat = Eigen::Matrix<double, R, C>;

/// A test function phi with analytic gradient and Hessian.
template <int DX>
struct TestFunction {
    std::string name;
    std::function<double(const Vec<DX>&)> value;
    std::function<Vec<DX>(const Vec<DX>&)> gradient;
    std::function<Mat<DX, DX>(const Vec<DX>&)> hessian;
    int growth_degree = 0;

    double operator()(const Vec<DX>& x) const { return value(x); }
};

using ScalarTestFunction = TestFunction<1>;

namespace phi {

/// Scalar test function from f, f', f''.
inline ScalarTestFunction scalar(std::string name, std::function<double(double)> f,
                                 std::function<double(double)> df,
                                 std::function<double(double)> d2f, int growth)
{
    return {std::move(name), [f](const Vec<1>& x) { return f(x[0]); },
            [df](const Vec<1>& x) { return Vec<1>{df(x[0])}; },
            [d2f](const Vec<1>& x) { return Mat<1, 1>{d2f(x[0])}; }, growth};
}

template <int DX = 1>
TestFunction<DX> constant(double c = 1.0)
{
    return {c == 1.0 ? "one" : "const", [c](const Vec<DX>&) { return c; },
            [](const Vec<DX>&) { return Vec<DX>::Zero().eval(); },
            [](const Vec<DX>&) { return Mat<DX, DX>::Zero().eval(); }, 0};
}

inline ScalarTestFunction identity()
{
    return scalar("x", [](double x) { return x; }, [](double) { return 1.0; },
                  [](double) { return 0.0; }, 1);
}

inline ScalarTestFunction square()
{
    return scalar("x2", [](double x) { return x * x; }, [](double x) { return 2.0 * x; },
                  [](double) { return 2.0; }, 2);
}

inline ScalarTestFunction hyperbolic_tangent()
{
    return scalar(
        "tanh", [](double x) { return std::tanh(x); },
        [](double x) {
            const double t = std::tanh(x);
            return 1.0 - t * t;
        },
        [](double x) {
            const double t = std::tanh(x);
            return -2.0 * t * (1.0 - t * t);
        },
        0);
}

inline ScalarTestFunction polynomial(std::string name, const Polynomial& p)
{
    const Polynomial d1 = p.derivative();
    const Polynomial d2 = d1.derivative();
    return scalar(std::move(name), p, d1, d2, std::max(0, p.degree()));
}

/// x_i (coordinate projection).
template <int DX>
TestFunction<DX> coordinate(int i)
{
    return {"x" + std::to_string(i + 1), [i](const Vec<DX>& x) { return x[i]; },
            [i](const Vec<DX>&) {
                Vec<DX> g = Vec<DX>::Zero();
                g[i] = 1.0;
                return g;
            },
            [](const Vec<DX>&) { return Mat<DX, DX>::Zero().eval(); }, 1};
}

/// x_i * x_j for i != j.
template <int DX>
TestFunction<DX> product(int i, int j)
{
    return {"x" + std::to_string(i + 1) + "x" + std::to_string(j + 1),
            [i, j](const Vec<DX>& x) { return x[i] * x[j]; },
            [i, j](const Vec<DX>& x) {
                Vec<DX> g = Vec<DX>::Zero();
                g[i] += x[j];
                g[j] += x[i];
                return g;
            },
            [i, j](const Vec<DX>&) {
                Mat<DX, DX> h = Mat<DX, DX>::Zero();
                h(i, j) += 1.0;
                h(j, i) += 1.0;
                return h;
            },
            2};
}

/// a*f + b*g.
template <int DX>
TestFunction<DX> combine(double a, const TestFunction<DX>& f, double b, const TestFunction<DX>& g)
{
    return {f.name + "+" + g.name,
            [=](const Vec<DX>& x) { return a * f.value(x) + b * g.value(x); },
            [=](const Vec<DX>& x) { return (a * f.gradient(x) + b * g.gradient(x)).eval(); },
            [=](const Vec<DX>& x) { return (a * f.hessian(x) + b * g.hessian(x)).eval(); },
            std::max(f.growth_degree, g.growth_degree)};
}

/// Built-in scalar battery selectable by name: one, x, x2, tanh.
inline ScalarTestFunction by_name(const std::string& name)
{
    if (name == "one") return constant<1>();
    if (name == "x") return identity();
    if (name == "x2") return square();
    if (name == "tanh") return hyperbolic_tangent();
    throw ConfigError("phi: unknown test function '" + name + "'");
}

}  // namespace phi

/// Drift, diffusion and sensor coefficients written as polynomials (scalar models only).
struct ScalarPolynomialForm {
    Polynomial drift;
    Polynomial diffusion_squared;
    Polynomial sensor;
};

/**
 * Signal/observation model dX = b dt + sigma dB, dY = h(X) dt + dW.
 * Models expose the sensor's first and second derivatives analytically.
 */
template <class M>
concept DiffusionModel = requires(const M& m, const Vec<M::dx>& x, RngStream& rng, int i) {
    requires M::dx >= 1 && M::db >= 1 && M::dy >= 1;
    { m.name() } -> std::convertible_to<std::string>;
    { m.drift(x) } -> std::convertible_to<Vec<M::dx>>;
    { m.diffusion(x) } -> std::convertible_to<Mat<M::dx, M::db>>;
    { m.sensor(x) } -> std::convertible_to<Vec<M::dy>>;
    { m.sensor_jacobian(x) } -> std::convertible_to<Mat<M::dy, M::dx>>;
    { m.sensor_hessian(x, i) } -> std::convertible_to<Mat<M::dx, M::dx>>;
    { m.sample_initial(rng) } -> std::convertible_to<Vec<M::dx>>;
    { m.growth_constants() } -> std::convertible_to<std::pair<double, double>>;
    { m.sensor_bound() } -> std::convertible_to<double>;
};

template <class M>
concept HasPolynomialForm = requires(const M& m) {
    { m.polynomial_form() } -> std::convertible_to<std::optional<ScalarPolynomialForm>>;
};

/**
 * Bounded-sensor nonlinear model: b(x) = -x, sigma(x) = 1 + eps cos x,
 * h(x) = scale * tanh(x), X(0) ~ N(m0, s0^2). sigma and h are smooth with
 * bounded derivatives of every order.
 */
struct BoundedTanhModel {
    static constexpr int dx = 1, db = 1, dy = 1;

    double epsilon = 0.5;
    double sensor_scale = 1.0;
    double initial_mean = 0.0;
    double initial_sd = 1.0;

    std::string name() const { return "bounded_tanh"; }
    Vec<1> drift(const Vec<1>& x) const { return Vec<1>{-x[0]}; }
    Mat<1, 1> diffusion(const Vec<1>& x) const { return Mat<1, 1>{1.0 + epsilon * std::cos(x[0])}; }
    Vec<1> sensor(const Vec<1>& x) const { return Vec<1>{sensor_scale * std::tanh(x[0])}; }
    Mat<1, 1> sensor_jacobian(const Vec<1>& x) const
    {
        const double t = std::tanh(x[0]);
        return Mat<1, 1>{sensor_scale * (1.0 - t * t)};
    }
    Mat<1, 1> sensor_hessian(const Vec<1>& x, int) const
    {
        const double t = std::tanh(x[0]);
        return Mat<1, 1>{-2.0 * sensor_scale * t * (1.0 - t * t)};
    }
    Vec<1> sample_initial(RngStream& rng) const
    {
        return Vec<1>{initial_mean + initial_sd * rng.gaussian()};
    }
    std::pair<double, double> growth_constants() const { return {1.0 + std::abs(epsilon), 1.0}; }
    double sensor_bound() const { return std::abs(sensor_scale); }
};

/**
 * Linear-Gaussian model dX = F X dt + G dB, dY = H X dt + dW. With a finite
 * `clip` the sensor becomes H * clamp(x, -clip, clip), which is bounded; the
 * clipped variant is used where bounded h is required and is compared to the
 * Kalman-Bucy filter only as an oracle check.
 */
struct LinearGaussianModel {
    static constexpr int dx = 1, db = 1, dy = 1;

    double F = -1.0;
    double G = 1.0;
    double H = 1.0;
    double initial_mean = 0.0;
    double initial_variance = 1.0;
    double clip = std::numeric_limits<double>::infinity();

    std::string name() const { return std::isfinite(clip) ? "linear_gaussian_clipped" : "linear_gaussian"; }
    Vec<1> drift(const Vec<1>& x) const { return Vec<1>{F * x[0]}; }
    Mat<1, 1> diffusion(const Vec<1>&) const { return Mat<1, 1>{G}; }
    Vec<1> sensor(const Vec<1>& x) const { return Vec<1>{H * std::clamp(x[0], -clip, clip)}; }
    Mat<1, 1> sensor_jacobian(const Vec<1>& x) const
    {
        return Mat<1, 1>{std::abs(x[0]) < clip ? H : 0.0};
    }
    Mat<1, 1> sensor_hessian(const Vec<1>&, int) const { return Mat<1, 1>{0.0}; }
    Vec<1> sample_initial(RngStream& rng) const
    {
        return Vec<1>{initial_mean + std::sqrt(initial_variance) * rng.gaussian()};
    }
    std::pair<double, double> growth_constants() const { return {std::abs(G), std::abs(F)}; }
    double sensor_bound() const
    {
        return std::isfinite(clip) ? std::abs(H) * clip : std::numeric_limits<double>::infinity();
    }
    std::optional<ScalarPolynomialForm> polynomial_form() const
    {
        if (std::isfinite(clip)) return std::nullopt;
        return ScalarPolynomialForm{Polynomial({0.0, F}), Polynomial({G * G}), Polynomial({0.0, H})};
    }
};

/**
 * Scalar model with piecewise-polynomial coefficient tables (user supplied).
 * Gaussian initial law.
 */
struct TabulatedModel {
    static constexpr int dx = 1, db = 1, dy = 1;

    PiecewisePolynomial drift_table;
    PiecewisePolynomial diffusion_table;
    PiecewisePolynomial sensor_table;
    double initial_mean = 0.0;
    double initial_sd = 1.0;
    double declared_sensor_bound = std::numeric_limits<double>::infinity();
    std::pair<double, double> declared_growth{1.0, 1.0};

    std::string name() const { return "tabulated"; }
    Vec<1> drift(const Vec<1>& x) const { return Vec<1>{drift_table(x[0])}; }
    Mat<1, 1> diffusion(const Vec<1>& x) const { return Mat<1, 1>{diffusion_table(x[0])}; }
    Vec<1> sensor(const Vec<1>& x) const { return Vec<1>{sensor_table(x[0])}; }
    Mat<1, 1> sensor_jacobian(const Vec<1>& x) const { return Mat<1, 1>{sensor_table(x[0], 1)}; }
    Mat<1, 1> sensor_hessian(const Vec<1>& x, int) const { return Mat<1, 1>{sensor_table(x[0], 2)}; }
    Vec<1> sample_initial(RngStream& rng) const
    {
        return Vec<1>{initial_mean + initial_sd * rng.gaussian()};
    }
    std::pair<double, double> growth_constants() const { return declared_growth; }
    double sensor_bound() const { return declared_sensor_bound; }
    std::optional<ScalarPolynomialForm> polynomial_form() const
    {
        if (drift_table.pieces() != 1 || diffusion_table.pieces() != 1 || sensor_table.pieces() != 1) {
            return std::nullopt;
        }
        const Polynomial& s = diffusion_table.piece(0);
        return ScalarPolynomialForm{drift_table.piece(0), s * s, sensor_table.piece(0)};
    }
};

/// Model assembled from callables; used for ad hoc and multi-dimensional cases.
template <int DX, int DB, int DY>
struct FunctionalModel {
    static constexpr int dx = DX, db = DB, dy = DY;

    std::string label = "functional";
    std::function<Vec<DX>(const Vec<DX>&)> drift_fn;
    std::function<Mat<DX, DB>(const Vec<DX>&)> diffusion_fn;
    std::function<Vec<DY>(const Vec<DX>&)> sensor_fn;
    std::function<Mat<DY, DX>(const Vec<DX>&)> sensor_jacobian_fn;
    std::function<Mat<DX, DX>(const Vec<DX>&, int)> sensor_hessian_fn;
    std::function<Vec<DX>(RngStream&)> initial_fn;
    std::pair<double, double> growth{1.0, 1.0};
    double h_max = std::numeric_limits<double>::infinity();

    std::string name() const { return label; }
    Vec<DX> drift(const Vec<DX>& x) const { return drift_fn(x); }
    Mat<DX, DB> diffusion(const Vec<DX>& x) const { return diffusion_fn(x); }
    Vec<DY> sensor(const Vec<DX>& x) const { return sensor_fn(x); }
    Mat<DY, DX> sensor_jacobian(const Vec<DX>& x) const { return sensor_jacobian_fn(x); }
    Mat<DX, DX> sensor_hessian(const Vec<DX>& x, int i) const { return sensor_hessian_fn(x, i); }
    Vec<DX> sample_initial(RngStream& rng) const { return initial_fn(rng); }
    std::pair<double, double> growth_constants() const { return growth; }
    double sensor_bound() const { return h_max; }
};

/// Scalar model with constant coefficients sigma, b, h and deterministic X(0).
inline FunctionalModel<1, 1, 1> constant_coefficient_model(double sigma, double b, double h,
                                                           double x0 = 0.0)
{
    FunctionalModel<1, 1, 1> m;
    m.label = "constant";
    m.drift_fn = [b](const Vec<1>&) { return Vec<1>{b}; };
    m.diffusion_fn = [sigma](const Vec<1>&) { return Mat<1, 1>{sigma}; };
    m.sensor_fn = [h](const Vec<1>&) { return Vec<1>{h}; };
    m.sensor_jacobian_fn = [](const Vec<1>&) { return Mat<1, 1>{0.0}; };
    m.sensor_hessian_fn = [](const Vec<1>&, int) { return Mat<1, 1>{0.0}; };
    m.initial_fn = [x0](RngStream&) { return Vec<1>{x0}; };
    m.growth = {std::abs(sigma) + std::abs(b), 0.0};
    m.h_max = std::abs(h);
    return m;
}

// ---------------------------------------------------------------------------
// Generator and correction operators

/// A phi(x) = 1/2 sum a_ij d_i d_j phi + b . grad phi, with a = sigma sigma^T.
template <DiffusionModel M>
double apply_generator(const M& model, const TestFunction<M::dx>& f, const Vec<M::dx>& x)
{
    const Mat<M::dx, M::db> s = model.diffusion(x);
    const Mat<M::dx, M::dx> a = s * s.transpose();
    return 0.5 * (a.cwiseProduct(f.hessian(x))).sum() + model.drift(x).dot(f.gradient(x));
}

/// A h_i(x), the generator applied to the i-th sensor component.
template <DiffusionModel M>
double sensor_generator(const M& model, int i, const Vec<M::dx>& x)
{
    if (i < 0 || i >= M::dy) throw std::out_of_range("sensor index out of range");
    const Mat<M::dx, M::db> s = model.diffusion(x);
    const Mat<M::dx, M::dx> a = s * s.transpose();
    const Vec<M::dx> grad = model.sensor_jacobian(x).row(i).transpose();
    return 0.5 * (a.cwiseProduct(model.sensor_hessian(x, i))).sum() + model.drift(x).dot(grad);
}

/**
 * tr(O~) where O = sigma^T grad(phi) grad(h_i)^T sigma and O~ = (O + O^T)/2.
 */
template <DiffusionModel M>
double apply_o_tilde(const M& model, const TestFunction<M::dx>& f, int i, const Vec<M::dx>& x)
{
    if (i < 0 || i >= M::dy) throw std::out_of_range("sensor index out of range");
    const Mat<M::dx, M::db> s = model.diffusion(x);
    const Vec<M::dx> grad_h = model.sensor_jacobian(x).row(i).transpose();
    const Mat<M::db, M::db> o = s.transpose() * f.gradient(x) * grad_h.transpose() * s;
    return (0.5 * (o + o.transpose())).trace();
}

// ---------------------------------------------------------------------------
// Invariant probes

struct ProbeReport {
    double max_relative_error = 0.0;
    bool passed = true;
};

/// Compare a test function's gradient and Hessian with central differences.
template <int DX>
ProbeReport check_test_function_derivatives(const TestFunction<DX>& f, RngStream rng, int probes = 100,
                                            double step = 1e-5, double tolerance = 1e-6)
{
    ProbeReport report;
    auto rel = [](double approx, double exact) {
        return std::abs(approx - exact) / std::max(1.0, std::abs(exact));
    };
    for (int p = 0; p < probes; ++p) {
        Vec<DX> x;
        for (int d = 0; d < DX; ++d) x[d] = 2.0 * rng.gaussian();
        const Vec<DX> g = f.gradient(x);
        const Mat<DX, DX> h = f.hessian(x);
        for (int d = 0; d < DX; ++d) {
            Vec<DX> e = Vec<DX>::Zero();
            e[d] = step;
            const double fd = (f.value(x + e) - f.value(x - e)) / (2.0 * step);
            report.max_relative_error = std::max(report.max_relative_error, rel(fd, g[d]));
            const Vec<DX> gd = (f.gradient(x + e) - f.gradient(x - e)) / (2.0 * step);
            for (int r = 0; r < DX; ++r) {
                report.max_relative_error = std::max(report.max_relative_error, rel(gd[r], h(r, d)));
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

/// Compare a model's sensor Jacobian and Hessians with central differences.
template <DiffusionModel M>
ProbeReport check_sensor_derivatives(const M& model, RngStream rng, int probes = 100, double step = 1e-5,
                                     double tolerance = 1e-6)
{
    ProbeReport report;
    auto rel = [](double approx, double exact) {
        return std::abs(approx - exact) / std::max(1.0, std::abs(exact));
    };
    for (int p = 0; p < probes; ++p) {
        Vec<M::dx> x;
        for (int d = 0; d < M::dx; ++d) x[d] = 2.0 * rng.gaussian();
        const Mat<M::dy, M::dx> jac = model.sensor_jacobian(x);
        for (int d = 0; d < M::dx; ++d) {
            Vec<M::dx> e = Vec<M::dx>::Zero();
            e[d] = step;
            const Vec<M::dy> fd = (model.sensor(x + e) - model.sensor(x - e)) / (2.0 * step);
            const Mat<M::dy, M::dx> jd =
                (model.sensor_jacobian(x + e) - model.sensor_jacobian(x - e)) / (2.0 * step);
            for (int i = 0; i < M::dy; ++i) {
                report.max_relative_error = std::max(report.max_relative_error, rel(fd[i], jac(i, d)));
                const Mat<M::dx, M::dx> hess = model.sensor_hessian(x, i);
                for (int r = 0; r < M::dx; ++r) {
                    report.max_relative_error =
                        std::max(report.max_relative_error, rel(jd(i, r), hess(r, d)));
                }
            }
        }
    }
    report.passed = report.max_relative_error < tolerance;
    return report;
}

/// Linear growth |sigma| + |b| <= K1 + K2 |x| and |h| <= h_max at random probes.
template <DiffusionModel M>
bool check_growth_and_bounds(const M& model, RngStream rng, int probes = 1000, double scale = 5.0)
{
    const auto [k1, k2] = model.growth_constants();
    const double hmax = model.sensor_bound();
    for (int p = 0; p < probes; ++p) {
        Vec<M::dx> x;
        for (int d = 0; d < M::dx; ++d) x[d] = scale * rng.gaussian();
        const double lhs = model.diffusion(x).norm() + model.drift(x).norm();
        if (lhs > k1 + k2 * x.norm() + 1e-12) return false;
        if (model.sensor(x).norm() > hmax + 1e-12) return false;
    }
    return true;
}

}  // namespace filterlab
