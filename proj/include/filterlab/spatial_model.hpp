#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/rng.hpp"

namespace filterlab {

/**
 * Scalar signal observed through space-time white noise on a finite cell
 * partition {u_1..u_J} of S0 with masses mu0(u_j). Channel j of Y has
 * quadratic variation mu0(u_j) t under the reference measure.
 */
struct SpatialModel {
    std::string label = "spatial";
    std::vector<double> cells;  ///< representative point u_j of each cell
    std::vector<double> mass;   ///< mu0(u_j) > 0
    std::function<double(double)> drift_fn;
    std::function<double(double)> diffusion_fn;
    std::function<double(double, int)> alpha_fn;   ///< alpha(x, u_j)
    std::function<double(double, int)> sensor_fn;  ///< h(x, u_j)
    std::function<double(RngStream&)> initial_fn;
    double bound = std::numeric_limits<double>::infinity();  ///< declared bound on |b|, |sigma|, |alpha|, |h|

    int channels() const noexcept { return static_cast<int>(mass.size()); }
    double total_mass() const
    {
        double s = 0.0;
        for (double m : mass) s += m;
        return s;
    }

    double drift(double x) const { return drift_fn(x); }
    double diffusion(double x) const { return diffusion_fn(x); }
    double alpha(double x, int j) const { return alpha_fn(x, j); }
    double sensor(double x, int j) const { return sensor_fn(x, j); }
    double sample_initial(RngStream& rng) const { return initial_fn(rng); }

    /// a(x) = sigma^2 + sum_j alpha(x,u_j)^2 mu0(u_j).
    double effective_diffusion(double x) const
    {
        const double s = diffusion(x);
        double a = s * s;
        for (int j = 0; j < channels(); ++j) {
            const double al = alpha(x, j);
            a += al * al * mass[static_cast<std::size_t>(j)];
        }
        return a;
    }

    /// Drift of the signal written against Y: b - sum_j alpha h mu0.
    double reference_drift(double x) const
    {
        double c = drift(x);
        for (int j = 0; j < channels(); ++j) c -= alpha(x, j) * sensor(x, j) * mass[static_cast<std::size_t>(j)];
        return c;
    }

    /// A phi = a/2 phi'' + b phi'.
    double apply_generator(const ScalarTestFunction& f, double x) const
    {
        const Vec<1> v{x};
        return 0.5 * effective_diffusion(x) * f.hessian(v)(0, 0) + drift(x) * f.gradient(v)[0];
    }

    void validate() const
    {
        if (mass.empty()) throw ConfigError("spatial.cells: at least one cell is required");
        if (cells.size() != mass.size()) throw ConfigError("spatial.mass: one mass per cell is required");
        for (double m : mass) {
            if (!(m > 0.0) || !std::isfinite(m)) throw ConfigError("spatial.mass: masses must be positive");
        }
    }
};

/**
 * Built-in spatial model on S0 = [0, 1] split into J equal cells of mass
 * total_mass/J: b(x) = -2 tanh x, sigma = sigma0,
 * alpha(x,u) = kappa cos(pi u)(1 + sin(x)/2), h(x,u) = tanh(x - (2u - 1)).
 */
inline SpatialModel bounded_spatial_model(int cells, double kappa = 0.5, double sigma0 = 0.8,
                                          double total_mass = 1.0)
{
    if (cells <= 0) throw ConfigError("spatial.cells: at least one cell is required");
    SpatialModel m;
    m.label = "bounded_spatial";
    for (int j = 0; j < cells; ++j) {
        m.cells.push_back((j + 0.5) / cells);
        m.mass.push_back(total_mass / cells);
    }
    const std::vector<double> u = m.cells;
    m.drift_fn = [](double x) { return -2.0 * std::tanh(x); };
    m.diffusion_fn = [sigma0](double) { return sigma0; };
    m.alpha_fn = [u, kappa](double x, int j) {
        return kappa * std::cos(std::numbers::pi * u[static_cast<std::size_t>(j)]) * (1.0 + 0.5 * std::sin(x));
    };
    m.sensor_fn = [u](double x, int j) { return std::tanh(x - (2.0 * u[static_cast<std::size_t>(j)] - 1.0)); };
    m.initial_fn = [](RngStream& rng) { return rng.gaussian(); };
    m.bound = std::max({2.0, std::abs(sigma0), 1.5 * std::abs(kappa), 1.0});
    return m;
}

/// One-cell spatial model equivalent to a scalar model with alpha = 0.
template <DiffusionModel M>
    requires(M::dx == 1 && M::db == 1 && M::dy == 1)
SpatialModel spatial_from_scalar(const M& model)
{
    SpatialModel s;
    s.label = model.name() + "_as_spatial";
    s.cells = {0.5};
    s.mass = {1.0};
    s.drift_fn = [model](double x) { return model.drift(Vec<1>{x})[0]; };
    s.diffusion_fn = [model](double x) { return model.diffusion(Vec<1>{x})(0, 0); };
    s.alpha_fn = [](double, int) { return 0.0; };
    s.sensor_fn = [model](double x, int) { return model.sensor(Vec<1>{x})[0]; };
    s.initial_fn = [model](RngStream& rng) { return model.sample_initial(rng)[0]; };
    s.bound = model.sensor_bound();
    return s;
}

}  // namespace filterlab
