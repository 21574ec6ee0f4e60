#pragma once

#include <cmath>
#include <ostream>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/spatial_model.hpp"
#include "filterlab/time_grid.hpp"

namespace filterlab {

/// Log-likelihood weights on the fine grid; `picard_n == 0` marks the exact weight.
struct WeightPath {
    std::string tag = "exact";
    int picard_n = 0;
    std::vector<double> log;

    double L(int k) const { return std::exp(log[static_cast<std::size_t>(k)]); }
    int steps() const noexcept { return static_cast<int>(log.size()) - 1; }
};

/// h . dy - |h|^2 dt / 2 for one fine step k.
template <int DY>
double log_weight_increment(const Vec<DY>& h, const ObservationPath& obs, int k, double dt)
{
    double s = 0.0;
    for (int j = 0; j < DY; ++j) s += h[j] * obs.increment(k, j) - 0.5 * h[j] * h[j] * dt;
    return s;
}

/// Spatial variant: sum_j h_j dy_j - h_j^2 mu0_j dt / 2.
inline double spatial_log_weight_increment(const SpatialModel& model, double x, const ObservationPath& obs, int k,
                                           double dt)
{
    double s = 0.0;
    for (int j = 0; j < model.channels(); ++j) {
        const double h = model.sensor(x, j);
        s += h * obs.increment(k, j) - 0.5 * h * h * model.mass[static_cast<std::size_t>(j)] * dt;
    }
    return s;
}

namespace detail {
template <DiffusionModel M>
void check_paths(const SignalPath<M::dx>& signal, const ObservationPath& obs, const TimeGrid& grid)
{
    if (signal.steps() != grid.fine_steps()) throw DimensionError("signal path does not match the grid");
    check_grid(obs, grid);
    if (obs.dy() != M::dy) throw DimensionError("observation dimension differs from the model's d_Y");
}
}  // namespace detail

template <DiffusionModel M>
WeightPath weight_exact(const M& model, const SignalPath<M::dx>& signal, const ObservationPath& obs,
                        const TimeGrid& grid)
{
    detail::check_paths<M>(signal, obs, grid);
    WeightPath w;
    w.log.resize(static_cast<std::size_t>(grid.fine_steps()) + 1);
    w.log[0] = 0.0;
    for (int k = 0; k < grid.fine_steps(); ++k) {
        w.log[static_cast<std::size_t>(k) + 1] =
            w.log[static_cast<std::size_t>(k)] + log_weight_increment<M::dy>(model.sensor(signal[k]), obs, k, grid.dt());
    }
    return w;
}

/// Sensor frozen at the last coarse point tau_n(t_k); n is the grid's Picard step.
template <DiffusionModel M>
WeightPath weight_picard(const M& model, const SignalPath<M::dx>& signal, const ObservationPath& obs,
                         const TimeGrid& grid)
{
    detail::check_paths<M>(signal, obs, grid);
    WeightPath w;
    w.tag = "picard(" + std::to_string(grid.picard_n()) + ")";
    w.picard_n = grid.picard_n();
    w.log.resize(static_cast<std::size_t>(grid.fine_steps()) + 1);
    w.log[0] = 0.0;
    Vec<M::dy> frozen = model.sensor(signal[0]);
    for (int k = 0; k < grid.fine_steps(); ++k) {
        if (k % grid.steps_per_coarse() == 0) frozen = model.sensor(signal[k]);
        w.log[static_cast<std::size_t>(k) + 1] =
            w.log[static_cast<std::size_t>(k)] + log_weight_increment<M::dy>(frozen, obs, k, grid.dt());
    }
    return w;
}

template <DiffusionModel M>
WeightPath weight_picard(const M& model, const SignalPath<M::dx>& signal, const ObservationPath& obs,
                         const TimeGrid& grid, int n)
{
    if (grid.picard_n() != n) {
        throw std::invalid_argument("weight_picard: grid carries n=" + std::to_string(grid.picard_n()) +
                                    ", requested n=" + std::to_string(n));
    }
    return weight_picard(model, signal, obs, grid);
}

inline WeightPath weight_spatial(const SpatialModel& model, const SignalPath<1>& signal, const ObservationPath& obs,
                                 const TimeGrid& grid)
{
    if (obs.dy() != model.channels()) throw DimensionError("weight_spatial: channel count mismatch");
    if (signal.steps() != grid.fine_steps()) throw DimensionError("signal path does not match the grid");
    check_grid(obs, grid);
    WeightPath w;
    w.log.resize(static_cast<std::size_t>(grid.fine_steps()) + 1);
    w.log[0] = 0.0;
    for (int k = 0; k < grid.fine_steps(); ++k) {
        w.log[static_cast<std::size_t>(k) + 1] =
            w.log[static_cast<std::size_t>(k)] + spatial_log_weight_increment(model, signal[k][0], obs, k, grid.dt());
    }
    return w;
}

inline void write_csv(std::ostream& os, const WeightPath& exact, const WeightPath& picard, const TimeGrid& grid)
{
    if (exact.log.size() != picard.log.size()) throw DimensionError("weight paths differ in length");
    os << "time,log_L,log_Ln\n";
    os.precision(17);
    for (std::size_t k = 0; k < exact.log.size(); ++k) {
        os << grid.time(static_cast<int>(k)) << ',' << exact.log[k] << ',' << picard.log[k] << '\n';
    }
}

}  // namespace filterlab
