#pragma once

#include <cmath>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/rng.hpp"
#include "filterlab/spatial_model.hpp"
#include "filterlab/time_grid.hpp"

namespace filterlab {

/// M x dim table of independent N(0, dt) draws, row-major draw order.
inline Eigen::MatrixXd gaussian_increments(RngStream stream, const TimeGrid& grid, int dim)
{
    if (dim <= 0) throw DimensionError("gaussian_increments: dimension must be positive");
    const double scale = std::sqrt(grid.dt());
    Eigen::MatrixXd table(grid.fine_steps(), dim);
    for (int k = 0; k < grid.fine_steps(); ++k)
        for (int j = 0; j < dim; ++j) table(k, j) = scale * stream.gaussian();
    return table;
}

template <int DX>
struct SignalPath {
    std::vector<Vec<DX>> states;
    std::string model;
    StreamId stream{};

    int steps() const noexcept { return static_cast<int>(states.size()) - 1; }
    const Vec<DX>& operator[](int k) const { return states[static_cast<std::size_t>(k)]; }
};

/// Observation path on the fine grid, stored as increments with running sums.
class ObservationPath {
public:
    ObservationPath() = default;

    ObservationPath(int dy, Eigen::MatrixXd increments) : dy_(dy), inc_(std::move(increments))
    {
        if (inc_.cols() != dy) throw DimensionError("observation path: column count differs from d_Y");
        values_.resize(inc_.rows() + 1, dy);
        values_.row(0).setZero();
        for (Eigen::Index k = 0; k < inc_.rows(); ++k) values_.row(k + 1) = values_.row(k) + inc_.row(k);
    }

    /// y(t) = slope * t on the grid.
    static ObservationPath linear(const TimeGrid& grid, std::vector<double> slope)
    {
        const int dy = static_cast<int>(slope.size());
        Eigen::MatrixXd inc(grid.fine_steps(), dy);
        for (int k = 0; k < grid.fine_steps(); ++k)
            for (int j = 0; j < dy; ++j) inc(k, j) = slope[static_cast<std::size_t>(j)] * grid.dt();
        return {dy, std::move(inc)};
    }

    static ObservationPath zero(const TimeGrid& grid, int dy)
    {
        return {dy, Eigen::MatrixXd::Zero(grid.fine_steps(), dy)};
    }

    int dy() const noexcept { return dy_; }
    int steps() const noexcept { return static_cast<int>(inc_.rows()); }
    double increment(int k, int j) const { return inc_(k, j); }
    double value(int k, int j) const { return values_(k, j); }
    const Eigen::MatrixXd& increments() const noexcept { return inc_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }

private:
    int dy_ = 0;
    Eigen::MatrixXd inc_;
    Eigen::MatrixXd values_;
};

inline void check_grid(const ObservationPath& obs, const TimeGrid& grid)
{
    if (obs.steps() != grid.fine_steps()) {
        throw DimensionError("observation path has " + std::to_string(obs.steps()) +
                             " steps, grid has " + std::to_string(grid.fine_steps()));
    }
}

/// Stream for the initial state of the particle owning `noise`.
inline RngStream initial_stream(const RngStream& noise)
{
    return {noise.master_seed(), {Purpose::initial_state, noise.id().particle, noise.id().replicate}};
}

/// Left-point Euler-Maruyama stepper for dX = b dt + sigma dB.
template <DiffusionModel M>
class EulerStepper {
public:
    EulerStepper(const M& model, const TimeGrid& grid, RngStream noise)
        : model_(&model), dt_(grid.dt()), sqdt_(std::sqrt(grid.dt())), noise_(noise)
    {
        RngStream init = initial_stream(noise);
        x_ = model.sample_initial(init);
    }

    EulerStepper(const M& model, const TimeGrid& grid, RngStream noise, const Vec<M::dx>& x0)
        : model_(&model), dt_(grid.dt()), sqdt_(std::sqrt(grid.dt())), noise_(noise), x_(x0)
    {
    }

    const Vec<M::dx>& state() const noexcept { return x_; }

    void step()
    {
        Vec<M::db> db;
        for (int j = 0; j < M::db; ++j) db[j] = sqdt_ * noise_.gaussian();
        x_ = x_ + model_->diffusion(x_) * db + model_->drift(x_) * dt_;
        if (!x_.allFinite()) throw SimulationError("signal state became non-finite");
    }

private:
    const M* model_;
    double dt_;
    double sqdt_;
    RngStream noise_;
    Vec<M::dx> x_;
};

template <DiffusionModel M>
SignalPath<M::dx> simulate_signal(const M& model, const TimeGrid& grid, RngStream noise)
{
    SignalPath<M::dx> path;
    path.model = model.name();
    path.stream = noise.id();
    path.states.reserve(static_cast<std::size_t>(grid.fine_steps()) + 1);
    EulerStepper<M> stepper(model, grid, noise);
    path.states.push_back(stepper.state());
    for (int k = 0; k < grid.fine_steps(); ++k) {
        stepper.step();
        path.states.push_back(stepper.state());
    }
    return path;
}

/// y_{k+1} = y_k + h(x_k) dt + dW_k with dW drawn from the given table (M x d_Y).
template <DiffusionModel M>
ObservationPath simulate_observation_P(const M& model, const SignalPath<M::dx>& signal, const TimeGrid& grid,
                                       const Eigen::MatrixXd& noise)
{
    if (signal.steps() != grid.fine_steps()) throw DimensionError("signal and grid differ in length");
    if (noise.rows() != grid.fine_steps() || noise.cols() != M::dy) {
        throw DimensionError("observation noise table has the wrong shape");
    }
    Eigen::MatrixXd inc(grid.fine_steps(), M::dy);
    for (int k = 0; k < grid.fine_steps(); ++k) {
        const Vec<M::dy> h = model.sensor(signal[k]);
        for (int j = 0; j < M::dy; ++j) inc(k, j) = h[j] * grid.dt() + noise(k, j);
    }
    return {M::dy, std::move(inc)};
}

template <DiffusionModel M>
ObservationPath simulate_observation_P(const M& model, const SignalPath<M::dx>& signal, const TimeGrid& grid,
                                       RngStream stream)
{
    return simulate_observation_P(model, signal, grid, gaussian_increments(stream, grid, M::dy));
}

/// Standard d_Y-dimensional Brownian path; channel j optionally scaled to variance mass[j] dt.
inline ObservationPath simulate_observation_Q(const TimeGrid& grid, RngStream stream, int dy,
                                              std::span<const double> mass = {})
{
    Eigen::MatrixXd inc = gaussian_increments(stream, grid, dy);
    if (!mass.empty()) {
        if (static_cast<int>(mass.size()) != dy) throw DimensionError("channel mass count differs from d_Y");
        for (int j = 0; j < dy; ++j) inc.col(j) *= std::sqrt(mass[static_cast<std::size_t>(j)]);
    }
    return {dy, std::move(inc)};
}

/// Euler stepper for the spatial signal written against the shared Y channels.
class SpatialStepper {
public:
    SpatialStepper(const SpatialModel& model, const TimeGrid& grid, RngStream noise, const ObservationPath& obs)
        : model_(&model), obs_(&obs), dt_(grid.dt()), sqdt_(std::sqrt(grid.dt())), noise_(noise)
    {
        if (obs.dy() != model.channels()) {
            throw DimensionError("spatial signal: observation has " + std::to_string(obs.dy()) +
                                 " channels, model has " + std::to_string(model.channels()));
        }
        check_grid(obs, grid);
        RngStream init = initial_stream(noise);
        x_ = model.sample_initial(init);
    }

    double state() const noexcept { return x_; }
    void set_state(double x) noexcept { x_ = x; }

    /// Advance from step k to k + 1.
    void step(int k)
    {
        const double db = sqdt_ * noise_.gaussian();
        double next = x_ + model_->diffusion(x_) * db;
        for (int j = 0; j < model_->channels(); ++j) next += model_->alpha(x_, j) * obs_->increment(k, j);
        next += model_->reference_drift(x_) * dt_;
        if (!std::isfinite(next)) throw SimulationError("spatial signal state became non-finite");
        x_ = next;
    }

private:
    const SpatialModel* model_;
    const ObservationPath* obs_;
    double dt_;
    double sqdt_;
    RngStream noise_;
    double x_ = 0.0;
};

inline SignalPath<1> simulate_signal_spatial(const SpatialModel& model, const TimeGrid& grid, RngStream noise,
                                             const ObservationPath& obs)
{
    SignalPath<1> path;
    path.model = model.label;
    path.stream = noise.id();
    SpatialStepper stepper(model, grid, noise, obs);
    path.states.push_back(Vec<1>{stepper.state()});
    for (int k = 0; k < grid.fine_steps(); ++k) {
        stepper.step(k);
        path.states.push_back(Vec<1>{stepper.state()});
    }
    return path;
}

/// Physical-measure draw of (X, Y) for the spatial model: dY_j = h(X, u_j) mu_j dt + dW_j.
inline std::pair<SignalPath<1>, ObservationPath> simulate_spatial_P(const SpatialModel& model, const TimeGrid& grid,
                                                                    RngStream noise, RngStream observation)
{
    const int J = model.channels();
    const double dt = grid.dt(), sqdt = std::sqrt(grid.dt());
    SignalPath<1> path;
    path.model = model.label;
    path.stream = noise.id();
    RngStream init = initial_stream(noise);
    double x = model.sample_initial(init);
    path.states.push_back(Vec<1>{x});
    Eigen::MatrixXd inc(grid.fine_steps(), J);
    for (int k = 0; k < grid.fine_steps(); ++k) {
        const double db = sqdt * noise.gaussian();
        double next = x + model.diffusion(x) * db + model.reference_drift(x) * dt;
        for (int j = 0; j < J; ++j) {
            const double mu = model.mass[static_cast<std::size_t>(j)];
            inc(k, j) = model.sensor(x, j) * mu * dt + std::sqrt(mu) * sqdt * observation.gaussian();
            next += model.alpha(x, j) * inc(k, j);
        }
        if (!std::isfinite(next)) throw SimulationError("spatial signal state became non-finite");
        x = next;
        path.states.push_back(Vec<1>{x});
    }
    return {std::move(path), ObservationPath(J, std::move(inc))};
}

// ---------------------------------------------------------------------------
// CSV export

template <int DX>
void write_csv(std::ostream& os, const SignalPath<DX>& path, const TimeGrid& grid)
{
    os << "time";
    for (int d = 0; d < DX; ++d) os << ",x_" << d + 1;
    os << '\n';
    os.precision(17);
    for (int k = 0; k <= path.steps(); ++k) {
        os << grid.time(k);
        for (int d = 0; d < DX; ++d) os << ',' << path[k][d];
        os << '\n';
    }
}

inline void write_csv(std::ostream& os, const ObservationPath& obs, const TimeGrid& grid)
{
    os << "time";
    for (int j = 0; j < obs.dy(); ++j) os << ",y_" << j + 1;
    os << '\n';
    os.precision(17);
    for (int k = 0; k <= obs.steps(); ++k) {
        os << grid.time(k);
        for (int j = 0; j < obs.dy(); ++j) os << ',' << obs.value(k, j);
        os << '\n';
    }
}

}  // namespace filterlab
