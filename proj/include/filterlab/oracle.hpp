#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/time_grid.hpp"

namespace filterlab {

/// dx = F x dt + G dB, dy = H x dt + dW, X(0) ~ N(m0, P0).
struct LinearSystem {
    Eigen::MatrixXd F, G, H;
    Eigen::VectorXd m0;
    Eigen::MatrixXd P0;
};

struct KalmanState {
    Eigen::VectorXd m;
    Eigen::MatrixXd P;
};

/// The linear system behind a model; only linear-Gaussian models qualify.
template <class M>
LinearSystem linear_system_of(const M& model)
{
    if constexpr (std::is_same_v<M, LinearGaussianModel>) {
        LinearSystem s;
        s.F = Eigen::MatrixXd::Constant(1, 1, model.F);
        s.G = Eigen::MatrixXd::Constant(1, 1, model.G);
        s.H = Eigen::MatrixXd::Constant(1, 1, model.H);
        s.m0 = Eigen::VectorXd::Constant(1, model.initial_mean);
        s.P0 = Eigen::MatrixXd::Constant(1, 1, model.initial_variance);
        return s;
    } else {
        throw ConfigError("kalman_bucy: model '" + model.name() + "' is not linear-Gaussian");
    }
}

/**
 * Euler integration of dm = F m dt + P H^T (dy - H m dt) and
 * dP/dt = F P + P F^T + G G^T - P H^T H P on the fine grid, P symmetrized
 * after each step. Returns the state at every grid point.
 */
inline std::vector<KalmanState> kalman_bucy(const LinearSystem& sys, const ObservationPath& obs, const TimeGrid& grid)
{
    const auto dx = sys.F.rows();
    if (sys.F.cols() != dx || sys.G.rows() != dx || sys.H.cols() != dx || sys.m0.size() != dx ||
        sys.P0.rows() != dx || sys.P0.cols() != dx) {
        throw DimensionError("kalman_bucy: inconsistent system matrices");
    }
    if (obs.dy() != sys.H.rows()) throw DimensionError("kalman_bucy: observation dimension differs from H");
    check_grid(obs, grid);
    const double dt = grid.dt();
    std::vector<KalmanState> out;
    out.reserve(static_cast<std::size_t>(grid.fine_steps()) + 1);
    KalmanState s{sys.m0, sys.P0};
    out.push_back(s);
    const Eigen::MatrixXd GG = sys.G * sys.G.transpose();
    for (int k = 0; k < grid.fine_steps(); ++k) {
        const Eigen::VectorXd dy = obs.increments().row(k).transpose();
        const Eigen::MatrixXd gain = s.P * sys.H.transpose();
        const Eigen::VectorXd m = s.m + sys.F * s.m * dt + gain * (dy - sys.H * s.m * dt);
        Eigen::MatrixXd P = s.P + (sys.F * s.P + s.P * sys.F.transpose() + GG - gain * sys.H * s.P) * dt;
        P = (0.5 * (P + P.transpose())).eval();
        s = {m, P};
        out.push_back(s);
    }
    return out;
}

/// Stationary scalar Riccati solution of 0 = 2 F P + G^2 - H^2 P^2.
inline double scalar_stationary_variance(double F, double G, double H)
{
    if (H == 0.0) {
        if (F >= 0.0) throw std::invalid_argument("no stationary variance without information and F >= 0");
        return -G * G / (2.0 * F);
    }
    return (F + std::sqrt(F * F + H * H * G * G)) / (H * H);
}

/// Exact expectation of `f` over a finite outcome table.
template <class Outcome, class Functional>
double small_case_expectation(std::span<const Outcome> outcomes, std::span<const double> probabilities, Functional&& f)
{
    if (outcomes.size() != probabilities.size()) throw DimensionError("outcome and probability counts differ");
    double mass = 0.0;
    for (double p : probabilities) {
        if (p < 0.0) throw std::invalid_argument("negative probability in outcome table");
        mass += p;
    }
    if (std::abs(mass - 1.0) > 1e-12) throw std::invalid_argument("outcome probabilities do not sum to one");
    double v = 0.0;
    for (std::size_t i = 0; i < outcomes.size(); ++i) v += probabilities[i] * f(outcomes[i]);
    return v;
}

}  // namespace filterlab
