#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "filterlab/errors.hpp"

namespace filterlab {

/**
 * Fine simulation grid {kT/M} together with the coarse Picard map
 * tau_n(s) = floor(n s) / n. Every coarse point k/n is a fine point, which
 * requires n*T to be an integer dividing M.
 */
class TimeGrid {
public:
    static TimeGrid make(double horizon, int fine_steps, int picard_n)
    {
        if (!(horizon > 0.0) || !std::isfinite(horizon)) {
            throw ConfigError("grid.T: horizon must be positive, got " + std::to_string(horizon));
        }
        if (fine_steps <= 0) {
            throw ConfigError("grid.M: fine step count must be positive");
        }
        if (picard_n <= 0) {
            throw ConfigError("grid.n: Picard step count must be positive");
        }
        const double coarse_real = picard_n * horizon;
        const auto coarse = static_cast<long long>(std::llround(coarse_real));
        if (coarse <= 0 || std::abs(coarse_real - static_cast<double>(coarse)) > 1e-9 * coarse_real) {
            throw ConfigError("grid.n: n*T must be an integer (n=" + std::to_string(picard_n) +
                              ", T=" + std::to_string(horizon) + ")");
        }
        if (fine_steps < coarse || fine_steps % coarse != 0) {
            throw ConfigError("grid.M: M=" + std::to_string(fine_steps) +
                              " is not divisible by n*T=" + std::to_string(coarse));
        }
        return TimeGrid(horizon, fine_steps, picard_n, static_cast<int>(fine_steps / coarse));
    }

    /// Grid whose coarse map is the identity on fine points (n = M/T).
    static TimeGrid identity(double horizon, int fine_steps)
    {
        const double n = fine_steps / horizon;
        return make(horizon, fine_steps, static_cast<int>(std::llround(n)));
    }

    TimeGrid with_picard(int picard_n) const { return make(horizon_, fine_steps_, picard_n); }

    double horizon() const noexcept { return horizon_; }
    int fine_steps() const noexcept { return fine_steps_; }
    int picard_n() const noexcept { return picard_n_; }
    double dt() const noexcept { return horizon_ / fine_steps_; }

    /// Number of fine steps per coarse interval.
    int steps_per_coarse() const noexcept { return steps_per_coarse_; }

    double time(int k) const noexcept { return horizon_ * k / fine_steps_; }

    /// Fine index of tau_n(t_k).
    int tau_index(int k) const noexcept { return (k / steps_per_coarse_) * steps_per_coarse_; }

    int coarse_index(int k) const noexcept { return k / steps_per_coarse_; }

    /// tau_n(s) = floor(n s)/n for an arbitrary time s.
    double tau(double s) const noexcept
    {
        const double scaled = picard_n_ * s;
        double j = std::floor(scaled);
        // Guard values that are coarse points up to rounding.
        if (scaled - j > 1.0 - 1e-12) j += 1.0;
        return j / picard_n_;
    }

    /// Fine index of an on-grid time; throws when t is not a grid point.
    int index_of(double t) const
    {
        const double scaled = t / dt();
        const auto k = static_cast<long long>(std::llround(scaled));
        if (k < 0 || k > fine_steps_ || std::abs(scaled - static_cast<double>(k)) > 1e-7) {
            throw std::invalid_argument("time " + std::to_string(t) + " is not on the fine grid");
        }
        return static_cast<int>(k);
    }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

    /// Same fine grid, regardless of Picard step.
    bool same_fine_grid(const TimeGrid& other) const noexcept
    {
        return horizon_ == other.horizon_ && fine_steps_ == other.fine_steps_;
    }

private:
    TimeGrid(double horizon, int fine_steps, int picard_n, int steps_per_coarse)
        : horizon_(horizon), fine_steps_(fine_steps), picard_n_(picard_n),
          steps_per_coarse_(steps_per_coarse)
    {
    }

    double horizon_;
    int fine_steps_;
    int picard_n_;
    int steps_per_coarse_;
};

}  // namespace filterlab
