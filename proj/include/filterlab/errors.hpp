#pragma once

#include <stdexcept>
#include <string>

namespace filterlab {

/// Invalid experiment or model configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A run would exceed a configured resource cap (CLI exit code 3).
class BudgetError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Non-finite state produced during path simulation.
class SimulationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes disagree (dimension, channel count, grid).
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

}  // namespace filterlab
