#pragma once

// Experiment configuration: JSON file plus dotted-path overrides, validated
// into a typed record. Every field has a default, unknown keys are rejected,
// and errors name the offending field.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <memory>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "filterlab/cluster.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/experiments.hpp"
#include "filterlab/models.hpp"
#include "filterlab/spatial_model.hpp"
#include "filterlab/time_grid.hpp"

namespace filterlab {

using json = nlohmann::json;

using AnyModel = std::variant<BoundedTanhModel, LinearGaussianModel, SpatialModel, ClusterModel>;

struct LimitConfig {
    int n = 64;
    std::size_t replicates = 200;
    std::size_t particles = 4000;
};

struct ClusterRunConfig {
    std::size_t particles = 100000;
    std::size_t max_points = 20;
    std::size_t instances = 1;
};

struct ExperimentConfig {
    json model = {{"type", "bounded_tanh"}};
    double T = 1.0;
    int M = 1024;
    std::vector<int> n_set{4, 8, 16, 32, 64};
    std::size_t particles = 10000;
    std::size_t groups = 100;
    double budget = 2e11;
    std::vector<std::string> phi{"x", "x2", "tanh"};
    std::vector<double> checkpoints;
    std::uint64_t seed = 1;
    std::string output = "out";
    std::size_t replicates = 24;
    GalerkinOptions galerkin;
    LimitConfig limit;
    ClusterRunConfig cluster;

    /// Resolved configuration as JSON. The output directory is excluded so that
    /// relocating a run does not change its hash.
    json canonical() const;

    TimeGrid grid(int picard_n = 1) const { return TimeGrid::make(T, M, picard_n); }
    std::vector<ScalarTestFunction> battery() const;
    std::vector<double> checkpoint_times() const;
};

namespace detail {

inline void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!obj.is_object()) throw ConfigError(where + ": expected an object");
    const std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [k, v] : obj.items()) {
        if (!ok.contains(k)) throw ConfigError((where.empty() ? k : where + "." + k) + ": unknown field");
    }
}

template <class T>
T get_field(const json& obj, const std::string& key, const std::string& path, T fallback)
{
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + ": wrong type (" + obj.at(key).dump() + ")");
    }
}

inline double positive(double v, const std::string& path)
{
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(path + ": must be positive and finite");
    return v;
}

inline std::vector<double> number_list(const json& obj, const std::string& key, const std::string& path,
                                       std::vector<double> fallback, std::size_t size = 0)
{
    auto v = get_field(obj, key, path, std::move(fallback));
    if (size && v.size() != size) {
        throw ConfigError(path + ": expected " + std::to_string(size) + " values, got " + std::to_string(v.size()));
    }
    return v;
}

inline ClusterModel make_cluster_model(const json& m, double T)
{
    check_keys(m, "model", {"type", "nu", "gamma", "lambda0", "intensity"});
    const auto nu = number_list(m, "nu", "model.nu", {1.0, 0.5});
    const auto gamma = number_list(m, "gamma", "model.gamma", {0.8, 1.2}, nu.size());
    const auto l0 = number_list(m, "lambda0", "model.lambda0", {3.0, 2.0}, nu.size());
    const json in = m.value("intensity", json{{"type", "self_exciting"}});
    const std::string kind = get_field<std::string>(in, "type", "model.intensity.type", "self_exciting");
    std::shared_ptr<const ClusterIntensity> intensity;
    if (kind == "self_exciting") {
        check_keys(in, "model.intensity", {"type", "epsilon", "beta", "delta"});
        intensity = std::make_shared<SelfExcitingIntensity>(
            number_list(in, "epsilon", "model.intensity.epsilon", std::vector<double>(nu.size(), 0.4), nu.size()),
            get_field(in, "beta", "model.intensity.beta", 4.0), get_field(in, "delta", "model.intensity.delta", 3.0));
    } else if (kind == "monotone") {
        check_keys(in, "model.intensity", {"type", "epsilon", "kappa"});
        intensity = std::make_shared<MonotoneIntensity>(
            number_list(in, "epsilon", "model.intensity.epsilon", std::vector<double>(nu.size(), 1.0), nu.size()),
            get_field(in, "kappa", "model.intensity.kappa", 1.0));
    } else if (kind == "constant") {
        check_keys(in, "model.intensity", {"type", "fraction"});
        intensity = std::make_shared<ConstantFractionIntensity>(get_field(in, "fraction", "model.intensity.fraction", 0.5));
    } else {
        throw ConfigError("model.intensity.type: unknown intensity '" + kind + "'");
    }
    return ClusterModel(nu, gamma, l0, std::move(intensity), T);
}

}  // namespace detail

/// Model instance described by the `model` object.
inline AnyModel make_model(const json& m, double T)
{
    const std::string type = detail::get_field<std::string>(m, "type", "model.type", "");
    if (type == "bounded_tanh") {
        detail::check_keys(m, "model", {"type", "epsilon", "sensor_scale", "initial_mean", "initial_sd"});
        BoundedTanhModel b;
        b.epsilon = detail::get_field(m, "epsilon", "model.epsilon", b.epsilon);
        if (std::abs(b.epsilon) >= 1.0) throw ConfigError("model.epsilon: |epsilon| < 1 keeps sigma nondegenerate");
        b.sensor_scale = detail::get_field(m, "sensor_scale", "model.sensor_scale", b.sensor_scale);
        b.initial_mean = detail::get_field(m, "initial_mean", "model.initial_mean", b.initial_mean);
        b.initial_sd = detail::get_field(m, "initial_sd", "model.initial_sd", b.initial_sd);
        return b;
    }
    if (type == "linear_gaussian") {
        detail::check_keys(m, "model", {"type", "F", "G", "H", "initial_mean", "initial_variance", "clip"});
        LinearGaussianModel l;
        l.F = detail::get_field(m, "F", "model.F", l.F);
        l.G = detail::get_field(m, "G", "model.G", l.G);
        l.H = detail::get_field(m, "H", "model.H", l.H);
        l.initial_mean = detail::get_field(m, "initial_mean", "model.initial_mean", l.initial_mean);
        l.initial_variance = detail::get_field(m, "initial_variance", "model.initial_variance", l.initial_variance);
        if (l.initial_variance < 0.0) throw ConfigError("model.initial_variance: must be nonnegative");
        if (m.contains("clip") && !m.at("clip").is_null())
            l.clip = detail::positive(detail::get_field(m, "clip", "model.clip", 0.0), "model.clip");
        return l;
    }
    if (type == "spatial_bounded") {
        detail::check_keys(m, "model", {"type", "cells", "kappa", "sigma0", "total_mass"});
        const int cells = detail::get_field(m, "cells", "model.cells", 4);
        if (cells <= 0) throw ConfigError("model.cells: at least one cell is required");
        return bounded_spatial_model(cells, detail::get_field(m, "kappa", "model.kappa", 0.5),
                                     detail::get_field(m, "sigma0", "model.sigma0", 0.8),
                                     detail::positive(detail::get_field(m, "total_mass", "model.total_mass", 1.0),
                                                      "model.total_mass"));
    }
    if (type == "cluster") return detail::make_cluster_model(m, T);
    throw ConfigError("model.type: unknown model '" + type +
                      "' (expected bounded_tanh, linear_gaussian, spatial_bounded or cluster)");
}

/// Set `path` (dot separated) in `doc` to `value`, parsed as JSON when possible and as a string otherwise.
inline void apply_override(json& doc, const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set: expected key=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value = json::parse(text, nullptr, false);
    if (value.is_discarded()) value = text;
    json* node = &doc;
    std::size_t start = 0;
    for (;;) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("--set: empty path component in '" + path + "'");
        if (!node->is_object()) throw ConfigError(path + ": cannot set a field inside a non-object");
        if (dot == std::string::npos) {
            (*node)[key] = std::move(value);
            return;
        }
        node = &(*node)[key];
        if (node->is_null()) *node = json::object();
        start = dot + 1;
    }
}

/// Typed, validated configuration from a JSON document.
inline ExperimentConfig parse_config(const json& doc)
{
    using detail::get_field;
    detail::check_keys(doc, "", {"model", "grid", "ensemble", "phi", "checkpoints", "seed", "output", "replicates",
                                 "galerkin", "limit", "cluster"});
    ExperimentConfig c;
    if (doc.contains("model")) c.model = doc.at("model");
    if (!c.model.is_object() || !c.model.contains("type")) throw ConfigError("model.type: required");

    const json grid = doc.value("grid", json::object());
    detail::check_keys(grid, "grid", {"T", "M", "n"});
    c.T = detail::positive(get_field(grid, "T", "grid.T", c.T), "grid.T");
    c.M = get_field(grid, "M", "grid.M", c.M);
    if (c.M <= 0) throw ConfigError("grid.M: must be a positive step count");
    c.n_set = get_field(grid, "n", "grid.n", c.n_set);
    if (c.n_set.empty()) throw ConfigError("grid.n: at least one Picard resolution is required");
    for (std::size_t i = 0; i < c.n_set.size(); ++i) {
        const int n = c.n_set[i];
        if (n <= 0) throw ConfigError("grid.n: entries must be positive");
        if (i > 0 && n <= c.n_set[i - 1]) throw ConfigError("grid.n: must be sorted strictly ascending");
        const double coarse = n * c.T;
        if (std::abs(coarse - std::round(coarse)) > 1e-9) {
            throw ConfigError("grid.n: n*T must be an integer (n=" + std::to_string(n) + ")");
        }
        const long steps = std::lround(coarse);
        if (c.M % steps != 0) {
            throw ConfigError("grid.M: " + std::to_string(c.M) + " is not divisible by n*T = " +
                              std::to_string(steps) + " (n=" + std::to_string(n) + ")");
        }
    }

    const json ens = doc.value("ensemble", json::object());
    detail::check_keys(ens, "ensemble", {"N", "groups", "budget"});
    c.particles = get_field(ens, "N", "ensemble.N", c.particles);
    if (c.particles == 0) throw ConfigError("ensemble.N: at least one particle is required");
    c.groups = get_field(ens, "groups", "ensemble.groups", c.groups);
    if (c.groups < 2) throw ConfigError("ensemble.groups: at least two groups are required");
    c.budget = detail::positive(get_field(ens, "budget", "ensemble.budget", c.budget), "ensemble.budget");

    c.phi = get_field(doc, "phi", "phi", c.phi);
    if (c.phi.empty()) throw ConfigError("phi: at least one test function is required");
    for (const auto& name : c.phi) {
        try {
            (void)phi::by_name(name);
        } catch (const std::exception&) {
            throw ConfigError("phi: unknown test function '" + name + "'");
        }
    }
    c.checkpoints = get_field(doc, "checkpoints", "checkpoints", c.checkpoints);
    for (std::size_t i = 0; i < c.checkpoints.size(); ++i) {
        const double t = c.checkpoints[i];
        if (!(t > 0.0) || t > c.T) throw ConfigError("checkpoints: times must lie in (0, T]");
        if (i > 0 && t <= c.checkpoints[i - 1]) throw ConfigError("checkpoints: must be sorted strictly ascending");
    }
    c.seed = get_field(doc, "seed", "seed", c.seed);
    c.output = get_field(doc, "output", "output", c.output);
    c.replicates = get_field(doc, "replicates", "replicates", c.replicates);
    if (c.replicates < 2) throw ConfigError("replicates: at least two replicates are required");

    const json gal = doc.value("galerkin", json::object());
    detail::check_keys(gal, "galerkin", {"basis", "lo", "hi", "spacing", "degree", "max_dropped"});
    c.galerkin.basis = get_field(gal, "basis", "galerkin.basis", c.galerkin.basis);
    if (c.galerkin.basis != "auto" && c.galerkin.basis != "nodal" && c.galerkin.basis != "polynomial")
        throw ConfigError("galerkin.basis: expected auto, nodal or polynomial");
    c.galerkin.lo = get_field(gal, "lo", "galerkin.lo", c.galerkin.lo);
    c.galerkin.hi = get_field(gal, "hi", "galerkin.hi", c.galerkin.hi);
    if (!(c.galerkin.hi > c.galerkin.lo)) throw ConfigError("galerkin.hi: must exceed galerkin.lo");
    c.galerkin.spacing = detail::positive(get_field(gal, "spacing", "galerkin.spacing", c.galerkin.spacing),
                                          "galerkin.spacing");
    c.galerkin.degree = get_field(gal, "degree", "galerkin.degree", c.galerkin.degree);
    if (c.galerkin.degree < 1) throw ConfigError("galerkin.degree: must be at least 1");
    c.galerkin.max_dropped = get_field(gal, "max_dropped", "galerkin.max_dropped", c.galerkin.max_dropped);

    const json lim = doc.value("limit", json::object());
    detail::check_keys(lim, "limit", {"n", "replicates", "N"});
    c.limit.n = get_field(lim, "n", "limit.n", c.limit.n);
    if (c.limit.n <= 0) throw ConfigError("limit.n: must be positive");
    c.limit.replicates = get_field(lim, "replicates", "limit.replicates", c.limit.replicates);
    if (c.limit.replicates < 2) throw ConfigError("limit.replicates: at least two replicates are required");
    c.limit.particles = get_field(lim, "N", "limit.N", c.limit.particles);
    if (c.limit.particles == 0) throw ConfigError("limit.N: at least one particle is required");

    const json cl = doc.value("cluster", json::object());
    detail::check_keys(cl, "cluster", {"N", "max_points", "instances"});
    c.cluster.particles = get_field(cl, "N", "cluster.N", c.cluster.particles);
    if (c.cluster.particles == 0) throw ConfigError("cluster.N: at least one particle is required");
    c.cluster.max_points = get_field(cl, "max_points", "cluster.max_points", c.cluster.max_points);
    if (c.cluster.max_points == 0 || c.cluster.max_points > 24)
        throw ConfigError("cluster.max_points: must lie in [1, 24]");
    c.cluster.instances = get_field(cl, "instances", "cluster.instances", c.cluster.instances);
    if (c.cluster.instances == 0) throw ConfigError("cluster.instances: at least one instance is required");

    (void)make_model(c.model, c.T);
    return c;
}

inline json ExperimentConfig::canonical() const
{
    return {
        {"model", model},
        {"grid", {{"T", T}, {"M", M}, {"n", n_set}}},
        {"ensemble", {{"N", particles}, {"groups", groups}, {"budget", budget}}},
        {"phi", phi},
        {"checkpoints", checkpoints},
        {"seed", seed},
        {"replicates", replicates},
        {"galerkin",
         {{"basis", galerkin.basis},
          {"lo", galerkin.lo},
          {"hi", galerkin.hi},
          {"spacing", galerkin.spacing},
          {"degree", galerkin.degree},
          {"max_dropped", galerkin.max_dropped}}},
        {"limit", {{"n", limit.n}, {"replicates", limit.replicates}, {"N", limit.particles}}},
        {"cluster", {{"N", cluster.particles}, {"max_points", cluster.max_points}, {"instances", cluster.instances}}},
    };
}

inline std::vector<ScalarTestFunction> ExperimentConfig::battery() const
{
    std::vector<ScalarTestFunction> b;
    for (const auto& name : phi) b.push_back(phi::by_name(name));
    return b;
}

/// Configured checkpoints, or the horizon alone.
inline std::vector<double> ExperimentConfig::checkpoint_times() const
{
    return checkpoints.empty() ? std::vector<double>{T} : checkpoints;
}

inline json read_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("--config: cannot open '" + path + "'");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw ConfigError("--config: '" + path + "' is not valid JSON");
    return doc;
}

/// Load, override and validate. An empty path starts from the defaults.
inline ExperimentConfig load_config(const std::string& path, const std::vector<std::string>& overrides)
{
    json doc = path.empty() ? json::object() : read_json_file(path);
    if (!doc.is_object()) throw ConfigError("--config: top level must be an object");
    for (const auto& o : overrides) apply_override(doc, o);
    return parse_config(doc);
}

}  // namespace filterlab
