#pragma once

// Subcommand implementations. Each one reads a validated configuration,
// writes long-format CSV files through a RunOutput and returns; the caller
// writes the manifest.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "filterlab/cluster.hpp"
#include "filterlab/config.hpp"
#include "filterlab/ensemble.hpp"
#include "filterlab/error_expansion.hpp"
#include "filterlab/experiments.hpp"
#include "filterlab/filter.hpp"
#include "filterlab/manifest.hpp"
#include "filterlab/oracle.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/weights.hpp"

namespace filterlab {

struct RunContext {
    ExperimentConfig config;
    int threads = 1;

    ParallelOptions parallel() const
    {
        ParallelOptions p;
        p.threads = threads;
        return p;
    }

    EnsembleOptions ensemble(std::vector<int> picard, std::uint32_t replicate = 0) const
    {
        EnsembleOptions o;
        o.particles = config.particles;
        o.picard = std::move(picard);
        o.checkpoints = config.checkpoint_times();
        o.seed = config.seed;
        o.replicate = replicate;
        o.parallel = parallel();
        o.groups = config.groups;
        o.budget = config.budget;
        return o;
    }
};

namespace detail {

template <class Fn>
void with_diffusion_model(const AnyModel& m, const std::string& command, Fn&& fn)
{
    if (const auto* b = std::get_if<BoundedTanhModel>(&m)) return fn(*b);
    if (const auto* l = std::get_if<LinearGaussianModel>(&m)) return fn(*l);
    throw ConfigError("model.type: " + command + " needs a bounded_tanh or linear_gaussian model");
}

template <class Model>
const Model& require_model(const AnyModel& m, const std::string& command, const std::string& type)
{
    const auto* p = std::get_if<Model>(&m);
    if (!p) throw ConfigError("model.type: " + command + " needs a " + type + " model");
    return *p;
}

inline void write_estimates_header(std::ostream& os)
{
    os << "t,phi_id,n,rho,pi,se_rho,se_pi\n";
    os.precision(17);
}

template <class Ens>
void write_estimates(std::ostream& os, const Ens& ens, std::span<const TestFunction<1>> battery,
                     std::span<const double> times, std::span<const int> picard)
{
    write_estimates_header(os);
    for (double t : times)
        for (const auto& f : battery) {
            auto row = [&](int n) {
                const auto e = ens.estimate(f, t, n);
                os << t << ',' << f.name << ',' << n << ',' << e.rho << ',' << e.pi << ',' << e.se_rho << ','
                   << e.se_pi << '\n';
            };
            row(0);
            for (int n : picard) row(n);
        }
}

inline void write_residuals(std::ostream& os, const std::vector<ResidualSeries>& zakai,
                            const std::vector<ResidualSeries>& ks)
{
    os << "equation,phi_id,t,residual,se\n";
    os.precision(17);
    auto emit = [&](const char* eq, const std::vector<ResidualSeries>& v) {
        for (const auto& r : v)
            for (std::size_t i = 0; i < r.times.size(); ++i)
                os << eq << ',' << r.phi << ',' << r.times[i] << ',' << r.value[i] << ',' << r.se[i] << '\n';
    };
    emit("zakai", zakai);
    emit("ks", ks);
}

/// P-simulated cluster instance number `i` with 1..max_points points (first replicate that qualifies).
inline LabeledPointSet cluster_instance(const ClusterModel& m, std::uint64_t seed, std::size_t i,
                                        std::size_t max_points)
{
    std::size_t found = 0;
    for (std::uint32_t r = 0; r < 100000; ++r) {
        auto s = simulate_cluster_P(m, seed, r);
        if (s.observed.empty() || s.observed.size() > max_points) continue;
        if (found++ == i) return s;
    }
    throw BudgetError("cluster: no instance with at most " + std::to_string(max_points) +
                      " points in 100000 draws (raise cluster.max_points)");
}

inline std::string instance_suffix(std::size_t i)
{
    std::ostringstream os;
    os << '_' << std::setw(3) << std::setfill('0') << i << ".csv";
    return os.str();
}

inline void write_fits(std::ostream& os, const ConvergenceReport& rep)
{
    os << "phi_id,kind,slope,slope_se,points\n";
    os.precision(17);
    for (const auto& pc : rep.phis) {
        os << pc.phi << ",error," << pc.fit.slope << ',' << pc.fit.slope_se << ',' << pc.fit.points << '\n';
        os << pc.phi << ",richardson," << pc.richardson_fit.slope << ',' << pc.richardson_fit.slope_se << ','
           << pc.richardson_fit.points << '\n';
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommands

/// Signal, observation and weight paths (or a labeled point set) for one physical-measure draw.
inline void command_simulate(const RunContext& ctx, RunOutput& out)
{
    const auto& c = ctx.config;
    const AnyModel model = make_model(c.model, c.T);
    const RngStream noise(c.seed, {Purpose::signal_noise, hidden_signal, 0});
    const RngStream obs_noise(c.seed, {Purpose::observation_noise, 0, 0});
    if (const auto* cl = std::get_if<ClusterModel>(&model)) {
        const auto pts = simulate_cluster_P(*cl, c.seed, 0);
        out.write_with("points.csv", [&](std::ostream& os) { write_csv(os, pts); });
        out.stage("simulate");
        return;
    }
    const TimeGrid grid = c.grid(c.n_set.front());
    if (const auto* sm = std::get_if<SpatialModel>(&model)) {
        const auto [x, y] = simulate_spatial_P(*sm, grid, noise, obs_noise);
        out.write_with("signal.csv", [&](std::ostream& os) { write_csv(os, x, grid); });
        out.write_with("observation.csv", [&](std::ostream& os) { write_csv(os, y, grid); });
        const auto w = weight_spatial(*sm, x, y, grid);
        out.write_with("weights.csv", [&](std::ostream& os) { write_csv(os, w, w, grid); });
        out.stage("simulate");
        return;
    }
    detail::with_diffusion_model(model, "simulate", [&](const auto& m) {
        const auto x = simulate_signal(m, grid, noise);
        const auto y = simulate_observation_P(m, x, grid, obs_noise);
        out.write_with("signal.csv", [&](std::ostream& os) { write_csv(os, x, grid); });
        out.write_with("observation.csv", [&](std::ostream& os) { write_csv(os, y, grid); });
        const auto exact = weight_exact(m, x, y, grid);
        const auto picard = weight_picard(m, x, y, grid);
        out.write_with("weights.csv", [&](std::ostream& os) { write_csv(os, exact, picard, grid); });
    });
    out.stage("simulate");
}

/// Particle filter for a white-noise model on one physical-measure observation path.
inline void command_filter_gwn(const RunContext& ctx, RunOutput& out)
{
    const auto& c = ctx.config;
    const AnyModel model = make_model(c.model, c.T);
    const TimeGrid grid = c.grid();
    const auto battery = c.battery();
    const auto times = c.checkpoint_times();
    detail::with_diffusion_model(model, "filter-gwn", [&](const auto& m) {
        const auto x = simulate_signal(m, grid, RngStream(c.seed, {Purpose::signal_noise, hidden_signal, 0}));
        const auto y = simulate_observation_P(m, x, grid, RngStream(c.seed, {Purpose::observation_noise, 0, 0}));
        out.write_with("observation.csv", [&](std::ostream& os) { write_csv(os, y, grid); });
        const auto ens = build_ensemble(m, grid, y, ctx.ensemble(c.n_set));
        out.stage("ensemble");
        out.write_with("filter.csv", [&](std::ostream& os) { detail::write_estimates(os, ens, battery, times, c.n_set); });
        const std::span<const TestFunction<1>> b(battery);
        const auto z = zakai_residual(ens, b, times);
        const auto k = ks_residual(ens, b, times);
        out.write_with("residuals.csv", [&](std::ostream& os) { detail::write_residuals(os, z, k); });
        out.stage("residuals");
        if constexpr (std::is_same_v<std::decay_t<decltype(m)>, LinearGaussianModel>) {
            auto lin = m;
            lin.clip = std::numeric_limits<double>::infinity();
            const auto kb = kalman_bucy(linear_system_of(lin), y, grid);
            out.write_with("kalman.csv", [&](std::ostream& os) {
                os << "t,mean,variance\n";
                os.precision(17);
                for (std::size_t s = 0; s < kb.size(); ++s)
                    os << grid.time(static_cast<int>(s)) << ',' << kb[s].m[0] << ',' << kb[s].P(0, 0) << '\n';
            });
            out.stage("kalman");
        }
    });
}

/// Particle filter for the spatial model on one physical-measure draw.
inline void command_filter_spatial(const RunContext& ctx, RunOutput& out)
{
    const auto& c = ctx.config;
    const AnyModel model = make_model(c.model, c.T);
    const auto& sm = detail::require_model<SpatialModel>(model, "filter-spatial", "spatial_bounded");
    const TimeGrid grid = c.grid();
    const auto battery = c.battery();
    const auto times = c.checkpoint_times();
    const auto [x, y] = simulate_spatial_P(sm, grid, RngStream(c.seed, {Purpose::signal_noise, hidden_signal, 0}),
                                           RngStream(c.seed, {Purpose::observation_noise, 0, 0}));
    out.write_with("signal.csv", [&](std::ostream& os) { write_csv(os, x, grid); });
    out.write_with("observation.csv", [&](std::ostream& os) { write_csv(os, y, grid); });
    const auto ens = build_spatial_ensemble(sm, grid, y, ctx.ensemble({}));
    out.stage("ensemble");
    out.write_with("filter.csv", [&](std::ostream& os) { detail::write_estimates(os, ens, battery, times, {}); });
    const std::span<const TestFunction<1>> b(battery);
    const auto z = zakai_residual(ens, b, times);
    const auto k = ks_residual(ens, b, times);
    out.write_with("residuals.csv", [&](std::ostream& os) { detail::write_residuals(os, z, k); });
    out.stage("residuals");
}

/// Cluster posteriors by Monte Carlo, enumeration and the normalized recursion.
inline void command_filter_cluster(const RunContext& ctx, RunOutput& out)
{
    const auto& c = ctx.config;
    const AnyModel model = make_model(c.model, c.T);
    const auto& cm = detail::require_model<ClusterModel>(model, "filter-cluster", "cluster");
    const auto times = c.checkpoint_times();
    for (std::size_t i = 0; i < c.cluster.instances; ++i) {
        const auto inst = detail::cluster_instance(cm, c.seed, i, c.cluster.max_points);
        const auto& obs = inst.observed;
        const auto battery = cluster_phi::standard_battery(obs.size());
        const auto sfx = detail::instance_suffix(i);
        out.write_with("points" + sfx, [&](std::ostream& os) { write_csv(os, inst); });
        const auto mc = cluster_filter_mc(cm, obs, times, battery, c.cluster.particles, c.seed,
                                          static_cast<std::uint32_t>(i), ctx.parallel(), c.groups);
        out.write_with("mc" + sfx, [&](std::ostream& os) { write_csv(os, mc); });
        const auto exact = cluster_filter_exact(cm, obs, times, battery, c.cluster.max_points);
        out.write_with("exact" + sfx, [&](std::ostream& os) { write_csv(os, exact); });
        const auto ks = cluster_ks_recursion(cm, obs, times, battery, 1e-12, c.cluster.max_points);
        out.write_with("ks" + sfx, [&](std::ostream& os) { write_csv(os, ks); });
        const auto res = cluster_zakai_residual(cm, obs, times, battery, c.cluster.max_points);
        out.write_with("residuals" + sfx, [&](std::ostream& os) { detail::write_residuals(os, res, {}); });
    }
    out.stage("cluster");
}

template <DiffusionModel M>
ConvergenceReport convergence_report(const RunContext& ctx, const M& model)
{
    const auto& c = ctx.config;
    ConvergenceOptions o;
    o.n_set = c.n_set;
    o.particles = c.particles;
    o.replicates = c.replicates;
    o.checkpoints = c.checkpoints;
    o.seed = c.seed;
    o.parallel = ctx.parallel();
    o.groups = c.groups;
    o.budget = c.budget;
    const auto battery = c.battery();
    return run_convergence(model, c.grid(), std::span<const TestFunction<1>>(battery), o);
}

/// Error |rho^n_T - rho_T| and sup_t |U^n_t|^2 across the n-set over reference-measure replicates.
inline void command_convergence(const RunContext& ctx, RunOutput& out)
{
    const AnyModel model = make_model(ctx.config.model, ctx.config.T);
    detail::with_diffusion_model(model, "convergence", [&](const auto& m) {
        const auto rep = convergence_report(ctx, m);
        out.stage("convergence");
        out.write_with("convergence.csv", [&](std::ostream& os) { write_convergence_csv(os, rep); });
        out.write_with("boundedness.csv", [&](std::ostream& os) { write_boundedness_csv(os, rep); });
        out.write_with("fits.csv", [&](std::ostream& os) { detail::write_fits(os, rep); });
    });
}

/// Richardson-extrapolated error 2 rho^{2n} - rho^n against rho.
inline void command_richardson(const RunContext& ctx, RunOutput& out)
{
    const AnyModel model = make_model(ctx.config.model, ctx.config.T);
    detail::with_diffusion_model(model, "richardson", [&](const auto& m) {
        const auto rep = convergence_report(ctx, m);
        out.stage("convergence");
        out.write_with("richardson.csv", [&](std::ostream& os) { write_convergence_csv(os, rep, true); });
        out.write_with("fits.csv", [&](std::ostream& os) { detail::write_fits(os, rep); });
    });
}

/// U^n series on one path, one Galerkin limit run, and limit-law moments over replicates.
inline void command_error_expansion(const RunContext& ctx, RunOutput& out)
{
    const auto& c = ctx.config;
    const AnyModel model = make_model(c.model, c.T);
    detail::with_diffusion_model(model, "error-expansion", [&](const auto& m) {
        const auto battery = c.battery();
        const std::span<const TestFunction<1>> b(battery);
        const auto times = c.checkpoint_times();
        const int n = c.limit.n;
        const TimeGrid grid = c.grid(n);
        const auto y = simulate_observation_Q(grid, RngStream(c.seed, {Purpose::observation_q, 0, 0}), 1);
        auto eo = ctx.ensemble(c.n_set);
        if (std::find(eo.picard.begin(), eo.picard.end(), n) == eo.picard.end()) eo.picard.push_back(n);
        std::sort(eo.picard.begin(), eo.picard.end());
        const auto ens = build_ensemble(m, grid, y, eo);
        const auto un = u_n_series(ens, b, std::span<const int>(eo.picard), times);
        out.write_with("un.csv", [&](std::ostream& os) {
            os << "phi_id,n,t,U,se\n";
            os.precision(17);
            for (const auto& s : un)
                for (std::size_t i = 0; i < s.times.size(); ++i)
                    os << s.phi << ',' << s.n << ',' << s.times[i] << ',' << s.value[i] << ',' << s.se[i] << '\n';
        });
        const auto basis = make_basis(m, c.galerkin);
        const auto sources = galerkin_sources(ens, *basis, 0);
        const auto run = galerkin_limit_u(*basis, sources[0], y, grid, times, LimitNoise::independent,
                                          RngStream(c.seed, {Purpose::limit_noise, 0, 0}));
        out.write_with("galerkin.csv", [&](std::ostream& os) { write_galerkin_csv(os, run, *basis, b); });
        out.stage("single_path");

        LimitMomentOptions lo;
        lo.n = n;
        lo.replicates = c.limit.replicates;
        lo.particles = c.limit.particles;
        lo.seed = c.seed;
        lo.parallel = ctx.parallel();
        lo.groups = c.groups;
        lo.galerkin = c.galerkin;
        std::vector<LimitMomentReport> reps;
        for (const auto& f : battery) reps.push_back(run_limit_moments(m, grid, f, lo));
        out.stage("limit_moments");
        out.write_with("limit.csv", [&](std::ostream& os) {
            for (std::size_t i = 0; i < reps.size(); ++i) {
                std::ostringstream s;
                write_limit_csv(s, reps[i]);
                const std::string text = s.str();
                os << (i == 0 ? text : text.substr(text.find('\n') + 1));
            }
        });
        out.write_with("limit_summary.csv", [&](std::ostream& os) {
            os << "phi_id,n,basis,mean_hat,mean_hat_se,mean_limit,mean_limit_se,var_hat,var_hat_se,var_limit,"
                  "var_limit_se,prelimit_correlation\n";
            os.precision(17);
            for (const auto& r : reps)
                os << r.phi << ',' << r.n << ',' << r.basis << ',' << r.mean_hat << ',' << r.mean_hat_se << ','
                   << r.mean_limit << ',' << r.mean_limit_se << ',' << r.var_hat << ',' << r.var_hat_se << ','
                   << r.var_limit << ',' << r.var_limit_se << ',' << r.prelimit_correlation << '\n';
        });
    });
}

// ---------------------------------------------------------------------------
// Report

struct SlopeSummary {
    std::string phi;
    std::size_t points = 0;
    stats::LineFit fit;
    double ci_lo = std::numeric_limits<double>::quiet_NaN();
    double ci_hi = std::numeric_limits<double>::quiet_NaN();
};

/// Per-phi log-log slopes with 95% t-intervals from (phi_id, n, abs_error) rows at the latest checkpoint.
inline std::vector<SlopeSummary> slope_report(const std::vector<std::string>& csv_texts)
{
    struct Row {
        double n, checkpoint, err;
    };
    std::map<std::string, std::vector<Row>> rows;
    for (const auto& text : csv_texts) {
        std::istringstream in(text);
        std::string line;
        if (!std::getline(in, line)) continue;
        std::vector<std::string> head;
        for (std::stringstream ss(line); std::getline(ss, line, ',');) head.push_back(line);
        auto col = [&](const std::string& name) {
            const auto it = std::find(head.begin(), head.end(), name);
            if (it == head.end()) throw ConfigError("report: input lacks a '" + name + "' column");
            return static_cast<std::size_t>(it - head.begin());
        };
        const std::size_t cp = col("phi_id"), cn = col("n"), cc = col("checkpoint"), ce = col("abs_error");
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            std::vector<std::string> f;
            for (std::stringstream ss(line); std::getline(ss, line, ',');) f.push_back(line);
            if (f.size() < head.size()) throw ConfigError("report: short row in input");
            rows[f[cp]].push_back({std::stod(f[cn]), std::stod(f[cc]), std::stod(f[ce])});
        }
    }
    if (rows.empty()) throw ConfigError("report: no convergence rows in the input");
    std::vector<SlopeSummary> out;
    for (const auto& [phi, r] : rows) {
        double last = 0.0;
        for (const auto& row : r) last = std::max(last, row.checkpoint);
        std::vector<double> n, e;
        for (const auto& row : r)
            if (row.checkpoint == last && row.err > 0.0) {
                n.push_back(row.n);
                e.push_back(row.err);
            }
        SlopeSummary s;
        s.phi = phi;
        s.points = n.size();
        s.fit = stats::loglog_slope(n, e);
        if (s.fit.defined()) {
            double half = 0.0;
            if (n.size() > 2) {
                const boost::math::students_t dist(static_cast<double>(n.size() - 2));
                half = boost::math::quantile(boost::math::complement(dist, 0.025)) * s.fit.slope_se;
            }
            s.ci_lo = s.fit.slope - half;
            s.ci_hi = s.fit.slope + half;
        }
        out.push_back(s);
    }
    return out;
}

inline void write_report_csv(std::ostream& os, const std::vector<SlopeSummary>& rep)
{
    os << "phi_id,points,slope,slope_se,ci_lo,ci_hi,defined\n";
    os.precision(17);
    for (const auto& s : rep)
        os << s.phi << ',' << s.points << ',' << s.fit.slope << ',' << s.fit.slope_se << ',' << s.ci_lo << ','
           << s.ci_hi << ',' << (s.fit.defined() ? 1 : 0) << '\n';
}

inline void render_report(std::ostream& os, const std::vector<SlopeSummary>& rep)
{
    os << std::left << std::setw(10) << "phi" << std::setw(8) << "points" << "slope\n";
    for (const auto& s : rep) {
        os << std::setw(10) << s.phi << std::setw(8) << s.points;
        if (!s.fit.defined()) {
            os << "undefined (needs two distinct n)\n";
            continue;
        }
        os << std::fixed << std::setprecision(3) << s.fit.slope << " +- " << s.fit.slope_se << "  (95% CI "
           << s.ci_lo << ", " << s.ci_hi << ")\n"
           << std::defaultfloat;
    }
}

inline std::string read_text_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("report: cannot open '" + path + "'");
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// ---------------------------------------------------------------------------
// Dispatch

inline const std::vector<std::string>& run_commands()
{
    static const std::vector<std::string> names{"simulate",    "filter-gwn",      "filter-spatial", "filter-cluster",
                                                "convergence", "error-expansion", "richardson"};
    return names;
}

/// Run one data-producing subcommand into `dir` and write its manifest.
inline nlohmann::json run_command(const std::string& name, const RunContext& ctx, const std::filesystem::path& dir)
{
    RunOutput out(dir, name, ctx.config);
    if (name == "simulate") command_simulate(ctx, out);
    else if (name == "filter-gwn") command_filter_gwn(ctx, out);
    else if (name == "filter-spatial") command_filter_spatial(ctx, out);
    else if (name == "filter-cluster") command_filter_cluster(ctx, out);
    else if (name == "convergence") command_convergence(ctx, out);
    else if (name == "error-expansion") command_error_expansion(ctx, out);
    else if (name == "richardson") command_richardson(ctx, out);
    else throw ConfigError("unknown subcommand '" + name + "'");
    out.finish();
    return out.manifest();
}

}  // namespace filterlab
