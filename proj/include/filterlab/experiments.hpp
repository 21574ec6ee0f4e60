#pragma once

// Multi-replicate drivers: Picard convergence order, error boundedness,
// Richardson extrapolation and limit-law moment comparison.

#include <algorithm>
#include <cmath>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "filterlab/ensemble.hpp"
#include "filterlab/error_expansion.hpp"
#include "filterlab/stats.hpp"

namespace filterlab {

struct ConvergenceOptions {
    std::vector<int> n_set{4, 8, 16, 32, 64};
    std::size_t particles = 100000;
    std::size_t replicates = 24;
    std::vector<double> checkpoints;  ///< times for sup_t |U^n_t|; the horizon is always included
    std::uint64_t seed = 1;
    ParallelOptions parallel;
    std::size_t groups = 100;
    double budget = 2e11;
};

struct PhiConvergence {
    std::string phi;
    std::vector<double> n;
    std::vector<double> error;  ///< RMS over replicates of |rho^n_T - rho_T|, particle noise removed
    std::vector<double> error_se;
    stats::LineFit fit;
    std::vector<double> richardson_n;
    std::vector<double> richardson_error;  ///< RMS of |2 rho^{2n}_T - rho^n_T - rho_T|
    std::vector<double> richardson_se;
    stats::LineFit richardson_fit;
    std::vector<double> sup_u2;  ///< E[sup_t |U^n_t|^2] per n
    std::vector<double> sup_u2_se;

    /// max over n of E[sup|U^n|^2] relative to the first n, and min likewise.
    std::pair<double, double> sup_ratio_range() const
    {
        double lo = 1.0, hi = 1.0;
        for (double v : sup_u2) {
            lo = std::min(lo, v / sup_u2.front());
            hi = std::max(hi, v / sup_u2.front());
        }
        return {lo, hi};
    }
};

struct ConvergenceReport {
    double horizon = 0.0;
    std::size_t particles = 0, replicates = 0;
    std::vector<PhiConvergence> phis;
};

namespace detail {

/// RMS of per-replicate differences after removing their particle variance, with a delta-method SE.
inline std::pair<double, double> debiased_rms(std::span<const double> d, std::span<const double> se)
{
    std::vector<double> v(d.size());
    for (std::size_t r = 0; r < d.size(); ++r) v[r] = d[r] * d[r] - se[r] * se[r];
    const double ms = stats::mean(v);
    const double rms = std::sqrt(std::max(ms, 0.0));
    const double ms_se = v.size() > 1 ? stats::standard_error(v) : 0.0;
    return {rms, rms > 0.0 ? ms_se / (2.0 * rms) : ms_se};
}

/// Mean and SE of sum_k c_k phi_k (L_k^{(col)} ...) style per-particle combinations.
template <class Ens>
std::pair<double, double> weight_combination(const Ens& ens, const std::vector<double>& phi, std::size_t slot,
                                             std::span<const std::pair<int, double>> terms)
{
    std::vector<double> v(ens.size(), 0.0);
    for (const auto& [n, c] : terms)
        for (std::size_t k = 0; k < ens.size(); ++k) v[k] += c * phi[k] * std::exp(ens.log_weight(k, slot, n));
    return grouped_mean(v, ens.groups());
}

}  // namespace detail

/**
 * Replicates observation paths under the reference measure, runs one ensemble
 * per path with exact and Picard weights on common random numbers, and fits
 * log error against log n.
 */
template <DiffusionModel M>
ConvergenceReport run_convergence(const M& model, const TimeGrid& grid,
                                  std::span<const TestFunction<M::dx>> battery, ConvergenceOptions opts)
{
    if (opts.n_set.empty()) throw ConfigError("convergence.n: empty Picard set");
    if (!std::is_sorted(opts.n_set.begin(), opts.n_set.end())) throw ConfigError("convergence.n: must be ascending");
    if (opts.replicates < 2) throw ConfigError("convergence.replicates: need at least two");
    const double T = grid.horizon();
    if (std::find(opts.checkpoints.begin(), opts.checkpoints.end(), T) == opts.checkpoints.end())
        opts.checkpoints.push_back(T);
    std::sort(opts.checkpoints.begin(), opts.checkpoints.end());
    for (int n : opts.n_set) (void)grid.with_picard(n);

    const std::size_t nn = opts.n_set.size(), nf = battery.size(), R = opts.replicates;
    std::vector<std::pair<int, int>> pairs;
    for (int n : opts.n_set)
        if (std::find(opts.n_set.begin(), opts.n_set.end(), 2 * n) != opts.n_set.end()) pairs.push_back({n, 2 * n});

    // [phi][n][replicate]
    using Table = std::vector<std::vector<std::vector<double>>>;
    auto table = [&](std::size_t inner) { return Table(nf, std::vector<std::vector<double>>(inner, std::vector<double>(R))); };
    Table diff = table(nn), diff_se = table(nn), sup = table(nn), rich = table(pairs.size()), rich_se = table(pairs.size());

    for (std::size_t r = 0; r < R; ++r) {
        const auto rep = static_cast<std::uint32_t>(r);
        const auto y = simulate_observation_Q(grid, RngStream(opts.seed, {Purpose::observation_q, 0, rep}), M::dy);
        EnsembleOptions eo;
        eo.particles = opts.particles;
        eo.picard = opts.n_set;
        eo.checkpoints = opts.checkpoints;
        eo.seed = opts.seed;
        eo.replicate = rep;
        eo.parallel = opts.parallel;
        eo.groups = opts.groups;
        eo.budget = opts.budget;
        const auto ens = build_ensemble(model, grid, y, eo);
        const std::size_t last = ens.checkpoint_slot(T);
        for (std::size_t f = 0; f < nf; ++f) {
            const auto phi_T = ens.values(battery[f], T);
            for (std::size_t i = 0; i < nn; ++i) {
                const int n = opts.n_set[i];
                const std::pair<int, double> terms[] = {{n, 1.0}, {0, -1.0}};
                const auto [d, se] = detail::weight_combination(ens, phi_T, last, terms);
                diff[f][i][r] = d;
                diff_se[f][i][r] = se;
                double s = 0.0;
                for (double t : opts.checkpoints) {
                    const auto e = ens.error_contributions(battery[f], t, n);
                    const double u = stats::mean(e);
                    s = std::max(s, u * u);
                }
                sup[f][i][r] = s;
            }
            for (std::size_t p = 0; p < pairs.size(); ++p) {
                const std::pair<int, double> terms[] = {{pairs[p].second, 2.0}, {pairs[p].first, -1.0}, {0, -1.0}};
                const auto [d, se] = detail::weight_combination(ens, phi_T, last, terms);
                rich[f][p][r] = d;
                rich_se[f][p][r] = se;
            }
        }
    }

    ConvergenceReport rep;
    rep.horizon = T;
    rep.particles = opts.particles;
    rep.replicates = R;
    for (std::size_t f = 0; f < nf; ++f) {
        PhiConvergence pc;
        pc.phi = battery[f].name;
        for (std::size_t i = 0; i < nn; ++i) {
            const auto [e, se] = detail::debiased_rms(diff[f][i], diff_se[f][i]);
            pc.n.push_back(opts.n_set[i]);
            pc.error.push_back(e);
            pc.error_se.push_back(se);
            pc.sup_u2.push_back(stats::mean(sup[f][i]));
            pc.sup_u2_se.push_back(stats::group_jackknife_se(R, [&](std::size_t skip) {
                double s = 0.0;
                for (std::size_t r = 0; r < R; ++r)
                    if (r != skip) s += sup[f][i][r];
                return s / static_cast<double>(R - 1);
            }));
        }
        for (std::size_t p = 0; p < pairs.size(); ++p) {
            const auto [e, se] = detail::debiased_rms(rich[f][p], rich_se[f][p]);
            pc.richardson_n.push_back(pairs[p].first);
            pc.richardson_error.push_back(e);
            pc.richardson_se.push_back(se);
        }
        auto positive_fit = [](const std::vector<double>& x, const std::vector<double>& y) {
            std::vector<double> px, py;
            for (std::size_t i = 0; i < x.size(); ++i)
                if (y[i] > 0.0) {
                    px.push_back(x[i]);
                    py.push_back(y[i]);
                }
            return stats::loglog_slope(px, py);
        };
        pc.fit = positive_fit(pc.n, pc.error);
        pc.richardson_fit = positive_fit(pc.richardson_n, pc.richardson_error);
        rep.phis.push_back(std::move(pc));
    }
    return rep;
}

/// Long-format table: phi_id, n, checkpoint, abs_error, se, slope_fit.
inline void write_convergence_csv(std::ostream& os, const ConvergenceReport& rep, bool richardson = false)
{
    os << "phi_id,n,checkpoint,abs_error,se,slope_fit\n";
    os.precision(17);
    for (const auto& pc : rep.phis) {
        const auto& n = richardson ? pc.richardson_n : pc.n;
        const auto& e = richardson ? pc.richardson_error : pc.error;
        const auto& se = richardson ? pc.richardson_se : pc.error_se;
        const double slope = richardson ? pc.richardson_fit.slope : pc.fit.slope;
        for (std::size_t i = 0; i < n.size(); ++i)
            os << pc.phi << ',' << n[i] << ',' << rep.horizon << ',' << e[i] << ',' << se[i] << ',' << slope << '\n';
    }
}

/// Long-format table: phi_id, n, sup_u2, se.
inline void write_boundedness_csv(std::ostream& os, const ConvergenceReport& rep)
{
    os << "phi_id,n,sup_u2,se\n";
    os.precision(17);
    for (const auto& pc : rep.phis)
        for (std::size_t i = 0; i < pc.n.size(); ++i)
            os << pc.phi << ',' << pc.n[i] << ',' << pc.sup_u2[i] << ',' << pc.sup_u2_se[i] << '\n';
}

// ---------------------------------------------------------------------------
// Limit-law moments

struct GalerkinOptions {
    std::string basis = "auto";  ///< auto, nodal or polynomial
    double lo = -6.0, hi = 6.0, spacing = 0.05;
    int degree = 6;
    double max_dropped = 0.5;
};

template <DiffusionModel M>
std::unique_ptr<GalerkinBasis> make_basis(const M& model, const GalerkinOptions& g)
    requires(M::dx == 1 && M::dy == 1)
{
    std::optional<ScalarPolynomialForm> form;
    if constexpr (HasPolynomialForm<M>) form = model.polynomial_form();
    if (g.basis == "polynomial" || (g.basis == "auto" && form)) {
        if (!form) throw ConfigError("galerkin.basis: model has no polynomial form");
        return std::make_unique<PolynomialBasis>(*form, g.degree, g.max_dropped);
    }
    if (g.basis != "nodal" && g.basis != "auto") throw ConfigError("galerkin.basis: unknown basis '" + g.basis + "'");
    return std::make_unique<NodalBasis>(model, g.lo, g.hi, g.spacing);
}

struct LimitMomentOptions {
    int n = 64;
    std::size_t replicates = 200;
    std::size_t particles = 4000;
    std::uint64_t seed = 1;
    ParallelOptions parallel;
    std::size_t groups = 100;
    GalerkinOptions galerkin;
    double z = 3.0;
};

struct LimitMomentReport {
    std::string phi;
    std::string basis;
    int n = 0;
    std::vector<double> u_hat, u_hat_se, u_limit, u_prelimit;
    double mean_hat = 0.0, mean_hat_se = 0.0, mean_limit = 0.0, mean_limit_se = 0.0;
    double var_hat = 0.0, var_hat_se = 0.0, var_limit = 0.0, var_limit_se = 0.0;
    double particle_variance = 0.0;  ///< mean squared particle SE removed from var_hat
    double prelimit_correlation = 0.0;
    double z = 3.0;

    double mean_z() const { return std::abs(mean_hat - mean_limit) / std::hypot(mean_hat_se, mean_limit_se); }
    double var_z() const { return std::abs(var_hat - var_limit) / std::hypot(var_hat_se, var_limit_se); }
    bool passed() const { return mean_z() <= z && var_z() <= z; }
};

/**
 * Per (Y, B) replicate: U^n_T(phi) from the particles, the Galerkin limit
 * U_T(phi) driven by an independent R, and the pre-limit Galerkin value
 * driven by R^n from the same Y.
 */
template <DiffusionModel M>
LimitMomentReport run_limit_moments(const M& model, const TimeGrid& grid, const TestFunction<1>& phi,
                                    const LimitMomentOptions& opts)
    requires(M::dx == 1 && M::dy == 1)
{
    const TimeGrid g = grid.with_picard(opts.n);
    const auto basis = make_basis(model, opts.galerkin);
    const double T = g.horizon();
    const std::vector<double> at{T};
    LimitMomentReport rep;
    rep.phi = phi.name;
    rep.basis = basis->name();
    rep.n = opts.n;
    rep.z = opts.z;
    for (std::size_t r = 0; r < opts.replicates; ++r) {
        const auto id = static_cast<std::uint32_t>(r);
        const auto y = simulate_observation_Q(g, RngStream(opts.seed, {Purpose::observation_q, 0, id}), 1);
        EnsembleOptions eo;
        eo.particles = opts.particles;
        eo.picard = {opts.n};
        eo.checkpoints = {T};
        eo.seed = opts.seed;
        eo.replicate = id;
        eo.parallel = opts.parallel;
        eo.groups = opts.groups;
        const auto ens = build_ensemble(model, g, y, eo);
        const auto [u, se] = grouped_mean(ens.error_contributions(phi, T, opts.n), ens.groups());
        const auto sources = galerkin_sources(ens, *basis, opts.n);
        const RngStream noise(opts.seed, {Purpose::limit_noise, 0, id});
        const auto lim = galerkin_limit_u(*basis, sources[0], y, g, at, LimitNoise::independent, noise);
        const auto pre = galerkin_limit_u(*basis, sources[1], y, g, at, LimitNoise::pre_limit, noise);
        rep.u_hat.push_back(u);
        rep.u_hat_se.push_back(se);
        rep.u_limit.push_back(lim.value(0, *basis, phi));
        rep.u_prelimit.push_back(pre.value(0, *basis, phi));
    }
    for (double s : rep.u_hat_se) rep.particle_variance += s * s;
    rep.particle_variance /= static_cast<double>(rep.u_hat_se.size());
    rep.mean_hat = stats::mean(rep.u_hat);
    rep.mean_hat_se = stats::standard_error(rep.u_hat);
    rep.var_hat = stats::variance(rep.u_hat) - rep.particle_variance;
    rep.var_hat_se = stats::variance_standard_error(rep.u_hat);
    rep.mean_limit = stats::mean(rep.u_limit);
    rep.mean_limit_se = stats::standard_error(rep.u_limit);
    rep.var_limit = stats::variance(rep.u_limit);
    rep.var_limit_se = stats::variance_standard_error(rep.u_limit);
    rep.prelimit_correlation = stats::correlation(rep.u_hat, rep.u_prelimit);
    return rep;
}

/// Galerkin run as t, phi_id, U_value.
inline void write_galerkin_csv(std::ostream& os, const GalerkinRun& run, const GalerkinBasis& basis,
                               std::span<const TestFunction<1>> battery)
{
    os << "t,phi_id,U_value\n";
    os.precision(17);
    for (std::size_t i = 0; i < run.times.size(); ++i)
        for (const auto& f : battery) os << run.times[i] << ',' << f.name << ',' << run.value(i, basis, f) << '\n';
}

/// Replicate table of a limit-moment run: replicate, u_hat, u_hat_se, u_limit, u_prelimit.
inline void write_limit_csv(std::ostream& os, const LimitMomentReport& rep)
{
    os << "replicate,phi_id,u_hat,u_hat_se,u_limit,u_prelimit\n";
    os.precision(17);
    for (std::size_t r = 0; r < rep.u_hat.size(); ++r)
        os << r << ',' << rep.phi << ',' << rep.u_hat[r] << ',' << rep.u_hat_se[r] << ',' << rep.u_limit[r] << ','
           << rep.u_prelimit[r] << '\n';
}

}  // namespace filterlab
