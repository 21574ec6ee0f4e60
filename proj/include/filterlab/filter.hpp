#pragma once

// Statistical checks on weighted particle ensembles: Zakai and
// Kushner-Stratonovich residuals, the innovation test, and the exchangeable
// average convergence table.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/ensemble.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/rng.hpp"
#include "filterlab/stats.hpp"

namespace filterlab {

struct ResidualSeries {
    std::string phi;
    std::vector<double> times;
    std::vector<double> value;
    std::vector<double> se;

    /// max_t |r(t)| / se(t); zero residuals with zero SE count as 0.
    double max_abs_z() const
    {
        double z = 0.0;
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (value[i] == 0.0) continue;
            z = std::max(z, std::abs(value[i]) / se[i]);
        }
        return z;
    }

    bool within(double z_limit) const { return max_abs_z() <= z_limit; }
};

struct ResidualOptions {
    int resamples = 200;
    std::uint64_t bootstrap_seed = 0x5eedb007ull;
    std::size_t max_table_bytes = std::size_t{512} << 20;
};

namespace detail {

template <class Ensemble>
std::vector<int> checkpoint_indices(const Ensemble& ens, std::span<const double> checkpoints)
{
    std::vector<int> idx;
    for (double t : checkpoints) idx.push_back(ens.grid().index_of(t));
    if (idx.empty()) idx.push_back(ens.grid().fine_steps());
    return idx;
}

inline std::vector<double> checkpoint_times(const TimeGrid& grid, const std::vector<int>& idx)
{
    std::vector<double> t;
    for (int k : idx) t.push_back(grid.time(k));
    return t;
}

inline std::size_t pair_count(int j) { return static_cast<std::size_t>(j * (j + 1) / 2); }

}  // namespace detail

/**
 * Zakai residual r(t) = rho(phi)_t - rho(phi)_0 - sum rho(A phi) dt - sum phi dL
 *                       - sum_j rho(grad phi . alpha_j) dY_j
 *                       - 1/2 sum_jl rho(Q'_jl phi) (dY_j dY_l - delta_jl mu_j dt),
 * written as a particle average of per-particle martingale sums. The last two
 * terms vanish for Model 1. Standard errors: bootstrap over particles.
 */
template <class Kernel>
std::vector<ResidualSeries> zakai_residual(const ParticleEnsemble<Kernel>& ens,
                                           std::span<const TestFunction<Kernel::dx>> battery,
                                           std::span<const double> checkpoints, const ResidualOptions& opts = {})
{
    const auto& kernel = ens.kernel();
    const TimeGrid& grid = ens.grid();
    const ObservationPath& obs = ens.observation();
    const std::vector<int> idx = detail::checkpoint_indices(ens, checkpoints);
    const std::size_t nf = battery.size(), nc = idx.size(), N = ens.size();
    const int J = kernel.channels();
    const double dt = grid.dt();
    std::vector<double> mu(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) mu[static_cast<std::size_t>(j)] = kernel.channel_mass(j);

    // r[(k * nf + f) * nc + c]
    std::vector<double> r(N * nf * nc, 0.0);
    parallel_for(N, ens.options().parallel.threads, [&](std::size_t k) {
        std::vector<LocalTerms> prev(nf), cur(nf);
        for (auto& t : prev) t.resize(J);
        for (auto& t : cur) t.resize(J);
        std::vector<double> acc(nf, 0.0);
        double prev_w = 1.0;
        ens.replay(k, [&](int s, const Vec<Kernel::dx>& x, double log_w, std::span<const double>) {
            const double w = std::exp(log_w);
            for (std::size_t f = 0; f < nf; ++f) {
                kernel.local_terms(battery[f], x, cur[f]);
                if (s > 0) {
                    const LocalTerms& p = prev[f];
                    double inc = w * cur[f].phi - prev_w * p.phi - prev_w * p.generator * dt - p.phi * (w - prev_w);
                    double drive = 0.0, second = 0.0;
                    for (int j = 0; j < J; ++j) {
                        const auto uj = static_cast<std::size_t>(j);
                        const double dyj = obs.increment(s - 1, j);
                        drive += p.grad_alpha[uj] * dyj;
                        for (int l = 0; l < J; ++l) {
                            const auto ul = static_cast<std::size_t>(l);
                            const double q = p.h[uj] * p.grad_alpha[ul] + p.h[ul] * p.grad_alpha[uj] +
                                             p.alpha_hess[uj * static_cast<std::size_t>(J) + ul];
                            double eps = dyj * obs.increment(s - 1, l);
                            if (j == l) eps -= mu[uj] * dt;
                            second += q * eps;
                        }
                    }
                    inc -= prev_w * drive + 0.5 * prev_w * second;
                    acc[f] += inc;
                }
                std::swap(prev[f], cur[f]);
            }
            prev_w = w;
            for (std::size_t c = 0; c < nc; ++c) {
                if (idx[c] != s) continue;
                for (std::size_t f = 0; f < nf; ++f) r[(k * nf + f) * nc + c] = acc[f];
            }
        });
    });

    std::vector<ResidualSeries> out(nf);
    const std::vector<double> times = detail::checkpoint_times(grid, idx);
    for (std::size_t f = 0; f < nf; ++f) {
        out[f].phi = battery[f].name;
        out[f].times = times;
        out[f].value.assign(nc, 0.0);
        for (std::size_t k = 0; k < N; ++k)
            for (std::size_t c = 0; c < nc; ++c) out[f].value[c] += r[(k * nf + f) * nc + c];
        for (double& v : out[f].value) v /= static_cast<double>(N);
    }

    // Bootstrap over particles, one index draw shared by every phi and checkpoint.
    std::vector<std::vector<double>> boot(nf * nc, std::vector<double>(static_cast<std::size_t>(opts.resamples)));
    RngStream rng(opts.bootstrap_seed, {Purpose::bootstrap, 0, ens.options().replicate});
    std::vector<double> sums(nf * nc);
    for (int b = 0; b < opts.resamples; ++b) {
        std::fill(sums.begin(), sums.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            const std::size_t k = rng.below(N);
            const double* rk = r.data() + k * nf * nc;
            for (std::size_t q = 0; q < nf * nc; ++q) sums[q] += rk[q];
        }
        for (std::size_t q = 0; q < nf * nc; ++q) boot[q][static_cast<std::size_t>(b)] = sums[q] / static_cast<double>(N);
    }
    for (std::size_t f = 0; f < nf; ++f) {
        out[f].se.resize(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            out[f].se[c] = opts.resamples >= 2 ? std::sqrt(stats::variance(boot[f * nc + c]))
                                               : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

template <class Kernel>
ResidualSeries zakai_residual(const ParticleEnsemble<Kernel>& ens, const TestFunction<Kernel::dx>& phi,
                              std::span<const double> checkpoints, const ResidualOptions& opts = {})
{
    return zakai_residual(ens, std::span<const TestFunction<Kernel::dx>>(&phi, 1), checkpoints, opts).front();
}

/**
 * Per-step weighted sums, one table per particle group, from which the
 * normalized filter and every term of the Kushner-Stratonovich increment are
 * assembled. Column layout per step: L, L h_j, L h_j h_l (j <= l), then per
 * phi: L phi, L A phi, L D_j phi, L Q_jl phi (j <= l), where
 * D_j phi = grad phi . alpha_j + phi h_j and
 * Q_jl phi = phi h_j h_l + h_j grad phi . alpha_l + h_l grad phi . alpha_j + alpha_j^T Hess phi alpha_l.
 */
class StepTables {
public:
    StepTables(std::size_t groups, int steps, int channels, std::size_t functions)
        : groups_(groups), rows_(static_cast<std::size_t>(steps) + 1), J_(channels), nf_(functions)
    {
        const std::size_t pairs = detail::pair_count(J_);
        base_ = 1 + static_cast<std::size_t>(J_) + pairs;
        per_f_ = 2 + static_cast<std::size_t>(J_) + pairs;
        cols_ = base_ + nf_ * per_f_;
        data_.assign(groups_ * rows_ * cols_, 0.0);
    }

    std::size_t groups() const noexcept { return groups_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    int channels() const noexcept { return J_; }
    std::size_t functions() const noexcept { return nf_; }
    std::size_t base() const noexcept { return base_; }
    std::size_t per_function() const noexcept { return per_f_; }

    double* row(std::size_t g, std::size_t s) { return data_.data() + (g * rows_ + s) * cols_; }
    const double* row(std::size_t g, std::size_t s) const { return data_.data() + (g * rows_ + s) * cols_; }

    /// Sum over groups with integer multiplicities (all ones for the full estimate).
    std::vector<double> combine(std::span<const int> counts) const
    {
        std::vector<double> total(rows_ * cols_, 0.0);
        for (std::size_t g = 0; g < groups_; ++g) {
            const int c = counts[g];
            if (c == 0) continue;
            const double* src = data_.data() + g * rows_ * cols_;
            for (std::size_t i = 0; i < rows_ * cols_; ++i) total[i] += c * src[i];
        }
        return total;
    }

private:
    std::size_t groups_, rows_;
    int J_;
    std::size_t nf_;
    std::size_t base_ = 0, per_f_ = 0, cols_ = 0;
    std::vector<double> data_;
};

template <class Kernel>
StepTables build_step_tables(const ParticleEnsemble<Kernel>& ens, std::span<const TestFunction<Kernel::dx>> battery,
                             std::size_t groups)
{
    const auto& kernel = ens.kernel();
    const int J = kernel.channels();
    const std::size_t N = ens.size();
    groups = std::max<std::size_t>(1, std::min(groups, N));
    StepTables tables(groups, ens.grid().fine_steps(), J, battery.size());
    if (battery.empty()) throw std::invalid_argument("step tables need at least one test function");
    parallel_for(groups, ens.options().parallel.threads, [&](std::size_t g) {
        std::vector<LocalTerms> terms(battery.size());
        for (auto& t : terms) t.resize(J);
        // Particles k with group_of(k) == g form a contiguous range.
        const std::size_t lo = (g * N + groups - 1) / groups;
        const std::size_t hi = ((g + 1) * N + groups - 1) / groups;
        for (std::size_t k = lo; k < hi; ++k) {
            ens.replay(k, [&](int s, const Vec<Kernel::dx>& x, double log_w, std::span<const double>) {
                const double w = std::exp(log_w);
                double* row = tables.row(g, static_cast<std::size_t>(s));
                for (std::size_t f = 0; f < battery.size(); ++f) kernel.local_terms(battery[f], x, terms[f]);
                const std::vector<double>& h = terms[0].h;
                row[0] += w;
                std::size_t col = 1;
                for (int j = 0; j < J; ++j) row[col++] += w * h[static_cast<std::size_t>(j)];
                for (int j = 0; j < J; ++j)
                    for (int l = j; l < J; ++l)
                        row[col++] += w * (h[static_cast<std::size_t>(j)] * h[static_cast<std::size_t>(l)]);
                for (std::size_t f = 0; f < battery.size(); ++f) {
                    const LocalTerms& t = terms[f];
                    std::size_t c = tables.base() + f * tables.per_function();
                    row[c++] += w * t.phi;
                    row[c++] += w * t.generator;
                    for (int j = 0; j < J; ++j) {
                        const auto uj = static_cast<std::size_t>(j);
                        row[c++] += w * (t.grad_alpha[uj] + t.phi * t.h[uj]);
                    }
                    for (int j = 0; j < J; ++j) {
                        for (int l = j; l < J; ++l) {
                            const auto uj = static_cast<std::size_t>(j), ul = static_cast<std::size_t>(l);
                            const double qprime = t.h[uj] * t.grad_alpha[ul] + t.h[ul] * t.grad_alpha[uj] +
                                                  t.alpha_hess[uj * static_cast<std::size_t>(J) + ul];
                            row[c++] += w * (t.phi * t.h[uj] * t.h[ul] + qprime);
                        }
                    }
                }
            });
        }
    });
    return tables;
}

namespace detail {

/// Kushner-Stratonovich residual at the checkpoint indices from combined step sums.
inline std::vector<std::vector<double>> ks_from_sums(const std::vector<double>& S, const StepTables& tab,
                                                     const ObservationPath& obs, double dt,
                                                     std::span<const double> mu, const std::vector<int>& idx)
{
    const int J = tab.channels();
    const std::size_t cols = tab.cols(), nf = tab.functions();
    const std::size_t M = tab.rows() - 1;
    std::vector<std::vector<double>> out(nf, std::vector<double>(idx.size(), 0.0));
    std::vector<double> acc(nf, 0.0), ph(static_cast<std::size_t>(J)), g(static_cast<std::size_t>(J));
    auto record = [&](std::size_t s) {
        for (std::size_t c = 0; c < idx.size(); ++c) {
            if (static_cast<std::size_t>(idx[c]) != s) continue;
            for (std::size_t f = 0; f < nf; ++f) out[f][c] = acc[f];
        }
    };
    record(0);
    for (std::size_t s = 0; s < M; ++s) {
        const double* row = S.data() + s * cols;
        const double* next = S.data() + (s + 1) * cols;
        const double L = row[0];
        for (int j = 0; j < J; ++j) ph[static_cast<std::size_t>(j)] = row[1 + j] / L;
        for (std::size_t f = 0; f < nf; ++f) {
            const std::size_t c0 = tab.base() + f * tab.per_function();
            const double pphi = row[c0] / L;
            const double pnext = next[c0] / next[0];
            double inc = (row[c0 + 1] / L) * dt;
            for (int j = 0; j < J; ++j) {
                const auto uj = static_cast<std::size_t>(j);
                g[uj] = row[c0 + 2 + uj] / L - pphi * ph[uj];
                inc += g[uj] * (obs.increment(static_cast<int>(s), j) - ph[uj] * mu[uj] * dt);
            }
            std::size_t q = c0 + 2 + static_cast<std::size_t>(J);
            std::size_t hh = 1 + static_cast<std::size_t>(J);
            double second = 0.0;
            for (int j = 0; j < J; ++j) {
                for (int l = j; l < J; ++l, ++q, ++hh) {
                    const auto uj = static_cast<std::size_t>(j), ul = static_cast<std::size_t>(l);
                    const double R = (row[q] / L - pphi * (row[hh] / L)) - g[uj] * ph[ul] - g[ul] * ph[uj];
                    double eps = obs.increment(static_cast<int>(s), j) * obs.increment(static_cast<int>(s), l);
                    if (j == l) {
                        eps -= mu[uj] * dt;
                        second += R * eps;
                    } else {
                        second += 2.0 * R * eps;
                    }
                }
            }
            inc += 0.5 * second;
            acc[f] += (pnext - pphi) - inc;
        }
        record(s + 1);
    }
    return out;
}

}  // namespace detail

/**
 * Kushner-Stratonovich residual of the normalized filter:
 * r(t) = pi_t(phi) - pi_0(phi) - sum [pi(A phi) dt + sum_j g_j (dY_j - pi(h_j) mu_j dt)
 *        + 1/2 sum_jl R_jl (dY_j dY_l - delta_jl mu_j dt)],
 * with g_j = pi(D_j phi) - pi(phi) pi(h_j) and R_jl the matching second-order
 * gain. Standard errors: bootstrap over particle groups.
 */
template <class Kernel>
std::vector<ResidualSeries> ks_residual(const ParticleEnsemble<Kernel>& ens,
                                        std::span<const TestFunction<Kernel::dx>> battery,
                                        std::span<const double> checkpoints, const ResidualOptions& opts = {})
{
    const auto& kernel = ens.kernel();
    const int J = kernel.channels();
    const std::vector<int> idx = detail::checkpoint_indices(ens, checkpoints);
    std::size_t groups = ens.groups();
    {
        const std::size_t pairs = detail::pair_count(J);
        const std::size_t cols = 1 + J + pairs + battery.size() * (2 + J + pairs);
        const std::size_t per_group = (static_cast<std::size_t>(ens.grid().fine_steps()) + 1) * cols * sizeof(double);
        groups = std::max<std::size_t>(2, std::min(groups, opts.max_table_bytes / per_group));
    }
    const StepTables tab = build_step_tables(ens, battery, groups);
    std::vector<double> mu(static_cast<std::size_t>(J));
    for (int j = 0; j < J; ++j) mu[static_cast<std::size_t>(j)] = kernel.channel_mass(j);

    const std::size_t G = tab.groups();
    std::vector<int> counts(G, 1);
    const auto full = detail::ks_from_sums(tab.combine(counts), tab, ens.observation(), ens.grid().dt(), mu, idx);

    const std::size_t nf = battery.size(), nc = idx.size();
    std::vector<std::vector<double>> boot(nf * nc);
    RngStream rng(opts.bootstrap_seed, {Purpose::bootstrap, 1, ens.options().replicate});
    for (int b = 0; b < opts.resamples && G >= 2; ++b) {
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < G; ++i) ++counts[rng.below(G)];
        const auto rb = detail::ks_from_sums(tab.combine(counts), tab, ens.observation(), ens.grid().dt(), mu, idx);
        for (std::size_t f = 0; f < nf; ++f)
            for (std::size_t c = 0; c < nc; ++c) boot[f * nc + c].push_back(rb[f][c]);
    }

    std::vector<ResidualSeries> out(nf);
    const std::vector<double> times = detail::checkpoint_times(ens.grid(), idx);
    for (std::size_t f = 0; f < nf; ++f) {
        out[f].phi = battery[f].name;
        out[f].times = times;
        out[f].value = full[f];
        out[f].se.resize(nc);
        for (std::size_t c = 0; c < nc; ++c) {
            out[f].se[c] = boot[f * nc + c].size() >= 2 ? std::sqrt(stats::variance(boot[f * nc + c]))
                                                        : std::numeric_limits<double>::quiet_NaN();
        }
    }
    return out;
}

template <class Kernel>
ResidualSeries ks_residual(const ParticleEnsemble<Kernel>& ens, const TestFunction<Kernel::dx>& phi,
                           std::span<const double> checkpoints, const ResidualOptions& opts = {})
{
    return ks_residual(ens, std::span<const TestFunction<Kernel::dx>>(&phi, 1), checkpoints, opts).front();
}

/// pi_s(h_j) mu_j at every fine step s = 0..M (rows) for every channel (columns).
template <class Kernel>
Eigen::MatrixXd innovation_drift(const ParticleEnsemble<Kernel>& ens)
{
    const auto& kernel = ens.kernel();
    const int J = kernel.channels();
    const std::size_t N = ens.size();
    const std::size_t G = ens.groups();
    const int M = ens.grid().fine_steps();
    std::vector<Eigen::MatrixXd> num(G, Eigen::MatrixXd::Zero(M + 1, J));
    std::vector<Eigen::VectorXd> den(G, Eigen::VectorXd::Zero(M + 1));
    const auto one = phi::constant<Kernel::dx>();
    parallel_for(G, ens.options().parallel.threads, [&](std::size_t g) {
        LocalTerms t;
        t.resize(J);
        const std::size_t lo = (g * N + G - 1) / G;
        const std::size_t hi = ((g + 1) * N + G - 1) / G;
        for (std::size_t k = lo; k < hi; ++k) {
            ens.replay(k, [&](int s, const Vec<Kernel::dx>& x, double log_w, std::span<const double>) {
                const double w = std::exp(log_w);
                kernel.local_terms(one, x, t);
                den[g][s] += w;
                for (int j = 0; j < J; ++j) num[g](s, j) += w * t.h[static_cast<std::size_t>(j)];
            });
        }
    });
    Eigen::MatrixXd total = Eigen::MatrixXd::Zero(M + 1, J);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(M + 1);
    for (std::size_t g = 0; g < G; ++g) {
        total += num[g];
        w += den[g];
    }
    for (int s = 0; s <= M; ++s)
        for (int j = 0; j < J; ++j) total(s, j) = total(s, j) / w[s] * kernel.channel_mass(j);
    return total;
}

/// Innovation path Y~(t_k) = Y(t_k) - sum_{s<k} drift_s dt, rows 0..M.
inline Eigen::MatrixXd innovation_path(const ObservationPath& obs, const Eigen::MatrixXd& drift, double dt)
{
    const int M = obs.steps(), J = obs.dy();
    if (drift.rows() != M + 1 || drift.cols() != J) throw DimensionError("innovation drift has the wrong shape");
    Eigen::MatrixXd path(M + 1, J);
    path.row(0).setZero();
    for (int k = 0; k < M; ++k)
        for (int j = 0; j < J; ++j) path(k + 1, j) = path(k, j) + obs.increment(k, j) - drift(k, j) * dt;
    return path;
}

struct InnovationStatistics {
    std::size_t replicates = 0;
    double mean = 0.0, mean_se = 0.0;
    double variance = 0.0, variance_se = 0.0, expected_variance = 0.0;
    double autocorrelation = 0.0, autocorrelation_se = 0.0;
    bool mean_ok = false, variance_ok = false, autocorrelation_ok = false;

    bool passed() const { return mean_ok && variance_ok && autocorrelation_ok; }
};

/**
 * Brownian null battery for innovation paths (channel 0) observed at `blocks`
 * equal sub-intervals of [0, T]: mean and variance of Y~(T), and lag-1
 * autocorrelation of the pooled standardized block increments.
 */
inline InnovationStatistics innovation_statistics(const std::vector<Eigen::MatrixXd>& paths, double horizon,
                                                  int blocks = 16, double z = 4.0)
{
    InnovationStatistics st;
    st.replicates = paths.size();
    st.expected_variance = horizon;
    std::vector<double> finals;
    double num = 0.0, den = 0.0;
    std::size_t pairs = 0;
    for (const auto& p : paths) {
        const int M = static_cast<int>(p.rows()) - 1;
        finals.push_back(p(M, 0));
        if (M % blocks != 0) throw std::invalid_argument("innovation_statistics: blocks must divide M");
        const int step = M / blocks;
        const double scale = std::sqrt(horizon / blocks);
        double prev = 0.0;
        for (int b = 0; b < blocks; ++b) {
            const double inc = (p((b + 1) * step, 0) - p(b * step, 0)) / scale;
            if (b > 0) {
                num += prev * inc;
                ++pairs;
            }
            den += inc * inc;
            prev = inc;
        }
    }
    st.mean = stats::mean(finals);
    st.mean_se = stats::standard_error(finals);
    st.variance = stats::variance(finals);
    st.variance_se = stats::variance_standard_error(finals);
    // Increments are standardized by their null scale, so den/count estimates 1.
    const double count = static_cast<double>(paths.size()) * blocks;
    st.autocorrelation = (num / static_cast<double>(pairs)) / (den / count);
    st.autocorrelation_se = 1.0 / std::sqrt(static_cast<double>(pairs));
    st.mean_ok = std::abs(st.mean) <= z * st.mean_se;
    st.variance_ok = std::abs(st.variance - horizon) <= z * st.variance_se;
    st.autocorrelation_ok = std::abs(st.autocorrelation) <= z * st.autocorrelation_se;
    return st;
}

struct ConvergenceRow {
    std::size_t subset = 0;
    double sup_error = 0.0;
};

/**
 * sup over checkpoints of |rho_{N'}(phi) - rho_N(phi)| where rho_{N'} averages
 * the first N' particles, for N' in {N/8, N/4, N/2, N}.
 */
template <class Kernel>
std::vector<ConvergenceRow> exchangeable_average_convergence(const ParticleEnsemble<Kernel>& ens,
                                                             const TestFunction<Kernel::dx>& phi)
{
    const std::size_t N = ens.size();
    std::vector<ConvergenceRow> rows;
    std::vector<std::vector<double>> contrib;
    for (double t : ens.checkpoints()) {
        const auto v = ens.values(phi, t);
        const auto w = ens.weights(t);
        std::vector<double> c(N);
        for (std::size_t k = 0; k < N; ++k) c[k] = v[k] * w[k];
        contrib.push_back(std::move(c));
    }
    for (std::size_t div : {8u, 4u, 2u, 1u}) {
        const std::size_t sub = N / div;
        if (sub == 0) continue;
        ConvergenceRow row{sub, 0.0};
        for (const auto& c : contrib) {
            double a = 0.0, b = 0.0;
            for (std::size_t k = 0; k < N; ++k) {
                if (k < sub) a += c[k];
                b += c[k];
            }
            if (sub == N) a = b;
            row.sup_error = std::max(row.sup_error, std::abs(a / static_cast<double>(sub) - b / static_cast<double>(N)));
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace filterlab
