#pragma once

// Picard discretization error: the sawtooth martingale R^n, the rescaled error
// U^n = n (rho - rho^n), Galerkin integration of its limit equation, and
// Richardson extrapolation.

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "filterlab/ensemble.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/rng.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/time_grid.hpp"

namespace filterlab {

// ---------------------------------------------------------------------------
// R^n

/// 2 sqrt(3) (n (s - tau_n(s)) - 1/2) at fine step k.
inline double r_coefficient(const TimeGrid& grid, int k)
{
    const int spc = grid.steps_per_coarse();
    return 2.0 * std::sqrt(3.0) * (static_cast<double>(k % spc) / spc - 0.5);
}

/// R^n on the fine grid, one column per channel.
struct RPath {
    int picard_n = 0;
    Eigen::MatrixXd values;  ///< (M + 1) x d_Y

    double value(int k, int j = 0) const { return values(k, j); }
};

inline RPath r_path(const ObservationPath& obs, const TimeGrid& grid)
{
    check_grid(obs, grid);
    RPath r;
    r.picard_n = grid.picard_n();
    r.values = Eigen::MatrixXd::Zero(grid.fine_steps() + 1, obs.dy());
    for (int k = 0; k < grid.fine_steps(); ++k) {
        const double c = r_coefficient(grid, k);
        for (int j = 0; j < obs.dy(); ++j) r.values(k + 1, j) = r.values(k, j) + c * obs.increment(k, j);
    }
    return r;
}

/// Discrete [R^n]: sum of 12 (n (s - tau) - 1/2)^2 dt over the first k fine steps.
inline double rn_quadratic_variation_sum(const TimeGrid& grid, int k)
{
    double s = 0.0;
    for (int i = 0; i < k; ++i) {
        const double c = r_coefficient(grid, i);
        s += c * c * grid.dt();
    }
    return s;
}

/// Closed form of the discrete [R^n] over `coarse` whole coarse intervals with S fine steps each.
inline double rn_quadratic_variation_closed_form(const TimeGrid& grid, int coarse)
{
    const double S = grid.steps_per_coarse();
    const double sum = (S - 1.0) * (2.0 * S - 1.0) / (6.0 * S) - (S - 1.0) / 2.0 + S / 4.0;
    return 12.0 * grid.dt() * sum * coarse;
}

/// Discrete [Y, R^n]: sum of 2 sqrt(3) (n (s - tau) - 1/2) dt over the first k fine steps.
inline double rn_cross_variation_sum(const TimeGrid& grid, int k)
{
    double s = 0.0;
    for (int i = 0; i < k; ++i) s += r_coefficient(grid, i) * grid.dt();
    return s;
}

struct RLimitStatistics {
    int n = 0;
    std::size_t replicates = 0;
    double variance = 0.0;  ///< Var[R^n(T)] across replicates, channel 0
    double variance_se = 0.0;
    double corr_y_r = 0.0;  ///< corr(Y(T), R^n(T)), channel 0
    double corr_y_r_se = 0.0;
    double corr_r_r = 0.0;  ///< corr(R^{n,0}(T), R^{n,1}(T)); 0 for one channel
    double corr_r_r_se = 0.0;

    bool variance_within(double horizon, double rel) const { return std::abs(variance - horizon) <= rel * horizon; }
    bool uncorrelated(double z = 4.0) const
    {
        return std::abs(corr_y_r) <= z * corr_y_r_se && std::abs(corr_r_r) <= z * corr_r_r_se;
    }
};

/// Var[R^n(T)] and correlations over observation replicates, one entry per n.
inline std::vector<RLimitStatistics> r_limit_test(std::span<const ObservationPath> replicates, const TimeGrid& grid,
                                                  std::span<const int> n_set)
{
    if (replicates.size() < 3) throw std::invalid_argument("r_limit_test needs at least three replicates");
    std::vector<RLimitStatistics> out;
    for (int n : n_set) {
        const TimeGrid g = grid.with_picard(n);
        std::vector<double> y0, r0, r1;
        for (const auto& obs : replicates) {
            const RPath r = r_path(obs, g);
            y0.push_back(obs.value(g.fine_steps(), 0));
            r0.push_back(r.value(g.fine_steps(), 0));
            if (obs.dy() > 1) r1.push_back(r.value(g.fine_steps(), 1));
        }
        RLimitStatistics s;
        s.n = n;
        s.replicates = replicates.size();
        s.variance = stats::variance(r0);
        s.variance_se = stats::variance_standard_error(r0);
        const double corr_se = 1.0 / std::sqrt(static_cast<double>(replicates.size()));
        s.corr_y_r = stats::correlation(y0, r0);
        s.corr_y_r_se = corr_se;
        if (!r1.empty()) s.corr_r_r = stats::correlation(r0, r1);
        s.corr_r_r_se = corr_se;
        out.push_back(s);
    }
    return out;
}

/// Brownian observation replicates under the reference measure.
inline std::vector<ObservationPath> reference_observations(const TimeGrid& grid, int dy, std::size_t count,
                                                           std::uint64_t seed)
{
    std::vector<ObservationPath> v;
    v.reserve(count);
    for (std::size_t r = 0; r < count; ++r)
        v.push_back(simulate_observation_Q(grid, RngStream(seed, {Purpose::observation_q, 0, static_cast<std::uint32_t>(r)}), dy));
    return v;
}

// ---------------------------------------------------------------------------
// U^n

struct ErrorSeries {
    std::string phi;
    int n = 0;
    std::vector<double> times;
    std::vector<double> value;  ///< U^n_t(phi), particle average of E^{k,n}_t(phi)
    std::vector<double> se;     ///< group standard error
    std::vector<std::vector<double>> contributions;  ///< E^{k,n}_t(phi) per checkpoint, when kept

    double sup_abs() const
    {
        double m = 0.0;
        for (double v : value) m = std::max(m, std::abs(v));
        return m;
    }
};

/// Mean and standard error of the mean from contiguous group means.
inline std::pair<double, double> grouped_mean(std::span<const double> v, std::size_t groups)
{
    const std::size_t n = v.size();
    groups = std::clamp<std::size_t>(groups, 1, n);
    std::vector<double> means(groups, 0.0), counts(groups, 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t g = group_of(k, n, groups);
        means[g] += v[k];
        counts[g] += 1.0;
        total += v[k];
    }
    const double mean = total / static_cast<double>(n);
    if (groups < 2) return {mean, std::numeric_limits<double>::quiet_NaN()};
    double s = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
        const double d = means[g] / counts[g] - mean;
        s += counts[g] * counts[g] * d * d;
    }
    const auto N = static_cast<double>(n), G = static_cast<double>(groups);
    return {mean, std::sqrt(G / (G - 1.0) * s) / N};
}

template <class Ensemble>
std::vector<ErrorSeries> u_n_series(const Ensemble& ens, std::span<const TestFunction<Ensemble::dx>> battery,
                                    std::span<const int> n_set, std::span<const double> checkpoints,
                                    bool keep_contributions = false)
{
    std::vector<ErrorSeries> out;
    for (const auto& f : battery) {
        for (int n : n_set) {
            ErrorSeries s;
            s.phi = f.name;
            s.n = n;
            for (double t : checkpoints) {
                auto e = ens.error_contributions(f, t, n);
                const auto [m, se] = grouped_mean(e, ens.groups());
                s.times.push_back(t);
                s.value.push_back(m);
                s.se.push_back(se);
                if (keep_contributions) s.contributions.push_back(std::move(e));
            }
            out.push_back(std::move(s));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Richardson extrapolation

/// 2 rho^{2n} - rho^n per checkpoint.
inline std::vector<double> richardson(std::span<const double> rho_n, std::span<const double> rho_2n)
{
    if (rho_n.size() != rho_2n.size()) throw DimensionError("richardson: series lengths differ");
    std::vector<double> r(rho_n.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = 2.0 * rho_2n[i] - rho_n[i];
    return r;
}

inline std::vector<FilterEstimate> richardson(std::span<const FilterEstimate> rho_n,
                                              std::span<const FilterEstimate> rho_2n)
{
    if (rho_n.size() != rho_2n.size()) throw DimensionError("richardson: series lengths differ");
    std::vector<FilterEstimate> r(rho_n.begin(), rho_n.end());
    for (std::size_t i = 0; i < r.size(); ++i) {
        if (rho_n[i].t != rho_2n[i].t) throw DimensionError("richardson: checkpoints differ");
        r[i].rho = 2.0 * rho_2n[i].rho - rho_n[i].rho;
        r[i].pi = 2.0 * rho_2n[i].pi - rho_n[i].pi;
        r[i].picard_n = -rho_2n[i].picard_n;
    }
    return r;
}

// ---------------------------------------------------------------------------
// Galerkin integration of the limit equation (scalar signal, one channel)

/**
 * Finite family {phi_a} standing in for test functions. `generator` gives the
 * matrix G with U(A phi_a) = (G u)_a, `sensor` the matrix with
 * U(phi_a h) = (H u)_a, both for the coordinates u_a = U(phi_a).
 */
class GalerkinBasis {
public:
    virtual ~GalerkinBasis() = default;
    virtual std::string name() const = 0;
    virtual int size() const = 0;
    virtual const Eigen::MatrixXd& generator() const = 0;
    virtual const Eigen::MatrixXd& sensor() const = 0;
    /// Largest explicit Euler step the basis tolerates.
    virtual double max_time_step() const { return std::numeric_limits<double>::infinity(); }
    /// Fraction of coefficient mass dropped when projecting A phi_a and phi_a h onto the family.
    virtual double dropped_fraction() const { return 0.0; }
    /// Add scale * phi_a(x) to value[a] and scale_d * phi_a'(x) to deriv[a].
    virtual void deposit(double x, double scale, double scale_d, double* value, double* deriv) const = 0;
    /// U(f) from the coordinates.
    virtual double evaluate(const Eigen::VectorXd& u, const TestFunction<1>& f) const = 0;
};

/**
 * Piecewise-linear hat functions on a uniform grid. U is carried as nodal
 * masses, A as the adjoint of a birth-death generator on the nodes (central
 * rates where nonnegative, upwind otherwise, reflecting ends).
 */
class NodalBasis final : public GalerkinBasis {
public:
    template <DiffusionModel M>
    NodalBasis(const M& model, double lo, double hi, double spacing)
        requires(M::dx == 1 && M::dy == 1)
        : lo_(lo), dx_(spacing)
    {
        if (!(hi > lo) || !(spacing > 0.0)) throw ConfigError("galerkin.domain: need lo < hi and positive spacing");
        const int n = static_cast<int>(std::lround((hi - lo) / spacing)) + 1;
        if (n < 3) throw ConfigError("galerkin.spacing: fewer than three nodes");
        nodes_.resize(n);
        G_ = Eigen::MatrixXd::Zero(n, n);
        H_ = Eigen::MatrixXd::Zero(n, n);
        double max_rate = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = lo + i * spacing;
            nodes_[i] = x;
            const Vec<1> v{x};
            const double a = (model.diffusion(v) * model.diffusion(v).transpose())(0, 0);
            const double b = model.drift(v)[0];
            double up = 0.5 * a / (dx_ * dx_) + 0.5 * b / dx_;
            double down = 0.5 * a / (dx_ * dx_) - 0.5 * b / dx_;
            if (up < 0.0 || down < 0.0) {
                up = 0.5 * a / (dx_ * dx_) + std::max(b, 0.0) / dx_;
                down = 0.5 * a / (dx_ * dx_) + std::max(-b, 0.0) / dx_;
            }
            if (i == n - 1) up = 0.0;
            if (i == 0) down = 0.0;
            // (G u)_i = sum_j u_j (A phi_i)(x_j): mass leaving node j arrives at its neighbour.
            if (i + 1 < n) G_(i + 1, i) += up;
            if (i > 0) G_(i - 1, i) += down;
            G_(i, i) -= up + down;
            max_rate = std::max(max_rate, up + down);
            H_(i, i) = model.sensor(v)[0];
        }
        max_dt_ = 1.0 / max_rate;
    }

    std::string name() const override { return "nodal"; }
    int size() const override { return static_cast<int>(nodes_.size()); }
    const Eigen::MatrixXd& generator() const override { return G_; }
    const Eigen::MatrixXd& sensor() const override { return H_; }
    double max_time_step() const override { return max_dt_; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }
    std::size_t outside() const noexcept { return outside_; }

    void deposit(double x, double scale, double scale_d, double* value, double* deriv) const override
    {
        const int n = size();
        const double u = (x - lo_) / dx_;
        if (u <= 0.0 || u >= n - 1) {
            ++outside_;
            const int i = u <= 0.0 ? 0 : n - 1;
            value[i] += scale;
            return;
        }
        const int i = static_cast<int>(u);
        const double f = u - i;
        value[i] += scale * (1.0 - f);
        value[i + 1] += scale * f;
        deriv[i] -= scale_d / dx_;
        deriv[i + 1] += scale_d / dx_;
    }

    double evaluate(const Eigen::VectorXd& u, const TestFunction<1>& f) const override
    {
        double s = 0.0;
        for (int i = 0; i < size(); ++i) s += u[i] * f.value(Vec<1>{nodes_[static_cast<std::size_t>(i)]});
        return s;
    }

private:
    double lo_, dx_;
    std::vector<double> nodes_;
    Eigen::MatrixXd G_, H_;
    double max_dt_ = 0.0;
    mutable std::size_t outside_ = 0;
};

/**
 * Monomials x^0..x^D for models with polynomial coefficients. Images of
 * degree above D are truncated; the dropped share of coefficient mass is
 * reported.
 */
class PolynomialBasis final : public GalerkinBasis {
public:
    PolynomialBasis(const ScalarPolynomialForm& form, int degree, double max_dropped = 0.5) : degree_(degree)
    {
        if (degree < 1) throw ConfigError("galerkin.degree must be at least 1");
        const int n = degree + 1;
        G_ = Eigen::MatrixXd::Zero(n, n);
        H_ = Eigen::MatrixXd::Zero(n, n);
        double kept = 0.0, dropped = 0.0;
        auto place = [&](Eigen::MatrixXd& m, int row, const Polynomial& p) {
            for (int k = 0; k <= p.degree(); ++k) {
                const double c = p.coefficient(k);
                if (k <= degree) {
                    m(row, k) += c;
                    kept += std::abs(c);
                } else {
                    dropped += std::abs(c);
                }
            }
        };
        for (int a = 0; a <= degree; ++a) {
            const Polynomial phi = Polynomial::monomial(a);
            const Polynomial d1 = phi.derivative();
            const Polynomial d2 = d1.derivative();
            place(G_, a, d1 * form.drift + 0.5 * (d2 * form.diffusion_squared));
            place(H_, a, phi * form.sensor);
        }
        dropped_ = kept + dropped > 0.0 ? dropped / (kept + dropped) : 0.0;
        if (dropped_ > max_dropped) {
            throw ConfigError("galerkin.degree: truncation drops " + std::to_string(dropped_) +
                              " of the coefficient mass");
        }
    }

    std::string name() const override { return "polynomial"; }
    int size() const override { return degree_ + 1; }
    const Eigen::MatrixXd& generator() const override { return G_; }
    const Eigen::MatrixXd& sensor() const override { return H_; }
    double dropped_fraction() const override { return dropped_; }

    void deposit(double x, double scale, double scale_d, double* value, double* deriv) const override
    {
        double p = 1.0, pm1 = 0.0;
        for (int a = 0; a <= degree_; ++a) {
            value[a] += scale * p;
            deriv[a] += scale_d * a * pm1;
            pm1 = p;
            p *= x;
        }
    }

    /// U(f) through the degree-D interpolant of f at Chebyshev points of [-1, 1] scaled by `radius`.
    double evaluate(const Eigen::VectorXd& u, const TestFunction<1>& f) const override
    {
        const int n = size();
        const double radius = 4.0;
        Eigen::MatrixXd V(n, n);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            const double x = radius * std::cos(std::numbers::pi * (2.0 * i + 1.0) / (2.0 * n));
            double p = 1.0;
            for (int a = 0; a < n; ++a, p *= x) V(i, a) = p;
            y[i] = f.value(Vec<1>{x});
        }
        const Eigen::VectorXd c = V.colPivHouseholderQr().solve(y);
        return c.dot(u);
    }

private:
    int degree_;
    Eigen::MatrixXd G_, H_;
    double dropped_ = 0.0;
};

/**
 * Per-step source functionals from the particle measure:
 * a[s][a] = rho_s(phi_a A h), o[s][a] = rho_s(tr O~_{sigma, phi_a, h}).
 */
struct GalerkinSources {
    int steps = 0;
    int size = 0;
    std::vector<double> ah;
    std::vector<double> otilde;

    double* ah_row(int s) { return ah.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(size); }
    double* ot_row(int s) { return otilde.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(size); }
    const double* ah_row(int s) const { return ah.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(size); }
    const double* ot_row(int s) const
    {
        return otilde.data() + static_cast<std::size_t>(s) * static_cast<std::size_t>(size);
    }

    void resize(int m, int n)
    {
        steps = m;
        size = n;
        ah.assign(static_cast<std::size_t>(m + 1) * static_cast<std::size_t>(n), 0.0);
        otilde.assign(ah.size(), 0.0);
    }
};

/// Source tables for the exact weight (index 0) and, when n > 0, for the Picard weight L^n (index 1).
template <DiffusionModel M>
std::vector<GalerkinSources> galerkin_sources(const GwnEnsemble<M>& ens, const GalerkinBasis& basis, int n = 0,
                                              std::size_t chunks = 4)
    requires(M::dx == 1 && M::dy == 1)
{
    const M& model = ens.kernel().model();
    const TimeGrid& grid = ens.grid();
    const int steps = grid.fine_steps();
    const std::size_t modes = n > 0 ? 2 : 1;
    const std::size_t col = n > 0 ? ens.weight_column(n) - 1 : 0;
    const std::size_t N = ens.size();
    chunks = std::clamp<std::size_t>(chunks, 1, N);
    std::vector<std::vector<GalerkinSources>> partial(chunks, std::vector<GalerkinSources>(modes));
    for (auto& p : partial)
        for (auto& t : p) t.resize(steps, basis.size());
    parallel_for(chunks, ens.options().parallel.threads, [&](std::size_t c) {
        const std::size_t begin = c * N / chunks, end = (c + 1) * N / chunks;
        for (std::size_t k = begin; k < end; ++k) {
            ens.replay(k, [&](int s, const Vec<1>& x, double log_exact, std::span<const double> logn) {
                const double a = (model.diffusion(x) * model.diffusion(x).transpose())(0, 0);
                const double ah = sensor_generator(model, 0, x);
                const double ot = a * model.sensor_jacobian(x)(0, 0);
                for (std::size_t m = 0; m < modes; ++m) {
                    const double w = std::exp(m == 0 ? log_exact : logn[col]);
                    auto& t = partial[c][m];
                    basis.deposit(x[0], w * ah, w * ot, t.ah_row(s), t.ot_row(s));
                }
            });
        }
    });
    std::vector<GalerkinSources> out(modes);
    for (std::size_t m = 0; m < modes; ++m) {
        out[m].resize(steps, basis.size());
        for (std::size_t c = 0; c < chunks; ++c) {
            for (std::size_t i = 0; i < out[m].ah.size(); ++i) {
                out[m].ah[i] += partial[c][m].ah[i];
                out[m].otilde[i] += partial[c][m].otilde[i];
            }
        }
        const double inv = 1.0 / static_cast<double>(N);
        for (auto& v : out[m].ah) v *= inv;
        for (auto& v : out[m].otilde) v *= inv;
    }
    return out;
}

enum class LimitNoise {
    independent,  ///< R drawn from a fresh Brownian stream
    pre_limit     ///< R^n realized from the same Y; sources follow the Picard weights
};

struct GalerkinRun {
    std::string basis;
    std::vector<double> times;
    std::vector<Eigen::VectorXd> u;  ///< coordinates U(phi_a) at each checkpoint

    double value(std::size_t slot, const GalerkinBasis& b, const TestFunction<1>& f) const
    {
        return b.evaluate(u[slot], f);
    }
};

/**
 * Left-point Euler integration of
 * dU(phi) = U(A phi) dt + U(phi h) dY + 1/2 rho(phi Ah) (dY + dR / sqrt 3)
 *           + rho(tr O~) (dY / 2 + dR / (2 sqrt 3)), U_0 = 0.
 * In pre-limit mode dR is the R^n increment, rho is rho^n and the trace
 * source is read at tau_n(s).
 */
inline GalerkinRun galerkin_limit_u(const GalerkinBasis& basis, const GalerkinSources& sources,
                                    const ObservationPath& obs, const TimeGrid& grid,
                                    std::span<const double> checkpoints, LimitNoise mode, RngStream limit_stream)
{
    check_grid(obs, grid);
    if (obs.dy() != 1) throw DimensionError("galerkin_limit_u: one observation channel expected");
    if (sources.steps != grid.fine_steps() || sources.size != basis.size()) {
        throw DimensionError("galerkin_limit_u: source table does not match grid or basis");
    }
    const double dt = grid.dt();
    if (dt > basis.max_time_step()) {
        throw ConfigError("galerkin.spacing: fine step " + std::to_string(dt) + " exceeds the stable step " +
                          std::to_string(basis.max_time_step()));
    }
    std::vector<int> slots;
    for (double t : checkpoints) slots.push_back(grid.index_of(t));
    const int n = basis.size();
    const double c3 = 1.0 / std::sqrt(3.0);
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n), du(n);
    const auto& G = basis.generator();
    const auto& H = basis.sensor();
    const int spc = grid.steps_per_coarse();

    GalerkinRun run;
    run.basis = basis.name();
    auto record = [&](int s) {
        for (std::size_t i = 0; i < slots.size(); ++i) {
            if (slots[i] == s) {
                run.times.push_back(checkpoints[i]);
                run.u.push_back(u);
            }
        }
    };
    for (int s = 0;; ++s) {
        record(s);
        if (s == grid.fine_steps()) break;
        const double dy = obs.increment(s, 0);
        const double dr = mode == LimitNoise::pre_limit ? r_coefficient(grid, s) * dy
                                                        : std::sqrt(dt) * limit_stream.gaussian();
        const double* ah = sources.ah_row(s);
        const double* ot = sources.ot_row(mode == LimitNoise::pre_limit ? s - s % spc : s);
        du.noalias() = dt * (G * u) + dy * (H * u);
        for (int a = 0; a < n; ++a) du[a] += 0.5 * ah[a] * (dy + c3 * dr) + ot[a] * (0.5 * dy + 0.5 * c3 * dr);
        u += du;
    }
    return run;
}

}  // namespace filterlab
