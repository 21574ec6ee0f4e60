#pragma once

// Marked point-process cluster model: observations O = N + C on a finite mark
// set, cluster membership indicators theta, and the exact, Monte Carlo and
// recursive filters for functionals of the cluster history eta.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/numeric/odeint.hpp>

#include "filterlab/ensemble.hpp"
#include "filterlab/errors.hpp"
#include "filterlab/filter.hpp"
#include "filterlab/rng.hpp"
#include "filterlab/time_grid.hpp"
#include "filterlab/weights.hpp"

namespace filterlab {

struct ClusterPoint {
    double time = 0.0;
    int mark = 0;

    friend bool operator==(const ClusterPoint&, const ClusterPoint&) = default;
};

/// Observed points sorted by (time, mark); `ties` counts equal-time neighbours.
struct ObservedPointSet {
    std::vector<ClusterPoint> points;
    std::size_t ties = 0;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    const ClusterPoint& operator[](std::size_t i) const { return points[i]; }

    /// Number of points with time <= t.
    std::size_t count_until(double t) const
    {
        return static_cast<std::size_t>(
            std::upper_bound(points.begin(), points.end(), t, [](double v, const ClusterPoint& p) { return v < p.time; }) -
            points.begin());
    }

    void validate() const
    {
        for (std::size_t i = 1; i < points.size(); ++i) {
            const auto& a = points[i - 1];
            const auto& b = points[i];
            if (b.time < a.time || (b.time == a.time && b.mark <= a.mark)) {
                throw std::invalid_argument("observed points are not sorted by (time, mark)");
            }
        }
    }

    /// Sort by time, breaking exact ties by mark index, and count the ties.
    void normalize()
    {
        std::sort(points.begin(), points.end(), [](const ClusterPoint& a, const ClusterPoint& b) {
            return a.time < b.time || (a.time == b.time && a.mark < b.mark);
        });
        ties = 0;
        for (std::size_t i = 1; i < points.size(); ++i) ties += points[i].time == points[i - 1].time ? 1 : 0;
    }
};

/// Cluster history eta_t as a view of the points whose theta is 1 among the first theta.size() points.
struct HistoryView {
    const ObservedPointSet* points = nullptr;
    std::span<const std::uint8_t> theta;

    std::size_t count() const
    {
        std::size_t c = 0;
        for (auto v : theta) c += v;
        return c;
    }

    /// Index of the latest cluster point, if any.
    std::optional<std::size_t> latest() const
    {
        for (std::size_t i = theta.size(); i-- > 0;)
            if (theta[i]) return i;
        return std::nullopt;
    }
};

class ClusterModel;

/// Cluster intensity lambda(e, eta, t) <= lambda0(e).
class ClusterIntensity {
public:
    virtual ~ClusterIntensity() = default;
    virtual std::string name() const = 0;
    virtual double rate(const ClusterModel& model, int mark, const HistoryView& eta, double t) const = 0;

    /// Closed form of int_a^b sum_e (lambda(e, eta, s) - lambda0(e)) nu(e) ds with eta fixed, when known.
    virtual std::optional<double> excess_integral(const ClusterModel&, const HistoryView&, double, double) const
    {
        return std::nullopt;
    }
};

class ClusterModel {
public:
    ClusterModel() = default;
    ClusterModel(std::vector<double> nu, std::vector<double> gamma, std::vector<double> lambda0,
                 std::shared_ptr<const ClusterIntensity> intensity, double horizon)
        : nu_(std::move(nu)), gamma_(std::move(gamma)), lambda0_(std::move(lambda0)),
          intensity_(std::move(intensity)), horizon_(horizon)
    {
        validate();
    }

    int marks() const noexcept { return static_cast<int>(nu_.size()); }
    double nu(int e) const { return nu_[static_cast<std::size_t>(e)]; }
    double gamma(int e) const { return gamma_[static_cast<std::size_t>(e)]; }
    double lambda0(int e) const { return lambda0_[static_cast<std::size_t>(e)]; }
    double horizon() const noexcept { return horizon_; }
    const ClusterIntensity& intensity() const { return *intensity_; }
    std::string name() const { return "cluster_" + intensity_->name(); }

    /// Q-probability that a point with this mark belongs to the cluster.
    double prior(int e) const { return lambda0(e) / (lambda0(e) + gamma(e)); }

    double rate(int e, const HistoryView& eta, double t) const { return intensity_->rate(*this, e, eta, t); }

    /// sum_e lambda(e, eta, t) nu(e)
    double total_rate(const HistoryView& eta, double t) const
    {
        double s = 0.0;
        for (int e = 0; e < marks(); ++e) s += rate(e, eta, t) * nu(e);
        return s;
    }

    double total_dominating_rate() const
    {
        double s = 0.0;
        for (int e = 0; e < marks(); ++e) s += lambda0(e) * nu(e);
        return s;
    }

    double total_noise_rate() const
    {
        double s = 0.0;
        for (int e = 0; e < marks(); ++e) s += gamma(e) * nu(e);
        return s;
    }

    /// int_a^b sum_e (lambda - lambda0) nu ds for a fixed history; closed form or adaptive quadrature.
    double excess_integral(const HistoryView& eta, double a, double b) const
    {
        if (b <= a) return 0.0;
        if (auto v = intensity_->excess_integral(*this, eta, a, b)) return *v;
        return numeric_excess_integral(eta, a, b);
    }

    double numeric_excess_integral(const HistoryView& eta, double a, double b) const
    {
        const double lam0 = total_dominating_rate();
        auto f = [&](double s) { return total_rate(eta, s) - lam0; };
        return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-13);
    }

    void validate() const
    {
        if (!intensity_) throw ConfigError("cluster.intensity: missing");
        if (gamma_.size() != nu_.size() || lambda0_.size() != nu_.size()) {
            throw ConfigError("cluster: nu, gamma and lambda0 need one entry per mark");
        }
        for (int e = 0; e < marks(); ++e) {
            if (!(nu(e) > 0.0)) throw ConfigError("cluster.nu: weights must be positive");
            if (!(gamma(e) >= 0.0)) throw ConfigError("cluster.gamma: noise intensities must be nonnegative");
            if (!(lambda0(e) > 0.0)) throw ConfigError("cluster.lambda0: dominating intensities must be positive");
        }
        if (!(horizon_ > 0.0)) throw ConfigError("cluster.T: horizon must be positive");
    }

private:
    std::vector<double> nu_, gamma_, lambda0_;
    std::shared_ptr<const ClusterIntensity> intensity_;
    double horizon_ = 1.0;
};

/// lambda(e, eta) = fraction * lambda0(e).
class ConstantFractionIntensity final : public ClusterIntensity {
public:
    explicit ConstantFractionIntensity(double fraction) : fraction_(fraction)
    {
        if (fraction < 0.0 || fraction > 1.0) throw ConfigError("cluster.fraction must lie in [0, 1]");
    }
    std::string name() const override { return fraction_ == 1.0 ? "dominating" : "constant"; }
    double rate(const ClusterModel& m, int e, const HistoryView&, double) const override
    {
        return fraction_ * m.lambda0(e);
    }
    std::optional<double> excess_integral(const ClusterModel& m, const HistoryView&, double a, double b) const override
    {
        return (fraction_ - 1.0) * m.total_dominating_rate() * (b - a);
    }

private:
    double fraction_;
};

/// lambda(e, eta, t) = min(lambda0(e), eps(e) + beta exp(-delta (t - t_last(eta)))), eps(e) when eta is empty.
class SelfExcitingIntensity final : public ClusterIntensity {
public:
    SelfExcitingIntensity(std::vector<double> epsilon, double beta, double delta)
        : eps_(std::move(epsilon)), beta_(beta), delta_(delta)
    {
        if (!(delta > 0.0)) throw ConfigError("cluster.delta must be positive");
        if (beta < 0.0) throw ConfigError("cluster.beta must be nonnegative");
    }
    std::string name() const override { return "self_exciting"; }

    double rate(const ClusterModel& m, int e, const HistoryView& eta, double t) const override
    {
        const double eps = eps_.at(static_cast<std::size_t>(e));
        const auto last = eta.latest();
        const double f = last ? eps + beta_ * std::exp(-delta_ * (t - (*eta.points)[*last].time)) : eps;
        return std::min(m.lambda0(e), f);
    }

    std::optional<double> excess_integral(const ClusterModel& m, const HistoryView& eta, double a,
                                          double b) const override
    {
        const auto last = eta.latest();
        double total = 0.0;
        for (int e = 0; e < m.marks(); ++e) {
            const double l0 = m.lambda0(e), eps = eps_.at(static_cast<std::size_t>(e));
            double part = 0.0;
            if (!last) {
                part = (std::min(l0, eps) - l0) * (b - a);
            } else if (eps < l0) {
                const double tl = (*eta.points)[*last].time;
                // lambda = lambda0 before s_cap, eps + beta e^{-delta (s - tl)} after.
                const double s_cap = beta_ > l0 - eps ? tl + std::log(beta_ / (l0 - eps)) / delta_ : tl;
                const double lo = std::max(a, s_cap);
                if (lo < b) {
                    part = (eps - l0) * (b - lo) +
                           beta_ / delta_ * (std::exp(-delta_ * (lo - tl)) - std::exp(-delta_ * (b - tl)));
                }
            }
            total += part * m.nu(e);
        }
        return total;
    }

private:
    std::vector<double> eps_;
    double beta_, delta_;
};

/// lambda(e, eta) = min(lambda0(e), eps(e) + kappa |eta|), increasing with the cluster size.
class MonotoneIntensity final : public ClusterIntensity {
public:
    MonotoneIntensity(std::vector<double> epsilon, double kappa) : eps_(std::move(epsilon)), kappa_(kappa)
    {
        if (kappa < 0.0) throw ConfigError("cluster.kappa must be nonnegative");
    }
    std::string name() const override { return "monotone"; }
    double rate(const ClusterModel& m, int e, const HistoryView& eta, double) const override
    {
        return std::min(m.lambda0(e), eps_.at(static_cast<std::size_t>(e)) + kappa_ * static_cast<double>(eta.count()));
    }
    std::optional<double> excess_integral(const ClusterModel& m, const HistoryView& eta, double a,
                                          double b) const override
    {
        double s = 0.0;
        for (int e = 0; e < m.marks(); ++e) s += (rate(m, e, eta, a) - m.lambda0(e)) * m.nu(e);
        return s * (b - a);
    }

private:
    std::vector<double> eps_;
    double kappa_;
};

/// User intensity from a callable; excess integrals by quadrature.
class FunctionIntensity final : public ClusterIntensity {
public:
    using Fn = std::function<double(const ClusterModel&, int, const HistoryView&, double)>;
    FunctionIntensity(std::string label, Fn fn) : label_(std::move(label)), fn_(std::move(fn)) {}
    std::string name() const override { return label_; }
    double rate(const ClusterModel& m, int e, const HistoryView& eta, double t) const override
    {
        return fn_(m, e, eta, t);
    }

private:
    std::string label_;
    Fn fn_;
};

// ---------------------------------------------------------------------------
// Simulation

struct LabeledPointSet {
    ObservedPointSet observed;
    std::vector<std::uint8_t> theta;  ///< 1 if the point belongs to the cluster
};

namespace detail {

/// Homogeneous Poisson points with per-mark rate rates[e] on [0, T].
inline std::vector<ClusterPoint> poisson_points(std::span<const double> rates, double horizon, RngStream rng)
{
    std::vector<ClusterPoint> pts;
    double total = 0.0;
    for (double r : rates) total += r;
    if (total <= 0.0) return pts;
    double t = 0.0;
    for (;;) {
        t += rng.exponential(total);
        if (t > horizon) break;
        double u = rng.uniform() * total;
        int e = 0;
        while (e + 1 < static_cast<int>(rates.size()) && u >= rates[static_cast<std::size_t>(e)]) {
            u -= rates[static_cast<std::size_t>(e)];
            ++e;
        }
        pts.push_back({t, e});
    }
    return pts;
}

inline LabeledPointSet merge(std::vector<ClusterPoint> noise, std::vector<ClusterPoint> cluster)
{
    std::vector<std::pair<ClusterPoint, std::uint8_t>> all;
    for (const auto& p : noise) all.push_back({p, 0});
    for (const auto& p : cluster) all.push_back({p, 1});
    std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        return a.first.time < b.first.time || (a.first.time == b.first.time && a.first.mark < b.first.mark);
    });
    LabeledPointSet out;
    for (const auto& [p, th] : all) {
        out.observed.points.push_back(p);
        out.theta.push_back(th);
    }
    for (std::size_t i = 1; i < out.observed.size(); ++i) {
        const auto& a = out.observed[i - 1];
        const auto& b = out.observed[i];
        if (b.time == a.time) {
            ++out.observed.ties;
            // Equal (time, mark) is a probability-zero event; shift by one ulp to keep order strict.
            if (b.mark == a.mark) out.observed.points[i].time = std::nextafter(a.time, std::numeric_limits<double>::infinity());
        }
    }
    return out;
}

}  // namespace detail

/**
 * Physical-measure simulation: noise N by Poisson draws at rate gamma(e) nu(e),
 * cluster C by sequential thinning of rate lambda0(e) nu(e) candidates with
 * acceptance lambda(e, eta_{s-}, s) / lambda0(e).
 */
inline LabeledPointSet simulate_cluster_P(const ClusterModel& model, std::uint64_t seed, std::uint32_t replicate)
{
    const double T = model.horizon();
    std::vector<double> noise_rates, dom_rates;
    for (int e = 0; e < model.marks(); ++e) {
        noise_rates.push_back(model.gamma(e) * model.nu(e));
        dom_rates.push_back(model.lambda0(e) * model.nu(e));
    }
    auto noise = detail::poisson_points(noise_rates, T, RngStream(seed, {Purpose::cluster_noise, 0, replicate}));
    const auto candidates =
        detail::poisson_points(dom_rates, T, RngStream(seed, {Purpose::cluster_cluster, 0, replicate}));
    RngStream accept(seed, {Purpose::cluster_cluster, 1, replicate});
    ObservedPointSet accepted;
    std::vector<std::uint8_t> ones;
    for (const auto& c : candidates) {
        const HistoryView eta{&accepted, ones};
        const double ratio = model.rate(c.mark, eta, c.time) / model.lambda0(c.mark);
        if (ratio < 0.0 || ratio > 1.0 + 1e-12) {
            throw ConfigError("cluster intensity exceeds its dominating rate at mark " + std::to_string(c.mark));
        }
        if (accept.uniform() < ratio) {
            accepted.points.push_back(c);
            ones.push_back(1);
        }
    }
    return detail::merge(std::move(noise), std::move(accepted.points));
}

/// Reference-measure simulation: independent Poisson N (rate gamma nu) and C (rate lambda0 nu).
inline LabeledPointSet simulate_cluster_Q(const ClusterModel& model, std::uint64_t seed, std::uint32_t replicate)
{
    std::vector<double> noise_rates, dom_rates;
    for (int e = 0; e < model.marks(); ++e) {
        noise_rates.push_back(model.gamma(e) * model.nu(e));
        dom_rates.push_back(model.lambda0(e) * model.nu(e));
    }
    auto noise =
        detail::poisson_points(noise_rates, model.horizon(), RngStream(seed, {Purpose::cluster_noise, 0, replicate}));
    auto cluster =
        detail::poisson_points(dom_rates, model.horizon(), RngStream(seed, {Purpose::cluster_cluster, 0, replicate}));
    return detail::merge(std::move(noise), std::move(cluster));
}

/// Observations only, as seen by the filter.
inline ObservedPointSet simulate_observations_Q(const ClusterModel& model, std::uint64_t seed, std::uint32_t replicate)
{
    return simulate_cluster_Q(model, seed, replicate).observed;
}

// ---------------------------------------------------------------------------
// Weights

/**
 * log L(t) for a full assignment theta: a jump log(lambda(u, eta_{s-}, s)/lambda0(u))
 * at every theta = 1 point with time <= t, minus the excess integral between points.
 */
inline double cluster_log_weight(const ClusterModel& model, const ObservedPointSet& obs,
                                 std::span<const std::uint8_t> theta, double t)
{
    double logw = 0.0, prev = 0.0;
    for (std::size_t i = 0; i < obs.size() && obs[i].time <= t; ++i) {
        const HistoryView eta{&obs, theta.first(i)};
        logw -= model.excess_integral(eta, prev, obs[i].time);
        if (theta[i]) logw += std::log(model.rate(obs[i].mark, eta, obs[i].time) / model.lambda0(obs[i].mark));
        prev = obs[i].time;
    }
    const HistoryView eta{&obs, theta.first(obs.count_until(t))};
    logw -= model.excess_integral(eta, prev, t);
    return logw;
}

/// Cluster weight on the fine grid.
inline WeightPath weight_cluster(const ClusterModel& model, std::span<const std::uint8_t> theta,
                                 const ObservedPointSet& obs, const TimeGrid& grid)
{
    obs.validate();
    if (theta.size() != obs.size()) throw DimensionError("weight_cluster: one theta per observed point is required");
    WeightPath w;
    w.tag = "cluster";
    w.log.resize(static_cast<std::size_t>(grid.fine_steps()) + 1);
    for (int k = 0; k <= grid.fine_steps(); ++k) w.log[static_cast<std::size_t>(k)] = cluster_log_weight(model, obs, theta, grid.time(k));
    return w;
}

// ---------------------------------------------------------------------------
// Functionals of the cluster history

/// phi(eta_t) evaluated on the assignment prefix of the points observed up to t.
struct ClusterFunctional {
    std::string name;
    std::function<double(std::span<const std::uint8_t>)> value;
};

namespace cluster_phi {

inline ClusterFunctional one()
{
    return {"one", [](std::span<const std::uint8_t>) { return 1.0; }};
}

/// theta(y_i): y_i is a cluster point (0 before y_i is observed).
inline ClusterFunctional theta(std::size_t i)
{
    return {"theta(" + std::to_string(i) + ")",
            [i](std::span<const std::uint8_t> th) { return i < th.size() ? static_cast<double>(th[i]) : 0.0; }};
}

inline double latest_indicator(std::span<const std::uint8_t> th, std::size_t i)
{
    if (i >= th.size() || !th[i]) return 0.0;
    for (std::size_t j = i + 1; j < th.size(); ++j)
        if (th[j]) return 0.0;
    return 1.0;
}

/// theta0(y_i): y_i is the latest cluster point.
inline ClusterFunctional theta0(std::size_t i)
{
    return {"theta0(" + std::to_string(i) + ")",
            [i](std::span<const std::uint8_t> th) { return latest_indicator(th, i); }};
}

inline ClusterFunctional theta_theta0(std::size_t i, std::size_t j)
{
    return {"theta(" + std::to_string(i) + ")theta0(" + std::to_string(j) + ")",
            [i, j](std::span<const std::uint8_t> th) {
                return (i < th.size() ? static_cast<double>(th[i]) : 0.0) * latest_indicator(th, j);
            }};
}

/// one, theta(i), theta0(i) for every point, and theta(i) theta0(j) for i < j.
inline std::vector<ClusterFunctional> standard_battery(std::size_t points, bool pairs = true)
{
    std::vector<ClusterFunctional> b{one()};
    for (std::size_t i = 0; i < points; ++i) b.push_back(theta(i));
    for (std::size_t i = 0; i < points; ++i) b.push_back(theta0(i));
    if (pairs)
        for (std::size_t i = 0; i < points; ++i)
            for (std::size_t j = i + 1; j < points; ++j) b.push_back(theta_theta0(i, j));
    return b;
}

}  // namespace cluster_phi

struct PosteriorEntry {
    double t = 0.0;
    std::string functional;
    double value = 0.0;   ///< normalized posterior pi_t(phi)
    double rho = 0.0;     ///< unnormalized rho_t(phi)
    double se = 0.0;
    bool exact = false;
    double resolution = 0.0;  ///< largest normalized particle weight (0 for exact entries)

    /// |value - reference| within z standard errors plus one particle's weight.
    bool consistent_with(double reference, double z = 4.0) const
    {
        return std::abs(value - reference) <= z * se + resolution;
    }
};

using ClusterPosterior = std::vector<PosteriorEntry>;

inline const PosteriorEntry& find_entry(const ClusterPosterior& post, double t, const std::string& name)
{
    for (const auto& e : post)
        if (e.t == t && e.functional == name) return e;
    throw std::out_of_range("no posterior entry for " + name);
}

// ---------------------------------------------------------------------------
// Exact enumeration

/**
 * Distribution of the assignment prefix at time t: for every prefix of the
 * points observed up to t, prior probability times L(t).
 */
struct PrefixTable {
    std::size_t length = 0;
    std::vector<std::vector<std::uint8_t>> prefixes;
    std::vector<double> weight;  ///< Q-prior probability * L(t)
};

/// Prefixes of the first `points` observations with weights at time t (t at or after the last of them).
inline PrefixTable enumerate_prefixes_of(const ClusterModel& model, const ObservedPointSet& obs, std::size_t points,
                                         double t, std::size_t max_points = 20)
{
    if (points > max_points) {
        throw BudgetError("cluster enumeration: " + std::to_string(points) + " points exceed the limit of " +
                          std::to_string(max_points));
    }
    struct Node {
        std::vector<std::uint8_t> theta;
        double prior, logw;
    };
    std::vector<Node> level{{{}, 1.0, 0.0}};
    double prev = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
        const auto& pt = obs[i];
        const double p = model.prior(pt.mark);
        std::vector<Node> next;
        next.reserve(level.size() * 2);
        for (auto& node : level) {
            const HistoryView eta{&obs, node.theta};
            const double logw = node.logw - model.excess_integral(eta, prev, pt.time);
            const double jump = std::log(model.rate(pt.mark, eta, pt.time) / model.lambda0(pt.mark));
            Node off{node.theta, node.prior * (1.0 - p), logw};
            off.theta.push_back(0);
            Node on{std::move(node.theta), node.prior * p, logw + jump};
            on.theta.push_back(1);
            if (off.prior > 0.0) next.push_back(std::move(off));
            if (on.prior > 0.0 && std::isfinite(on.logw)) next.push_back(std::move(on));
        }
        level = std::move(next);
        prev = pt.time;
    }
    PrefixTable table;
    table.length = points;
    for (auto& node : level) {
        const HistoryView eta{&obs, node.theta};
        table.weight.push_back(node.prior * std::exp(node.logw - model.excess_integral(eta, prev, t)));
        table.prefixes.push_back(std::move(node.theta));
    }
    return table;
}

/// Prefix distribution of the points observed up to t.
inline PrefixTable enumerate_prefixes(const ClusterModel& model, const ObservedPointSet& obs, double t,
                                      std::size_t max_points = 20)
{
    return enumerate_prefixes_of(model, obs, obs.count_until(t), t, max_points);
}

/// Exact rho_t and pi_t of every functional at every query time.
inline ClusterPosterior cluster_filter_exact(const ClusterModel& model, const ObservedPointSet& obs,
                                             std::span<const double> times,
                                             std::span<const ClusterFunctional> battery, std::size_t max_points = 20)
{
    obs.validate();
    ClusterPosterior post;
    for (double t : times) {
        const auto table = enumerate_prefixes(model, obs, t, max_points);
        double norm = 0.0;
        for (double w : table.weight) norm += w;
        for (const auto& f : battery) {
            double rho = 0.0;
            for (std::size_t a = 0; a < table.weight.size(); ++a) rho += table.weight[a] * f.value(table.prefixes[a]);
            post.push_back({t, f.name, rho / norm, rho, 0.0, true});
        }
    }
    return post;
}

// ---------------------------------------------------------------------------
// Monte Carlo over assignments

/// N independent theta assignments drawn from the Q-prior, weighted by their cluster likelihood.
inline ClusterPosterior cluster_filter_mc(const ClusterModel& model, const ObservedPointSet& obs,
                                          std::span<const double> times, std::span<const ClusterFunctional> battery,
                                          std::size_t particles, std::uint64_t seed, std::uint32_t replicate = 0,
                                          const ParallelOptions& par = {}, std::size_t groups = 100)
{
    obs.validate();
    const std::size_t m = obs.size();
    std::vector<std::uint8_t> theta(particles * m);
    std::vector<double> logw(particles * times.size());
    parallel_for(particles, par.threads, [&](std::size_t k) {
        RngStream rng(seed, {Purpose::cluster_assignment, static_cast<std::uint32_t>(k), replicate});
        std::uint8_t* th = theta.data() + k * m;
        for (std::size_t i = 0; i < m; ++i) th[i] = rng.bernoulli(model.prior(obs[i].mark)) ? 1 : 0;
        for (std::size_t c = 0; c < times.size(); ++c)
            logw[k * times.size() + c] = cluster_log_weight(model, obs, std::span<const std::uint8_t>(th, m), times[c]);
    });
    ClusterPosterior post;
    std::vector<double> v(particles), w(particles);
    for (std::size_t c = 0; c < times.size(); ++c) {
        const std::size_t mt = obs.count_until(times[c]);
        double wsum = 0.0, wmax = 0.0;
        for (std::size_t k = 0; k < particles; ++k) {
            w[k] = std::exp(logw[k * times.size() + c]);
            wsum += w[k];
            wmax = std::max(wmax, w[k]);
        }
        for (const auto& f : battery) {
            for (std::size_t k = 0; k < particles; ++k) v[k] = f.value(std::span<const std::uint8_t>(theta.data() + k * m, mt));
            const auto e = weighted_estimate(v, w, groups);
            post.push_back({times[c], f.name, e.pi, e.rho, e.se_pi, false, wmax / wsum});
        }
    }
    return post;
}

// ---------------------------------------------------------------------------
// Kushner-Stratonovich recursion on the prefix distribution

/**
 * Integrates the normalized filter over assignment prefixes: between points
 * d pi(a)/dt = -pi(a) (Lambda(a, t) - sum_b pi(b) Lambda(b, t)) with
 * Lambda = sum_e lambda(e, a, t) nu(e) (adaptive Dormand-Prince); at an
 * observed point u, (a, 1) gets pi(a) lambda(u, a) and (a, 0) gets
 * pi(a) gamma(u), renormalized.
 */
inline ClusterPosterior cluster_ks_recursion(const ClusterModel& model, const ObservedPointSet& obs,
                                             std::span<const double> times, std::span<const ClusterFunctional> battery,
                                             double tolerance = 1e-12, std::size_t max_points = 20)
{
    obs.validate();
    using State = std::vector<double>;
    namespace ode = boost::numeric::odeint;
    std::vector<std::vector<std::uint8_t>> prefixes{{}};
    State pi{1.0};
    double now = 0.0;
    std::size_t next_point = 0;
    ClusterPosterior post;

    auto rhs = [&](const State& x, State& dxdt, double t) {
        dxdt.resize(x.size());
        std::vector<double> lam(x.size());
        double mean = 0.0, mass = 0.0;
        for (std::size_t a = 0; a < x.size(); ++a) {
            lam[a] = model.total_rate(HistoryView{&obs, prefixes[a]}, t);
            mean += x[a] * lam[a];
            mass += x[a];
        }
        mean /= mass;
        for (std::size_t a = 0; a < x.size(); ++a) dxdt[a] = -x[a] * (lam[a] - mean);
    };
    auto advance = [&](double to) {
        if (to > now) {
            auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<State>>(tolerance, tolerance);
            ode::integrate_adaptive(stepper, rhs, pi, now, to, (to - now) / 16);
            double s = 0.0;
            for (double v : pi) s += v;
            for (double& v : pi) v /= s;
        }
        now = to;
    };

    std::vector<double> order(times.begin(), times.end());
    if (!std::is_sorted(order.begin(), order.end())) throw std::invalid_argument("query times must be sorted");
    for (double t : order) {
        while (next_point < obs.size() && obs[next_point].time <= t) {
            if (next_point + 1 > max_points) throw BudgetError("cluster recursion: too many points");
            const auto& pt = obs[next_point];
            advance(pt.time);
            std::vector<std::vector<std::uint8_t>> np;
            State npi;
            double norm = 0.0;
            for (std::size_t a = 0; a < pi.size(); ++a) {
                const double lam = model.rate(pt.mark, HistoryView{&obs, prefixes[a]}, pt.time);
                auto off = prefixes[a];
                off.push_back(0);
                auto on = prefixes[a];
                on.push_back(1);
                np.push_back(std::move(off));
                npi.push_back(pi[a] * model.gamma(pt.mark));
                np.push_back(std::move(on));
                npi.push_back(pi[a] * lam);
                norm += pi[a] * (model.gamma(pt.mark) + lam);
            }
            for (double& v : npi) v /= norm;
            prefixes = std::move(np);
            pi = std::move(npi);
            ++next_point;
        }
        advance(t);
        for (const auto& f : battery) {
            double v = 0.0;
            for (std::size_t a = 0; a < pi.size(); ++a) v += pi[a] * f.value(prefixes[a]);
            post.push_back({t, f.name, v, 0.0, 0.0, true});
        }
    }
    return post;
}

// ---------------------------------------------------------------------------
// Zakai residual of the cluster recursion

/**
 * r(t) = rho_t(phi) - rho_0(phi) + int_0^t sum_e rho_s(phi (lambda(e, .) - lambda0(e))) nu(e) ds
 *        - sum_{points <= t} p(u) rho_{s-}(phi(. + delta) lambda(u, .)/lambda0(u) - phi),
 * with rho from enumeration, p(u) = lambda0/(lambda0 + gamma), and the time
 * integral by adaptive Gauss-Kronrod quadrature between points.
 */
inline std::vector<ResidualSeries> cluster_zakai_residual(const ClusterModel& model, const ObservedPointSet& obs,
                                                          std::span<const double> times,
                                                          std::span<const ClusterFunctional> battery,
                                                          std::size_t max_points = 20)
{
    obs.validate();
    std::vector<ResidualSeries> out(battery.size());
    for (std::size_t f = 0; f < battery.size(); ++f) out[f].phi = battery[f].name;

    for (std::size_t f = 0; f < battery.size(); ++f) {
        const auto& phi = battery[f].value;
        // int_a^b rho_s(phi (lambda - lambda0)) ds with the first `points` observations fixed.
        auto drift = [&](std::size_t points, double a, double b) {
            if (b <= a) return 0.0;
            auto integrand = [&](double s) {
                const auto table = enumerate_prefixes_of(model, obs, points, s, max_points);
                double v = 0.0;
                for (std::size_t k = 0; k < table.weight.size(); ++k) {
                    const HistoryView eta{&obs, table.prefixes[k]};
                    v += table.weight[k] * phi(table.prefixes[k]) *
                         (model.total_rate(eta, s) - model.total_dominating_rate());
                }
                return v;
            };
            return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, a, b, 10, 1e-14);
        };
        for (double t : times) {
            const auto now = enumerate_prefixes(model, obs, t, max_points);
            double r = -phi({});
            for (std::size_t k = 0; k < now.weight.size(); ++k) r += now.weight[k] * phi(now.prefixes[k]);
            double prev = 0.0;
            std::size_t i = 0;
            for (; i < obs.size() && obs[i].time <= t; ++i) {
                const auto& pt = obs[i];
                r += drift(i, prev, pt.time);
                const auto before = enumerate_prefixes_of(model, obs, i, pt.time, max_points);
                double jump = 0.0;
                for (std::size_t k = 0; k < before.weight.size(); ++k) {
                    const auto& pre = before.prefixes[k];
                    const HistoryView eta{&obs, pre};
                    auto on = pre;
                    on.push_back(1);
                    auto off = pre;
                    off.push_back(0);
                    jump += before.weight[k] *
                            (phi(on) * model.rate(pt.mark, eta, pt.time) / model.lambda0(pt.mark) - phi(off));
                }
                r -= model.prior(pt.mark) * jump;
                prev = pt.time;
            }
            r += drift(i, prev, t);
            out[f].times.push_back(t);
            out[f].value.push_back(r);
            out[f].se.push_back(0.0);
        }
    }
    return out;
}

/// Mean of the cluster weight L(T) for the true labels of one reference-measure draw.
inline double cluster_weight_at_horizon(const ClusterModel& model, const LabeledPointSet& draw)
{
    return std::exp(cluster_log_weight(model, draw.observed, draw.theta, model.horizon()));
}

// ---------------------------------------------------------------------------
// CSV

inline void write_csv(std::ostream& os, const LabeledPointSet& pts)
{
    os << "time,mark,theta_true\n";
    os.precision(17);
    for (std::size_t i = 0; i < pts.observed.size(); ++i)
        os << pts.observed[i].time << ',' << pts.observed[i].mark << ','
           << (i < pts.theta.size() ? static_cast<int>(pts.theta[i]) : -1) << '\n';
}

inline void write_csv(std::ostream& os, const ClusterPosterior& post)
{
    os << "t,functional,value,se,exact_flag\n";
    os.precision(17);
    for (const auto& e : post)
        os << e.t << ',' << e.functional << ',' << e.value << ',' << e.se << ',' << (e.exact ? 1 : 0) << '\n';
}

}  // namespace filterlab
