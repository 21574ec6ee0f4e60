#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "filterlab/rng.hpp"

namespace filterlab::stats {

inline double mean(std::span<const double> v)
{
    if (v.empty()) throw std::invalid_argument("mean of empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased sample variance.
inline double variance(std::span<const double> v)
{
    if (v.size() < 2) throw std::invalid_argument("variance needs two observations");
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

inline double standard_error(std::span<const double> v)
{
    return std::sqrt(variance(v) / static_cast<double>(v.size()));
}

/// Standard error of the unbiased sample variance, from the fourth central moment.
inline double variance_standard_error(std::span<const double> v)
{
    const auto n = static_cast<double>(v.size());
    const double m = mean(v);
    double m2 = 0.0, m4 = 0.0;
    for (double x : v) {
        const double d2 = (x - m) * (x - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    const double var_of_var = (m4 - (n - 3.0) / (n - 1.0) * m2 * m2) / n;
    return std::sqrt(std::max(0.0, var_of_var));
}

inline double correlation(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("correlation: size mismatch");
    const double ma = mean(a), mb = mean(b);
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Lag-1 autocorrelation of a series.
inline double lag1_autocorrelation(std::span<const double> v)
{
    if (v.size() < 3) throw std::invalid_argument("autocorrelation needs three observations");
    return correlation(v.subspan(0, v.size() - 1), v.subspan(1));
}

/// Ordinary least squares line y = intercept + slope x, with slope standard error.
struct LineFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    double slope_se = std::numeric_limits<double>::quiet_NaN();
    std::size_t points = 0;

    bool defined() const noexcept { return std::isfinite(slope); }
};

inline LineFit fit_line(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size()) throw std::invalid_argument("fit_line: size mismatch");
    LineFit fit;
    fit.points = x.size();
    if (x.size() < 2) return fit;
    const double mx = mean(x), my = mean(y);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) return fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = y[i] - fit.intercept - fit.slope * x[i];
            rss += r * r;
        }
        fit.slope_se = std::sqrt(rss / static_cast<double>(x.size() - 2) / sxx);
    } else {
        fit.slope_se = 0.0;
    }
    return fit;
}

/// Slope of log(error) against log(n).
inline LineFit loglog_slope(std::span<const double> n, std::span<const double> err)
{
    std::vector<double> lx(n.size()), ly(err.size());
    std::transform(n.begin(), n.end(), lx.begin(), [](double v) { return std::log(v); });
    std::transform(err.begin(), err.end(), ly.begin(), [](double v) { return std::log(v); });
    return fit_line(lx, ly);
}

/**
 * Delete-a-group jackknife. `estimate(skip)` returns the statistic computed
 * without group `skip`; `full` is the all-groups estimate.
 */
template <class Estimate>
double group_jackknife_se(std::size_t groups, Estimate&& estimate)
{
    if (groups < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> leave_out(groups);
    for (std::size_t g = 0; g < groups; ++g) leave_out[g] = estimate(g);
    const double m = mean(leave_out);
    double s = 0.0;
    for (double v : leave_out) s += (v - m) * (v - m);
    const auto G = static_cast<double>(groups);
    return std::sqrt((G - 1.0) / G * s);
}

/// Bootstrap standard error of the mean of `values`, with deterministic resampling.
inline double bootstrap_mean_se(std::span<const double> values, int resamples, RngStream rng)
{
    const std::size_t n = values.size();
    if (n < 2 || resamples < 2) return std::numeric_limits<double>::quiet_NaN();
    std::vector<double> means(static_cast<std::size_t>(resamples));
    for (auto& m : means) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += values[rng.below(n)];
        m = s / static_cast<double>(n);
    }
    return std::sqrt(variance(means));
}

}  // namespace filterlab::stats
