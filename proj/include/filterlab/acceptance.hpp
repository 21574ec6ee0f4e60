#pragma once

// Acceptance battery: ten numbered criteria plus a quick suite of exact and
// near-exact checks. Each criterion reports pass/fail with the numbers behind
// it; the heavy criteria share one convergence run.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "filterlab/cluster.hpp"
#include "filterlab/commands.hpp"
#include "filterlab/config.hpp"
#include "filterlab/error_expansion.hpp"
#include "filterlab/experiments.hpp"
#include "filterlab/filter.hpp"
#include "filterlab/manifest.hpp"
#include "filterlab/oracle.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/weights.hpp"

namespace filterlab {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Problem sizes; the defaults are the full acceptance sizes.
struct AcceptanceSizes {
    std::size_t martingale_replicates = 100000;
    int martingale_M = 256;
    std::size_t kalman_particles = 100000, kalman_replicates = 50;
    int kalman_M = 256;
    std::size_t residual_particles = 20000, spatial_particles = 10000;
    int residual_M = 256;
    std::size_t cluster_instances = 20, cluster_particles = 100000;
    std::size_t rn_replicates = 10000;
    int rn_M = 4096;
    std::size_t convergence_particles = 100000, convergence_replicates = 24;
    int convergence_M = 4096;
    std::size_t limit_particles = 4000, limit_replicates = 200;
    int limit_M = 4096;

    /// Reduced sizes for exercising the machinery; outcomes are not meaningful.
    static AcceptanceSizes smoke()
    {
        AcceptanceSizes s;
        s.martingale_replicates = 2000;
        s.kalman_particles = 2000;
        s.kalman_replicates = 5;
        s.residual_particles = 2000;
        s.spatial_particles = 1000;
        s.cluster_instances = 2;
        s.cluster_particles = 5000;
        s.rn_replicates = 500;
        s.rn_M = 1024;
        s.convergence_particles = 1000;
        s.convergence_replicates = 4;
        s.convergence_M = 256;
        s.limit_particles = 300;
        s.limit_replicates = 10;
        s.limit_M = 1024;
        return s;
    }
};

struct AcceptanceOptions {
    std::uint64_t seed = 20240601;
    int threads = 1;
    std::filesystem::path scratch = "acceptance_scratch";
    AcceptanceSizes sizes;
};

namespace accept_detail {

inline std::string num(double v, int precision = 4)
{
    std::ostringstream os;
    os.precision(precision);
    os << v;
    return os.str();
}

struct MeanCheck {
    double mean = 0.0, se = 0.0;
    bool ok(double target, double z) const { return std::abs(mean - target) <= z * se; }
};

inline MeanCheck mean_and_se(const std::vector<double>& v) { return {stats::mean(v), stats::standard_error(v)}; }

template <DiffusionModel M>
std::vector<double> gwn_terminal_weights(const M& m, const TimeGrid& g, std::size_t R, std::uint64_t seed,
                                         int threads)
{
    std::vector<double> L(R);
    parallel_for(R, threads, [&](std::size_t r) {
        const auto id = static_cast<std::uint32_t>(r);
        const auto x = simulate_signal(m, g, RngStream(seed, {Purpose::signal_noise, id, 0}));
        const auto y = simulate_observation_Q(g, RngStream(seed, {Purpose::observation_q, 0, id}), M::dy);
        L[r] = weight_exact(m, x, y, g).L(g.fine_steps());
    });
    return L;
}

inline BoundedTanhModel cb6_model() { return BoundedTanhModel{}; }

inline LinearGaussianModel truncated_linear_model()
{
    LinearGaussianModel lg;
    lg.clip = 6.0;
    return lg;
}

inline ClusterModel self_exciting_cluster(double T)
{
    return ClusterModel({1.0, 0.5}, {0.8, 1.2}, {3.0, 2.0},
                        std::make_shared<SelfExcitingIntensity>(std::vector<double>{0.4, 0.3}, 4.0, 3.0), T);
}

inline ClusterModel monotone_cluster(double T)
{
    return ClusterModel({1.0, 1.0}, {1.0, 1.0}, {4.0, 4.0},
                        std::make_shared<MonotoneIntensity>(std::vector<double>{1.0, 1.0}, 1.0), T);
}

}  // namespace accept_detail

/// Runs the numbered criteria; criteria 6, 7 and 9 share one convergence run.
class AcceptanceRunner {
public:
    explicit AcceptanceRunner(AcceptanceOptions opts) : opts_(std::move(opts)) {}

    const std::optional<ConvergenceReport>& convergence() const noexcept { return conv_; }
    const std::optional<LimitMomentReport>& limit() const noexcept { return limit_; }

    CriterionResult run(int id)
    {
        const auto start = std::chrono::steady_clock::now();
        CriterionResult r;
        r.id = id;
        try {
            switch (id) {
            case 1: r = martingale(); break;
            case 2: r = kalman(); break;
            case 3: r = residuals(); break;
            case 4: r = cluster(); break;
            case 5: r = rn_identities(); break;
            case 6: r = first_order(); break;
            case 7: r = boundedness(); break;
            case 8: r = limit_moments(); break;
            case 9: r = richardson_order(); break;
            case 10: r = determinism(); break;
            default: throw std::invalid_argument("no criterion " + std::to_string(id));
            }
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.id = id;
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        return r;
    }

    CriterionResult martingale()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{1, "martingale normalization"};
        const auto g = TimeGrid::make(1.0, s.martingale_M, 1);
        std::ostringstream d;
        bool ok = true;
        auto record = [&](const std::string& label, const std::vector<double>& L) {
            const auto m = mean_and_se(L);
            const bool pass = m.ok(1.0, 4.0);
            ok = ok && pass;
            d << label << " mean " << num(m.mean, 6) << " se " << num(m.se, 3) << (pass ? "" : " (outside 4 SE)")
              << "; ";
        };
        record("bounded_tanh", gwn_terminal_weights(cb6_model(), g, s.martingale_replicates, opts_.seed, opts_.threads));
        record("linear_gaussian_clipped",
               gwn_terminal_weights(truncated_linear_model(), g, s.martingale_replicates, opts_.seed + 1, opts_.threads));
        {
            const auto sm = bounded_spatial_model(4);
            std::vector<double> L(s.martingale_replicates);
            parallel_for(L.size(), opts_.threads, [&](std::size_t i) {
                const auto id = static_cast<std::uint32_t>(i);
                const auto y = simulate_observation_Q(g, RngStream(opts_.seed + 2, {Purpose::observation_q, 0, id}),
                                                      sm.channels(), sm.mass);
                const auto x = simulate_signal_spatial(sm, g, RngStream(opts_.seed + 2, {Purpose::signal_noise, id, 0}), y);
                L[i] = weight_spatial(sm, x, y, g).L(g.fine_steps());
            });
            record("spatial_bounded", L);
        }
        {
            const auto cm = self_exciting_cluster(1.0);
            std::vector<double> L(s.martingale_replicates);
            parallel_for(L.size(), opts_.threads, [&](std::size_t i) {
                L[i] = cluster_weight_at_horizon(cm, simulate_cluster_Q(cm, opts_.seed + 3, static_cast<std::uint32_t>(i)));
            });
            record("cluster_self_exciting", L);
        }
        r.passed = ok;
        r.detail = d.str() + std::to_string(s.martingale_replicates) + " replicates each";
        return r;
    }

    CriterionResult kalman()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{2, "Kalman-Bucy agreement"};
        const auto lg = truncated_linear_model();
        auto lin = lg;
        lin.clip = std::numeric_limits<double>::infinity();
        const auto sys = linear_system_of(lin);
        const auto g = TimeGrid::make(1.0, s.kalman_M, 1);
        std::size_t good_mean = 0, good_second = 0;
        const std::uint64_t seed = opts_.seed + 10;
        for (std::size_t rep = 0; rep < s.kalman_replicates; ++rep) {
            const auto id = static_cast<std::uint32_t>(rep);
            const auto x = simulate_signal(lg, g, RngStream(seed, {Purpose::signal_noise, hidden_signal, id}));
            const auto y = simulate_observation_P(lg, x, g, RngStream(seed, {Purpose::observation_noise, 0, id}));
            const auto kb = kalman_bucy(sys, y, g).back();
            EnsembleOptions o;
            o.particles = s.kalman_particles;
            o.seed = seed;
            o.replicate = id;
            o.parallel.threads = opts_.threads;
            const auto ens = build_ensemble(lg, g, y, o);
            const auto e1 = ens.estimate(phi::identity(), 1.0);
            const auto e2 = ens.estimate(phi::square(), 1.0);
            const double m = kb.m[0], second = kb.P(0, 0) + m * m;
            if (std::abs(e1.pi - m) <= 3.0 * e1.se_pi) ++good_mean;
            if (std::abs(e2.pi - second) <= 3.0 * e2.se_pi) ++good_second;
        }
        const auto need = static_cast<std::size_t>(std::ceil(0.9 * static_cast<double>(s.kalman_replicates)));
        r.passed = good_mean >= need && good_second >= need;
        r.detail = "pi(x) within 3 SE on " + std::to_string(good_mean) + "/" + std::to_string(s.kalman_replicates) +
                   ", pi(x^2) on " + std::to_string(good_second) + "/" + std::to_string(s.kalman_replicates) +
                   " paths (need " + std::to_string(need) + "), N=" + std::to_string(s.kalman_particles);
        return r;
    }

    CriterionResult residuals()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{3, "Zakai and KS residuals"};
        const auto g = TimeGrid::make(1.0, s.residual_M, 1);
        const std::vector<double> cps{0.25, 0.5, 0.75, 1.0};
        const std::vector<TestFunction<1>> battery{phi::constant<1>(), phi::identity(), phi::square(),
                                                   phi::hyperbolic_tangent()};
        const std::span<const TestFunction<1>> b(battery);
        const std::uint64_t seed = opts_.seed + 20;
        double worst = 0.0;
        std::string where;
        auto scan = [&](const std::string& label, const std::vector<ResidualSeries>& v) {
            for (const auto& rs : v)
                if (rs.max_abs_z() > worst) {
                    worst = rs.max_abs_z();
                    where = label + " " + rs.phi;
                }
        };
        {
            const auto m = cb6_model();
            const auto x = simulate_signal(m, g, RngStream(seed, {Purpose::signal_noise, hidden_signal, 0}));
            const auto y = simulate_observation_P(m, x, g, RngStream(seed, {Purpose::observation_noise, 0, 0}));
            EnsembleOptions o;
            o.particles = s.residual_particles;
            o.checkpoints = cps;
            o.seed = seed;
            o.parallel.threads = opts_.threads;
            const auto ens = build_ensemble(m, g, y, o);
            scan("model1 zakai", zakai_residual(ens, b, cps));
            scan("model1 ks", ks_residual(ens, b, cps));
        }
        {
            const auto sm = bounded_spatial_model(4);
            const auto [x, y] = simulate_spatial_P(sm, g, RngStream(seed, {Purpose::signal_noise, hidden_signal, 1}),
                                                   RngStream(seed, {Purpose::observation_noise, 0, 1}));
            EnsembleOptions o;
            o.particles = s.spatial_particles;
            o.checkpoints = cps;
            o.seed = seed;
            o.replicate = 1;
            o.parallel.threads = opts_.threads;
            const auto ens = build_spatial_ensemble(sm, g, y, o);
            scan("model2 zakai", zakai_residual(ens, b, cps));
            scan("model2 ks", ks_residual(ens, b, cps));
        }
        r.passed = worst <= 4.0;
        r.detail = "max |residual|/SE = " + num(worst, 3) + (where.empty() ? "" : " (" + where + ")") +
                   " over 4 checkpoints, 4 test functions, 2 equations, 2 models";
        return r;
    }

    CriterionResult cluster()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{4, "cluster enumeration equivalence"};
        const std::uint64_t seed = opts_.seed + 30;
        std::size_t mc_bad = 0, mc_total = 0;
        double ks_worst = 0.0, z_worst = 0.0;
        for (std::size_t i = 0; i < s.cluster_instances; ++i) {
            const auto m = i % 2 ? monotone_cluster(1.0) : self_exciting_cluster(1.5);
            const auto inst = detail::cluster_instance(m, seed, i, 10);
            const auto& o = inst.observed;
            const std::vector<double> horizon{m.horizon()};
            const auto battery = cluster_phi::standard_battery(o.size(), false);
            const auto exact = cluster_filter_exact(m, o, horizon, battery);
            ParallelOptions par;
            par.threads = opts_.threads;
            const auto mc = cluster_filter_mc(m, o, horizon, battery, s.cluster_particles, seed,
                                              static_cast<std::uint32_t>(i), par);
            for (std::size_t f = 1; f < battery.size(); ++f) {
                ++mc_total;
                if (!mc[f].consistent_with(exact[f].value)) ++mc_bad;
                if (mc[f].se > 0.0) z_worst = std::max(z_worst, std::abs(mc[f].value - exact[f].value) / mc[f].se);
            }
            const double T = m.horizon();
            const std::vector<double> times{0.25 * T, 0.5 * T, 0.75 * T, T};
            const auto full = cluster_phi::standard_battery(o.size());
            const auto ex = cluster_filter_exact(m, o, times, full);
            const auto ks = cluster_ks_recursion(m, o, times, full);
            for (std::size_t k = 0; k < ks.size(); ++k) ks_worst = std::max(ks_worst, std::abs(ks[k].value - ex[k].value));
        }
        r.passed = mc_bad == 0 && ks_worst <= 1e-8;
        r.detail = "MC outside 4 SE (+resolution) on " + std::to_string(mc_bad) + "/" + std::to_string(mc_total) +
                   " posteriors (max z " + num(z_worst, 3) + "); max |KS - enumeration| = " + num(ks_worst, 3) +
                   " over " + std::to_string(s.cluster_instances) + " instances";
        return r;
    }

    CriterionResult rn_identities()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{5, "R^n identities"};
        double worst_scaled = 0.0, worst_closed = 0.0;
        for (const auto [M, n] : {std::pair{64, 4}, std::pair{1024, 16}, std::pair{4096, 64}, std::pair{4096, 8}}) {
            const auto g = TimeGrid::make(1.0, M, n);
            const int S = g.steps_per_coarse();
            for (int k = 1; k <= n; ++k) {
                const double sum = rn_quadratic_variation_sum(g, k * S);
                worst_scaled = std::max(worst_scaled, std::abs(sum - static_cast<double>(k) / n) * M);
                worst_closed = std::max(worst_closed, std::abs(sum - rn_quadratic_variation_closed_form(g, k)));
            }
        }
        const auto g = TimeGrid::make(1.0, s.rn_M, 64);
        const auto reps = reference_observations(g, 2, s.rn_replicates, opts_.seed + 40);
        const std::vector<int> ns{64};
        const auto st = r_limit_test(reps, g, ns).front();
        const bool qv = worst_scaled <= 2.0 && worst_closed <= 1e-12;
        r.passed = qv && st.variance_within(1.0, 0.05) && st.uncorrelated(4.0);
        r.detail = "max M*|[R^n]_k - k/n| = " + num(worst_scaled, 3) + " (bound 2); Var R^64(T) = " +
                   num(st.variance, 4) + "; corr(Y,R) = " + num(st.corr_y_r, 3) + " (se " + num(st.corr_y_r_se, 3) +
                   "); corr(R^1,R^2) = " + num(st.corr_r_r, 3) + " (se " + num(st.corr_r_r_se, 3) + "); " +
                   std::to_string(s.rn_replicates) + " replicates, M=" + std::to_string(s.rn_M);
        return r;
    }

    const ConvergenceReport& convergence_run()
    {
        if (!conv_) {
            const auto& s = opts_.sizes;
            ConvergenceOptions o;
            o.n_set = {4, 8, 16, 32, 64};
            o.particles = s.convergence_particles;
            o.replicates = s.convergence_replicates;
            o.checkpoints = {0.25, 0.5, 0.75, 1.0};
            o.seed = opts_.seed + 60;
            o.parallel.threads = opts_.threads;
            const std::vector<TestFunction<1>> battery{phi::identity(), phi::square(), phi::hyperbolic_tangent()};
            conv_ = run_convergence(accept_detail::cb6_model(), TimeGrid::make(1.0, s.convergence_M, 1),
                                    std::span<const TestFunction<1>>(battery), o);
        }
        return *conv_;
    }

    CriterionResult first_order()
    {
        using namespace accept_detail;
        CriterionResult r{6, "first-order convergence"};
        const auto& rep = convergence_run();
        bool ok = true;
        std::ostringstream d;
        for (const auto& pc : rep.phis) {
            const bool pass = pc.fit.defined() && pc.fit.slope >= -1.2 && pc.fit.slope <= -0.8;
            ok = ok && pass;
            d << pc.phi << " slope " << num(pc.fit.slope, 3) << " +- " << num(pc.fit.slope_se, 2) << "; ";
        }
        r.passed = ok;
        r.detail = d.str() + "target [-1.2, -0.8], N=" + std::to_string(rep.particles) +
                   ", replicates=" + std::to_string(rep.replicates);
        return r;
    }

    CriterionResult boundedness()
    {
        using namespace accept_detail;
        CriterionResult r{7, "U^n boundedness"};
        const auto& rep = convergence_run();
        bool ok = true;
        std::ostringstream d;
        for (const auto& pc : rep.phis) {
            const auto [lo, hi] = pc.sup_ratio_range();
            const bool pass = hi < 2.0 && lo > 0.5;
            ok = ok && pass;
            d << pc.phi << " E sup|U|^2 / (n=4 value) in [" << num(lo, 3) << ", " << num(hi, 3) << "]; ";
        }
        r.passed = ok;
        r.detail = d.str() + "target within a factor 2";
        return r;
    }

    CriterionResult limit_moments()
    {
        using namespace accept_detail;
        const auto& s = opts_.sizes;
        CriterionResult r{8, "limit-law moment match"};
        LimitMomentOptions o;
        o.n = 64;
        o.replicates = s.limit_replicates;
        o.particles = s.limit_particles;
        o.seed = opts_.seed + 80;
        o.parallel.threads = opts_.threads;
        limit_ = run_limit_moments(cb6_model(), TimeGrid::make(1.0, s.limit_M, 64), phi::identity(), o);
        const auto& l = *limit_;
        r.passed = l.passed();
        r.detail = "mean " + num(l.mean_hat) + " vs " + num(l.mean_limit) + " (z " + num(l.mean_z(), 3) + "); var " +
                   num(l.var_hat) + " vs " + num(l.var_limit) + " (z " + num(l.var_z(), 3) + "); basis " + l.basis +
                   ", pre-limit corr " + num(l.prelimit_correlation, 3) + ", " + std::to_string(s.limit_replicates) +
                   " replicates";
        return r;
    }

    CriterionResult richardson_order()
    {
        using namespace accept_detail;
        CriterionResult r{9, "Richardson order"};
        const auto& rep = convergence_run();
        bool ok = true;
        std::ostringstream d;
        for (const auto& pc : rep.phis) {
            const bool pass = pc.richardson_fit.defined() && pc.richardson_fit.slope < -1.5;
            ok = ok && pass;
            d << pc.phi << " slope " << num(pc.richardson_fit.slope, 3) << " +- " << num(pc.richardson_fit.slope_se, 2)
              << "; ";
        }
        r.passed = ok;
        r.detail = d.str() + "target < -1.5 over n in {4,...,32}";
        return r;
    }

    CriterionResult determinism()
    {
        CriterionResult r{10, "determinism across thread counts"};
        struct Case {
            std::string command;
            std::vector<std::string> overrides;
        };
        const std::vector<Case> cases{
            {"simulate", {}},
            {"filter-gwn", {"model.type=\"linear_gaussian\"", "ensemble.N=3000", "grid.M=256", "grid.n=[4,8]",
                            "checkpoints=[0.5,1.0]"}},
            {"filter-spatial", {"model={\"type\":\"spatial_bounded\",\"cells\":3}", "ensemble.N=2000", "grid.M=128",
                                "grid.n=[1]"}},
            {"filter-cluster", {"model.type=\"cluster\"", "cluster.N=4000", "cluster.max_points=8", "grid.n=[1]",
                                "cluster.instances=2"}},
            {"convergence", {"ensemble.N=1500", "grid.M=256", "grid.n=[4,8,16]", "replicates=3"}},
            {"error-expansion", {"ensemble.N=1000", "grid.M=256", "grid.n=[4,8]", "limit.n=8", "limit.replicates=3",
                                 "limit.N=500", "phi=[\"x\"]", "checkpoints=[0.5,1.0]", "galerkin.spacing=0.2"}},
        };
        std::size_t same = 0;
        std::string mismatch;
        for (const auto& c : cases) {
            auto doc = nlohmann::json::object();
            for (const auto& o : c.overrides) apply_override(doc, o);
            apply_override(doc, "seed=" + std::to_string(opts_.seed + 100));
            const auto cfg = parse_config(doc);
            nlohmann::json manifests[2];
            const int threads[2] = {1, 3};
            for (int i = 0; i < 2; ++i) {
                RunContext ctx{cfg, threads[i]};
                manifests[i] = run_command(c.command, ctx,
                                           opts_.scratch / (c.command + "_threads" + std::to_string(threads[i])));
            }
            if (manifests[0] == manifests[1]) ++same;
            else mismatch += c.command + " ";
        }
        r.passed = same == cases.size();
        r.detail = std::to_string(same) + "/" + std::to_string(cases.size()) +
                   " subcommands byte-identical at --threads 1 and 3" +
                   (mismatch.empty() ? "" : " (differs: " + mismatch + ")");
        return r;
    }

private:
    AcceptanceOptions opts_;
    std::optional<ConvergenceReport> conv_;
    std::optional<LimitMomentReport> limit_;
};

// ---------------------------------------------------------------------------
// Quick suite

struct QuickCheck {
    std::string name;
    std::function<bool()> run;
};

inline std::vector<QuickCheck> trivial_checks(const std::filesystem::path& scratch);

inline std::vector<CriterionResult> run_trivial_suite(const std::filesystem::path& scratch)
{
    std::vector<CriterionResult> out;
    int id = 0;
    for (const auto& c : trivial_checks(scratch)) {
        CriterionResult r{++id, c.name};
        const auto start = std::chrono::steady_clock::now();
        try {
            r.passed = c.run();
        } catch (const std::exception& e) {
            r.passed = false;
            r.detail = std::string("error: ") + e.what();
        }
        r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_results_csv(std::ostream& os, const std::vector<CriterionResult>& results)
{
    os << "criterion,name,passed,detail\n";
    for (const auto& r : results) {
        std::string d = r.detail;
        for (char& ch : d)
            if (ch == '"') ch = '\'';
        os << r.id << ",\"" << r.name << "\"," << (r.passed ? 1 : 0) << ",\"" << d << "\"\n";
    }
}

inline std::string result_line(const CriterionResult& r, const char* kind = "criterion")
{
    std::ostringstream os;
    os.precision(3);
    os << (r.passed ? "PASS" : "FAIL") << "  " << kind << " " << r.id << " " << r.name << ": " << r.detail << " ("
       << std::fixed << r.seconds << " s)";
    return os.str();
}

/**
 * Run a suite ("trivial" or "full", optionally restricted to `ids`), print one
 * line per result to `log`, and write acceptance.csv plus the manifest to
 * `out_dir`. Returns true when every result passed.
 */
inline bool run_acceptance(const std::string& suite, const AcceptanceOptions& opts, const std::vector<int>& ids,
                           std::ostream& log, const std::filesystem::path& out_dir)
{
    ExperimentConfig cfg;
    cfg.seed = opts.seed;
    RunOutput out(out_dir, "acceptance --suite " + suite, cfg);
    std::vector<CriterionResult> results;
    if (suite == "trivial") {
        results = run_trivial_suite(opts.scratch);
        for (const auto& r : results) log << result_line(r, "check") << std::endl;
    } else if (suite == "full") {
        AcceptanceRunner runner(opts);
        std::vector<int> todo = ids;
        if (todo.empty())
            for (int i = 1; i <= 10; ++i) todo.push_back(i);
        for (int id : todo) {
            results.push_back(runner.run(id));
            log << result_line(results.back()) << std::endl;
            out.stage("criterion_" + std::to_string(id));
        }
        if (runner.convergence())
            out.write_with("convergence.csv", [&](std::ostream& os) { write_convergence_csv(os, *runner.convergence()); });
        if (runner.convergence())
            out.write_with("richardson.csv",
                           [&](std::ostream& os) { write_convergence_csv(os, *runner.convergence(), true); });
        if (runner.convergence())
            out.write_with("boundedness.csv", [&](std::ostream& os) { write_boundedness_csv(os, *runner.convergence()); });
        if (runner.limit()) out.write_with("limit.csv", [&](std::ostream& os) { write_limit_csv(os, *runner.limit()); });
    } else {
        throw ConfigError("--suite: expected trivial or full, got '" + suite + "'");
    }
    out.write_with("acceptance.csv", [&](std::ostream& os) { write_results_csv(os, results); });
    out.finish();
    std::size_t passed = 0;
    for (const auto& r : results) passed += r.passed ? 1 : 0;
    log << passed << "/" << results.size() << " passed" << std::endl;
    return passed == results.size();
}

}  // namespace filterlab

#include "filterlab/trivial_checks.hpp"
