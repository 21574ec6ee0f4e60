#pragma once

// Quick suite: closed-form and degenerate cases across all modules. Each
// check is exact or uses a 4-SE band; the whole suite runs in seconds.

#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "filterlab/acceptance.hpp"

namespace filterlab {

namespace trivial_detail {

inline FunctionalModel<1, 1, 1> zero_sensor(double sigma = 1.0) { return constant_coefficient_model(sigma, -0.5, 0.0); }

inline SpatialModel transport_cell(double x0)
{
    SpatialModel m;
    m.label = "transport";
    m.cells = {0.5};
    m.mass = {1.0};
    m.drift_fn = [](double) { return 0.0; };
    m.diffusion_fn = [](double) { return 0.0; };
    m.alpha_fn = [](double, int) { return 1.0; };
    m.sensor_fn = [](double, int) { return 0.0; };
    m.initial_fn = [x0](RngStream&) { return x0; };
    m.bound = 1.0;
    return m;
}

inline ObservedPointSet point_set(std::vector<ClusterPoint> p)
{
    ObservedPointSet o;
    o.points = std::move(p);
    o.normalize();
    return o;
}

inline EnsembleOptions small_ensemble(std::size_t n, std::vector<int> picard = {}, std::vector<double> cps = {})
{
    EnsembleOptions o;
    o.particles = n;
    o.picard = std::move(picard);
    o.checkpoints = std::move(cps);
    o.seed = 77;
    return o;
}

inline bool throws_config(const std::function<void()>& f, const std::string& field)
{
    try {
        f();
    } catch (const ConfigError& e) {
        return std::string(e.what()).find(field) != std::string::npos;
    }
    return false;
}

}  // namespace trivial_detail

inline std::vector<QuickCheck> trivial_checks(const std::filesystem::path& scratch)
{
    using namespace trivial_detail;
    std::vector<QuickCheck> c;
    const auto g8 = TimeGrid::make(1.0, 8, 4);
    const auto g64 = TimeGrid::make(1.0, 64, 4);

    // Time grid and random streams
    c.push_back({"tau_n(0.3) = 0.25 at (T=1, M=8, n=4)", [=] { return g8.tau(0.3) == 0.25 && g8.coarse_index(2) == 1; }});
    c.push_back({"tau_n(0.25) = 0.25", [=] { return g8.tau(0.25) == 0.25; }});
    c.push_back({"(T=1, M=6, n=4) is rejected", [] {
                     return throws_config([] { (void)TimeGrid::make(1.0, 6, 4); }, "grid");
                 }});
    c.push_back({"gaussian increments have mean 0 within 4 SE", [] {
                     const auto g = TimeGrid::make(1.0, 1000000, 1);
                     const Eigen::MatrixXd t = gaussian_increments(RngStream(3, {Purpose::probe, 0, 0}), g, 1) /
                                               std::sqrt(g.dt());
                     const std::vector<double> v(t.data(), t.data() + t.size());
                     return std::abs(stats::mean(v)) <= 4.0 * stats::standard_error(v);
                 }});
    c.push_back({"same stream ids give bit-identical tables", [=] {
                     const RngStream s(9, {Purpose::probe, 4, 2});
                     return gaussian_increments(s, g64, 2) == gaussian_increments(s, g64, 2);
                 }});

    // Generator and correction operators
    c.push_back({"A 1 = 0", [] {
                     const BoundedTanhModel m;
                     for (double x : {-2.0, 0.0, 0.7}) {
                         if (apply_generator(m, phi::constant<1>(), Vec<1>{x}) != 0.0) return false;
                     }
                     return true;
                 }});
    c.push_back({"A x^2 = 1 for sigma = 1, b = 0", [] {
                     const auto m = constant_coefficient_model(1.0, 0.0, 0.0);
                     return std::abs(apply_generator(m, phi::square(), Vec<1>{0.4}) - 1.0) < 1e-15;
                 }});
    c.push_back({"constant sensor has zero correction trace", [] {
                     const auto m = constant_coefficient_model(1.0, 0.0, 0.7);
                     return apply_o_tilde(m, phi::identity(), 0, Vec<1>{0.3}) == 0.0;
                 }});
    c.push_back({"trace is 1 for sigma = 1, phi = x, h = x", [] {
                     LinearGaussianModel m;
                     m.F = 0.0;
                     return std::abs(apply_o_tilde(m, phi::identity(), 0, Vec<1>{0.3}) - 1.0) < 1e-15;
                 }});

    // Paths
    c.push_back({"no dynamics gives a constant path", [=] {
                     const auto m = constant_coefficient_model(0.0, 0.0, 0.0, 1.5);
                     const auto x = simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}));
                     for (int k = 0; k <= x.steps(); ++k)
                         if (x[k][0] != 1.5) return false;
                     return true;
                 }});
    c.push_back({"dX = dt from 0 reaches 1 at T = 1", [=] {
                     const auto m = constant_coefficient_model(0.0, 1.0, 0.0);
                     return simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}))[64][0] == 1.0;
                 }});
    c.push_back({"zero sensor gives a pure Brownian observation starting at 0", [=] {
                     const auto m = zero_sensor();
                     const auto x = simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}));
                     const RngStream w(1, {Purpose::observation_noise, 0, 0});
                     const auto y = simulate_observation_P(m, x, g64, w);
                     return y.value(0, 0) == 0.0 && y.increments() == gaussian_increments(w, g64, 1);
                 }});
    c.push_back({"frozen noise and h = c give y_M = cT", [=] {
                     const auto m = constant_coefficient_model(1.0, 0.0, 0.5);
                     const auto x = simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}));
                     const auto y = simulate_observation_P(m, x, g64, Eigen::MatrixXd::Zero(64, 1));
                     return std::abs(y.value(64, 0) - 0.5) < 1e-15;
                 }});
    c.push_back({"one-cell transport follows Y exactly", [=] {
                     const auto m = transport_cell(0.25);
                     const auto y = ObservationPath::linear(g64, {0.75});
                     const auto x = simulate_signal_spatial(m, g64, RngStream(1, {Purpose::probe, 0, 0}), y);
                     return std::abs(x[64][0] - 1.0) < 1e-14;
                 }});

    // Weights
    c.push_back({"h = 0 gives L = 1", [=] {
                     const auto m = zero_sensor();
                     const auto x = simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}));
                     const auto y = simulate_observation_Q(g64, RngStream(1, {Purpose::observation_q, 0, 0}), 1);
                     for (double l : weight_exact(m, x, y, g64).log)
                         if (l != 0.0) return false;
                     return true;
                 }});
    c.push_back({"constant sensor gives L^n = L", [=] {
                     const auto m = constant_coefficient_model(1.0, 0.0, 0.8);
                     const auto x = simulate_signal(m, g64, RngStream(1, {Purpose::probe, 0, 0}));
                     const auto y = simulate_observation_Q(g64, RngStream(1, {Purpose::observation_q, 0, 0}), 1);
                     return weight_exact(m, x, y, g64).log == weight_picard(m, x, y, g64).log;
                 }});
    c.push_back({"n = M/T makes L^n equal L bit for bit", [] {
                     const auto g = TimeGrid::make(1.0, 64, 64);
                     const BoundedTanhModel m;
                     const auto x = simulate_signal(m, g, RngStream(1, {Purpose::probe, 0, 0}));
                     const auto y = simulate_observation_Q(g, RngStream(1, {Purpose::observation_q, 0, 0}), 1);
                     return weight_exact(m, x, y, g).log == weight_picard(m, x, y, g).log;
                 }});
    c.push_back({"dominating cluster intensity gives L = 1", [] {
                     const ClusterModel m({1.0}, {0.5}, {2.0}, std::make_shared<ConstantFractionIntensity>(1.0), 1.0);
                     const auto o = point_set({{0.2, 0}, {0.6, 0}});
                     const std::vector<std::uint8_t> th{1, 0};
                     return std::abs(cluster_log_weight(m, o, th, 1.0)) < 1e-15;
                 }});

    // Ensembles and residuals
    c.push_back({"one particle is its own average", [=] {
                     const BoundedTanhModel m;
                     const auto y = simulate_observation_Q(g64, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto ens = build_ensemble(m, g64, y, small_ensemble(1));
                     const auto e = ens.estimate(phi::identity(), 1.0);
                     return e.pi == ens.values(phi::identity(), 1.0)[0];
                 }});
    c.push_back({"h = 0, phi = 1 gives rho = 1 and zero residual", [=] {
                     const auto m = zero_sensor();
                     const auto y = simulate_observation_Q(g64, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto ens = build_ensemble(m, g64, y, small_ensemble(200, {}, {0.5, 1.0}));
                     const std::vector<double> cps{0.5, 1.0};
                     const auto r = zakai_residual(ens, phi::constant<1>(), cps);
                     return ens.estimate(phi::constant<1>(), 1.0).rho == 1.0 && r.value[0] == 0.0 && r.value[1] == 0.0;
                 }});
    c.push_back({"KS residual of phi = 1 is exactly 0", [=] {
                     const BoundedTanhModel m;
                     const auto y = simulate_observation_Q(g64, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto ens = build_ensemble(m, g64, y, small_ensemble(200, {}, {0.5, 1.0}));
                     const std::vector<double> cps{0.5, 1.0};
                     for (double v : ks_residual(ens, phi::constant<1>(), cps).value)
                         if (v != 0.0) return false;
                     return true;
                 }});
    c.push_back({"Picard at n = M/T equals the exact filter bit for bit", [] {
                     const auto g = TimeGrid::make(1.0, 32, 1);
                     const BoundedTanhModel m;
                     const auto y = simulate_observation_Q(g, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto ens = build_ensemble(m, g, y, small_ensemble(300, {32}));
                     return ens.estimate(phi::identity(), 1.0, 0).rho == ens.estimate(phi::identity(), 1.0, 32).rho;
                 }});
    c.push_back({"one-cell spatial model matches the scalar filter", [=] {
                     const BoundedTanhModel m;
                     const auto sm = spatial_from_scalar(m);
                     const auto y = simulate_observation_Q(g64, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto a = build_ensemble(m, g64, y, small_ensemble(300));
                     const auto b = build_spatial_ensemble(sm, g64, y, small_ensemble(300));
                     return std::abs(a.estimate(phi::square(), 1.0).rho - b.estimate(phi::square(), 1.0).rho) < 1e-12;
                 }});

    // Cluster model
    c.push_back({"no intensity gives an empty point set", [] {
                     const ClusterModel m({1.0}, {0.0}, {1.0}, std::make_shared<ConstantFractionIntensity>(0.0), 1.0);
                     return simulate_cluster_P(m, 1, 0).observed.empty();
                 }});
    c.push_back({"empty mark set gives an empty point set", [] {
                     const ClusterModel m({}, {}, {}, std::make_shared<ConstantFractionIntensity>(1.0), 1.0);
                     return simulate_observations_Q(m, 1, 0).empty();
                 }});
    c.push_back({"dominating intensity: exact posterior is the prior", [] {
                     const ClusterModel m({1.0, 1.0}, {0.5, 1.0}, {2.0, 1.0},
                                          std::make_shared<ConstantFractionIntensity>(1.0), 1.0);
                     const auto o = point_set({{0.2, 0}, {0.5, 1}});
                     const std::vector<double> t{1.0};
                     const auto post = cluster_filter_exact(m, o, t, cluster_phi::standard_battery(2));
                     return std::abs(find_entry(post, 1.0, "theta(0)").value - m.prior(0)) < 1e-14 &&
                            std::abs(find_entry(post, 1.0, "theta(1)").value - m.prior(1)) < 1e-14;
                 }});
    c.push_back({"dominating intensity: Zakai residual of 1 vanishes, KS keeps pi(1) = 1", [] {
                     const ClusterModel m({1.0}, {0.5}, {2.0}, std::make_shared<ConstantFractionIntensity>(1.0), 1.0);
                     const auto o = point_set({{0.3, 0}, {0.7, 0}});
                     const std::vector<double> t{0.5, 1.0};
                     const std::vector<ClusterFunctional> b{cluster_phi::one()};
                     const auto res = cluster_zakai_residual(m, o, t, b);
                     for (double r : res[0].value)
                         if (std::abs(r) > 1e-14) return false;
                     for (const auto& e : cluster_ks_recursion(m, o, t, b))
                         if (std::abs(e.value - 1.0) > 1e-14) return false;
                     return true;
                 }});

    // Error expansion
    c.push_back({"Y = 0 gives R^n = 0", [=] {
                     return r_path(ObservationPath::zero(g64, 1), g64).values.isZero(0.0);
                 }});
    c.push_back({"constant sensor gives U^n = 0", [=] {
                     const auto m = constant_coefficient_model(1.0, -0.5, 0.7);
                     const auto y = simulate_observation_Q(g64, RngStream(2, {Purpose::observation_q, 0, 0}), 1);
                     const auto ens = build_ensemble(m, g64, y, small_ensemble(200, {4}, {0.5, 1.0}));
                     for (double v : ens.error_contributions(phi::identity(), 1.0, 4))
                         if (v != 0.0) return false;
                     return true;
                 }});
    c.push_back({"Richardson of equal inputs returns them", [] {
                     const std::vector<double> a{0.25, -1.5, 3.0};
                     return richardson(a, a) == a;
                 }});

    // Oracles
    c.push_back({"Kalman mean relaxes toward 0 on a zero observation", [] {
                     const auto g = TimeGrid::make(1.0, 256, 1);
                     LinearGaussianModel m;
                     m.F = 0.0;
                     m.initial_mean = 1.0;
                     const auto s = kalman_bucy(linear_system_of(m), ObservationPath::zero(g, 1), g);
                     return s.back().m[0] < 1.0 && s.back().m[0] > 0.0;
                 }});
    c.push_back({"single-outcome and two-outcome expectations", [] {
                     const std::vector<double> one{3.5}, p1{1.0}, two{1.0, 4.0}, p2{0.5, 0.5};
                     auto id = [](double v) { return v; };
                     return small_case_expectation<double>(one, p1, id) == 3.5 &&
                            small_case_expectation<double>(two, p2, id) == 2.5;
                 }});
    c.push_back({"Bernoulli membership expectation is the prior", [] {
                     const double l0 = 2.0, gm = 0.5, p = l0 / (l0 + gm);
                     const std::vector<double> out{0.0, 1.0}, prob{1.0 - p, p};
                     return std::abs(small_case_expectation<double>(out, prob, [](double v) { return v; }) - p) < 1e-15;
                 }});

    // Configuration, reports, manifests
    c.push_back({"M not divisible by n*T names grid.M", [] {
                     return throws_config([] { (void)parse_config(nlohmann::json{{"grid", {{"M", 100}, {"n", {4, 8}}}}}); },
                                          "grid.M");
                 }});
    c.push_back({"single-n report has an undefined slope", [] {
                     const auto rep = slope_report({"phi_id,n,checkpoint,abs_error,se,slope_fit\nx,8,1,0.1,0,0\n"});
                     return rep.size() == 1 && !rep[0].fit.defined();
                 }});
    c.push_back({"errors c/n give slope -1 exactly, c/n^2 give -2", [] {
                     std::ostringstream a, b;
                     a << "phi_id,n,checkpoint,abs_error,se,slope_fit\n";
                     b << a.str();
                     a.precision(17);
                     b.precision(17);
                     for (int n : {4, 8, 16, 32, 64}) {
                         a << "x," << n << ",1," << 0.3 / n << ",0,0\n";
                         b << "x," << n << ",1," << 0.3 / (n * n) << ",0,0\n";
                     }
                     const auto ra = slope_report({a.str()}), rb = slope_report({b.str()});
                     return std::abs(ra[0].fit.slope + 1.0) < 1e-12 && ra[0].fit.slope_se < 1e-12 &&
                            std::abs(rb[0].fit.slope + 2.0) < 1e-12;
                 }});
    c.push_back({"identical invocation twice gives identical manifests", [scratch] {
                     const auto cfg = parse_config(nlohmann::json::object());
                     const RunContext ctx{cfg, 1};
                     return run_command("simulate", ctx, scratch / "trivial_a") ==
                            run_command("simulate", ctx, scratch / "trivial_b");
                 }});
    return c;
}

}  // namespace filterlab
