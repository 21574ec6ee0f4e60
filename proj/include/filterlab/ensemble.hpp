#pragma once

// Weighted particle ensembles without resampling. Particle k is regenerated on
// demand from its own counter-based streams, so only checkpoint snapshots are
// stored; residual tests replay the paths step by step.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "filterlab/errors.hpp"
#include "filterlab/models.hpp"
#include "filterlab/parallel.hpp"
#include "filterlab/rng.hpp"
#include "filterlab/sde.hpp"
#include "filterlab/spatial_model.hpp"
#include "filterlab/stats.hpp"
#include "filterlab/time_grid.hpp"
#include "filterlab/weights.hpp"

namespace filterlab {

struct EnsembleOptions {
    std::size_t particles = 1000;
    std::vector<int> picard;          ///< Picard steps n carried alongside the exact weight
    std::vector<double> checkpoints;  ///< snapshot times; empty means {T}
    std::uint64_t seed = 1;
    std::uint32_t replicate = 0;
    ParallelOptions parallel{};
    std::size_t groups = 100;  ///< jackknife / bootstrap groups of contiguous particles
    double budget = 2e11;      ///< cap on particles * fine steps
};

struct FilterEstimate {
    double t = 0.0;
    int picard_n = 0;  ///< 0 for the exact weight
    double rho = 0.0;
    double pi = 0.0;
    double se_rho = std::numeric_limits<double>::quiet_NaN();
    double se_pi = std::numeric_limits<double>::quiet_NaN();
    std::size_t particles = 0;
};

/// Group index of particle k when N particles are cut into G contiguous groups.
inline std::size_t group_of(std::size_t k, std::size_t n, std::size_t groups) { return k * groups / n; }

/**
 * rho = mean(phi * w), pi = rho / mean(w), with delete-a-group jackknife
 * standard errors over `groups` contiguous blocks.
 */
inline FilterEstimate weighted_estimate(std::span<const double> phi, std::span<const double> w, std::size_t groups)
{
    if (phi.size() != w.size()) throw DimensionError("weighted_estimate: size mismatch");
    const std::size_t n = phi.size();
    if (n == 0) throw std::invalid_argument("weighted_estimate: empty ensemble");
    FilterEstimate e;
    e.particles = n;
    groups = std::min(groups, n);
    std::vector<double> ga(groups, 0.0), gb(groups, 0.0), gn(groups, 0.0);
    double a = 0.0, b = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double v = phi[k] * w[k];
        a += v;
        b += w[k];
        const std::size_t g = group_of(k, n, groups);
        ga[g] += v;
        gb[g] += w[k];
        gn[g] += 1.0;
    }
    const auto N = static_cast<double>(n);
    e.rho = a / N;
    e.pi = a / b;
    if (groups >= 2) {
        e.se_rho = stats::group_jackknife_se(groups, [&](std::size_t g) { return (a - ga[g]) / (N - gn[g]); });
        e.se_pi = stats::group_jackknife_se(groups, [&](std::size_t g) { return (a - ga[g]) / (b - gb[g]); });
    }
    return e;
}

/// Per-point quantities a residual test needs at one state.
struct LocalTerms {
    double phi = 0.0;
    double generator = 0.0;           ///< A phi
    std::vector<double> h;            ///< h_j
    std::vector<double> grad_alpha;   ///< grad(phi) . alpha_j
    std::vector<double> alpha_hess;   ///< alpha_j^T Hess(phi) alpha_l, row-major J x J

    void resize(int j)
    {
        h.assign(static_cast<std::size_t>(j), 0.0);
        grad_alpha.assign(static_cast<std::size_t>(j), 0.0);
        alpha_hess.assign(static_cast<std::size_t>(j) * static_cast<std::size_t>(j), 0.0);
    }
};

/// Path generator for Model 1 particles: Euler signal, exact and Picard log-weights.
template <DiffusionModel M>
class GwnKernel {
public:
    using Model = M;
    static constexpr int dx = M::dx;

    GwnKernel(std::shared_ptr<const M> model, TimeGrid grid, std::shared_ptr<const ObservationPath> obs,
              std::vector<int> picard, std::uint64_t seed, std::uint32_t replicate)
        : model_(std::move(model)), grid_(grid), obs_(std::move(obs)), picard_(std::move(picard)), seed_(seed),
          replicate_(replicate)
    {
        check_grid(*obs_, grid_);
        if (obs_->dy() != M::dy) throw DimensionError("observation dimension differs from the model's d_Y");
        for (int n : picard_) spc_.push_back(grid_.with_picard(n).steps_per_coarse());
    }

    const M& model() const noexcept { return *model_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const ObservationPath& observation() const noexcept { return *obs_; }
    const std::vector<int>& picard() const noexcept { return picard_; }
    int channels() const noexcept { return M::dy; }
    double channel_mass(int) const noexcept { return 1.0; }
    std::string name() const { return model_->name(); }

    RngStream noise_stream(std::size_t k) const
    {
        return {seed_, {Purpose::signal_noise, static_cast<std::uint32_t>(k), replicate_}};
    }

    /// visit(s, x_s, log L_s, log L^n_s for each n) for s = 0..M.
    template <class Visit>
    void replay(std::size_t k, Visit&& visit) const
    {
        EulerStepper<M> stepper(*model_, grid_, noise_stream(k));
        const std::size_t p = picard_.size();
        std::vector<double> logn(p, 0.0);
        std::vector<Vec<M::dy>> frozen(p);
        double log_exact = 0.0;
        const double dt = grid_.dt();
        for (int s = 0;; ++s) {
            const Vec<M::dx>& x = stepper.state();
            visit(s, x, log_exact, std::span<const double>(logn));
            if (s == grid_.fine_steps()) break;
            const Vec<M::dy> h = model_->sensor(x);
            for (std::size_t i = 0; i < p; ++i) {
                if (s % spc_[i] == 0) frozen[i] = h;
                logn[i] += log_weight_increment<M::dy>(frozen[i], *obs_, s, dt);
            }
            log_exact += log_weight_increment<M::dy>(h, *obs_, s, dt);
            stepper.step();
        }
    }

    void local_terms(const TestFunction<dx>& f, const Vec<dx>& x, LocalTerms& t) const
    {
        t.phi = f.value(x);
        t.generator = apply_generator(*model_, f, x);
        const Vec<M::dy> h = model_->sensor(x);
        for (int j = 0; j < M::dy; ++j) t.h[static_cast<std::size_t>(j)] = h[j];
    }

private:
    std::shared_ptr<const M> model_;
    TimeGrid grid_;
    std::shared_ptr<const ObservationPath> obs_;
    std::vector<int> picard_;
    std::vector<int> spc_;
    std::uint64_t seed_;
    std::uint32_t replicate_;
};

/// Path generator for Model 2 particles: Y-driven signal and spatial log-weights.
class SpatialKernel {
public:
    using Model = SpatialModel;
    static constexpr int dx = 1;

    SpatialKernel(std::shared_ptr<const SpatialModel> model, TimeGrid grid, std::shared_ptr<const ObservationPath> obs,
                  std::vector<int> picard, std::uint64_t seed, std::uint32_t replicate)
        : model_(std::move(model)), grid_(grid), obs_(std::move(obs)), seed_(seed), replicate_(replicate)
    {
        model_->validate();
        check_grid(*obs_, grid_);
        if (obs_->dy() != model_->channels()) throw DimensionError("spatial ensemble: channel count mismatch");
        if (!picard.empty()) throw ConfigError("spatial ensembles carry exact weights only");
    }

    const SpatialModel& model() const noexcept { return *model_; }
    const TimeGrid& grid() const noexcept { return grid_; }
    const ObservationPath& observation() const noexcept { return *obs_; }
    const std::vector<int>& picard() const noexcept { return picard_; }
    int channels() const noexcept { return model_->channels(); }
    double channel_mass(int j) const { return model_->mass[static_cast<std::size_t>(j)]; }
    std::string name() const { return model_->label; }

    RngStream noise_stream(std::size_t k) const
    {
        return {seed_, {Purpose::signal_noise, static_cast<std::uint32_t>(k), replicate_}};
    }

    template <class Visit>
    void replay(std::size_t k, Visit&& visit) const
    {
        SpatialStepper stepper(*model_, grid_, noise_stream(k), *obs_);
        double log_exact = 0.0;
        const double dt = grid_.dt();
        for (int s = 0;; ++s) {
            const double x = stepper.state();
            visit(s, Vec<1>{x}, log_exact, std::span<const double>());
            if (s == grid_.fine_steps()) break;
            log_exact += spatial_log_weight_increment(*model_, x, *obs_, s, dt);
            stepper.step(s);
        }
    }

    void local_terms(const TestFunction<1>& f, const Vec<1>& x, LocalTerms& t) const
    {
        t.phi = f.value(x);
        t.generator = model_->apply_generator(f, x[0]);
        const double g = f.gradient(x)[0];
        const double hs = f.hessian(x)(0, 0);
        const int J = model_->channels();
        for (int j = 0; j < J; ++j) {
            const auto uj = static_cast<std::size_t>(j);
            t.h[uj] = model_->sensor(x[0], j);
            const double aj = model_->alpha(x[0], j);
            t.grad_alpha[uj] = g * aj;
            for (int l = 0; l < J; ++l) {
                t.alpha_hess[uj * static_cast<std::size_t>(J) + static_cast<std::size_t>(l)] =
                    aj * hs * model_->alpha(x[0], l);
            }
        }
    }

private:
    std::shared_ptr<const SpatialModel> model_;
    TimeGrid grid_;
    std::shared_ptr<const ObservationPath> obs_;
    std::vector<int> picard_;
    std::uint64_t seed_;
    std::uint32_t replicate_;
};

/**
 * N exchangeable particles sharing one observation path. Snapshots of the
 * state and of every log-weight are kept at the checkpoint times.
 */
template <class Kernel>
class ParticleEnsemble {
public:
    static constexpr int dx = Kernel::dx;

    ParticleEnsemble(Kernel kernel, EnsembleOptions options)
        : kernel_(std::move(kernel)), opts_(std::move(options))
    {
        const TimeGrid& grid = kernel_.grid();
        if (opts_.particles == 0) throw ConfigError("ensemble.N: particle count must be positive");
        if (static_cast<double>(opts_.particles) * grid.fine_steps() > opts_.budget) {
            throw BudgetError("ensemble: N*M = " + std::to_string(static_cast<double>(opts_.particles) *
                                                                  grid.fine_steps()) +
                              " exceeds the budget " + std::to_string(opts_.budget));
        }
        if (opts_.checkpoints.empty()) opts_.checkpoints = {grid.horizon()};
        for (double t : opts_.checkpoints) check_index_.push_back(grid.index_of(t));
        stride_ = static_cast<std::size_t>(dx) + 1 + kernel_.picard().size();
        snapshots_.assign(opts_.particles * check_index_.size() * stride_, 0.0);
        simulate();
    }

    const Kernel& kernel() const noexcept { return kernel_; }
    const TimeGrid& grid() const noexcept { return kernel_.grid(); }
    const ObservationPath& observation() const noexcept { return kernel_.observation(); }
    const EnsembleOptions& options() const noexcept { return opts_; }
    std::size_t size() const noexcept { return opts_.particles; }
    std::size_t groups() const noexcept { return std::min(opts_.groups, opts_.particles); }
    const std::vector<double>& checkpoints() const noexcept { return opts_.checkpoints; }
    const std::vector<int>& picard() const noexcept { return kernel_.picard(); }

    std::size_t checkpoint_slot(double t) const
    {
        const int k = grid().index_of(t);
        const auto it = std::find(check_index_.begin(), check_index_.end(), k);
        if (it == check_index_.end()) {
            throw std::invalid_argument("time " + std::to_string(t) + " is not an ensemble checkpoint");
        }
        return static_cast<std::size_t>(it - check_index_.begin());
    }

    Vec<dx> state(std::size_t k, std::size_t slot) const
    {
        Vec<dx> x;
        const double* p = snapshot(k, slot);
        for (int d = 0; d < dx; ++d) x[d] = p[d];
        return x;
    }

    /// Log-weight of particle k at a checkpoint slot; n = 0 selects the exact weight.
    double log_weight(std::size_t k, std::size_t slot, int n = 0) const
    {
        return snapshot(k, slot)[dx + weight_column(n)];
    }

    std::size_t weight_column(int n) const
    {
        if (n == 0) return 0;
        const auto& ps = kernel_.picard();
        const auto it = std::find(ps.begin(), ps.end(), n);
        if (it == ps.end()) throw std::invalid_argument("Picard step n=" + std::to_string(n) + " not in ensemble");
        return 1 + static_cast<std::size_t>(it - ps.begin());
    }

    /// phi(X_k(t)) for every particle.
    std::vector<double> values(const TestFunction<dx>& f, double t) const
    {
        const std::size_t slot = checkpoint_slot(t);
        std::vector<double> v(size());
        for (std::size_t k = 0; k < size(); ++k) v[k] = f.value(state(k, slot));
        return v;
    }

    std::vector<double> weights(double t, int n = 0, double log_scale = 0.0) const
    {
        const std::size_t slot = checkpoint_slot(t);
        const std::size_t col = weight_column(n);
        std::vector<double> w(size());
        for (std::size_t k = 0; k < size(); ++k) w[k] = std::exp(snapshot(k, slot)[dx + col] + log_scale);
        return w;
    }

    FilterEstimate estimate(const TestFunction<dx>& f, double t, int n = 0) const
    {
        FilterEstimate e = weighted_estimate(values(f, t), weights(t, n), groups());
        e.t = t;
        e.picard_n = n;
        return e;
    }

    /// E^{k,n}_t(phi) = n phi(X_k(t)) (L_k(t) - L^n_k(t)).
    std::vector<double> error_contributions(const TestFunction<dx>& f, double t, int n) const
    {
        const std::size_t slot = checkpoint_slot(t);
        const std::size_t col = weight_column(n);
        std::vector<double> e(size());
        for (std::size_t k = 0; k < size(); ++k) {
            const double* p = snapshot(k, slot);
            e[k] = n * f.value(state(k, slot)) * (std::exp(p[dx]) - std::exp(p[dx + col]));
        }
        return e;
    }

    template <class Visit>
    void replay(std::size_t k, Visit&& visit) const
    {
        kernel_.replay(k, std::forward<Visit>(visit));
    }

private:
    const double* snapshot(std::size_t k, std::size_t slot) const
    {
        return snapshots_.data() + (k * check_index_.size() + slot) * stride_;
    }

    void simulate()
    {
        const std::size_t c = check_index_.size();
        parallel_for(size(), opts_.parallel.threads, [&](std::size_t k) {
            kernel_.replay(k, [&](int s, const Vec<dx>& x, double log_exact, std::span<const double> logn) {
                for (std::size_t slot = 0; slot < c; ++slot) {
                    if (check_index_[slot] != s) continue;
                    double* p = snapshots_.data() + (k * c + slot) * stride_;
                    for (int d = 0; d < dx; ++d) p[d] = x[d];
                    p[dx] = log_exact;
                    for (std::size_t i = 0; i < logn.size(); ++i) p[static_cast<std::size_t>(dx) + 1 + i] = logn[i];
                }
            });
        });
    }

    Kernel kernel_;
    EnsembleOptions opts_;
    std::vector<int> check_index_;
    std::size_t stride_ = 0;
    std::vector<double> snapshots_;
};

template <DiffusionModel M>
using GwnEnsemble = ParticleEnsemble<GwnKernel<M>>;
using SpatialEnsemble = ParticleEnsemble<SpatialKernel>;

template <DiffusionModel M>
GwnEnsemble<M> build_ensemble(const M& model, const TimeGrid& grid, const ObservationPath& obs,
                              const EnsembleOptions& options)
{
    GwnKernel<M> kernel(std::make_shared<const M>(model), grid, std::make_shared<const ObservationPath>(obs),
                        options.picard, options.seed, options.replicate);
    return GwnEnsemble<M>(std::move(kernel), options);
}

inline SpatialEnsemble build_spatial_ensemble(const SpatialModel& model, const TimeGrid& grid,
                                              const ObservationPath& obs, EnsembleOptions options)
{
    SpatialKernel kernel(std::make_shared<const SpatialModel>(model), grid,
                         std::make_shared<const ObservationPath>(obs), options.picard, options.seed,
                         options.replicate);
    return SpatialEnsemble(std::move(kernel), std::move(options));
}

}  // namespace filterlab
