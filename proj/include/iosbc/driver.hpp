#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "iosbc/channel.hpp"
#include "iosbc/covariance_opt.hpp"
#include "iosbc/ios_opt.hpp"
#include "iosbc/power_opt.hpp"
#include "iosbc/rates.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc {

struct StageValues {
    double after_covariance = 0.0;
    double after_ios = 0.0;
    double after_rho = 0.0;
};

struct AoReport {
    double initial_objective = 0.0;
    std::vector<double> objective_trace;           ///< MAC sum rate after each outer iteration
    std::vector<StageValues> stage_trace;
    std::vector<double> reflection_rate_trace;     ///< sum of BC rates of reflection-side users
    std::vector<double> transmission_rate_trace;
    std::vector<double> rho_trace;

    IosState final_state;
    CovarianceSet mac_covariances;
    CovarianceSet bc_covariances;
    UserOrdering order;
    std::vector<double> bc_rates;                  ///< per user, under `order`
    double final_objective = 0.0;
    double bc_sum_rate = 0.0;
    double duality_gap = 0.0;                      ///< |BC sum - MAC| / max(MAC, 1)
    int iterations_used = 0;
    bool converged = false;
    double wall_time_s = 0.0;
};

struct SideRates {
    double reflection = 0.0;
    double transmission = 0.0;
    std::vector<double> per_user;
    CovarianceSet bc;
};

/// Broadcast covariances and per-side DPC rates for the given MAC-dual solution.
inline SideRates side_rates(const ChannelSet& ch, const EffectiveChannels& h, const CovarianceSet& covs,
                            const UserOrdering& order) {
    SideRates r;
    r.bc = mac_to_bc(h, covs, order);
    r.per_user = bc_user_rates(h, r.bc, order);
    for (int k = 0; k < ch.num_users(); ++k)
        (ch.side[k] == Side::reflection ? r.reflection : r.transmission) += r.per_user[k];
    return r;
}

/// Alternating optimization over covariances, IOS coefficients and the power split.
///
/// Each outer iteration runs: covariance optimization at the current surface, one sweep
/// over all elements, then one projected-gradient step on rho (or a full rho solve when
/// opts.rho_stage == full). Stops once the relative objective change falls below
/// opts.rel_tol or after opts.max_outer_iters iterations.
///
/// Default start: S_k = P / (K nr) I, all-ones coefficients (first pair of `pairs` in
/// discrete mode) and rho = 0.5.
inline AoReport run_ao(const ChannelSet& ch, double power_budget, const AoOptions& opts,
                       std::optional<IosState> init = std::nullopt, const PairSet& pairs = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    ch.check();
    if (opts.max_outer_iters < 1) throw ConfigError("solver.ao.max_outer_iters", "must be >= 1");
    if (!(opts.rel_tol > 0.0)) throw ConfigError("solver.ao.rel_tol", "must be > 0");

    const int k_total = ch.num_users();
    IosState state = init ? *init
                          : IosState::initial(ch.n_ios(), project_rho(0.5, opts.rho), opts.mode, pairs);
    state.mode = opts.mode;
    if (state.pair_set.empty()) state.pair_set = pairs;
    if (opts.mode == IosMode::discrete && state.pair_set.empty())
        throw ConfigError("ios.psi_table", "discrete mode requires a pair table");

    CovarianceSet covs =
        CovarianceSet::scaled_identity(k_total, ch.nr(), power_budget, CovarianceKind::mac_dual);

    AoReport rep;
    rep.order = UserOrdering::identity(k_total);
    rep.initial_objective = mac_sum_rate(assemble_effective_channels(ch, state), covs);

    const bool has_surface = ch.n_ios() > 0;
    double step = opts.rho.step0;
    double prev = rep.initial_objective;

    for (int it = 1; it <= opts.max_outer_iters; ++it) {
        StageValues sv;
        try {
            EffectiveChannels h = assemble_effective_channels(ch, state);
            CovarianceSet candidate = optimize_covariances(h, power_budget, opts.covariance, &covs);
            const double f_old = mac_sum_rate(h, covs);
            const double f_new = mac_sum_rate(h, candidate);
            // The previous covariances stay feasible; keep them if the re-solve is no better.
            if (f_new >= f_old) covs = std::move(candidate);
            sv.after_covariance = std::max(f_new, f_old);

            if (has_surface) {
                state = sweep_elements(ch, covs, std::move(state));
                sv.after_ios = mac_sum_rate(assemble_effective_channels(ch, state), covs);

                const RhoTerms terms = rho_terms(ch, covs, state);
                if (opts.rho_stage == RhoStage::full) {
                    state.rho = optimize_rho(ch, covs, state, state.rho, opts.rho).rho;
                } else {
                    const RhoStep s = pg_step(terms, state.rho, step, opts.rho);
                    state.rho = s.rho;
                    step = s.step;
                }
            } else {
                sv.after_ios = sv.after_covariance;
            }
            h = assemble_effective_channels(ch, state);
            sv.after_rho = mac_sum_rate(h, covs);

            rep.objective_trace.push_back(sv.after_rho);
            if (opts.record_trace) {
                rep.stage_trace.push_back(sv);
                const SideRates sr = side_rates(ch, h, covs, rep.order);
                rep.reflection_rate_trace.push_back(sr.reflection);
                rep.transmission_rate_trace.push_back(sr.transmission);
                rep.rho_trace.push_back(state.rho);
            }
        } catch (const std::exception& e) {
            throw std::runtime_error("AO iteration " + std::to_string(it) + ": " + e.what());
        }
        rep.iterations_used = it;
        const double cur = rep.objective_trace.back();
        if (std::abs(cur - prev) <= opts.rel_tol * std::max(std::abs(cur), 1e-300)) {
            rep.converged = true;
            break;
        }
        prev = cur;
    }

    const EffectiveChannels h = assemble_effective_channels(ch, state);
    const SideRates sr = side_rates(ch, h, covs, rep.order);
    rep.final_state = std::move(state);
    rep.mac_covariances = std::move(covs);
    rep.bc_covariances = sr.bc;
    rep.bc_rates = sr.per_user;
    rep.final_objective = rep.objective_trace.back();
    rep.bc_sum_rate = sr.reflection + sr.transmission;
    rep.duality_gap = std::abs(rep.bc_sum_rate - rep.final_objective) / std::max(rep.final_objective, 1.0);
    rep.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

/// Mean and standard error of per-run traces aligned by iteration index.
struct MonteCarloResult {
    std::vector<std::uint64_t> seeds;
    std::vector<AoReport> runs;            ///< same order as seeds
    std::vector<double> mean_objective;
    std::vector<double> stderr_objective;
    std::vector<double> mean_reflection_rate;
    std::vector<double> mean_transmission_rate;
    std::vector<double> mean_rho;
};

namespace detail {

/// Value at iteration i, repeating the last entry once a run has stopped.
inline double padded(const std::vector<double>& v, std::size_t i) {
    return v.empty() ? 0.0 : v[std::min(i, v.size() - 1)];
}

inline void aggregate(MonteCarloResult& mc) {
    std::size_t len = 0;
    for (const auto& r : mc.runs) len = std::max(len, r.objective_trace.size());
    const double n = static_cast<double>(mc.runs.size());
    mc.mean_objective.assign(len, 0.0);
    mc.stderr_objective.assign(len, 0.0);
    mc.mean_reflection_rate.assign(len, 0.0);
    mc.mean_transmission_rate.assign(len, 0.0);
    mc.mean_rho.assign(len, 0.0);
    for (std::size_t i = 0; i < len; ++i) {
        double sum = 0.0, sq = 0.0;
        for (const auto& r : mc.runs) {
            const double v = padded(r.objective_trace, i);
            sum += v;
            sq += v * v;
            mc.mean_reflection_rate[i] += padded(r.reflection_rate_trace, i) / n;
            mc.mean_transmission_rate[i] += padded(r.transmission_rate_trace, i) / n;
            mc.mean_rho[i] += padded(r.rho_trace, i) / n;
        }
        const double mean = sum / n;
        mc.mean_objective[i] = mean;
        if (mc.runs.size() > 1) {
            const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
            mc.stderr_objective[i] = std::sqrt(var / n);
        }
    }
}

}  // namespace detail

/// Run AO on one channel realization per seed, `workers` runs at a time.
/// Results are stored by seed position, so aggregation does not depend on scheduling.
inline MonteCarloResult monte_carlo(const Scenario& sc, const std::vector<std::uint64_t>& seeds,
                                    const AoOptions& opts, int workers = 1) {
    sc.validate();
    if (seeds.empty()) throw ConfigError("solver.runs", "at least one run is required");
    MonteCarloResult mc;
    mc.seeds = seeds;
    mc.runs.resize(seeds.size());

    std::atomic<std::size_t> next{0};
    std::mutex err_mu;
    std::exception_ptr first_error;
    std::uint64_t failed_seed = 0;
    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= seeds.size()) return;
            {
                std::lock_guard lock(err_mu);
                if (first_error) return;
            }
            try {
                const ChannelSet ch = generate_channels(sc, seeds[i]);
                mc.runs[i] = run_ao(ch, sc.power_budget, opts, std::nullopt, sc.pair_set);
            } catch (...) {
                std::lock_guard lock(err_mu);
                if (!first_error) {
                    first_error = std::current_exception();
                    failed_seed = seeds[i];
                }
            }
        }
    };
    const int n_workers = std::max(1, std::min<int>(workers, static_cast<int>(seeds.size())));
    if (n_workers == 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        for (int w = 0; w < n_workers; ++w) pool.emplace_back(work);
    }
    if (first_error) {
        try {
            std::rethrow_exception(first_error);
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception& e) {
            throw std::runtime_error("run with seed " + std::to_string(failed_seed) + " failed: " + e.what());
        }
    }
    detail::aggregate(mc);
    return mc;
}

/// Seeds base, base+1, ..., base+num_runs-1.
inline std::vector<std::uint64_t> consecutive_seeds(std::uint64_t base, int num_runs) {
    std::vector<std::uint64_t> s(static_cast<std::size_t>(std::max(num_runs, 0)));
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = base + i;
    return s;
}

inline MonteCarloResult monte_carlo(const Scenario& sc, int num_runs, const AoOptions& opts, int workers = 1) {
    return monte_carlo(sc, consecutive_seeds(sc.solver.seed, num_runs), opts, workers);
}

}  // namespace iosbc
