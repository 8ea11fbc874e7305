#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include "iosbc/errors.hpp"
#include "iosbc/linalg.hpp"
#include "iosbc/rates.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc {

struct WaterfillSolution {
    CMat covariance;
    double allocated_power = 0.0;
    int active_modes = 0;
};

/// Best response of one MAC user at multiplier `mu`.
///
/// With H_k Hbar^{-1} H_k^H = V diag(sigma) V^H, returns
/// V diag((1/mu - 1/sigma_i)_+) V^H, the maximizer of
/// ln|Hbar + H_k^H S H_k| - mu tr(S) over PSD S.
inline WaterfillSolution waterfill_user(const CMat& h_k, const CMat& hbar_k, double mu) {
    if (!(mu > 0.0)) throw DomainError("water-filling multiplier must be > 0");
    Eigen::LLT<CMat> llt(linalg::hermitian_part(hbar_k));
    if (llt.info() != Eigen::Success)
        throw NumericalError("water-filling: interference-plus-noise matrix is not positive definite");
    const CMat gain = linalg::hermitian_part(h_k * llt.solve(h_k.adjoint()));
    Eigen::SelfAdjointEigenSolver<CMat> es(gain);
    const RVec& sigma = es.eigenvalues();

    WaterfillSolution out;
    RVec p = RVec::Zero(sigma.size());
    for (Eigen::Index i = 0; i < sigma.size(); ++i) {
        if (sigma(i) <= 0.0) continue;
        const double v = 1.0 / mu - 1.0 / sigma(i);
        if (v > 0.0) {
            p(i) = v;
            out.allocated_power += v;
            ++out.active_modes;
        }
    }
    out.covariance = es.eigenvectors() * p.asDiagonal() * es.eigenvectors().adjoint();
    return out;
}

/// ln|I + sum_k H_k^H S_k H_k| - mu sum_k tr(S_k) (natural log, without the +mu P constant).
inline double lagrangian(const EffectiveChannels& h, const CovarianceSet& s, double mu) {
    return linalg::log2det_hpd(mac_gram(h, s)) * std::numbers::ln2 - mu * s.total_power();
}

struct BcmResult {
    int sweeps = 0;
    bool converged = false;
};

/// Observer called after each block update with (user, lagrangian before, lagrangian after).
using BlockObserver = std::function<void(int, double, double)>;

/// Cyclic block-coordinate maximization of the Lagrangian at fixed `mu`, in place.
///
/// Stops when the largest per-user Frobenius change in a sweep falls below
/// tol * max(total power, 1e-300), or after max_sweeps.
inline BcmResult maximize_lagrangian(const EffectiveChannels& h, double mu, CovarianceSet& s,
                                     const CovarianceOptions& opts,
                                     const BlockObserver& observer = {}) {
    const int k_total = h.num_users();
    BcmResult res;
    for (int sweep = 1; sweep <= opts.max_sweeps; ++sweep) {
        CMat x = mac_gram(h, s);
        double max_change = 0.0;
        for (int k = 0; k < k_total; ++k) {
            const CMat own = h.h[k].adjoint() * s.s[k] * h.h[k];
            const CMat hbar = linalg::hermitian_part(x - own);
            double before = 0.0;
            if (observer) before = lagrangian(h, s, mu);
            auto sol = waterfill_user(h.h[k], hbar, mu);
            max_change = std::max(max_change, (sol.covariance - s.s[k]).norm());
            s.s[k] = std::move(sol.covariance);
            x = linalg::hermitian_part(hbar + h.h[k].adjoint() * s.s[k] * h.h[k]);
            if (observer) observer(k, before, lagrangian(h, s, mu));
        }
        res.sweeps = sweep;
        const double scale = std::max(s.total_power(), 1e-300);
        if (max_change <= opts.tol * scale) {
            res.converged = true;
            break;
        }
    }
    return res;
}

struct CovarianceSolution {
    CovarianceSet covariances;
    double mu = 0.0;
    int bisection_steps = 0;
    int total_sweeps = 0;
};

/// Maximize log2|I + sum_k H_k^H S_k H_k| subject to sum_k tr(S_k) <= P, S_k PSD.
///
/// Dual decomposition: bracketed root search (regula falsi in log scale) on the
/// multiplier mu, each dual evaluation solved by cyclic BCM warm-started from the
/// p >= P side. Total power is non-increasing in mu, so the bracket [mu_lo, mu_hi]
/// keeps p(mu_lo) >= P > p(mu_hi).
inline CovarianceSolution solve_covariances(const EffectiveChannels& h, double power_budget,
                                            const CovarianceOptions& opts,
                                            const CovarianceSet* warm_start = nullptr) {
    if (!(power_budget > 0.0)) throw ConfigError("system.power_w", "power budget must be > 0");
    if (h.num_users() == 0) throw ContractViolation("no users");
    const int k_total = h.num_users();
    const int nr = static_cast<int>(h.h.front().rows());

    double mu_hi = 0.0;
    for (const auto& hk : h.h) {
        if (hk.size() == 0) continue;
        Eigen::SelfAdjointEigenSolver<CMat> es(linalg::hermitian_part(hk * hk.adjoint()),
                                               Eigen::EigenvaluesOnly);
        mu_hi = std::max(mu_hi, es.eigenvalues().maxCoeff());
    }

    CovarianceSolution out;
    if (!(mu_hi > 0.0)) {
        // All channels vanish: any feasible point is optimal (rate 0).
        out.covariances = CovarianceSet::scaled_identity(k_total, nr, power_budget, CovarianceKind::mac_dual);
        return out;
    }
    mu_hi *= 1.0 + 1e-9;

    CovarianceSet s = warm_start ? *warm_start
                                 : CovarianceSet::scaled_identity(k_total, nr, power_budget,
                                                                  CovarianceKind::mac_dual);
    auto power_at = [&](double mu) {
        auto r = maximize_lagrangian(h, mu, s, opts);
        out.total_sweeps += r.sweeps;
        return s.total_power();
    };

    // Upper bound: every mode carries at most 1/mu, so p(mu) <= K nr / mu.
    double mu_lo = std::min(mu_hi, k_total * nr / power_budget) * 0.5;
    double p_lo = power_at(mu_lo);
    int expansions = 0;
    while (p_lo < power_budget) {
        if (++expansions > 200) {
            std::ostringstream os;
            os << "could not bracket the power multiplier (p = " << p_lo << " at mu = " << mu_lo << ")";
            throw ConfigError("solver.covariance", os.str());
        }
        mu_lo *= 0.1;
        p_lo = power_at(mu_lo);
    }
    CovarianceSet s_lo = s;

    // Illinois regula falsi on g(t) = p(e^t) - P over t = ln mu, bracketed by
    // g(t_lo) >= 0 > g(t_hi); p(mu_hi) = 0 since no mode clears the water level there.
    double t_lo = std::log(mu_lo), t_hi = std::log(mu_hi);
    double g_lo = p_lo - power_budget, g_hi = -power_budget;
    int last_side = 0;
    double mu = mu_lo;
    double p = p_lo;
    for (int it = 0; it < opts.max_bisection; ++it) {
        if (std::abs(p - power_budget) <= opts.power_tol * power_budget) break;
        if (t_hi - t_lo < 1e-14) break;
        double t = (t_lo * g_hi - t_hi * g_lo) / (g_hi - g_lo);
        const double margin = 0.01 * (t_hi - t_lo);
        if (!(t > t_lo + margin && t < t_hi - margin) || it % 4 == 3) t = 0.5 * (t_lo + t_hi);
        mu = std::exp(t);
        s = s_lo;
        p = power_at(mu);
        ++out.bisection_steps;
        const double g = p - power_budget;
        if (g >= 0.0) {
            t_lo = t;
            g_lo = g;
            s_lo = s;
            if (last_side == 1) g_hi *= 0.5;
            last_side = 1;
        } else {
            t_hi = t;
            g_hi = g;
            if (last_side == -1) g_lo *= 0.5;
            last_side = -1;
        }
    }
    mu_lo = std::exp(t_lo);
    if (std::abs(p - power_budget) > opts.power_tol * power_budget) {
        // Bracket collapsed without meeting the tolerance; fall back to the p >= P side.
        s = s_lo;
        mu = mu_lo;
        p = s.total_power();
    }
    if (p > power_budget) {
        const double f = power_budget / p;
        for (auto& m : s.s) m *= f;
    }
    out.covariances = std::move(s);
    out.mu = mu;
    return out;
}

inline CovarianceSet optimize_covariances(const EffectiveChannels& h, double power_budget,
                                          const CovarianceOptions& opts = {},
                                          const CovarianceSet* warm_start = nullptr) {
    return solve_covariances(h, power_budget, opts, warm_start).covariances;
}

struct KktReport {
    double active_residual = 0.0;    ///< max |p_i - (1/mu - 1/sigma_i)| over powered modes
    double inactive_violation = 0.0; ///< max (1/mu - 1/sigma_i)_+ over unpowered modes
    double offdiagonal = 0.0;        ///< max |V^H S V| off the diagonal
};

/// Per-mode optimality check of `s` at multiplier `mu`; `power_floor` separates
/// powered from unpowered modes.
inline KktReport kkt_report(const EffectiveChannels& h, const CovarianceSet& s, double mu,
                            double power_floor = 1e-9) {
    KktReport r;
    const CMat x = mac_gram(h, s);
    for (int k = 0; k < h.num_users(); ++k) {
        const CMat hbar = linalg::hermitian_part(x - h.h[k].adjoint() * s.s[k] * h.h[k]);
        const CMat gain = linalg::hermitian_part(h.h[k] * hbar.llt().solve(h.h[k].adjoint()));
        Eigen::SelfAdjointEigenSolver<CMat> es(gain);
        const CMat proj = es.eigenvectors().adjoint() * s.s[k] * es.eigenvectors();
        for (Eigen::Index i = 0; i < proj.rows(); ++i) {
            const double pi = proj(i, i).real();
            const double sigma = es.eigenvalues()(i);
            const double level = sigma > 0.0 ? 1.0 / mu - 1.0 / sigma : -1.0;
            if (pi > power_floor)
                r.active_residual = std::max(r.active_residual, std::abs(pi - level));
            else
                r.inactive_violation = std::max(r.inactive_violation, std::max(0.0, level));
            for (Eigen::Index j = 0; j < proj.cols(); ++j)
                if (j != i) r.offdiagonal = std::max(r.offdiagonal, std::abs(proj(i, j)));
        }
    }
    return r;
}

}  // namespace iosbc
