#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Eigenvalues>

#include "iosbc/channel.hpp"
#include "iosbc/errors.hpp"
#include "iosbc/linalg.hpp"
#include "iosbc/rates.hpp"

namespace iosbc {

/// Objective restricted to one coefficient: f(beta) = log2|A + beta B + conj(beta) B^H|
/// for unit-modulus beta, all other variables held fixed.
///
/// B is rank one by construction, B = b u_n with u_n the n-th row of U; the factors are
/// kept when available.
struct RankOneContext {
    CMat a_mat;
    CMat b_mat;
    Side side = Side::reflection;
    CVec b_col;   ///< b (nt), empty if unknown
    CRow u_row;   ///< u_n (nt), empty if unknown
};

inline double context_objective(const RankOneContext& ctx, cd beta) {
    return linalg::log2det_hpd(ctx.a_mat + beta * ctx.b_mat + std::conj(beta) * ctx.b_mat.adjoint());
}

namespace detail {

/// Builds the context for element n on `side` from the current effective channels `h`.
///
/// Peels element n's contribution off each same-side H_k, then
///   A = I + sum_{other side} H^H S H + sum_{side} (H'^H S H' + c^2 u^H g^H S g u)
///   b = c sum_{side} H'^H S g
/// where H' is H_k without element n, g = G_k(:, n), u = U(n, :), c the side amplitude.
inline RankOneContext context_from(const ChannelSet& ch, const EffectiveChannels& h,
                                   const CovarianceSet& covs, const IosState& st, int n, Side side) {
    const auto nt = ch.nt();
    const double c = st.amplitude(side);
    const cd beta = st.beta(side)(n);
    const CRow u = ch.bs_to_ios.row(n);

    RankOneContext ctx;
    ctx.side = side;
    ctx.a_mat = CMat::Identity(nt, nt);
    ctx.b_col = CVec::Zero(nt);
    ctx.u_row = u;
    for (int k = 0; k < ch.num_users(); ++k) {
        const CMat& s = covs.s[k];
        if (ch.side[k] != side) {
            ctx.a_mat.noalias() += h.h[k].adjoint() * s * h.h[k];
            continue;
        }
        const CVec g = ch.ios_to_user[k].col(n);
        const CMat peeled = h.h[k] - (c * beta) * (g * u);
        ctx.a_mat.noalias() += peeled.adjoint() * s * peeled;
        const cd gsg = (g.adjoint() * s * g)(0, 0);
        ctx.a_mat.noalias() += (c * c * gsg.real()) * (u.adjoint() * u);
        ctx.b_col.noalias() += c * (peeled.adjoint() * (s * g));
    }
    ctx.a_mat = linalg::hermitian_part(ctx.a_mat);
    ctx.b_mat = ctx.b_col * u;
    return ctx;
}

}  // namespace detail

/// A_n and B_n for element `element` on `side`, such that context_objective() equals the
/// MAC sum rate for every unit-modulus value of that coefficient.
inline RankOneContext build_rank_one_context(const ChannelSet& ch, const CovarianceSet& covs,
                                             const IosState& st, int element, Side side) {
    if (element < 0 || element >= ch.n_ios())
        throw ConfigError("IOS element index " + std::to_string(element) + " out of range");
    const auto h = assemble_effective_channels(ch, st);
    detail::check_covariances(h, covs, CovarianceKind::mac_dual);
    return detail::context_from(ch, h, covs, st, element, side);
}

/// Non-zero eigenvalue of A^{-1} B; 0 when B vanishes (relative threshold 1e-12).
inline cd dominant_eigenvalue(const RankOneContext& ctx) {
    Eigen::LLT<CMat> llt(ctx.a_mat);
    if (llt.info() != Eigen::Success) throw NumericalError("rank-one context: A is not positive definite");
    if (ctx.b_col.size() > 0 && ctx.u_row.size() > 0) {
        // A^{-1} b u has the single non-zero eigenvalue u A^{-1} b.
        const CVec ab = llt.solve(ctx.b_col);
        const cd sigma = (ctx.u_row * ab)(0, 0);
        const double scale = ab.norm() * ctx.u_row.norm();
        return std::abs(sigma) <= 1e-12 * scale || scale == 0.0 ? cd{} : sigma;
    }
    const CMat m = llt.solve(ctx.b_mat);
    const double scale = m.norm();
    if (scale == 0.0) return {};
    Eigen::ComplexEigenSolver<CMat> es(m, false);
    cd best{};
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
        if (std::abs(es.eigenvalues()(i)) > std::abs(best)) best = es.eigenvalues()(i);
    return std::abs(best) <= 1e-12 * scale ? cd{} : best;
}

/// exp(-j arg sigma); returns `current` when the objective does not depend on the phase.
inline cd optimal_continuous_phase(const RankOneContext& ctx, cd current = {1.0, 0.0}) {
    const cd sigma = dominant_eigenvalue(ctx);
    if (sigma == cd{}) return current;
    return std::polar(1.0, -std::arg(sigma));
}

/// Nearest pair of `pairs` to `sc` in the Euclidean norm of the stacked 2-vector.
/// Ties go to the later entry (for two states: S1 only if strictly closer).
inline CoefficientPair project_pair(const CoefficientPair& sc, const PairSet& pairs) {
    if (pairs.empty()) throw ConfigError("ios.psi_table", "pair set is empty");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t q = 0; q < pairs.size(); ++q) {
        const double d = std::norm(sc.reflection - pairs[q].reflection) +
                         std::norm(sc.transmission - pairs[q].transmission);
        if (d <= best_d) {
            best_d = d;
            best = q;
        }
    }
    return pairs[best];
}

/// Called after each single-coefficient update with (element, side, objective in bits).
using SweepObserver = std::function<void(int, Side, double)>;

/// One pass over the elements n = 0..N-1. Each element gets the closed-form optimal
/// reflection coefficient, then the transmission coefficient; in discrete mode the pair
/// is projected onto the state's pair set before moving to element n+1.
inline IosState sweep_elements(const ChannelSet& ch, const CovarianceSet& covs, IosState st,
                               const SweepObserver& observer = {}) {
    const int n_ios = ch.n_ios();
    if (n_ios == 0) return st;
    if (st.n_ios() != n_ios) throw ConfigError("IOS state size does not match the channel set");
    const bool discrete = st.mode == IosMode::discrete;
    if (discrete && st.pair_set.empty()) throw ConfigError("ios.psi_table", "pair set is empty");

    EffectiveChannels h = assemble_effective_channels(ch, st);
    detail::check_covariances(h, covs, CovarianceKind::mac_dual);
    const bool has_r = ch.count(Side::reflection) > 0;
    const bool has_t = ch.count(Side::transmission) > 0;

    // Replace coefficient n on `side` and refresh the affected effective channels.
    auto set_coefficient = [&](int n, Side side, cd value) {
        const cd old = st.beta(side)(n);
        if (value == old) return;
        st.beta(side)(n) = value;
        const double c = st.amplitude(side);
        const CRow u = ch.bs_to_ios.row(n);
        for (int k = 0; k < ch.num_users(); ++k)
            if (ch.side[k] == side) h.h[k].noalias() += (c * (value - old)) * (ch.ios_to_user[k].col(n) * u);
    };
    auto notify = [&](int n, Side side) {
        if (observer) observer(n, side, linalg::log2det_hpd(mac_gram(h, covs)));
    };

    for (int n = 0; n < n_ios; ++n) {
        cd r = st.beta_r(n);
        cd t = st.beta_t(n);
        if (has_r) {
            r = optimal_continuous_phase(detail::context_from(ch, h, covs, st, n, Side::reflection), r);
            set_coefficient(n, Side::reflection, r);
            if (!discrete) notify(n, Side::reflection);
        }
        if (has_t) {
            t = optimal_continuous_phase(detail::context_from(ch, h, covs, st, n, Side::transmission), t);
            set_coefficient(n, Side::transmission, t);
            if (!discrete) notify(n, Side::transmission);
        }
        if (discrete) {
            const CoefficientPair p = project_pair({r, t}, st.pair_set);
            set_coefficient(n, Side::reflection, p.reflection);
            set_coefficient(n, Side::transmission, p.transmission);
            notify(n, Side::transmission);
        }
    }
    return st;
}

}  // namespace iosbc
