#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "iosbc/channel.hpp"
#include "iosbc/errors.hpp"
#include "iosbc/linalg.hpp"
#include "iosbc/rates.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc {

struct RhoDerivatives {
    double value = 0.0;   ///< objective, bits
    double grad = 0.0;    ///< df/drho
    double second = 0.0;  ///< d2f/drho2 by differencing grad (diagnostic)
};

/// Cross and quadratic terms of the rho expansion, with C_k = G_k diag(beta) U:
///   x1 = sum_{refl} C^H S D,  x2 = sum_{trans} C^H S D,
///   y1 = sum_{refl} C^H S C,  y2 = sum_{trans} C^H S C,
///   m0 = I + sum_k D^H S D.
/// Then X(rho) = m0 + sqrt(rho)(x1 + x1^H) + rho y1 + sqrt(1-rho)(x2 + x2^H) + (1-rho) y2.
struct RhoTerms {
    CMat m0, x1, x2, y1, y2;

    CMat gram(double rho) const {
        return linalg::hermitian_part(m0 + std::sqrt(rho) * (x1 + x1.adjoint()) + rho * y1 +
                                      std::sqrt(1.0 - rho) * (x2 + x2.adjoint()) + (1.0 - rho) * y2);
    }

    CMat gram_derivative(double rho) const {
        return linalg::hermitian_part((0.5 / std::sqrt(rho)) * (x1 + x1.adjoint()) -
                                      (0.5 / std::sqrt(1.0 - rho)) * (x2 + x2.adjoint()) + y1 - y2);
    }
};

inline RhoTerms rho_terms(const ChannelSet& ch, const CovarianceSet& covs, const IosState& ios) {
    const auto nt = ch.nt();
    RhoTerms t;
    t.m0 = CMat::Identity(nt, nt);
    t.x1 = t.x2 = t.y1 = t.y2 = CMat::Zero(nt, nt);
    for (int k = 0; k < ch.num_users(); ++k) {
        const CMat& d = ch.direct[k];
        const CMat& s = covs.s[k];
        t.m0.noalias() += d.adjoint() * s * d;
        if (ch.n_ios() == 0) continue;
        const CMat c = cascade(ch, ios, k);
        const CMat cs = c.adjoint() * s;
        if (ch.side[k] == Side::reflection) {
            t.x1.noalias() += cs * d;
            t.y1.noalias() += cs * c;
        } else {
            t.x2.noalias() += cs * d;
            t.y2.noalias() += cs * c;
        }
    }
    return t;
}

/// Clamp onto [rho_min, rho_max].
inline double project_rho(double rho, const RhoOptions& opts = {}) {
    return std::clamp(rho, opts.rho_min, opts.rho_max);
}

/// MAC sum rate with the effective channels reassembled at `rho`.
inline double objective_of_rho(const ChannelSet& ch, const CovarianceSet& covs, const IosState& ios,
                               double rho) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw DomainError("rho must lie in [0, 1]");
    IosState at = ios;
    at.rho = rho;
    return mac_sum_rate(assemble_effective_channels(ch, at), covs);
}

namespace detail {

inline double grad_from_terms(const RhoTerms& t, double rho) {
    const CMat x = t.gram(rho);
    Eigen::LLT<CMat> llt(x);
    if (llt.info() != Eigen::Success) throw NumericalError("rho gradient: Gram matrix is not positive definite");
    return llt.solve(t.gram_derivative(rho)).trace().real() / std::numbers::ln2;
}

inline void check_rho_domain(double rho, const RhoOptions& opts) {
    if (!(rho >= opts.rho_min && rho <= opts.rho_max)) {
        std::ostringstream os;
        os << "rho = " << rho << " outside the guarded interval [" << opts.rho_min << ", "
           << opts.rho_max << "]";
        throw DomainError(os.str());
    }
}

}  // namespace detail

/// Value, exact derivative (1/ln 2) tr(X^{-1} dX/drho) and a differenced second derivative.
inline RhoDerivatives grad_rho(const ChannelSet& ch, const CovarianceSet& covs, const IosState& ios,
                               double rho, const RhoOptions& opts = {}) {
    detail::check_rho_domain(rho, opts);
    const RhoTerms t = rho_terms(ch, covs, ios);
    RhoDerivatives d;
    d.value = linalg::log2det_hpd(t.gram(rho));
    d.grad = detail::grad_from_terms(t, rho);
    const double h = std::min({1e-6, 0.5 * rho, 0.5 * (1.0 - rho)});
    d.second = (detail::grad_from_terms(t, rho + h) - detail::grad_from_terms(t, rho - h)) / (2.0 * h);
    return d;
}

struct RhoStep {
    double rho = 0.5;
    double value = 0.0;
    double step = 1.0;      ///< step size to start from next time
    bool moved = false;
};

/// One projected-gradient ascent step with Armijo backtracking.
///
/// Starts from `step`; after an acceptance without backtracking the returned step is
/// grown by 1/backtrack, so step sizes carry over between calls.
inline RhoStep pg_step(const RhoTerms& t, double rho, double step, const RhoOptions& opts) {
    detail::check_rho_domain(rho, opts);
    const double f0 = linalg::log2det_hpd(t.gram(rho));
    const double g0 = detail::grad_from_terms(t, rho);
    RhoStep out{rho, f0, step, false};
    double v = step;
    for (int bt = 0; bt < 200; ++bt) {
        const double cand = project_rho(rho + v * g0, opts);
        const double d = cand - rho;
        if (d == 0.0) return out;
        const double f = linalg::log2det_hpd(t.gram(cand));
        if (f >= f0 + opts.armijo * g0 * d) {
            out.rho = cand;
            out.value = f;
            out.step = bt == 0 ? v / opts.backtrack : v;
            out.moved = true;
            return out;
        }
        v *= opts.backtrack;
    }
    out.step = v;
    return out;
}

struct RhoResult {
    double rho = 0.5;
    double value = 0.0;
    int iterations = 0;
    double step = 1.0;
};

/// Projected gradient ascent on rho until the projected step is below opts.tol.
inline RhoResult optimize_rho(const ChannelSet& ch, const CovarianceSet& covs, const IosState& ios,
                              double rho_init, const RhoOptions& opts = {}) {
    detail::check_rho_domain(rho_init, opts);
    const RhoTerms t = rho_terms(ch, covs, ios);
    RhoResult r{rho_init, linalg::log2det_hpd(t.gram(rho_init)), 0, opts.step0};
    for (int it = 0; it < opts.max_iter; ++it) {
        const RhoStep s = pg_step(t, r.rho, r.step, opts);
        r.iterations = it + 1;
        r.step = s.step;
        const double moved = std::abs(s.rho - r.rho);
        r.rho = s.rho;
        r.value = s.value;
        if (!s.moved || moved < opts.tol) break;
    }
    return r;
}

}  // namespace iosbc
