#pragma once

// Reference computations written independently of the library code paths: determinants
// via LU instead of Cholesky, explicit loops instead of matrix products, brute-force
// search instead of closed forms.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "iosbc/channel.hpp"
#include "iosbc/rates.hpp"

namespace iosbc::oracle {

inline double log2det(const CMat& m) { return std::log2(std::abs(m.partialPivLu().determinant())); }

/// D_k + s * sum_n beta_n g_n u_n, element by element.
inline CMat effective_channel(const ChannelSet& ch, const IosState& st, int k) {
    const bool refl = ch.side[k] == Side::reflection;
    const double s = refl ? std::sqrt(st.rho) : std::sqrt(1.0 - st.rho);
    CMat h = ch.direct[k];
    for (int n = 0; n < ch.n_ios(); ++n) {
        const cd beta = refl ? st.beta_r(n) : st.beta_t(n);
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            for (Eigen::Index j = 0; j < h.cols(); ++j)
                h(i, j) += s * beta * ch.ios_to_user[k](i, n) * ch.bs_to_ios(n, j);
    }
    return h;
}

inline std::vector<CMat> effective_channels(const ChannelSet& ch, const IosState& st) {
    std::vector<CMat> h;
    for (int k = 0; k < ch.num_users(); ++k) h.push_back(effective_channel(ch, st, k));
    return h;
}

/// log2 det(I + sum_k H_k^H S_k H_k).
inline double mac_rate(const std::vector<CMat>& h, const std::vector<CMat>& s) {
    const auto nt = h.front().cols();
    CMat x = CMat::Identity(nt, nt);
    for (std::size_t k = 0; k < h.size(); ++k) x += h[k].adjoint() * s[k] * h[k];
    return log2det(x);
}

/// DPC rates: user pi[k] is interfered by pi[j], j > k. Indexed by user.
inline std::vector<double> bc_rates(const std::vector<CMat>& h, const std::vector<CMat>& s,
                                    const std::vector<int>& pi) {
    const auto nt = h.front().cols();
    std::vector<double> r(h.size(), 0.0);
    for (std::size_t k = 0; k < pi.size(); ++k) {
        const int u = pi[k];
        CMat inter = CMat::Zero(nt, nt);
        for (std::size_t j = k + 1; j < pi.size(); ++j) inter += s[pi[j]];
        const auto nr = h[u].rows();
        const CMat den = CMat::Identity(nr, nr) + h[u] * inter * h[u].adjoint();
        const CMat num = den + h[u] * s[u] * h[u].adjoint();
        r[u] = log2det(num) - log2det(den);
    }
    return r;
}

/// Classical single-user water-filling over channel eigenvalues `lambda`; returns bits.
inline double waterfill_rate(std::vector<double> lambda, double power) {
    std::sort(lambda.begin(), lambda.end(), std::greater<>());
    while (!lambda.empty() && lambda.back() <= 0.0) lambda.pop_back();
    for (std::size_t m = lambda.size(); m >= 1; --m) {
        double inv = 0.0;
        for (std::size_t i = 0; i < m; ++i) inv += 1.0 / lambda[i];
        const double level = (power + inv) / static_cast<double>(m);
        if (level - 1.0 / lambda[m - 1] > 0.0) {
            double rate = 0.0;
            for (std::size_t i = 0; i < m; ++i) rate += std::log2(level * lambda[i]);
            return rate;
        }
    }
    return 0.0;
}

/// Maximum of a unimodal function on [lo, hi] by golden-section search.
inline double golden_max(const std::function<double(double)>& f, double lo, double hi, double tol = 1e-12,
                         double* arg = nullptr) {
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = lo, b = hi;
    double c = b - g * (b - a), d = a + g * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        } else {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        }
    }
    double best = std::max({fc, fd, f(lo), f(hi)});
    if (arg) *arg = best == fc ? c : best == fd ? d : best == f(lo) ? lo : hi;
    return best;
}

/// Grid over [lo, hi] with `points` samples, then golden refinement around each local maximum.
inline double grid_refined_max(const std::function<double(double)>& f, double lo, double hi, int points,
                               double* arg = nullptr) {
    std::vector<double> x(static_cast<std::size_t>(points)), y(x.size());
    for (int i = 0; i < points; ++i) {
        x[i] = lo + (hi - lo) * i / (points - 1);
        y[i] = f(x[i]);
    }
    double best = -std::numeric_limits<double>::infinity(), best_x = lo;
    for (int i = 0; i < points; ++i) {
        const bool left = i == 0 || y[i] >= y[i - 1];
        const bool right = i == points - 1 || y[i] >= y[i + 1];
        if (!(left && right)) continue;
        double xi = x[i];
        const double v = golden_max(f, x[std::max(i - 1, 0)], x[std::min(i + 1, points - 1)], 1e-13, &xi);
        if (v > best) {
            best = v;
            best_x = xi;
        }
    }
    if (arg) *arg = best_x;
    return best;
}

/// Two single-antenna MAC users (h_k are 1 x nt): best split s1 + s2 = P, concave in s1.
inline double two_user_scalar_mac(const CMat& h1, const CMat& h2, double power) {
    const auto nt = h1.cols();
    const CMat a = h1.adjoint() * h1;
    const CMat b = h2.adjoint() * h2;
    auto f = [&](double s1) { return log2det(CMat::Identity(nt, nt) + s1 * a + (power - s1) * b); };
    return golden_max(f, 0.0, power, 1e-13 * std::max(power, 1.0));
}

/// Index of the nearest pair; later entries win ties.
inline std::size_t nearest_pair(const CoefficientPair& sc, const PairSet& pairs) {
    std::vector<double> d;
    for (const auto& p : pairs) {
        const cd dr = sc.reflection - p.reflection;
        const cd dt = sc.transmission - p.transmission;
        d.push_back(dr.real() * dr.real() + dr.imag() * dr.imag() + dt.real() * dt.real() + dt.imag() * dt.imag());
    }
    const double m = *std::min_element(d.begin(), d.end());
    std::size_t idx = 0;
    for (std::size_t q = 0; q < d.size(); ++q)
        if (d[q] == m) idx = q;
    return idx;
}

/// Calls f(state) for every assignment of pairs to elements (Q^N states).
inline void for_each_pattern(const IosState& base, const PairSet& pairs, const std::function<void(const IosState&)>& f) {
    const int n = base.n_ios();
    const std::size_t q = pairs.size();
    std::size_t total = 1;
    for (int i = 0; i < n; ++i) total *= q;
    IosState st = base;
    for (std::size_t code = 0; code < total; ++code) {
        std::size_t c = code;
        for (int i = 0; i < n; ++i) {
            st.beta_r(i) = pairs[c % q].reflection;
            st.beta_t(i) = pairs[c % q].transmission;
            c /= q;
        }
        f(st);
    }
}

/// Joint optimum over coefficient patterns, rho and covariances for nr = 1, two users.
/// The covariance split is solved exactly for each rho (concave in s1), rho by a dense
/// grid refined around every local maximum.
inline double joint_discrete_optimum(const ChannelSet& ch, const PairSet& pairs, double power, double rho_min,
                                     double rho_max, int rho_points = 2001) {
    double best = -std::numeric_limits<double>::infinity();
    IosState base = IosState::initial(ch.n_ios(), 0.5, IosMode::discrete, pairs);
    for_each_pattern(base, pairs, [&](const IosState& st) {
        auto g = [&](double rho) {
            IosState at = st;
            at.rho = rho;
            const auto h = effective_channels(ch, at);
            return two_user_scalar_mac(h[0], h[1], power);
        };
        best = std::max(best, grid_refined_max(g, rho_min, rho_max, rho_points));
    });
    return best;
}

}  // namespace iosbc::oracle
