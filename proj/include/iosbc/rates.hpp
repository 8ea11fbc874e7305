#pragma once

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include <Eigen/SVD>

#include "iosbc/channel.hpp"
#include "iosbc/errors.hpp"
#include "iosbc/linalg.hpp"

namespace iosbc {

enum class CovarianceKind { mac_dual, broadcast };

inline const char* to_string(CovarianceKind k) {
    return k == CovarianceKind::mac_dual ? "mac-dual" : "broadcast";
}

/// Per-user input covariances. MAC-dual matrices are nr x nr (they act on H_k^H),
/// broadcast matrices are nt x nt.
struct CovarianceSet {
    std::vector<CMat> s;
    CovarianceKind kind = CovarianceKind::mac_dual;

    int num_users() const { return static_cast<int>(s.size()); }

    double total_power() const {
        double p = 0.0;
        for (const auto& m : s) p += m.trace().real();
        return p;
    }

    static CovarianceSet zeros(int users, int dim, CovarianceKind kind) {
        return {std::vector<CMat>(users, CMat::Zero(dim, dim)), kind};
    }

    /// Equal split of `power` over users and dimensions: (power / (users * dim)) I.
    static CovarianceSet scaled_identity(int users, int dim, double power, CovarianceKind kind) {
        const double v = power / (static_cast<double>(users) * dim);
        return {std::vector<CMat>(users, v * CMat::Identity(dim, dim)), kind};
    }
};

/// Encoding order pi: users are listed as pi[0], ..., pi[K-1] (0-based).
struct UserOrdering {
    std::vector<int> pi;

    static UserOrdering identity(int users) {
        UserOrdering o;
        o.pi.resize(users);
        std::iota(o.pi.begin(), o.pi.end(), 0);
        return o;
    }

    void check(int users) const {
        std::vector<int> sorted = pi;
        std::sort(sorted.begin(), sorted.end());
        for (int i = 0; i < users; ++i)
            if (static_cast<int>(sorted.size()) != users || sorted[i] != i)
                throw ContractViolation("user ordering is not a permutation of 0..K-1");
    }
};

namespace detail {

inline void check_covariances(const EffectiveChannels& h, const CovarianceSet& s, CovarianceKind kind) {
    if (s.kind != kind) {
        std::ostringstream os;
        os << "expected " << to_string(kind) << " covariances, got " << to_string(s.kind);
        throw ContractViolation(os.str());
    }
    if (s.num_users() != h.num_users())
        throw ContractViolation("covariance count does not match user count");
    for (int k = 0; k < h.num_users(); ++k) {
        const auto dim = kind == CovarianceKind::mac_dual ? h.h[k].rows() : h.h[k].cols();
        if (s.s[k].rows() != dim || s.s[k].cols() != dim)
            throw ContractViolation("covariance shape mismatch for user " + std::to_string(k));
        if (!linalg::is_psd(s.s[k]))
            throw ContractViolation("covariance of user " + std::to_string(k) +
                                    " is not Hermitian PSD (min eigenvalue " +
                                    std::to_string(linalg::min_eigenvalue(s.s[k])) + ")");
    }
}

}  // namespace detail

/// I + sum_k H_k^H S_k H_k (nt x nt).
inline CMat mac_gram(const EffectiveChannels& h, const CovarianceSet& s) {
    const auto nt = h.h.front().cols();
    CMat x = CMat::Identity(nt, nt);
    for (int k = 0; k < h.num_users(); ++k) x.noalias() += h.h[k].adjoint() * s.s[k] * h.h[k];
    return linalg::hermitian_part(x);
}

/// log2 |I + sum_k H_k^H S_k H_k| in bits/s/Hz.
inline double mac_sum_rate(const EffectiveChannels& h, const CovarianceSet& s) {
    detail::check_covariances(h, s, CovarianceKind::mac_dual);
    return std::max(0.0, linalg::log2det_hpd(mac_gram(h, s)));
}

/// DPC rates for encoding order `order`: user pi[k] sees interference from pi[j], j > k.
/// Returned vector is indexed by user, not by position in the order.
inline std::vector<double> bc_user_rates(const EffectiveChannels& h, const CovarianceSet& s,
                                         const UserOrdering& order) {
    detail::check_covariances(h, s, CovarianceKind::broadcast);
    const int k_total = h.num_users();
    order.check(k_total);
    const auto nt = h.h.front().cols();
    std::vector<double> rates(k_total, 0.0);
    CMat tail = CMat::Zero(nt, nt);  // sum of S_pi(j), j > k
    for (int k = k_total - 1; k >= 0; --k) {
        const int u = order.pi[k];
        const CMat& hu = h.h[u];
        const auto nr = hu.rows();
        const CMat den = CMat::Identity(nr, nr) + hu * tail * hu.adjoint();
        tail += s.s[u];
        const CMat num = CMat::Identity(nr, nr) + hu * tail * hu.adjoint();
        rates[u] = std::max(0.0, linalg::log2det_hpd(num) - linalg::log2det_hpd(den));
    }
    return rates;
}

/// Map dual-MAC covariances to broadcast covariances with the same rates and total power.
///
/// Users are processed from the last in `order` to the first: the broadcast interference
/// seen by pi[k] comes from the already converted pi[j], j > k, while the MAC
/// interference term B collects pi[j], j < k.
inline CovarianceSet mac_to_bc(const EffectiveChannels& h, const CovarianceSet& sbar,
                               const UserOrdering& order) {
    detail::check_covariances(h, sbar, CovarianceKind::mac_dual);
    const int k_total = h.num_users();
    order.check(k_total);
    const auto nt = h.h.front().cols();

    CovarianceSet out = CovarianceSet::zeros(k_total, static_cast<int>(nt), CovarianceKind::broadcast);
    CMat tail = CMat::Zero(nt, nt);  // sum of broadcast S for users after k
    for (int k = k_total - 1; k >= 0; --k) {
        const int u = order.pi[k];
        const CMat& hu = h.h[u];
        const auto nr = hu.rows();

        CMat b = CMat::Identity(nt, nt);
        for (int j = 0; j < k; ++j) {
            const int v = order.pi[j];
            b.noalias() += h.h[v].adjoint() * sbar.s[v] * h.h[v];
        }
        const CMat a = CMat::Identity(nr, nr) + hu * tail * hu.adjoint();

        const CMat b_isqrt = linalg::hermitian_inv_sqrt(b);
        const CMat a_isqrt = linalg::hermitian_inv_sqrt(a);
        const CMat a_sqrt = linalg::hermitian_sqrt(a);
        const CMat m = b_isqrt * hu.adjoint() * a_isqrt;
        Eigen::JacobiSVD<CMat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (!svd.singularValues().allFinite()) {
            std::ostringstream os;
            os << "SVD failed for user " << u << " (condition estimate of B: "
               << linalg::min_eigenvalue(b) << " min eigenvalue)";
            throw NumericalError(os.str());
        }
        const CMat fg = svd.matrixU() * svd.matrixV().adjoint();  // nt x nr
        const CMat core = fg * a_sqrt * sbar.s[u] * a_sqrt * fg.adjoint();
        out.s[u] = linalg::hermitian_part(b_isqrt * core * b_isqrt);
        tail += out.s[u];
    }
    return out;
}

}  // namespace iosbc
