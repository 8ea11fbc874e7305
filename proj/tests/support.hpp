#pragma once

// Random instance generators shared by the unit tests and the acceptance binary.

#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "iosbc/channel.hpp"
#include "iosbc/driver.hpp"
#include "iosbc/rates.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc::test {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : g_(seed) {}

    double normal() { return normal_(g_); }
    double uniform(double lo = 0.0, double hi = 1.0) { return lo + (hi - lo) * unit_(g_); }
    int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(g_); }
    cd cnormal() {
        const double re = normal();
        const double im = normal();
        return cd(re, im) / std::numbers::sqrt2;
    }
    cd phase() { return std::polar(1.0, uniform(-std::numbers::pi, std::numbers::pi)); }

    CMat cmat(Eigen::Index r, Eigen::Index c, double scale = 1.0) {
        CMat m(r, c);
        for (Eigen::Index j = 0; j < c; ++j)
            for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * cnormal();
        return m;
    }

    /// Random PSD matrix of the given trace (rank `rank`, full when 0).
    CMat psd(int dim, double trace, int rank = 0) {
        const CMat a = cmat(dim, rank > 0 ? rank : dim);
        CMat m = a * a.adjoint();
        const double t = m.trace().real();
        return t > 0.0 ? CMat(linalg::hermitian_part(m * (trace / t))) : m;
    }

    std::mt19937_64& engine() { return g_; }

private:
    std::mt19937_64 g_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> unit_{0.0, 1.0};
};

struct Dims {
    int nt = 4;
    int nr = 2;
    int kr = 1;
    int kt = 1;
    int n = 4;
};

/// Unit-variance Gaussian channels; `direct` and `cascade` scale D_k and G_k.
inline ChannelSet random_channels(Rng& rng, const Dims& d, double direct = 1.0, double cascade = 1.0) {
    ChannelSet ch;
    ch.bs_to_ios = rng.cmat(d.n, d.nt);
    for (int k = 0; k < d.kr + d.kt; ++k) {
        ch.direct.push_back(rng.cmat(d.nr, d.nt, direct));
        ch.ios_to_user.push_back(rng.cmat(d.nr, d.n, cascade));
        ch.side.push_back(k < d.kr ? Side::reflection : Side::transmission);
    }
    return ch;
}

inline EffectiveChannels random_effective(Rng& rng, int users, int nr, int nt) {
    EffectiveChannels h;
    for (int k = 0; k < users; ++k) h.h.push_back(rng.cmat(nr, nt));
    return h;
}

/// Random MAC-dual covariances (nr x nr) splitting `power` at random between users.
inline CovarianceSet random_covariances(Rng& rng, int users, int dim, double power,
                                        CovarianceKind kind = CovarianceKind::mac_dual) {
    std::vector<double> w(static_cast<std::size_t>(users));
    double sum = 0.0;
    for (auto& x : w) sum += (x = rng.uniform(0.1, 1.0));
    CovarianceSet s;
    s.kind = kind;
    for (int k = 0; k < users; ++k) s.s.push_back(rng.psd(dim, power * w[k] / sum));
    return s;
}

inline IosState random_state(Rng& rng, int n, double rho) {
    IosState st = IosState::initial(n, rho, IosMode::continuous);
    for (int i = 0; i < n; ++i) {
        st.beta_r(i) = rng.phase();
        st.beta_t(i) = rng.phase();
    }
    return st;
}

/// Placeholder two-state table also shipped in configs/.
inline std::vector<PsiRow> placeholder_psi() { return {{0.8, 0.0, 0.6, 90.0}, {0.8, 180.0, 0.6, -90.0}}; }

/// Small physical scenario: default geometry and path loss with reduced dimensions.
inline Scenario small_scenario(int nt, int nr, int kr, int kt, int rows, int cols) {
    Scenario sc;
    sc.nt = nt;
    sc.nr = nr;
    sc.kr = kr;
    sc.kt = kt;
    sc.ios_rows = rows;
    sc.ios_cols = cols;
    sc.set_psi(placeholder_psi());
    return sc;
}

/// Channels, covariances and surface taken from a converged AO run: the operating
/// points the rho stage actually sees.
struct OperatingPoint {
    ChannelSet ch;
    CovarianceSet covs;
    IosState state;
};

inline OperatingPoint ao_operating_point(Rng& rng, const Dims& d, double power = 2.0) {
    OperatingPoint op;
    op.ch = random_channels(rng, d);
    AoOptions opts;
    opts.max_outer_iters = 20;
    opts.record_trace = false;
    const AoReport rep = run_ao(op.ch, power, opts);
    op.covs = rep.mac_covariances;
    op.state = rep.final_state;
    return op;
}

}  // namespace iosbc::test
