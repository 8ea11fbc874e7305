#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <vector>

#include "iosbc/errors.hpp"
#include "iosbc/hash.hpp"
#include "iosbc/linalg.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc {

/// Raw channel matrices for one realization.
///
/// `direct[k]` is nr x nt, `bs_to_ios` is n_ios x nt, `ios_to_user[k]` is nr x n_ios.
/// Users are ordered reflection side first. After generate_channels() the user-side
/// matrices (D_k, G_k) carry the 1/sqrt(N0) noise normalization, so every rate formula
/// downstream uses unit noise.
struct ChannelSet {
    std::vector<CMat> direct;
    CMat bs_to_ios;
    std::vector<CMat> ios_to_user;
    std::vector<Side> side;

    int num_users() const { return static_cast<int>(direct.size()); }
    int nt() const { return static_cast<int>(bs_to_ios.cols()); }
    int nr() const { return direct.empty() ? 0 : static_cast<int>(direct.front().rows()); }
    int n_ios() const { return static_cast<int>(bs_to_ios.rows()); }

    int count(Side s) const {
        int c = 0;
        for (auto x : side) c += (x == s);
        return c;
    }

    /// Throws ConfigError if shapes are inconsistent or side tags are not canonical.
    void check() const {
        const auto k = direct.size();
        if (k == 0) throw ConfigError("channel set has no users");
        if (ios_to_user.size() != k || side.size() != k)
            throw ConfigError("channel set: per-user lists differ in length");
        const auto nr_ = direct.front().rows();
        for (std::size_t i = 0; i < k; ++i) {
            if (direct[i].rows() != nr_ || direct[i].cols() != bs_to_ios.cols())
                throw ConfigError("channel set: direct channel shape mismatch for user " +
                                  std::to_string(i));
            if (ios_to_user[i].rows() != nr_ || ios_to_user[i].cols() != bs_to_ios.rows())
                throw ConfigError("channel set: IOS-user channel shape mismatch for user " +
                                  std::to_string(i));
            if (i > 0 && side[i - 1] == Side::transmission && side[i] == Side::reflection)
                throw ConfigError("channel set: users must be ordered reflection side first");
        }
    }
};

/// Per-user effective channels H_k (nr x nt).
struct EffectiveChannels {
    std::vector<CMat> h;

    int num_users() const { return static_cast<int>(h.size()); }
};

/// Surface configuration: per-element coefficients and the reflected power fraction.
struct IosState {
    CVec beta_r;
    CVec beta_t;
    double rho = 0.5;
    PairSet pair_set;
    IosMode mode = IosMode::continuous;

    int n_ios() const { return static_cast<int>(beta_r.size()); }

    const CVec& beta(Side s) const { return s == Side::reflection ? beta_r : beta_t; }
    CVec& beta(Side s) { return s == Side::reflection ? beta_r : beta_t; }

    /// sqrt(rho) or sqrt(1 - rho).
    double amplitude(Side s) const {
        return s == Side::reflection ? std::sqrt(rho) : std::sqrt(1.0 - rho);
    }

    /// All-ones continuous state, or every element at the first pair of `pairs` in discrete mode.
    static IosState initial(int n_ios, double rho, IosMode mode, const PairSet& pairs = {}) {
        IosState s;
        s.rho = rho;
        s.mode = mode;
        s.pair_set = pairs;
        if (mode == IosMode::discrete) {
            if (pairs.empty()) throw ConfigError("ios.psi_table", "discrete mode requires a pair set");
            s.beta_r = CVec::Constant(n_ios, pairs.front().reflection);
            s.beta_t = CVec::Constant(n_ios, pairs.front().transmission);
        } else {
            s.beta_r = CVec::Ones(n_ios);
            s.beta_t = CVec::Ones(n_ios);
        }
        return s;
    }
};

/// ULA response: entry m is exp(j 2 pi (spacing / wavelength) m sin(angle)).
inline CVec steering_vector(int num_elements, double spacing, double wavelength, double angle) {
    CVec a(num_elements);
    const double step = 2.0 * std::numbers::pi * spacing / wavelength * std::sin(angle);
    for (int m = 0; m < num_elements; ++m) a(m) = std::polar(1.0, step * m);
    return a;
}

namespace detail {

class ChannelSampler {
public:
    explicit ChannelSampler(std::uint64_t seed) : rng_(seed) {}

    CMat gaussian(Eigen::Index rows, Eigen::Index cols) {
        CMat m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) {
                const double re = normal_(rng_);
                const double im = normal_(rng_);
                m(i, j) = cd(re, im) / std::numbers::sqrt2;
            }
        return m;
    }

    Point2 in_disk(const Disk& d) {
        const double r = d.radius * std::sqrt(uniform_(rng_));
        const double phi = 2.0 * std::numbers::pi * uniform_(rng_);
        return {d.center.x + r * std::cos(phi), d.center.y + r * std::sin(phi)};
    }

private:
    std::mt19937_64 rng_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

/// Angle off broadside (x axis) of the direction from `from` to `to`.
inline double bearing(Point2 from, Point2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

inline double amplitude_gain(const Scenario& sc, double d, double exponent) {
    if (!sc.pathloss.enabled) return 1.0;
    const double ref_db = std::isnan(sc.pathloss.reference_gain_db)
                              ? 20.0 * std::log10(sc.wavelength / (4.0 * std::numbers::pi))
                              : sc.pathloss.reference_gain_db;
    const double gain = std::pow(10.0, ref_db / 10.0) * std::pow(std::max(d, 1.0), -exponent);
    return std::sqrt(gain);
}

/// sqrt(K/(K+1)) * los + sqrt(1/(K+1)) * nlos; K = +inf keeps the LOS part only.
inline CMat rician_mix(const CMat& los, const CMat& nlos, double k) {
    if (std::isinf(k)) return los;
    return std::sqrt(k / (k + 1.0)) * los + std::sqrt(1.0 / (k + 1.0)) * nlos;
}

/// Surface response: 2D grid seen at zero elevation, so the phase only varies along columns.
inline CVec ios_steering(const Scenario& sc, double angle) {
    const CVec row = steering_vector(sc.ios_cols, sc.spacing_ios, sc.wavelength, angle);
    CVec a(sc.n_ios());
    for (int r = 0; r < sc.ios_rows; ++r) a.segment(r * sc.ios_cols, sc.ios_cols) = row;
    return a;
}

}  // namespace detail

/// Draw one channel realization. Deterministic in (scenario, seed).
///
/// Draw order: user positions (reflection disk, then transmission disk), then U, then
/// (D_k, G_k) per user. NLOS parts are always drawn so that changing the K-factor does not
/// shift the random stream.
inline ChannelSet generate_channels(const Scenario& sc, std::uint64_t seed) {
    sc.validate();
    detail::ChannelSampler rng(seed);
    const int k_total = sc.num_users();
    const auto& geo = sc.geometry;

    std::vector<Point2> users;
    users.reserve(k_total);
    for (int k = 0; k < sc.kr; ++k) users.push_back(rng.in_disk(geo.reflection_disk));
    for (int k = 0; k < sc.kt; ++k) users.push_back(rng.in_disk(geo.transmission_disk));

    const bool rician = sc.channel.fading == FadingModel::rician;
    auto mix = [&](const CMat& los, const CMat& nlos, double k) {
        return rician ? detail::rician_mix(los, nlos, k) : nlos;
    };

    ChannelSet ch;
    {
        const CVec a_bs = steering_vector(sc.nt, sc.spacing_tx, sc.wavelength,
                                          detail::bearing(geo.bs, geo.ios));
        const CVec a_ios = detail::ios_steering(sc, detail::bearing(geo.ios, geo.bs));
        const CMat los = a_ios * a_bs.adjoint();
        const CMat nlos = rng.gaussian(sc.n_ios(), sc.nt);
        ch.bs_to_ios = detail::amplitude_gain(sc, distance(geo.bs, geo.ios), sc.pathloss.exponent_bs_ios) *
                       mix(los, nlos, sc.channel.k_bs_ios);
    }

    const double noise_scale = 1.0 / std::sqrt(sc.noise_power);
    for (int k = 0; k < k_total; ++k) {
        const Point2 pos = users[k];
        const CVec a_user_bs = steering_vector(sc.nr, sc.spacing_rx, sc.wavelength, detail::bearing(pos, geo.bs));
        const CVec a_bs_user = steering_vector(sc.nt, sc.spacing_tx, sc.wavelength, detail::bearing(geo.bs, pos));
        const CMat d_los = a_user_bs * a_bs_user.adjoint();
        const CMat d_nlos = rng.gaussian(sc.nr, sc.nt);

        const CVec a_user_ios = steering_vector(sc.nr, sc.spacing_rx, sc.wavelength, detail::bearing(pos, geo.ios));
        const CVec a_ios_user = detail::ios_steering(sc, detail::bearing(geo.ios, pos));
        const CMat g_los = a_user_ios * a_ios_user.adjoint();
        const CMat g_nlos = rng.gaussian(sc.nr, sc.n_ios());

        CMat d = detail::amplitude_gain(sc, distance(geo.bs, pos), sc.pathloss.exponent_direct) *
                 mix(d_los, d_nlos, sc.channel.k_direct);
        for (auto b : geo.blocked_users)
            if (b == static_cast<std::size_t>(k)) d.setZero();

        ch.direct.push_back(noise_scale * d);
        ch.ios_to_user.push_back(noise_scale * detail::amplitude_gain(sc, distance(geo.ios, pos),
                                                                      sc.pathloss.exponent_ios_user) *
                                 mix(g_los, g_nlos, sc.channel.k_ios_user));
        ch.side.push_back(sc.side_of(k));
    }
    return ch;
}

/// Stable digest of every matrix entry, for reproducibility checks and manifests.
inline std::uint64_t fingerprint(const ChannelSet& ch) {
    Fnv1a h;
    auto eat = [&](const CMat& m) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            for (Eigen::Index i = 0; i < m.rows(); ++i) {
                h.update(m(i, j).real());
                h.update(m(i, j).imag());
            }
    };
    eat(ch.bs_to_ios);
    for (const auto& m : ch.direct) eat(m);
    for (const auto& m : ch.ios_to_user) eat(m);
    return h.digest();
}

namespace detail {
inline void check_ios_dims(const ChannelSet& ch, const IosState& ios, int user) {
    if (user < 0 || user >= ch.num_users())
        throw ConfigError("user index " + std::to_string(user) + " out of range");
    if (ios.beta_r.size() != ch.n_ios() || ios.beta_t.size() != ch.n_ios()) {
        std::ostringstream os;
        os << "IOS state has " << ios.beta_r.size() << "/" << ios.beta_t.size()
           << " coefficients, channel set has " << ch.n_ios() << " elements";
        throw ConfigError(os.str());
    }
}
}  // namespace detail

/// G_k diag(beta_side) U, without the sqrt(rho) / sqrt(1 - rho) power split.
inline CMat cascade(const ChannelSet& ch, const IosState& ios, int user) {
    detail::check_ios_dims(ch, ios, user);
    const CVec& beta = ios.beta(ch.side[user]);
    return ch.ios_to_user[user] * (beta.asDiagonal() * ch.bs_to_ios);
}

/// H_k = D_k + s * sum_n beta_n g_{n,k} u_n with s = sqrt(rho) on the reflection side and
/// sqrt(1 - rho) on the transmission side.
inline CMat assemble_effective_channel(const ChannelSet& ch, const IosState& ios, int user) {
    detail::check_ios_dims(ch, ios, user);
    const Side s = ch.side.at(static_cast<std::size_t>(user));
    if (ch.n_ios() == 0) return ch.direct[user];
    return ch.direct[user] + ios.amplitude(s) * cascade(ch, ios, user);
}

inline EffectiveChannels assemble_effective_channels(const ChannelSet& ch, const IosState& ios) {
    EffectiveChannels eff;
    eff.h.reserve(ch.num_users());
    for (int k = 0; k < ch.num_users(); ++k) eff.h.push_back(assemble_effective_channel(ch, ios, k));
    return eff;
}

/// dH_k / drho: cascade / (2 sqrt(rho)) on the reflection side, -cascade / (2 sqrt(1 - rho))
/// on the transmission side. Singular at the endpoints.
inline CMat effective_channel_drho(const ChannelSet& ch, const IosState& ios, int user) {
    if (!(ios.rho > 0.0 && ios.rho < 1.0))
        throw DomainError("dH/drho is undefined at rho = " + std::to_string(ios.rho));
    if (ch.n_ios() == 0) return CMat::Zero(ch.nr(), ch.nt());
    const Side s = ch.side[user];
    const double f = s == Side::reflection ? 0.5 / std::sqrt(ios.rho) : -0.5 / std::sqrt(1.0 - ios.rho);
    return f * cascade(ch, ios, user);
}

}  // namespace iosbc
