#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "iosbc/errors.hpp"
#include "iosbc/linalg.hpp"

namespace iosbc {

inline constexpr double kSpeedOfLight = 299792458.0;

enum class Side { reflection, transmission };
enum class FadingModel { iid_rayleigh, rician };
enum class IosMode { continuous, discrete };
enum class RhoStage { single_step, full };

inline const char* to_string(Side s) { return s == Side::reflection ? "reflection" : "transmission"; }
inline const char* to_string(FadingModel m) {
    return m == FadingModel::iid_rayleigh ? "iid-rayleigh" : "rician";
}
inline const char* to_string(IosMode m) { return m == IosMode::continuous ? "continuous" : "discrete"; }
inline const char* to_string(RhoStage s) { return s == RhoStage::single_step ? "single-step" : "full"; }

/// One realizable (reflection, transmission) coefficient state of an IOS element.
struct CoefficientPair {
    cd reflection{1.0, 0.0};
    cd transmission{1.0, 0.0};

    friend bool operator==(const CoefficientPair&, const CoefficientPair&) = default;
};

using PairSet = std::vector<CoefficientPair>;

/// One row of a pair table as written in config files: magnitudes and phases in degrees.
struct PsiRow {
    double mag_r = 1.0;
    double deg_r = 0.0;
    double mag_t = 1.0;
    double deg_t = 0.0;

    CoefficientPair pair() const {
        constexpr double rad = std::numbers::pi / 180.0;
        return {std::polar(mag_r, deg_r * rad), std::polar(mag_t, deg_t * rad)};
    }

    friend bool operator==(const PsiRow&, const PsiRow&) = default;
};

inline PairSet to_pair_set(const std::vector<PsiRow>& rows) {
    PairSet out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.pair());
    return out;
}

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

struct Disk {
    Point2 center;
    double radius = 0.0;
};

/// Aerial-view topology. The IOS plane is the line x = ios.x; the BS and the
/// reflection-side disk lie at x < ios.x, the transmission-side disk at x > ios.x.
/// All arrays are oriented along y, broadside along x.
struct Geometry {
    Point2 bs{0.0, 0.0};
    Point2 ios{50.0, 0.0};
    Disk reflection_disk{{44.0, 8.0}, 3.0};
    Disk transmission_disk{{56.0, 8.0}, 3.0};
    /// 0-based user indices whose direct BS link is blocked (D_k = 0).
    std::vector<std::size_t> blocked_users;
};

struct PathLoss {
    bool enabled = true;
    double exponent_bs_ios = 2.0;
    double exponent_ios_user = 2.0;
    double exponent_direct = 3.5;
    /// Power gain at 1 m in dB; NaN means free-space (lambda / 4 pi)^2.
    double reference_gain_db = std::numeric_limits<double>::quiet_NaN();
};

struct ChannelModel {
    FadingModel fading = FadingModel::iid_rayleigh;
    /// Linear Rician K-factors; +inf gives a pure LOS link.
    double k_bs_ios = 0.0;
    double k_ios_user = 0.0;
    double k_direct = 0.0;
};

struct CovarianceOptions {
    double tol = 1e-8;          ///< inner BCM stop on relative covariance change
    int max_sweeps = 500;       ///< inner BCM sweep cap
    double power_tol = 1e-10;   ///< outer multiplier search stop on |sum tr - P| / P
    int max_bisection = 200;
};

struct RhoOptions {
    double rho_min = 1e-6;
    double rho_max = 1.0 - 1e-6;
    double step0 = 1.0;
    double backtrack = 0.5;
    double armijo = 1e-4;
    double tol = 1e-8;
    int max_iter = 200;
};

struct AoOptions {
    int max_outer_iters = 100;
    double rel_tol = 1e-5;
    IosMode mode = IosMode::continuous;
    RhoStage rho_stage = RhoStage::single_step;
    CovarianceOptions covariance;
    RhoOptions rho;
    bool record_trace = true;
};

struct SolverConfig {
    std::uint64_t seed = 1;
    int runs = 100;
    AoOptions ao;
};

struct Scenario {
    int nt = 8;
    int nr = 2;
    int kr = 2;
    int kt = 2;
    int ios_rows = 15;
    int ios_cols = 15;
    double power_budget = 1.0;          ///< W
    double noise_power = 1e-11;         ///< W, linear
    double wavelength = kSpeedOfLight / 2.0e9;
    double spacing_tx = kSpeedOfLight / 2.0e9 / 2.0;
    double spacing_rx = kSpeedOfLight / 2.0e9 / 2.0;
    double spacing_ios = kSpeedOfLight / 2.0e9 / 2.0;
    Geometry geometry;
    ChannelModel channel;
    PathLoss pathloss;
    std::vector<PsiRow> psi_rows;       ///< source values of pair_set
    PairSet pair_set;                   ///< required in discrete mode
    SolverConfig solver;

    void set_psi(std::vector<PsiRow> rows) {
        psi_rows = std::move(rows);
        pair_set = to_pair_set(psi_rows);
    }

    int num_users() const { return kr + kt; }
    int n_ios() const { return ios_rows * ios_cols; }
    Side side_of(int user) const { return user < kr ? Side::reflection : Side::transmission; }

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
};

inline void Scenario::validate() const {
    auto require = [](bool ok, const char* key, const std::string& msg) {
        if (!ok) throw ConfigError(key, msg);
    };
    require(nt >= 1, "system.nt", "must be >= 1");
    require(nr >= 1, "system.nr", "must be >= 1");
    require(kr >= 0, "system.kr", "must be >= 0");
    require(kt >= 0, "system.kt", "must be >= 0");
    require(kr + kt >= 1, "system.kr", "kr + kt must be >= 1");
    require(ios_rows >= 0, "ios.rows", "must be >= 0");
    require(ios_cols >= 0, "ios.cols", "must be >= 0");
    require(power_budget > 0.0 && std::isfinite(power_budget), "system.power_w", "must be > 0");
    require(noise_power > 0.0 && std::isfinite(noise_power), "system.noise_db",
            "noise power must be > 0");
    require(wavelength > 0.0, "system.carrier_hz", "wavelength must be > 0");
    require(spacing_tx > 0.0, "system.spacing_tx_m", "must be > 0");
    require(spacing_rx > 0.0, "system.spacing_rx_m", "must be > 0");
    require(spacing_ios > 0.0, "ios.spacing_m", "must be > 0");

    const auto& g = geometry;
    require(g.bs.x < g.ios.x, "geometry.bs", "BS must lie on the reflection side (x < ios.x)");
    require(g.reflection_disk.radius >= 0.0, "geometry.reflection_disk.radius", "must be >= 0");
    require(g.transmission_disk.radius >= 0.0, "geometry.transmission_disk.radius", "must be >= 0");
    require(g.reflection_disk.center.x + g.reflection_disk.radius < g.ios.x,
            "geometry.reflection_disk", "disk must lie strictly on the reflection side of the IOS");
    require(g.transmission_disk.center.x - g.transmission_disk.radius > g.ios.x,
            "geometry.transmission_disk",
            "disk must lie strictly on the transmission side of the IOS");
    for (auto u : g.blocked_users)
        require(u < static_cast<std::size_t>(num_users()), "geometry.blocked_users",
                "user index out of range");

    if (channel.fading == FadingModel::rician) {
        require(channel.k_bs_ios >= 0.0, "channel.k_factor.bs_ios", "must be >= 0");
        require(channel.k_ios_user >= 0.0, "channel.k_factor.ios_user", "must be >= 0");
        require(channel.k_direct >= 0.0, "channel.k_factor.direct", "must be >= 0");
    }
    if (pathloss.enabled) {
        require(pathloss.exponent_bs_ios > 0.0, "pathloss.exponent_bs_ios", "must be > 0");
        require(pathloss.exponent_ios_user > 0.0, "pathloss.exponent_ios_user", "must be > 0");
        require(pathloss.exponent_direct > 0.0, "pathloss.exponent_direct", "must be > 0");
    }

    const auto& ao = solver.ao;
    const auto& r = ao.rho;
    require(r.rho_min > 0.0, "solver.rho.min", "rho_min must be > 0");
    require(r.rho_max < 1.0, "solver.rho.max", "rho_max must be < 1");
    require(r.rho_min < r.rho_max, "solver.rho.min", "rho_min must be < rho_max");
    require(r.step0 > 0.0, "solver.rho.step0", "must be > 0");
    require(r.backtrack > 0.0 && r.backtrack < 1.0, "solver.rho.backtrack", "must be in (0, 1)");
    require(r.armijo > 0.0 && r.armijo < 1.0, "solver.rho.armijo", "must be in (0, 1)");
    require(r.tol > 0.0, "solver.rho.tol", "must be > 0");
    require(r.max_iter >= 1, "solver.rho.max_iter", "must be >= 1");
    require(ao.max_outer_iters >= 1, "solver.ao.max_outer_iters", "must be >= 1");
    require(ao.rel_tol > 0.0, "solver.ao.rel_tol", "must be > 0");
    require(ao.covariance.tol > 0.0, "solver.covariance.tol", "must be > 0");
    require(ao.covariance.max_sweeps >= 1, "solver.covariance.max_sweeps", "must be >= 1");
    require(ao.covariance.power_tol > 0.0, "solver.covariance.power_tol", "must be > 0");
    require(solver.runs >= 1, "solver.runs", "must be >= 1");

    if (ao.mode == IosMode::discrete) {
        require(!pair_set.empty(), "ios.psi_table", "discrete mode requires a non-empty pair table");
    }
}

}  // namespace iosbc
