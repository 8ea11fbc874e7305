#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "iosbc/errors.hpp"
#include "iosbc/io.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc::config {

/// Where a configuration value came from, for error messages.
struct Origin {
    std::string source;   ///< file path or "--set"
    int line = 0;         ///< 1-based, 0 when unknown
};

/// A fully resolved scenario plus the bookkeeping needed to report and re-emit it.
struct LoadedConfig {
    Scenario scenario;
    std::string source;                       ///< config path
    std::map<std::string, Origin> origins;    ///< dotted key -> where it was set
    std::string psi_source;                   ///< table path or "inline"
};

namespace detail {

inline std::string where(const Origin& o) {
    return o.line > 0 ? o.source + ":" + std::to_string(o.line) : o.source;
}

template <typename T>
T scalar(const YAML::Node& n, const std::string& key) {
    if (!n.IsScalar()) throw ConfigError(key, "expected a scalar value");
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(key, "cannot parse '" + n.Scalar() + "'");
    }
}

inline double real(const YAML::Node& n, const std::string& key) {
    const auto v = scalar<double>(n, key);
    if (std::isnan(v)) throw ConfigError(key, "must be a number");
    return v;
}

inline Point2 point(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence() || n.size() != 2) throw ConfigError(key, "expected [x, y]");
    return {real(n[0], key), real(n[1], key)};
}

inline std::vector<PsiRow> psi_rows(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) throw ConfigError(key, "expected a list of [|r|, deg_r, |t|, deg_t] rows");
    std::vector<PsiRow> rows;
    for (const auto& r : n) {
        if (!r.IsSequence() || r.size() != 4)
            throw ConfigError(key, "each row needs 4 values [|r|, deg_r, |t|, deg_t]");
        PsiRow p{real(r[0], key), real(r[1], key), real(r[2], key), real(r[3], key)};
        if (p.mag_r < 0.0 || p.mag_t < 0.0) throw ConfigError(key, "magnitudes must be >= 0");
        rows.push_back(p);
    }
    return rows;
}

/// Values that are resolved after all keys are read (they depend on each other).
struct Pending {
    std::optional<double> carrier_hz;
    std::optional<double> wavelength_m;
    std::optional<double> spacing_tx;
    std::optional<double> spacing_rx;
    std::optional<double> spacing_ios;
    std::optional<std::string> psi_table;
    std::optional<std::vector<PsiRow>> psi_inline;
    std::filesystem::path base_dir;
};

using Setter = std::function<void(Scenario&, Pending&, const YAML::Node&, const std::string&)>;

inline const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = [] {
        std::map<std::string, Setter> t;
        auto integer = [&t](const std::string& k, int Scenario::*m) {
            t[k] = [m](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
                s.*m = scalar<int>(n, key);
            };
        };
        auto number = [&t](const std::string& k, auto getter) {
            t[k] = [getter](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
                getter(s) = real(n, key);
            };
        };
        auto pending = [&t](const std::string& k, std::optional<double> Pending::*m) {
            t[k] = [m](Scenario&, Pending& p, const YAML::Node& n, const std::string& key) {
                p.*m = real(n, key);
            };
        };

        integer("system.nt", &Scenario::nt);
        integer("system.nr", &Scenario::nr);
        integer("system.kr", &Scenario::kr);
        integer("system.kt", &Scenario::kt);
        number("system.power_w", [](Scenario& s) -> double& { return s.power_budget; });
        t["system.noise_db"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.noise_power = std::pow(10.0, real(n, key) / 10.0);
        };
        number("system.noise_w", [](Scenario& s) -> double& { return s.noise_power; });
        pending("system.carrier_hz", &Pending::carrier_hz);
        pending("system.wavelength_m", &Pending::wavelength_m);
        pending("system.spacing_tx_m", &Pending::spacing_tx);
        pending("system.spacing_rx_m", &Pending::spacing_rx);

        integer("ios.rows", &Scenario::ios_rows);
        integer("ios.cols", &Scenario::ios_cols);
        pending("ios.spacing_m", &Pending::spacing_ios);
        t["ios.psi_table"] = [](Scenario&, Pending& p, const YAML::Node& n, const std::string& key) {
            p.psi_table = scalar<std::string>(n, key);
        };
        t["ios.psi"] = [](Scenario&, Pending& p, const YAML::Node& n, const std::string& key) {
            p.psi_inline = psi_rows(n, key);
        };

        t["geometry.bs"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.geometry.bs = point(n, key);
        };
        t["geometry.ios"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.geometry.ios = point(n, key);
        };
        t["geometry.reflection_disk.center"] = [](Scenario& s, Pending&, const YAML::Node& n,
                                                  const std::string& key) {
            s.geometry.reflection_disk.center = point(n, key);
        };
        number("geometry.reflection_disk.radius",
               [](Scenario& s) -> double& { return s.geometry.reflection_disk.radius; });
        t["geometry.transmission_disk.center"] = [](Scenario& s, Pending&, const YAML::Node& n,
                                                    const std::string& key) {
            s.geometry.transmission_disk.center = point(n, key);
        };
        number("geometry.transmission_disk.radius",
               [](Scenario& s) -> double& { return s.geometry.transmission_disk.radius; });
        t["geometry.blocked_users"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            if (!n.IsSequence()) throw ConfigError(key, "expected a list of user indices");
            s.geometry.blocked_users.clear();
            for (const auto& u : n) {
                const int v = scalar<int>(u, key);
                if (v < 0) throw ConfigError(key, "user indices must be >= 0");
                s.geometry.blocked_users.push_back(static_cast<std::size_t>(v));
            }
        };

        t["channel.fading"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            const auto v = scalar<std::string>(n, key);
            if (v == "iid-rayleigh")
                s.channel.fading = FadingModel::iid_rayleigh;
            else if (v == "rician")
                s.channel.fading = FadingModel::rician;
            else
                throw ConfigError(key, "expected iid-rayleigh or rician, got '" + v + "'");
        };
        number("channel.k_factor.bs_ios", [](Scenario& s) -> double& { return s.channel.k_bs_ios; });
        number("channel.k_factor.ios_user", [](Scenario& s) -> double& { return s.channel.k_ios_user; });
        number("channel.k_factor.direct", [](Scenario& s) -> double& { return s.channel.k_direct; });

        t["pathloss.enabled"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.pathloss.enabled = scalar<bool>(n, key);
        };
        number("pathloss.exponent_bs_ios", [](Scenario& s) -> double& { return s.pathloss.exponent_bs_ios; });
        number("pathloss.exponent_ios_user",
               [](Scenario& s) -> double& { return s.pathloss.exponent_ios_user; });
        number("pathloss.exponent_direct", [](Scenario& s) -> double& { return s.pathloss.exponent_direct; });
        t["pathloss.reference_gain_db"] = [](Scenario& s, Pending&, const YAML::Node& n,
                                             const std::string& key) {
            if (n.IsScalar() && n.Scalar() == "free-space")
                s.pathloss.reference_gain_db = std::numeric_limits<double>::quiet_NaN();
            else
                s.pathloss.reference_gain_db = real(n, key);
        };

        t["solver.seed"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.solver.seed = scalar<std::uint64_t>(n, key);
        };
        t["solver.runs"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.solver.runs = scalar<int>(n, key);
        };
        t["solver.mode"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            const auto v = scalar<std::string>(n, key);
            if (v == "continuous")
                s.solver.ao.mode = IosMode::continuous;
            else if (v == "discrete")
                s.solver.ao.mode = IosMode::discrete;
            else
                throw ConfigError(key, "expected continuous or discrete, got '" + v + "'");
        };
        t["solver.ao.max_outer_iters"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.solver.ao.max_outer_iters = scalar<int>(n, key);
        };
        number("solver.ao.rel_tol", [](Scenario& s) -> double& { return s.solver.ao.rel_tol; });
        t["solver.ao.rho_stage"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            const auto v = scalar<std::string>(n, key);
            if (v == "single-step")
                s.solver.ao.rho_stage = RhoStage::single_step;
            else if (v == "full")
                s.solver.ao.rho_stage = RhoStage::full;
            else
                throw ConfigError(key, "expected single-step or full, got '" + v + "'");
        };
        number("solver.rho.min", [](Scenario& s) -> double& { return s.solver.ao.rho.rho_min; });
        number("solver.rho.max", [](Scenario& s) -> double& { return s.solver.ao.rho.rho_max; });
        number("solver.rho.step0", [](Scenario& s) -> double& { return s.solver.ao.rho.step0; });
        number("solver.rho.backtrack", [](Scenario& s) -> double& { return s.solver.ao.rho.backtrack; });
        number("solver.rho.armijo", [](Scenario& s) -> double& { return s.solver.ao.rho.armijo; });
        number("solver.rho.tol", [](Scenario& s) -> double& { return s.solver.ao.rho.tol; });
        t["solver.rho.max_iter"] = [](Scenario& s, Pending&, const YAML::Node& n, const std::string& key) {
            s.solver.ao.rho.max_iter = scalar<int>(n, key);
        };
        number("solver.covariance.tol", [](Scenario& s) -> double& { return s.solver.ao.covariance.tol; });
        t["solver.covariance.max_sweeps"] = [](Scenario& s, Pending&, const YAML::Node& n,
                                               const std::string& key) {
            s.solver.ao.covariance.max_sweeps = scalar<int>(n, key);
        };
        number("solver.covariance.power_tol",
               [](Scenario& s) -> double& { return s.solver.ao.covariance.power_tol; });
        t["solver.covariance.max_bisection"] = [](Scenario& s, Pending&, const YAML::Node& n,
                                                  const std::string& key) {
            s.solver.ao.covariance.max_bisection = scalar<int>(n, key);
        };
        return t;
    }();
    return table;
}

/// True when `prefix` is a proper section of some known key (e.g. "solver.rho").
inline bool is_section(const std::string& prefix) {
    const auto& t = setters();
    const std::string p = prefix + ".";
    auto it = t.lower_bound(p);
    return it != t.end() && it->first.compare(0, p.size(), p) == 0;
}

class Builder {
public:
    explicit Builder(std::string source, std::filesystem::path base_dir) : source_(std::move(source)) {
        pending_.base_dir = std::move(base_dir);
    }

    void apply_tree(const YAML::Node& node, const std::string& prefix) {
        if (node.IsNull() && !prefix.empty()) return;   // empty section
        if (!node.IsMap()) {
            fail(prefix, node, prefix.empty() ? "top level must be a mapping" : "expected a mapping");
        }
        for (const auto& kv : node) {
            const std::string name = kv.first.as<std::string>();
            const std::string key = prefix.empty() ? name : prefix + "." + name;
            const YAML::Node& value = kv.second;
            if (setters().count(key)) {
                apply_leaf(key, value, {source_, value.Mark().line + 1});
            } else if (is_section(key)) {
                apply_tree(value, key);
            } else {
                fail(key, kv.first, "unknown key");
            }
        }
    }

    /// Apply "dotted.key=value"; the value is parsed as YAML.
    void apply_override(const std::string& assignment) {
        const auto eq = assignment.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("--set: expected key=value, got '" + assignment + "'");
        const std::string key = io::trim(assignment.substr(0, eq));
        if (!setters().count(key)) throw ConfigError(key, "--set", "unknown key");
        YAML::Node value;
        try {
            value = YAML::Load(assignment.substr(eq + 1));
        } catch (const YAML::Exception& e) {
            throw ConfigError(key, "--set", e.msg);
        }
        apply_leaf(key, value, {"--set", 0});
    }

    LoadedConfig finish() {
        LoadedConfig out;
        Scenario& s = scenario_;
        auto& p = pending_;
        if (p.wavelength_m && p.carrier_hz)
            throw located("system.wavelength_m", "give either carrier_hz or wavelength_m, not both");
        if (p.carrier_hz) {
            if (!(*p.carrier_hz > 0.0)) throw located("system.carrier_hz", "must be > 0");
            s.wavelength = kSpeedOfLight / *p.carrier_hz;
        }
        if (p.wavelength_m) s.wavelength = *p.wavelength_m;
        s.spacing_tx = p.spacing_tx.value_or(s.wavelength / 2.0);
        s.spacing_rx = p.spacing_rx.value_or(s.wavelength / 2.0);
        s.spacing_ios = p.spacing_ios.value_or(s.wavelength / 2.0);

        if (p.psi_table && p.psi_inline) throw located("ios.psi", "give either psi_table or psi, not both");
        if (p.psi_table) {
            std::filesystem::path path(*p.psi_table);
            if (path.is_relative()) path = p.base_dir / path;
            try {
                s.set_psi(io::load_psi_table(path));
            } catch (const ConfigError& e) {
                throw located("ios.psi_table", strip_key(e, "ios.psi_table"));
            }
            out.psi_source = path.string();
        } else if (p.psi_inline) {
            s.set_psi(*p.psi_inline);
            out.psi_source = "inline";
        }

        try {
            s.validate();
        } catch (const ConfigError& e) {
            if (e.key().empty()) throw;
            throw located(e.key(), strip_key(e, e.key()));
        }
        out.scenario = s;
        out.source = source_;
        out.origins = origins_;
        return out;
    }

private:
    void apply_leaf(const std::string& key, const YAML::Node& value, Origin origin) {
        origins_[key] = origin;
        try {
            setters().at(key)(scenario_, pending_, value, key);
        } catch (const ConfigError& e) {
            throw ConfigError(key, where(origin), strip_key(e, key));
        }
    }

    [[noreturn]] void fail(const std::string& key, const YAML::Node& at, const std::string& msg) const {
        const Origin o{source_, at.Mark().line + 1};
        throw ConfigError(key, where(o), msg);
    }

    /// Error for `key`, anchored at the line that set it (or the file when it was defaulted).
    ConfigError located(const std::string& key, const std::string& msg) const {
        auto it = origins_.find(key);
        // Alternative spellings share one anchor.
        if (it == origins_.end() && key == "system.noise_db") it = origins_.find("system.noise_w");
        if (it == origins_.end() && key == "system.carrier_hz") it = origins_.find("system.wavelength_m");
        if (it == origins_.end() && key == "ios.psi_table") it = origins_.find("ios.psi");
        const Origin o = it != origins_.end() ? it->second : Origin{source_, 0};
        return ConfigError(key, where(o), msg);
    }

    static std::string strip_key(const ConfigError& e, const std::string& key) {
        const std::string w = e.what();
        const std::string pfx = key + ": ";
        return w.rfind(pfx, 0) == 0 ? w.substr(pfx.size()) : w;
    }

    std::string source_;
    Scenario scenario_;
    Pending pending_;
    std::map<std::string, Origin> origins_;
};

}  // namespace detail

/// Parse YAML text. `source` names it in messages; `base_dir` resolves a relative ios.psi_table.
inline LoadedConfig load_string(const std::string& text, const std::string& source,
                                const std::filesystem::path& base_dir,
                                const std::vector<std::string>& overrides = {}) {
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ConfigError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    if (!root.IsDefined() || root.IsNull()) throw ConfigError(source + ": configuration is empty");
    detail::Builder b(source, base_dir);
    b.apply_tree(root, "");
    for (const auto& o : overrides) b.apply_override(o);
    return b.finish();
}

inline LoadedConfig load_file(const std::filesystem::path& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError(path.string() + ": cannot open configuration file");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_string(ss.str(), path.string(), path.parent_path(), overrides);
}

/// Defaults only, plus overrides.
inline LoadedConfig defaults(const std::vector<std::string>& overrides = {}) {
    detail::Builder b("<defaults>", std::filesystem::current_path());
    for (const auto& o : overrides) b.apply_override(o);
    return b.finish();
}

/// Every setting, defaults included, in a form that load_string() reads back to the same Scenario.
inline std::string emit_resolved(const Scenario& s) {
    using io::format_double;
    auto num = [](double v) -> std::string {
        if (std::isinf(v)) return v > 0 ? ".inf" : "-.inf";
        return format_double(v);
    };
    auto pt = [&](Point2 p) {
        YAML::Node n(YAML::NodeType::Sequence);
        n.SetStyle(YAML::EmitterStyle::Flow);
        n.push_back(num(p.x));
        n.push_back(num(p.y));
        return n;
    };
    YAML::Node root;
    root["system"]["nt"] = s.nt;
    root["system"]["nr"] = s.nr;
    root["system"]["kr"] = s.kr;
    root["system"]["kt"] = s.kt;
    root["system"]["power_w"] = num(s.power_budget);
    root["system"]["noise_w"] = num(s.noise_power);
    root["system"]["wavelength_m"] = num(s.wavelength);
    root["system"]["spacing_tx_m"] = num(s.spacing_tx);
    root["system"]["spacing_rx_m"] = num(s.spacing_rx);

    root["ios"]["rows"] = s.ios_rows;
    root["ios"]["cols"] = s.ios_cols;
    root["ios"]["spacing_m"] = num(s.spacing_ios);
    if (!s.psi_rows.empty()) {
        YAML::Node rows(YAML::NodeType::Sequence);
        for (const auto& r : s.psi_rows) {
            YAML::Node row(YAML::NodeType::Sequence);
            row.SetStyle(YAML::EmitterStyle::Flow);
            for (double v : {r.mag_r, r.deg_r, r.mag_t, r.deg_t}) row.push_back(num(v));
            rows.push_back(row);
        }
        root["ios"]["psi"] = rows;
    }

    const auto& g = s.geometry;
    root["geometry"]["bs"] = pt(g.bs);
    root["geometry"]["ios"] = pt(g.ios);
    root["geometry"]["reflection_disk"]["center"] = pt(g.reflection_disk.center);
    root["geometry"]["reflection_disk"]["radius"] = num(g.reflection_disk.radius);
    root["geometry"]["transmission_disk"]["center"] = pt(g.transmission_disk.center);
    root["geometry"]["transmission_disk"]["radius"] = num(g.transmission_disk.radius);
    YAML::Node blocked(YAML::NodeType::Sequence);
    blocked.SetStyle(YAML::EmitterStyle::Flow);
    for (auto u : g.blocked_users) blocked.push_back(u);
    root["geometry"]["blocked_users"] = blocked;

    root["channel"]["fading"] = to_string(s.channel.fading);
    root["channel"]["k_factor"]["bs_ios"] = num(s.channel.k_bs_ios);
    root["channel"]["k_factor"]["ios_user"] = num(s.channel.k_ios_user);
    root["channel"]["k_factor"]["direct"] = num(s.channel.k_direct);

    root["pathloss"]["enabled"] = s.pathloss.enabled;
    root["pathloss"]["exponent_bs_ios"] = num(s.pathloss.exponent_bs_ios);
    root["pathloss"]["exponent_ios_user"] = num(s.pathloss.exponent_ios_user);
    root["pathloss"]["exponent_direct"] = num(s.pathloss.exponent_direct);
    if (std::isnan(s.pathloss.reference_gain_db))
        root["pathloss"]["reference_gain_db"] = "free-space";
    else
        root["pathloss"]["reference_gain_db"] = num(s.pathloss.reference_gain_db);

    const auto& ao = s.solver.ao;
    root["solver"]["seed"] = s.solver.seed;
    root["solver"]["runs"] = s.solver.runs;
    root["solver"]["mode"] = to_string(ao.mode);
    root["solver"]["ao"]["max_outer_iters"] = ao.max_outer_iters;
    root["solver"]["ao"]["rel_tol"] = num(ao.rel_tol);
    root["solver"]["ao"]["rho_stage"] = to_string(ao.rho_stage);
    root["solver"]["rho"]["min"] = num(ao.rho.rho_min);
    root["solver"]["rho"]["max"] = num(ao.rho.rho_max);
    root["solver"]["rho"]["step0"] = num(ao.rho.step0);
    root["solver"]["rho"]["backtrack"] = num(ao.rho.backtrack);
    root["solver"]["rho"]["armijo"] = num(ao.rho.armijo);
    root["solver"]["rho"]["tol"] = num(ao.rho.tol);
    root["solver"]["rho"]["max_iter"] = ao.rho.max_iter;
    root["solver"]["covariance"]["tol"] = num(ao.covariance.tol);
    root["solver"]["covariance"]["max_sweeps"] = ao.covariance.max_sweeps;
    root["solver"]["covariance"]["power_tol"] = num(ao.covariance.power_tol);
    root["solver"]["covariance"]["max_bisection"] = ao.covariance.max_bisection;

    YAML::Emitter em;
    em << root;
    return std::string(em.c_str()) + "\n";
}

}  // namespace iosbc::config
