#pragma once

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "iosbc/config.hpp"
#include "iosbc/driver.hpp"
#include "iosbc/hash.hpp"
#include "iosbc/io.hpp"

#ifndef IOSBC_VERSION
#define IOSBC_VERSION "0.1.0"
#endif

namespace iosbc::cli {

inline constexpr const char* kWorkersEnv = "IOSBC_WORKERS";

/// "a..b" (inclusive) or "s1,s2,...".
inline std::vector<std::uint64_t> parse_seeds(const std::string& spec) {
    auto num = [&](const std::string& s) -> std::uint64_t {
        const std::string t = io::trim(s);
        std::uint64_t v = 0;
        const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
        if (t.empty() || r.ec != std::errc{} || r.ptr != t.data() + t.size())
            throw ConfigError("--seeds", "not a seed: '" + t + "'");
        return v;
    };
    std::vector<std::uint64_t> out;
    if (const auto dots = spec.find(".."); dots != std::string::npos) {
        const auto a = num(spec.substr(0, dots));
        const auto b = num(spec.substr(dots + 2));
        if (b < a) throw ConfigError("--seeds", "range end is below its start");
        if (b - a >= 1000000) throw ConfigError("--seeds", "range too large");
        for (auto s = a;; ++s) {
            out.push_back(s);
            if (s == b) break;
        }
    } else {
        std::stringstream ss(spec);
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(num(tok));
    }
    if (out.empty()) throw ConfigError("--seeds", "no seeds given");
    return out;
}

inline int workers_from_env() {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const char* v = std::getenv(kWorkersEnv);
    if (!v || !*v) return static_cast<int>(hw);
    try {
        const int n = std::stoi(v);
        if (n >= 1) return n;
    } catch (const std::exception&) {
    }
    throw ConfigError(std::string(kWorkersEnv) + ": expected a positive integer, got '" + v + "'");
}

inline nlohmann::json complex_array(const CVec& v) {
    auto a = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
    return a;
}

inline nlohmann::json final_state_json(std::uint64_t seed, const AoReport& r) {
    nlohmann::json j;
    j["seed"] = seed;
    j["iterations_used"] = r.iterations_used;
    j["converged"] = r.converged;
    j["initial_objective_bits"] = r.initial_objective;
    j["final_objective_bits"] = r.final_objective;
    j["bc_sum_rate_bits"] = r.bc_sum_rate;
    j["duality_gap"] = r.duality_gap;
    j["bc_user_rates_bits"] = r.bc_rates;
    j["rho"] = r.final_state.rho;
    j["beta_reflection"] = complex_array(r.final_state.beta_r);
    j["beta_transmission"] = complex_array(r.final_state.beta_t);
    auto powers = nlohmann::json::array();
    for (const auto& s : r.bc_covariances.s) powers.push_back(s.trace().real());
    j["bc_covariance_power_w"] = powers;
    j["wall_time_s"] = r.wall_time_s;
    return j;
}

struct RunRequest {
    std::filesystem::path config;
    std::filesystem::path out_dir;
    std::vector<std::string> overrides;
    std::string seeds;          ///< empty: solver.seed .. solver.seed + runs - 1
};

inline std::string seed_file(std::uint64_t s) { return "seed_" + std::to_string(s) + ".csv"; }

inline int cmd_run(const RunRequest& req, std::ostream& out, std::ostream& err) {
    config::LoadedConfig cfg;
    std::vector<std::uint64_t> seeds;
    int workers = 1;
    try {
        cfg = config::load_file(req.config, req.overrides);
        seeds = req.seeds.empty() ? consecutive_seeds(cfg.scenario.solver.seed, cfg.scenario.solver.runs)
                                  : parse_seeds(req.seeds);
        workers = workers_from_env();
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }

    const Scenario& sc = cfg.scenario;
    MonteCarloResult mc;
    try {
        mc = monte_carlo(sc, seeds, sc.solver.ao, workers);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        namespace fs = std::filesystem;
        fs::create_directories(req.out_dir / "runs");
        const std::string resolved = config::emit_resolved(sc);
        const std::string hash = to_hex(fnv1a(resolved));

        nlohmann::json states = nlohmann::json::array();
        nlohmann::json run_files = nlohmann::json::array();
        for (std::size_t i = 0; i < seeds.size(); ++i) {
            const fs::path rel = fs::path("runs") / seed_file(seeds[i]);
            io::write_file_atomic(req.out_dir / rel, io::write_trace_csv(io::trace_rows(mc.runs[i])));
            run_files.push_back(rel.generic_string());
            states.push_back(final_state_json(seeds[i], mc.runs[i]));
        }
        io::write_file_atomic(req.out_dir / "mean.csv", io::write_trace_csv(io::trace_rows(mc), true));
        io::write_file_atomic(req.out_dir / "final_state.json", states.dump(2) + "\n");
        io::write_file_atomic(req.out_dir / "resolved_config.yaml", resolved);

        nlohmann::json m;
        m["tool"] = "iosbc";
        m["tool_version"] = IOSBC_VERSION;
        m["scenario_hash"] = hash;
        m["scenario"] = resolved;
        m["config_source"] = cfg.source;
        m["overrides"] = req.overrides;
        m["options"] = {{"mode", to_string(sc.solver.ao.mode)},
                        {"rho_stage", to_string(sc.solver.ao.rho_stage)},
                        {"max_outer_iters", sc.solver.ao.max_outer_iters},
                        {"rel_tol", sc.solver.ao.rel_tol},
                        {"user_ordering", "identity"}};
        m["seeds"] = seeds;
        m["artifacts"] = {{"runs", run_files},
                          {"mean", "mean.csv"},
                          {"final_state", "final_state.json"},
                          {"resolved_config", "resolved_config.yaml"}};
        io::write_file_atomic(req.out_dir / "manifest.json", m.dump(2) + "\n");

        out << "runs: " << seeds.size() << "  mode: " << to_string(sc.solver.ao.mode)
            << "  N: " << sc.n_ios() << "\n";
        out << "mean final sum rate: " << mc.mean_objective.back() << " bit/s/Hz\n";
        out << "wrote " << req.out_dir.string() << " (scenario " << hash << ")\n";
    } catch (const std::exception& e) {
        err << "error: writing results: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int cmd_validate(const std::filesystem::path& config, const std::vector<std::string>& overrides,
                        std::ostream& out, std::ostream& err) {
    try {
        const auto cfg = config::load_file(config, overrides);
        const Scenario& s = cfg.scenario;
        out << "config ok: " << cfg.source << "\n";
        out << "  carrier: " << kSpeedOfLight / s.wavelength << " Hz (wavelength " << s.wavelength << " m)\n";
        out << "  BS antennas Nt: " << s.nt << "\n";
        out << "  user antennas Nr: " << s.nr << "\n";
        out << "  users: " << s.kr << " reflection side, " << s.kt << " transmission side\n";
        out << "  power budget: " << s.power_budget << " W\n";
        out << "  noise: " << 10.0 * std::log10(s.noise_power) << " dB\n";
        out << "  IOS: " << s.ios_rows << "x" << s.ios_cols << " = " << s.n_ios() << " elements, spacing "
            << s.spacing_ios / s.wavelength << " wavelengths\n";
        out << "  pair table: "
            << (s.psi_rows.empty() ? std::string("none") : std::to_string(s.psi_rows.size()) + " states (" +
                                                               cfg.psi_source + ")")
            << "\n";
        out << "  mode: " << to_string(s.solver.ao.mode) << ", runs: " << s.solver.runs << "\n";
        out << "--- resolved ---\n" << config::emit_resolved(s);
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

/// Full command line entry point; returns the process exit code.
inline int main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Sum-rate maximization for IOS-aided MIMO broadcast channels", "iosbc"};
    app.set_version_flag("--version", IOSBC_VERSION);
    app.require_subcommand(1);

    RunRequest req;
    std::string mode;
    int runs = 0;

    auto* run = app.add_subcommand("run", "run Monte-Carlo AO and write CSV traces, final states and a manifest");
    run->add_option("--config", req.config, "scenario YAML")->required();
    run->add_option("--out", req.out_dir, "output directory")->required();
    run->add_option("--seeds", req.seeds, "seed range a..b or list s1,s2,...");
    run->add_option("--mode", mode, "IOS coefficient mode")->check(CLI::IsMember({"continuous", "discrete"}));
    run->add_option("--runs", runs, "number of runs (seeds solver.seed onward)")->check(CLI::PositiveNumber);
    run->add_option("--set", req.overrides, "override a key, e.g. --set solver.ao.rel_tol=1e-6");

    std::filesystem::path vconfig;
    std::vector<std::string> voverrides;
    auto* validate = app.add_subcommand("validate", "check a scenario and print the resolved settings");
    validate->add_option("--config", vconfig, "scenario YAML")->required();
    validate->add_option("--set", voverrides, "override a key");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    if (*run) {
        if (!mode.empty()) req.overrides.push_back("solver.mode=" + mode);
        if (runs > 0) req.overrides.push_back("solver.runs=" + std::to_string(runs));
        return cmd_run(req, out, err);
    }
    return cmd_validate(vconfig, voverrides, out, err);
}

}  // namespace iosbc::cli
