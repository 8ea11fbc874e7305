#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "iosbc/config.hpp"
#include "iosbc/io.hpp"
#include "support.hpp"

using namespace iosbc;
using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinRel;

namespace fs = std::filesystem;

namespace {

const fs::path kConfigDir = IOSBC_CONFIG_DIR;

config::LoadedConfig load(const std::string& text, const std::vector<std::string>& overrides = {}) {
    return config::load_string(text, "test.yaml", kConfigDir, overrides);
}

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "<no error>";
}

fs::path scratch_dir(const std::string& name) {
    const auto d = fs::temp_directory_path() / ("iosbc_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

}  // namespace

TEST_CASE("shipped default configuration", "[config]") {
    const auto cfg = config::load_file(kConfigDir / "default.yaml");
    const Scenario& s = cfg.scenario;
    CHECK(s.nt == 8);
    CHECK(s.nr == 2);
    CHECK(s.n_ios() == 225);
    CHECK(s.power_budget == 1.0);
    CHECK_THAT(s.noise_power, WithinRel(1e-11, 1e-12));
    CHECK_THAT(s.wavelength, WithinRel(299792458.0 / 2.0e9, 1e-12));
    CHECK_THAT(s.spacing_tx, WithinRel(s.wavelength / 2.0, 1e-12));
    CHECK_THAT(s.spacing_ios, WithinRel(s.wavelength / 2.0, 1e-12));
    CHECK(s.solver.runs == 100);
    CHECK(s.pair_set.size() == 2);
    CHECK(s.solver.ao.mode == IosMode::continuous);
    CHECK(s.solver.ao.covariance.power_tol == 1e-10);
}

TEST_CASE("built-in defaults agree with the shipped file", "[config]") {
    const auto file = config::load_file(kConfigDir / "default.yaml");
    const auto def = config::defaults({"ios.psi_table=" + (kConfigDir / "psi_placeholder.txt").string()});
    CHECK(config::emit_resolved(file.scenario) == config::emit_resolved(def.scenario));
}

TEST_CASE("configuration errors", "[config]") {
    SECTION("unknown keys are reported with their line") {
        const auto msg = error_of([] { load("system:\n  nt: 4\n  antennas: 3\n"); });
        CHECK_THAT(msg, ContainsSubstring("test.yaml:3"));
        CHECK_THAT(msg, ContainsSubstring("system.antennas"));
    }
    SECTION("empty documents") {
        CHECK_THAT(error_of([] { load(""); }), ContainsSubstring("empty"));
        CHECK_THAT(error_of([] { load("# only a comment\n"); }), ContainsSubstring("empty"));
    }
    SECTION("malformed YAML") {
        CHECK_THAT(error_of([] { load("system: [1, 2\n"); }), ContainsSubstring("test.yaml:"));
    }
    SECTION("inverted rho interval names the constraint and its line") {
        const auto msg = error_of([] { load("solver:\n  rho:\n    min: 0.6\n    max: 0.4\n"); });
        CHECK_THAT(msg, ContainsSubstring("solver.rho.min"));
        CHECK_THAT(msg, ContainsSubstring("test.yaml:3"));
    }
    SECTION("discrete mode without a pair table names the missing key") {
        CHECK_THAT(error_of([] { load("solver:\n  mode: discrete\n"); }), ContainsSubstring("ios.psi_table"));
    }
    SECTION("bad values") {
        CHECK_THAT(error_of([] { load("system:\n  nt: many\n"); }), ContainsSubstring("system.nt"));
        CHECK_THAT(error_of([] { load("system:\n  nt: 0\n"); }), ContainsSubstring("system.nt"));
        CHECK_THAT(error_of([] { load("system:\n  power_w: -1\n"); }), ContainsSubstring("system.power_w"));
        CHECK_THAT(error_of([] { load("channel:\n  fading: nakagami\n"); }), ContainsSubstring("channel.fading"));
        CHECK_THAT(error_of([] { load("system:\n  carrier_hz: 1e9\n  wavelength_m: 0.3\n"); }),
                   ContainsSubstring("wavelength"));
    }
    SECTION("missing file") {
        CHECK_THROWS_AS(config::load_file(kConfigDir / "no_such_file.yaml"), ConfigError);
    }
}

TEST_CASE("command-line overrides", "[config]") {
    const auto cfg = config::load_file(kConfigDir / "default.yaml", {"system.nt=4", "solver.mode=discrete", "ios.rows=3"});
    CHECK(cfg.scenario.nt == 4);
    CHECK(cfg.scenario.n_ios() == 45);
    CHECK(cfg.scenario.solver.ao.mode == IosMode::discrete);
    CHECK_THAT(error_of([] { config::defaults({"system.nt"}); }), ContainsSubstring("--set"));
    CHECK_THAT(error_of([] { config::defaults({"system.bogus=1"}); }), ContainsSubstring("system.bogus"));
    CHECK_THAT(error_of([] { config::defaults({"solver.rho.min=0.9", "solver.rho.max=0.1"}); }),
               ContainsSubstring("--set"));
}

TEST_CASE("inline pair tables and carrier-derived spacing", "[config]") {
    const auto cfg = load("system:\n  carrier_hz: 1.0e9\nios:\n  psi:\n    - [1, 0, 0.5, 90]\n    - [0.5, 45, 1, -45]\n");
    const auto& s = cfg.scenario;
    CHECK_THAT(s.wavelength, WithinRel(0.299792458, 1e-12));
    CHECK_THAT(s.spacing_rx, WithinRel(0.149896229, 1e-12));
    REQUIRE(s.pair_set.size() == 2);
    CHECK(std::abs(s.pair_set[0].transmission - cd(0.0, 0.5)) < 1e-15);
    CHECK(std::abs(s.pair_set[1].reflection - std::polar(0.5, std::numbers::pi / 4)) < 1e-15);
}

TEST_CASE("resolved configuration round-trips", "[config][property]") {
    test::Rng rng(71);
    for (int t = 0; t < 20; ++t) {
        std::vector<std::string> ov{
            "system.nt=" + std::to_string(rng.integer(1, 8)),
            "system.power_w=" + io::format_double(rng.uniform(0.01, 10.0)),
            "system.noise_w=" + io::format_double(rng.uniform(1e-13, 1e-9)),
            "solver.rho.min=" + io::format_double(rng.uniform(1e-6, 0.1)),
            "solver.seed=" + std::to_string(rng.integer(0, 1 << 30)),
            "geometry.bs=[" + io::format_double(rng.uniform(-5, 5)) + ", 0.1]",
            "ios.psi=[[" + io::format_double(rng.uniform(0, 1)) + ", 10, 0.3, 20]]",
        };
        const auto a = config::defaults(ov);
        const std::string text = config::emit_resolved(a.scenario);
        const auto b = config::load_string(text, "resolved.yaml", kConfigDir);
        CHECK(config::emit_resolved(b.scenario) == text);
        CHECK(b.scenario.power_budget == a.scenario.power_budget);
        CHECK(b.scenario.noise_power == a.scenario.noise_power);
        CHECK(b.scenario.solver.ao.rho.rho_min == a.scenario.solver.ao.rho.rho_min);
        CHECK(b.scenario.solver.seed == a.scenario.solver.seed);
        CHECK(b.scenario.geometry.bs.x == a.scenario.geometry.bs.x);
        CHECK(b.scenario.pair_set == a.scenario.pair_set);
        CHECK(fingerprint(generate_channels(a.scenario, 3)) == fingerprint(generate_channels(b.scenario, 3)));
    }
}

TEST_CASE("pair table files", "[io]") {
    SECTION("comments, blank lines and commas") {
        std::istringstream in("# |r| deg |t| deg\n\n0.8, 0, 0.6, 90   # first\n0.8 180 0.6 -90\n");
        const auto rows = io::parse_psi_table(in, "t.txt");
        REQUIRE(rows.size() == 2);
        CHECK(rows[1].deg_r == 180.0);
        CHECK(rows[1].deg_t == -90.0);
    }
    SECTION("errors carry file and line") {
        std::istringstream short_row("0.8 0 0.6 90\n0.8 0 0.6\n");
        CHECK_THAT(error_of([&] { io::parse_psi_table(short_row, "t.txt"); }), ContainsSubstring("t.txt:2"));
        std::istringstream negative("-0.1 0 0.6 90\n");
        CHECK_THAT(error_of([&] { io::parse_psi_table(negative, "t.txt"); }), ContainsSubstring("t.txt:1"));
        std::istringstream junk("0.8 zero 0.6 90\n");
        CHECK_THAT(error_of([&] { io::parse_psi_table(junk, "t.txt"); }), ContainsSubstring("ios.psi_table"));
    }
    SECTION("missing file named in the config") {
        CHECK_THAT(error_of([] { load("ios:\n  psi_table: nowhere.txt\n"); }), ContainsSubstring("ios.psi_table"));
    }
    SECTION("shipped placeholder table") {
        const auto rows = io::load_psi_table(kConfigDir / "psi_placeholder.txt");
        CHECK(rows.size() == 2);
        CHECK(rows == test::placeholder_psi());
    }
}

TEST_CASE("number formatting round-trips exactly", "[io][property]") {
    test::Rng rng(72);
    for (int t = 0; t < 10000; ++t) {
        const double v = std::ldexp(rng.uniform(-1.0, 1.0), rng.integer(-60, 60));
        CHECK(io::parse_double(io::format_double(v)) == v);
    }
    CHECK(io::format_double(0.5) == "0.5");
    CHECK_THROWS_AS(io::parse_double("1.0x"), std::invalid_argument);
    CHECK_THROWS_AS(io::parse_double(""), std::invalid_argument);
}

TEST_CASE("trace CSV round-trips exactly", "[io][property]") {
    Scenario sc = test::small_scenario(4, 2, 1, 1, 3, 3);
    sc.solver.seed = 5;
    const auto mc = monte_carlo(sc, 3, {});
    for (const auto& r : mc.runs) {
        const auto rows = io::trace_rows(r);
        const std::string csv = io::write_trace_csv(rows);
        CHECK(csv.find('\r') == std::string::npos);
        CHECK(csv.rfind(std::string(io::kTraceHeader) + "\n", 0) == 0);
        CHECK(static_cast<int>(std::count(csv.begin(), csv.end(), '\n')) == r.iterations_used + 1);
        std::istringstream in(csv);
        CHECK(io::read_trace_csv(in) == rows);
    }
    const auto mean = io::trace_rows(mc);
    std::istringstream in(io::write_trace_csv(mean, true));
    CHECK(io::read_trace_csv(in) == mean);
    std::istringstream bad("iteration,foo\n1,2\n");
    CHECK_THROWS(io::read_trace_csv(bad));
}

TEST_CASE("atomic file writes", "[io]") {
    const auto dir = scratch_dir("atomic");
    const auto path = dir / "out.txt";
    io::write_file_atomic(path, "first\n");
    io::write_file_atomic(path, "second\n");
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == "second\n");
    CHECK_FALSE(fs::exists(dir / "out.txt.tmp"));
    CHECK_THROWS(io::write_file_atomic(dir / "missing" / "x.txt", "x"));
    fs::remove_all(dir);
}
