#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "iosbc/driver.hpp"
#include "iosbc/errors.hpp"
#include "iosbc/scenario.hpp"

namespace iosbc::io {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

/// Shortest text that parses back to exactly `v`.
inline std::string format_double(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

inline double parse_double(std::string_view s) {
    const std::string t = trim(s);
    double v = 0.0;
    const auto r = std::from_chars(t.data(), t.data() + t.size(), v);
    if (r.ec != std::errc{} || r.ptr != t.data() + t.size())
        throw std::invalid_argument("not a number: '" + t + "'");
    return v;
}

/// Pair table: one state per line, four reals |beta_r| angle_r[deg] |beta_t| angle_t[deg].
/// Blank lines and '#' comments are ignored; commas count as whitespace.
inline std::vector<PsiRow> parse_psi_table(std::istream& in, const std::string& name = "<psi>") {
    std::vector<PsiRow> rows;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        for (auto& c : line)
            if (c == ',') c = ' ';
        std::istringstream ls(line);
        std::vector<double> vals;
        std::string tok;
        while (ls >> tok) {
            try {
                vals.push_back(parse_double(tok));
            } catch (const std::invalid_argument& e) {
                throw ConfigError("ios.psi_table", name + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        if (vals.empty()) continue;
        if (vals.size() != 4)
            throw ConfigError("ios.psi_table", name + ":" + std::to_string(lineno) +
                                                   ": expected 4 values (|r| deg |t| deg), got " +
                                                   std::to_string(vals.size()));
        if (vals[0] < 0.0 || vals[2] < 0.0)
            throw ConfigError("ios.psi_table", name + ":" + std::to_string(lineno) + ": magnitudes must be >= 0");
        rows.push_back({vals[0], vals[1], vals[2], vals[3]});
    }
    if (rows.empty()) throw ConfigError("ios.psi_table", name + ": table has no rows");
    return rows;
}

inline std::vector<PsiRow> load_psi_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("ios.psi_table", "cannot open pair table '" + path.string() + "'");
    return parse_psi_table(in, path.string());
}

inline constexpr std::string_view kTraceHeader =
    "iteration,mac_sum_rate_bits,rate_reflection_side,rate_transmission_side,rho";

struct TraceRow {
    int iteration = 0;
    double mac_sum_rate_bits = 0.0;
    double rate_reflection_side = 0.0;
    double rate_transmission_side = 0.0;
    double rho = 0.0;
    double stderr_bits = 0.0;   ///< averaged CSV only

    friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

inline std::vector<TraceRow> trace_rows(const AoReport& r) {
    std::vector<TraceRow> rows;
    for (std::size_t i = 0; i < r.objective_trace.size(); ++i) {
        TraceRow t;
        t.iteration = static_cast<int>(i) + 1;
        t.mac_sum_rate_bits = r.objective_trace[i];
        if (i < r.reflection_rate_trace.size()) {
            t.rate_reflection_side = r.reflection_rate_trace[i];
            t.rate_transmission_side = r.transmission_rate_trace[i];
            t.rho = r.rho_trace[i];
        }
        rows.push_back(t);
    }
    return rows;
}

inline std::vector<TraceRow> trace_rows(const MonteCarloResult& mc) {
    std::vector<TraceRow> rows;
    for (std::size_t i = 0; i < mc.mean_objective.size(); ++i)
        rows.push_back({static_cast<int>(i) + 1, mc.mean_objective[i], mc.mean_reflection_rate[i],
                        mc.mean_transmission_rate[i], mc.mean_rho[i], mc.stderr_objective[i]});
    return rows;
}

/// UTF-8, '.' decimal separator, header row, LF line endings.
inline std::string write_trace_csv(const std::vector<TraceRow>& rows, bool with_stderr = false) {
    std::string out(kTraceHeader);
    if (with_stderr) out += ",mac_sum_rate_stderr";
    out += '\n';
    for (const auto& r : rows) {
        out += std::to_string(r.iteration);
        for (double v : {r.mac_sum_rate_bits, r.rate_reflection_side, r.rate_transmission_side, r.rho}) {
            out += ',';
            out += format_double(v);
        }
        if (with_stderr) {
            out += ',';
            out += format_double(r.stderr_bits);
        }
        out += '\n';
    }
    return out;
}

inline std::vector<TraceRow> read_trace_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(kTraceHeader, 0) != 0)
        throw std::runtime_error("trace CSV: missing or unexpected header");
    const bool with_stderr = line.size() > kTraceHeader.size();
    std::vector<TraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        if (f.size() != (with_stderr ? 6u : 5u)) throw std::runtime_error("trace CSV: wrong column count");
        TraceRow r;
        r.iteration = std::stoi(f[0]);
        r.mac_sum_rate_bits = parse_double(f[1]);
        r.rate_reflection_side = parse_double(f[2]);
        r.rate_transmission_side = parse_double(f[3]);
        r.rho = parse_double(f[4]);
        if (with_stderr) r.stderr_bits = parse_double(f[5]);
        rows.push_back(r);
    }
    return rows;
}

/// Write through a temporary sibling and rename, so readers never see a partial file.
inline void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace iosbc::io
