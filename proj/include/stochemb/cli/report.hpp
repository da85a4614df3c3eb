#pragma once

// Run reports: metrics, verdicts and tables, rendered as JSON, CBOR (binary),
// CSV plot files and plain text.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "stochemb/core/error.hpp"

namespace stochemb::cli {

using Json = nlohmann::ordered_json;

inline std::string fnv1a64(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct Verdict {
    std::string name;
    double value = 0.0;
    std::string op;  // "<=", ">=", "==", "in"
    double threshold = 0.0;
    double threshold_hi = 0.0;  // upper end for "in"
    bool pass = false;
};

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;
};

struct RunReport {
    std::string task = "none";
    std::string config_text;
    std::string config_hash;
    std::uint64_t seed = 0;
    Json metrics = Json::object();
    std::vector<Verdict> verdicts;
    std::vector<Table> tables;
    std::vector<std::string> warnings;
    std::vector<std::string> artifacts;
    std::string error;  // set when the run aborted
    double seconds = 0.0;

    bool passed() const {
        for (const auto& v : verdicts)
            if (!v.pass) return false;
        return error.empty();
    }

    // value <= threshold etc; NaN never passes.
    void check_le(const std::string& name, double value, double threshold) { verdicts.push_back({name, value, "<=", threshold, 0.0, value <= threshold}); }
    void check_ge(const std::string& name, double value, double threshold) { verdicts.push_back({name, value, ">=", threshold, 0.0, value >= threshold}); }
    void check_in(const std::string& name, double value, double lo, double hi) {
        verdicts.push_back({name, value, "in", lo, hi, value >= lo && value <= hi});
    }
    void check_bool(const std::string& name, bool value, bool expected) {
        verdicts.push_back({name, value ? 1.0 : 0.0, "==", expected ? 1.0 : 0.0, 0.0, value == expected});
    }
    Table& table(const std::string& name, std::vector<std::string> columns) {
        tables.push_back({name, std::move(columns), {}});
        return tables.back();
    }
};

inline Json verdict_json(const Verdict& v) {
    Json j;
    j["name"] = v.name;
    j["value"] = v.value;
    j["op"] = v.op;
    if (v.op == "in")
        j["threshold"] = Json::array({v.threshold, v.threshold_hi});
    else
        j["threshold"] = v.threshold;
    j["pass"] = v.pass;
    return j;
}

/// Report as JSON. Timing is included only when requested; everything else is a
/// function of the config and seed.
inline Json to_json(const RunReport& r, bool with_timing = true) {
    Json j;
    j["task"] = r.task;
    j["config"] = {{"hash", "fnv1a64:" + r.config_hash}, {"seed", r.seed}, {"text", r.config_text}};
    j["passed"] = r.passed();
    j["metrics"] = r.metrics;
    Json vs = Json::array();
    for (const auto& v : r.verdicts) vs.push_back(verdict_json(v));
    j["verdicts"] = vs;
    Json ts = Json::object();
    for (const auto& t : r.tables) ts[t.name] = {{"columns", t.columns}, {"rows", t.rows}};
    j["tables"] = ts;
    j["warnings"] = r.warnings;
    j["artifacts"] = r.artifacts;
    if (!r.error.empty()) j["error"] = r.error;
    if (with_timing) j["timing"] = {{"seconds", r.seconds}};
    return j;
}

inline std::vector<std::uint8_t> to_cbor(const RunReport& r) { return Json::to_cbor(to_json(r, false)); }

inline std::string format_number(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string table_csv(const Table& t) {
    std::string s;
    for (std::size_t c = 0; c < t.columns.size(); ++c) s += (c ? "," : "") + t.columns[c];
    s += "\n";
    for (const auto& row : t.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) s += (c ? "," : "") + format_number(row[c]);
        s += "\n";
    }
    return s;
}

inline std::string render_text(const RunReport& r) {
    std::ostringstream os;
    os << "task: " << r.task << "\n";
    os << "config: fnv1a64:" << r.config_hash << "  seed " << r.seed << "\n";
    if (!r.metrics.empty()) {
        os << "metrics:\n";
        for (const auto& [k, v] : r.metrics.items()) {
            std::string s = v.dump();
            if (s.size() > 100) s = s.substr(0, 97) + "...";
            os << "  " << k << " = " << s << "\n";
        }
    }
    for (const auto& v : r.verdicts) {
        os << (v.pass ? "PASS " : "FAIL ") << v.name << ": " << format_number(v.value) << " " << v.op << " ";
        if (v.op == "in")
            os << "[" << format_number(v.threshold) << ", " << format_number(v.threshold_hi) << "]";
        else
            os << format_number(v.threshold);
        os << "\n";
    }
    for (const auto& w : r.warnings) os << "warning: " << w << "\n";
    if (!r.error.empty()) os << "error: " << r.error << "\n";
    os << (r.passed() ? "all verdicts passed" : "verdict failure") << "\n";
    return os.str();
}

namespace detail {
inline void write_file(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("write failed: " + p.string());
}
}  // namespace detail

/// Writes report.json / report.cbor / <table>.csv into dir for the chosen formats
/// and records them as artifacts (sorted by name, so the list is stable).
inline void write_report(RunReport& r, const std::filesystem::path& dir, const std::vector<std::string>& formats) {
    std::filesystem::create_directories(dir);
    auto has = [&](const char* f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
    if (has("csv"))
        for (const auto& t : r.tables) r.artifacts.push_back(t.name + ".csv");
    if (has("binary")) r.artifacts.push_back("report.cbor");
    if (has("json")) r.artifacts.push_back("report.json");
    std::sort(r.artifacts.begin(), r.artifacts.end());
    r.artifacts.erase(std::unique(r.artifacts.begin(), r.artifacts.end()), r.artifacts.end());
    if (has("csv"))
        for (const auto& t : r.tables) detail::write_file(dir / (t.name + ".csv"), table_csv(t));
    if (has("binary")) {
        const auto c = to_cbor(r);
        detail::write_file(dir / "report.cbor", std::string(c.begin(), c.end()));
    }
    if (has("json")) detail::write_file(dir / "report.json", to_json(r).dump(2) + "\n");
}

}  // namespace stochemb::cli
