#pragma once

// CSV ingestion. The header must name exactly the columns
//     id, z, x, s, y                 (binary outcome), or
//     id, z, x, s, time, event       (right-censored outcome),
// in any order. Covariate levels are 0..K with K the largest level seen.
// Missing values are rejected.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pstrat/core_types.hpp"
#include "pstrat/errors.hpp"

namespace pstrat {

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::vector<std::string_view> split_csv_line(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline int parse_int(std::string_view field, std::size_t line, const char* column) {
    int v = 0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        parse_fail(line, std::string("column '") + column + "': expected an integer, got '" + std::string(field) + "'");
    return v;
}

inline double parse_double(std::string_view field, std::size_t line, const char* column) {
    const std::string buf(field);
    char* end = nullptr;
    const double v = std::strtod(buf.c_str(), &end);
    if (buf.empty() || end != buf.c_str() + buf.size())
        parse_fail(line, std::string("column '") + column + "': expected a number, got '" + buf + "'");
    return v;
}

inline int parse_flag(std::string_view field, std::size_t line, const char* column) {
    const int v = parse_int(field, line, column);
    if (v != 0 && v != 1) parse_fail(line, std::string("column '") + column + "' must be 0 or 1");
    return v;
}

} // namespace detail

inline Dataset parse_csv(std::istream& in, std::optional<double> t0 = std::nullopt) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!detail::trim(line).empty()) break;
    }
    if (detail::trim(line).empty()) throw Error(ErrorKind::SchemaError, "empty file: no header row");

    const auto header = detail::split_csv_line(line);
    std::map<std::string, std::size_t, std::less<>> col;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (!col.emplace(std::string(header[i]), i).second)
            throw Error(ErrorKind::SchemaError, "duplicate column '" + std::string(header[i]) + "'");
    }
    const bool has_y = col.count("y") > 0;
    const bool has_surv = col.count("time") > 0 || col.count("event") > 0;
    if (has_y && has_surv)
        throw Error(ErrorKind::SchemaError, "both 'y' and survival columns ('time'/'event') present; use one outcome form");

    std::vector<std::string> expected{"id", "z", "x", "s"};
    if (has_surv) {
        expected.push_back("time");
        expected.push_back("event");
    } else {
        expected.push_back("y");
    }
    std::string missing, extra;
    for (const auto& e : expected)
        if (!col.count(e)) missing += (missing.empty() ? "" : ", ") + e;
    for (const auto& [name, idx] : col)
        if (std::find(expected.begin(), expected.end(), name) == expected.end())
            extra += (extra.empty() ? "" : ", ") + name;
    if (!missing.empty() || !extra.empty()) {
        std::string msg;
        if (!missing.empty()) msg += "missing columns: " + missing;
        if (!extra.empty()) msg += (msg.empty() ? "" : "; ") + std::string("unexpected columns: ") + extra;
        throw Error(ErrorKind::SchemaError, msg);
    }
    if (has_surv && !t0)
        throw Error(ErrorKind::ConfigError, "survival columns present: the --t0 horizon flag is required");
    if (!has_surv && t0)
        throw Error(ErrorKind::ConfigError, "--t0 given but the file has a binary 'y' column");

    std::vector<SubjectRecord> records;
    int max_x = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (detail::trim(line).empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            detail::parse_fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                            std::to_string(f.size()));
        for (std::size_t i = 0; i < f.size(); ++i)
            if (f[i].empty()) detail::parse_fail(line_no, "missing value in column '" + std::string(header[i]) + "'");

        SubjectRecord r;
        r.id = std::string(f[col.at("id")]);
        r.z = detail::parse_flag(f[col.at("z")], line_no, "z");
        r.s = detail::parse_flag(f[col.at("s")], line_no, "s");
        r.x = detail::parse_int(f[col.at("x")], line_no, "x");
        if (r.x < 0) detail::parse_fail(line_no, "column 'x' must be a nonnegative level");
        if (has_surv) {
            SurvivalOutcome sv;
            sv.time = detail::parse_double(f[col.at("time")], line_no, "time");
            if (!(sv.time >= 0.0) || !std::isfinite(sv.time))
                detail::parse_fail(line_no, "column 'time' must be finite and nonnegative");
            sv.event = detail::parse_flag(f[col.at("event")], line_no, "event");
            r.outcome = sv;
        } else {
            r.outcome = BinaryOutcome{detail::parse_flag(f[col.at("y")], line_no, "y")};
        }
        max_x = std::max(max_x, r.x);
        records.push_back(std::move(r));
    }
    if (records.empty()) throw Error(ErrorKind::SchemaError, "no data rows");
    return Dataset(std::move(records), max_x + 1, t0);
}

inline Dataset load_csv(const std::string& path, std::optional<double> t0 = std::nullopt) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open '" + path + "'");
    return parse_csv(in, t0);
}

inline void write_csv(std::ostream& os, const Dataset& data) {
    const bool binary = data.outcome_kind() == OutcomeKind::Binary;
    os << (binary ? "id,z,x,s,y\n" : "id,z,x,s,time,event\n");
    for (const auto& r : data.records()) {
        os << r.id << ',' << r.z << ',' << r.x << ',' << r.s << ',';
        if (binary) {
            os << std::get<BinaryOutcome>(r.outcome).y << '\n';
        } else {
            const auto& sv = std::get<SurvivalOutcome>(r.outcome);
            std::ostringstream t;
            t.precision(17);
            t << sv.time;
            os << t.str() << ',' << sv.event << '\n';
        }
    }
}

} // namespace pstrat
