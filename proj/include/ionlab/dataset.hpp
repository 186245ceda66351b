#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ionlab/version.hpp"

namespace ionlab {

struct CsvError : std::runtime_error {
    int row;
    CsvError(int row_, const std::string& msg)
        : std::runtime_error("csv row " + std::to_string(row_) + ": " + msg), row(row_) {}
};

struct FringePoint {
    std::string role;  // "control" | "test"
    double scan_value = 0;
    long shots = 0;
    long ups = 0;
    double wall_clock_start = 0;
};

struct DatasetMeta {
    std::uint64_t seed = 0;
    std::string config_digest;
    std::string experiment;
    std::string scan_variable;
    double duration_s = 0;
    nlohmann::json extra;  // experiment-specific entries (tau_l, delta_m, ...)
};

struct FringeDataset {
    std::vector<FringePoint> points;
    DatasetMeta meta;
};

namespace detail {

// shortest round-trippable decimal
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    double back = std::strtod(buf, nullptr);
    if (back == v) {
        for (int prec = 1; prec < 17; ++prec) {
            char b2[40];
            std::snprintf(b2, sizeof b2, "%.*g", prec, v);
            if (std::strtod(b2, nullptr) == v) return b2;
        }
    }
    return buf;
}

inline void atomic_write(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for write: " + tmp);
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("rename failed: " + path);
}

}  // namespace detail

inline std::string to_csv(const FringeDataset& d) {
    std::ostringstream out;
    out << "# ionlab fringe dataset v" << kCsvSchemaVersion << "\n";
    out << "# config_digest=" << d.meta.config_digest << "\n";
    out << "role,scan_value,shots,ups,wall_clock_start\n";
    for (const auto& p : d.points)
        out << p.role << "," << detail::fmt_double(p.scan_value) << "," << p.shots << "," << p.ups
            << "," << detail::fmt_double(p.wall_clock_start) << "\n";
    return out.str();
}

inline void write_csv(const FringeDataset& d, const std::string& path) {
    detail::atomic_write(path, to_csv(d));
}

inline nlohmann::json sidecar_json(const FringeDataset& d) {
    nlohmann::json j;
    j["schema"] = kCsvSchemaVersion;
    j["version"] = kVersion;
    j["rng_algorithm"] = kRngAlgorithm;
    j["seed"] = d.meta.seed;
    j["config_digest"] = d.meta.config_digest;
    j["experiment"] = d.meta.experiment;
    j["scan_variable"] = d.meta.scan_variable;
    j["duration_s"] = d.meta.duration_s;
    if (!d.meta.extra.is_null()) j["extra"] = d.meta.extra;
    return j;
}

inline void write_sidecar(const FringeDataset& d, const std::string& csv_path) {
    detail::atomic_write(csv_path + ".meta.json", sidecar_json(d).dump(2) + "\n");
}

inline FringeDataset read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    FringeDataset d;
    std::string line;
    int row = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            const std::string key = "# config_digest=";
            if (line.rfind(key, 0) == 0) d.meta.config_digest = line.substr(key.size());
            continue;
        }
        if (!header_seen) {
            if (line != "role,scan_value,shots,ups,wall_clock_start")
                throw CsvError(row, "unexpected header '" + line + "'");
            header_seen = true;
            continue;
        }
        std::istringstream ls(line);
        std::string f[5];
        for (int i = 0; i < 5; ++i)
            if (!std::getline(ls, f[i], ',')) throw CsvError(row, "expected 5 fields");
        std::string tail;
        if (std::getline(ls, tail, ',')) throw CsvError(row, "more than 5 fields");
        FringePoint p;
        p.role = f[0];
        if (p.role != "control" && p.role != "test") throw CsvError(row, "bad role '" + p.role + "'");
        char* end = nullptr;
        p.scan_value = std::strtod(f[1].c_str(), &end);
        if (end == f[1].c_str() || *end) throw CsvError(row, "bad scan_value '" + f[1] + "'");
        p.shots = std::strtol(f[2].c_str(), &end, 10);
        if (end == f[2].c_str() || *end || p.shots < 0) throw CsvError(row, "bad shots '" + f[2] + "'");
        p.ups = std::strtol(f[3].c_str(), &end, 10);
        if (end == f[3].c_str() || *end || p.ups < 0 || p.ups > p.shots)
            throw CsvError(row, "bad ups '" + f[3] + "'");
        p.wall_clock_start = std::strtod(f[4].c_str(), &end);
        if (end == f[4].c_str() || *end) throw CsvError(row, "bad wall_clock_start '" + f[4] + "'");
        d.points.push_back(std::move(p));
    }
    if (!header_seen) throw CsvError(row, "missing header");
    return d;
}

}  // namespace ionlab
