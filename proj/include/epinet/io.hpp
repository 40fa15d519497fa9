#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "epinet/core.hpp"

namespace epinet {

namespace io_detail {

inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open '" + path + "' for reading");
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

inline double parse_double(const std::string& s, const std::string& path) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(end != s.c_str() && *end == '\0', errc::parse_error,
            "'" + s + "' is not a number in " + path);
    return v;
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    require(out.good(), errc::io_error, "cannot open '" + path + "' for writing");
    return out;
}

/// ISO calendar date helper for the deltas.csv date column.
struct Date {
    int y = 0, m = 0, d = 0;
    bool valid = false;
};

inline Date parse_iso_date(const std::string& s) {
    Date out;
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return out;
    int y = 0, m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%4d-%2d-%2d", &y, &m, &d) != 3) return out;
    if (m < 1 || m > 12 || d < 1 || d > 31) return out;
    out = Date{y, m, d, true};
    return out;
}

inline std::string date_plus_days(const Date& d0, long offset) {
    using namespace std::chrono;
    const year_month_day ymd{year{d0.y}, month{static_cast<unsigned>(d0.m)},
                             day{static_cast<unsigned>(d0.d)}};
    const year_month_day shifted{sys_days{ymd} + days{offset}};
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", static_cast<int>(shifted.year()),
                  static_cast<unsigned>(shifted.month()), static_cast<unsigned>(shifted.day()));
    return buf;
}

} // namespace io_detail

// ---------------------------------------------------------------------------
// zones.csv: zone_id,population[,x_km,y_km]

inline std::vector<Zone> load_zones_csv(const std::string& path) {
    const auto lines = io_detail::read_lines(path);
    require(!lines.empty(), errc::parse_error, path + " is empty");
    const auto header = io_detail::split_csv_line(lines[0]);
    const bool with_centroid =
        header.size() == 4 && header[2] == "x_km" && header[3] == "y_km";
    require(header.size() >= 2 && header[0] == "zone_id" && header[1] == "population" &&
                (header.size() == 2 || with_centroid),
            errc::parse_error, path + ": header must be zone_id,population[,x_km,y_km]");
    std::vector<Zone> zones;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        const auto fields = io_detail::split_csv_line(lines[i]);
        require(fields.size() == header.size(), errc::parse_error,
                path + ": row " + std::to_string(i) + " has wrong field count");
        Zone z;
        z.id = fields[0];
        z.population = io_detail::parse_double(fields[1], path);
        if (with_centroid)
            z.centroid = std::array<double, 2>{io_detail::parse_double(fields[2], path),
                                               io_detail::parse_double(fields[3], path)};
        zones.push_back(std::move(z));
    }
    return zones;
}

inline void save_zones_csv(const std::string& path, const Metapopulation& pop) {
    auto out = io_detail::open_out(path);
    const bool with_centroid = pop.has_centroids();
    out << (with_centroid ? "zone_id,population,x_km,y_km\n" : "zone_id,population\n");
    for (const Zone& z : pop.zones()) {
        require(z.id.find(',') == std::string::npos && z.id.find('\n') == std::string::npos,
                errc::io_error, "zone id '" + z.id + "' cannot be written to csv");
        out << z.id << ',' << io_detail::fmt_double(z.population);
        if (with_centroid)
            out << ',' << io_detail::fmt_double((*z.centroid)[0]) << ','
                << io_detail::fmt_double((*z.centroid)[1]);
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// Plain N x N matrices (network.csv, mobility.csv, features.csv): no header,
// rows in canonical zone order.

inline Matrix load_matrix_csv(const std::string& path) {
    const auto lines = io_detail::read_lines(path);
    require(!lines.empty(), errc::parse_error, path + " is empty");
    const Eigen::Index cols = static_cast<Eigen::Index>(io_detail::split_csv_line(lines[0]).size());
    Matrix m(static_cast<Eigen::Index>(lines.size()), cols);
    for (std::size_t r = 0; r < lines.size(); ++r) {
        const auto fields = io_detail::split_csv_line(lines[r]);
        require(static_cast<Eigen::Index>(fields.size()) == cols, errc::parse_error,
                path + ": row " + std::to_string(r) + " has wrong field count");
        for (Eigen::Index c = 0; c < cols; ++c)
            m(static_cast<Eigen::Index>(r), c) = io_detail::parse_double(fields[c], path);
    }
    return m;
}

inline void save_matrix_csv(const std::string& path, const Matrix& m) {
    auto out = io_detail::open_out(path);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            if (c) out << ',';
            out << io_detail::fmt_double(m(r, c));
        }
        out << '\n';
    }
}

inline InfectionNetwork load_network_csv(const std::string& path) {
    return InfectionNetwork(load_matrix_csv(path));
}

inline MobilityVolumes load_mobility_csv(const std::string& path, const Metapopulation& pop) {
    return MobilityVolumes(load_matrix_csv(path), pop);
}

// ---------------------------------------------------------------------------
// deltas.csv: date,<zone_id_1>,...,<zone_id_N>; one row per day. Columns may
// appear in any order; they are mapped onto the canonical zone order. The
// first row's date becomes day0.

inline OutbreakSeries load_deltas_csv(const std::string& path, const Metapopulation& pop,
                                      double beta) {
    const auto lines = io_detail::read_lines(path);
    require(lines.size() >= 2, errc::parse_error, path + " needs a header and at least one day");
    const auto header = io_detail::split_csv_line(lines[0]);
    require(header.size() == static_cast<std::size_t>(pop.size()) + 1 && header[0] == "date",
            errc::parse_error, path + ": header must be date,<zone ids> covering every zone");
    std::vector<Eigen::Index> col_to_zone(header.size() - 1);
    std::vector<bool> seen(static_cast<std::size_t>(pop.size()), false);
    for (std::size_t c = 1; c < header.size(); ++c) {
        const Eigen::Index idx = pop.index_of(header[c]);
        require(idx >= 0, errc::parse_error, path + ": unknown zone id '" + header[c] + "'");
        require(!seen[static_cast<std::size_t>(idx)], errc::parse_error,
                path + ": zone id '" + header[c] + "' repeated");
        seen[static_cast<std::size_t>(idx)] = true;
        col_to_zone[c - 1] = idx;
    }
    Matrix deltas(static_cast<Eigen::Index>(lines.size() - 1), pop.size());
    std::string day0;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto fields = io_detail::split_csv_line(lines[r]);
        require(fields.size() == header.size(), errc::parse_error,
                path + ": row " + std::to_string(r) + " has wrong field count");
        if (r == 1) day0 = fields[0];
        for (std::size_t c = 1; c < fields.size(); ++c)
            deltas(static_cast<Eigen::Index>(r - 1), col_to_zone[c - 1]) =
                io_detail::parse_double(fields[c], path);
    }
    OutbreakSeries series(std::move(deltas), std::move(day0), beta);
    series.check_against(pop);
    return series;
}

inline void save_deltas_csv(const std::string& path, const OutbreakSeries& series,
                            const Metapopulation& pop) {
    require(series.zones() == pop.size(), errc::dimension_mismatch,
            "series and metapopulation disagree");
    auto out = io_detail::open_out(path);
    out << "date";
    for (const Zone& z : pop.zones()) out << ',' << z.id;
    out << '\n';
    const io_detail::Date d0 = io_detail::parse_iso_date(series.day0());
    for (Eigen::Index t = 0; t < series.days(); ++t) {
        if (t == 0)
            out << series.day0();
        else if (d0.valid)
            out << io_detail::date_plus_days(d0, t);
        else
            out << (t + 1);
        for (Eigen::Index n = 0; n < series.zones(); ++n)
            out << ',' << io_detail::fmt_double(series.deltas()(t, n));
        out << '\n';
    }
}

// ---------------------------------------------------------------------------
// config.json

inline nlohmann::json config_to_json(const InferenceConfig& cfg) {
    nlohmann::json j{{"lambda", cfg.lambda}, {"eta", cfg.eta},322
                     {"mu", cfg.mu},         {"l1", cfg.l1},
                     {"l2", cfg.l2},         {"max_iters", cfg.max_iters},
                     {"tol", cfg.tol},       {"epsilon_deg", cfg.epsilon_deg},
                     {"seed", cfg.seed}};
    if (const auto* f = std::get_if<FixedStep>(&cfg.step_policy))
        j["step_policy"] = {{"type", "fixed"}, {"step", f->step}};
    else if (const auto* b = std::get_if<BacktrackingStep>(&cfg.step_policy))
        j["step_policy"] = {{"type", "backtracking"},
                            {"init", b->init},
                            {"shrink", b->shrink},
                            {"c", b->armijo_c}};
    return j;
}

inline InferenceConfig config_from_json(const nlohmann::json& j) {
    InferenceConfig cfg;
    static const std::vector<std::string> known{"lambda", "eta",         "mu",   "l1",
                                                "l2",     "max_iters",   "tol",  "epsilon_deg",
                                                "seed",   "step_policy"};
    for (auto it = j.begin(); it != j.end(); ++it)
        require(std::find(known.begin(), known.end(), it.key()) != known.end(), errc::parse_error,
                "unknown config key '" + it.key() + "'");
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.eta = j.value("eta", cfg.eta);
    cfg.mu = j.value("mu", cfg.mu);
    cfg.l1 = j.value("l1", cfg.l1);
    cfg.l2 = j.value("l2", cfg.l2);
    cfg.max_iters = j.value("max_iters", cfg.max_iters);
    cfg.tol = j.value("tol", cfg.tol);
    cfg.epsilon_deg = j.value("epsilon_deg", cfg.epsilon_deg);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("step_policy")) {
        const auto& sp = j.at("step_policy");
        const std::string type = sp.value("type", "backtracking");
        if (type == "fixed") {
            FixedStep f;
            f.step = sp.value("step", f.step);
            cfg.step_policy = f;
        } else if (type == "backtracking") {
            BacktrackingStep b;
            b.init = sp.value("init", b.init);
            b.shrink = sp.value("shrink", b.shrink);
            b.armijo_c = sp.value("c", b.armijo_c);
            cfg.step_policy = b;
        } else {
            fail(errc::parse_error, "unknown step_policy type '" + type + "'");
        }
    }
    cfg.validate();
    return cfg;
}

inline InferenceConfig load_config_json(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), errc::io_error, "cannot open '" + path + "' for reading");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        fail(errc::parse_error, path + ": " + e.what());
    }
    return config_from_json(j);
}

inline void save_config_json(const std::string& path, const InferenceConfig& cfg) {
    auto out = io_detail::open_out(path);
    out << config_to_json(cfg).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Small report writers

inline void save_trace_csv(const std::string& path, const std::vector<double>& trace) {
    auto out = io_detail::open_out(path);
    out << "iter,objective\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        out << i << ',' << io_detail::fmt_double(trace[i]) << '\n';
}

inline void save_weights_csv(const std::string& path, const std::vector<std::string>& names,
                             const Vector& w) {
    require(static_cast<Eigen::Index>(names.size()) == w.size(), errc::dimension_mismatch,
            "one name per weight required");
    auto out = io_detail::open_out(path);
    out << "feature,weight\n";
    for (Eigen::Index k = 0; k < w.size(); ++k)
        out << names[static_cast<std::size_t>(k)] << ',' << io_detail::fmt_double(w(k)) << '\n';
}

// ---------------------------------------------------------------------------
// Run manifest: enough provenance to re-run a command and check its outputs.

inline std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < size; ++i) {
        h ^= p[i];
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string file_digest_hex(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), errc::io_error, "cannot open '" + path + "' for digest");
    std::uint64_t h = 14695981039346656037ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a64(buf, static_cast<std::size_t>(in.gcount()), h);
    char hex[17];
    std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(h));
    return hex;
}

struct RunManifest {
    std::string command;
    nlohmann::json config;
    std::map<std::string, std::string> inputs;  // file -> digest
    std::map<std::string, std::string> outputs; // file -> digest
    std::uint64_t seed = 0;
    std::string version;
    double duration_seconds = 0.0;
};

inline void save_manifest(const std::string& path, const RunManifest& m) {
    nlohmann::json j{{"command", m.command},   {"config", m.config},
                     {"inputs", m.inputs},     {"outputs", m.outputs},
                     {"seed", m.seed},         {"version", m.version},
                     {"duration_seconds", m.duration_seconds}};
    auto out = io_detail::open_out(path);
    out << j.dump(2) << '\n';
}

} // namespace epinet
