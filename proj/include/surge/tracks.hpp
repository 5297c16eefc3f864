#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "surge/errors.hpp"

namespace surge {

enum class Basin { NA, EP, NI, SI, WP, SP };

inline const char* basin_name(Basin b) {
    switch (b) {
        case Basin::NA: return "NA";
        case Basin::EP: return "EP";
        case Basin::NI: return "NI";
        case Basin::SI: return "SI";
        case Basin::WP: return "WP";
        case Basin::SP: return "SP";
    }
    return "??";
}

inline std::optional<Basin> basin_from_string(const std::string& s) {
    if (s == "NA") return Basin::NA;
    if (s == "EP") return Basin::EP;
    if (s == "NI") return Basin::NI;
    if (s == "SI") return Basin::SI;
    if (s == "WP") return Basin::WP;
    if (s == "SP") return Basin::SP;
    return std::nullopt;
}

constexpr int kNumBasins = 6;

struct TrackPoint {
    double t = 0;       // hours since storm start
    double lat = 0;     // degrees [-90, 90]
    double lon = 0;     // degrees [-180, 180)
    double r_max = 0;   // km, > 0
    double p_min = 0;   // hPa
    double v_max = 0;   // m/s
};

struct Storm {
    std::string id;
    Basin basin = Basin::NA;
    std::vector<TrackPoint> points;

    double t_first() const { return points.front().t; }
    double t_last() const { return points.back().t; }

    double peak_vmax() const {
        double m = 0;
        for (const auto& p : points) m = std::max(m, p.v_max);
        return m;
    }
};

struct LandfallEvent {
    double t = 0;  // hours
    double lat = 0;
    double lon = 0;
};

struct RunAssignment {
    int run_id = 0;
    std::map<Basin, std::string> storms;  // at most one per basin
};

// Regular lat-lon boolean raster; cells outside the raster count as ocean.
struct LandRaster {
    double lat0 = 0, lon0 = 0;  // lower-left corner
    double dlat = 0, dlon = 0;
    int rows = 0, cols = 0;
    std::vector<uint8_t> land;  // row-major, row 0 at lat0

    bool is_land(double lat, double lon) const {
        int i = static_cast<int>(std::floor((lat - lat0) / dlat));
        int j = static_cast<int>(std::floor((lon - lon0) / dlon));
        if (i < 0 || j < 0 || i >= rows || j >= cols) return false;
        return land[static_cast<size_t>(i) * cols + j] != 0;
    }
};

inline double normalize_lon(double lon) {
    double x = std::fmod(lon + 180.0, 360.0);
    if (x < 0) x += 360.0;
    return x - 180.0;
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_num(const std::string& s, int line_no, const char* what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos != s.size()) throw std::invalid_argument(s);
        if (!std::isfinite(v)) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

}  // namespace detail

// Track CSV: header `storm_id,basin,t_hours,lat,lon,rmax_km,pmin_hpa,vmax_ms`.
// Storms come back in first-appearance order with points sorted by time.
inline std::vector<Storm> parse_track_file(std::istream& in) {
    std::vector<Storm> storms;
    std::map<std::string, size_t> index;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("storm_id,", 0) == 0) continue;  // tolerate missing header
        }
        auto f = detail::split_csv_line(line);
        if (f.size() != 8)
            throw ParseError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                             std::to_string(f.size()));
        auto basin = basin_from_string(f[1]);
        if (!basin)
            throw ParseError("line " + std::to_string(line_no) + ": unknown basin code '" + f[1] + "'");
        TrackPoint p;
        p.t = detail::parse_num(f[2], line_no, "t_hours");
        p.lat = detail::parse_num(f[3], line_no, "lat");
        p.lon = normalize_lon(detail::parse_num(f[4], line_no, "lon"));
        p.r_max = detail::parse_num(f[5], line_no, "rmax_km");
        p.p_min = detail::parse_num(f[6], line_no, "pmin_hpa");
        p.v_max = detail::parse_num(f[7], line_no, "vmax_ms");
        if (p.lat < -90 || p.lat > 90)
            throw ValidationError("line " + std::to_string(line_no) + ": latitude out of range");
        if (p.r_max <= 0)
            throw ValidationError("line " + std::to_string(line_no) + ": rmax_km must be > 0");
        if (p.p_min < 850 || p.p_min > 1020)
            throw ValidationError("line " + std::to_string(line_no) + ": pmin_hpa out of [850,1020]");
        if (p.v_max < 0)
            throw ValidationError("line " + std::to_string(line_no) + ": vmax_ms must be >= 0");

        auto it = index.find(f[0]);
        if (it == index.end()) {
            index.emplace(f[0], storms.size());
            storms.push_back(Storm{f[0], *basin, {p}});
        } else {
            Storm& s = storms[it->second];
            if (s.basin != *basin)
                throw ValidationError("storm '" + f[0] + "': inconsistent basin codes");
            s.points.push_back(p);
        }
    }
    for (auto& s : storms) {
        std::stable_sort(s.points.begin(), s.points.end(),
                         [](const TrackPoint& a, const TrackPoint& b) { return a.t < b.t; });
        for (size_t i = 1; i < s.points.size(); ++i)
            if (s.points[i].t <= s.points[i - 1].t)
                throw ValidationError("storm '" + s.id + "': track times not strictly increasing");
        if (s.points.size() < 2)
            throw ValidationError("storm '" + s.id + "': a track needs at least 2 points");
    }
    return storms;
}

inline std::vector<Storm> parse_track_file(const std::string& text) {
    std::istringstream in(text);
    return parse_track_file(in);
}

// Piecewise-linear interpolation of all track parameters. Longitudes are
// unwrapped across the antimeridian before blending, then renormalized.
inline TrackPoint interpolate_track(const Storm& storm, double t) {
    const auto& pts = storm.points;
    if (t < pts.front().t || t > pts.back().t)
        throw ValidationError("interpolate_track: t=" + std::to_string(t) + " outside [" +
                              std::to_string(pts.front().t) + ", " + std::to_string(pts.back().t) + "]");
    size_t hi = 1;
    while (hi < pts.size() - 1 && pts[hi].t < t) ++hi;
    const TrackPoint& a = pts[hi - 1];
    const TrackPoint& b = pts[hi];
    double lam = (t - a.t) / (b.t - a.t);

    double lon_b = b.lon;
    if (lon_b - a.lon > 180.0) lon_b -= 360.0;
    if (lon_b - a.lon < -180.0) lon_b += 360.0;

    TrackPoint out;
    out.t = t;
    out.lat = a.lat + lam * (b.lat - a.lat);
    out.lon = normalize_lon(a.lon + lam * (lon_b - a.lon));
    out.r_max = a.r_max + lam * (b.r_max - a.r_max);
    out.p_min = a.p_min + lam * (b.p_min - a.p_min);
    out.v_max = a.v_max + lam * (b.v_max - a.v_max);
    return out;
}

// Earliest sample (fixed sub-step) whose raster cell is land.
inline std::optional<LandfallEvent> detect_landfall(const Storm& storm, const LandRaster& land,
                                                    double substep_hours = 0.25) {
    const double t0 = storm.t_first(), t1 = storm.t_last();
    for (double t = t0; t <= t1 + 1e-9; t += substep_hours) {
        double tc = std::min(t, t1);
        TrackPoint p = interpolate_track(storm, tc);
        if (land.is_land(p.lat, p.lon)) return LandfallEvent{tc, p.lat, p.lon};
    }
    return std::nullopt;
}

inline std::vector<Storm> filter_storms(const std::vector<Storm>& storms, double min_vmax,
                                        bool require_landfall, const LandRaster& land) {
    std::vector<Storm> out;
    for (const auto& s : storms) {
        if (s.peak_vmax() < min_vmax) continue;
        if (require_landfall && !detect_landfall(s, land)) continue;
        out.push_back(s);
    }
    return out;
}

// Greedy round-robin fill: per basin, the i-th storm goes into run i.
// Run count therefore equals the max per-basin count, which is optimal.
inline std::vector<RunAssignment> pack_runs(const std::vector<Storm>& storms) {
    std::map<Basin, int> next;
    int n_runs = 0;
    for (const auto& s : storms) n_runs = std::max(n_runs, ++next[s.basin]);
    std::vector<RunAssignment> runs(n_runs);
    for (int i = 0; i < n_runs; ++i) runs[i].run_id = i;
    next.clear();
    for (const auto& s : storms) runs[next[s.basin]++].storms.emplace(s.basin, s.id);
    return runs;
}

}  // namespace surge
