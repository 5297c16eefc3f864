#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "surge/grid.hpp"
#include "surge/gridding.hpp"
#include "surge/rng.hpp"
#include "surge/tracks.hpp"

namespace surge {

struct DomainBounds {
    double lon_min = -10, lon_max = 0;
    double lat_min = 10, lat_max = 20;
};

// Piecewise description of the synthetic shoreline: lon = shoreline(lat),
// land to the east, ocean to the west.
struct Shoreline {
    double base = -4;
    std::array<double, 3> amp{};
    std::array<double, 3> phase{};
    double lat_min = 10, lat_span = 10;

    double lon_at(double lat) const {
        double u = (lat - lat_min) / lat_span;
        double x = base;
        for (int k = 0; k < 3; ++k) x += amp[k] * std::sin(2.0 * M_PI * (k + 1) * u + phase[k]);
        return x;
    }
};

struct ToyWorld {
    Mesh mesh;
    uint64_t seed = 0;
    DomainBounds bounds;
    Shoreline shoreline;
    double shelf_slope = 50;  // meters of depth per degree offshore
};

// Procedural coastal shelf: a structured triangulation of the ocean side of
// a wavy north-south shoreline plus a coastal land strip. Depth grows
// linearly with distance offshore; the interior landmass is left uncovered,
// like the operational mesh this stands in for.
inline ToyWorld synth_world(uint64_t seed, const DomainBounds& bounds = {},
                            int grid_nodes = 48, double land_strip_deg = 0.8) {
    Rng rng(seed ^ 0x746f79776f726c64ULL);
    ToyWorld w;
    w.seed = seed;
    w.bounds = bounds;
    const double lon_span = bounds.lon_max - bounds.lon_min;
    const double lat_span = bounds.lat_max - bounds.lat_min;

    w.shoreline.base = bounds.lon_min + lon_span * rng.uniform(0.55, 0.70);
    w.shoreline.lat_min = bounds.lat_min;
    w.shoreline.lat_span = lat_span;
    for (int k = 0; k < 3; ++k) {
        w.shoreline.amp[k] = rng.uniform(0.05, 0.35) / (k + 1);
        w.shoreline.phase[k] = rng.uniform(0, 2.0 * M_PI);
    }
    w.shelf_slope = rng.uniform(30, 80);
    const double land_elev_slope = rng.uniform(20, 60);

    const int n = grid_nodes;
    std::vector<int> node_id(static_cast<size_t>(n) * n, -1);
    for (int i = 0; i < n; ++i) {
        double lat = bounds.lat_min + lat_span * i / (n - 1);
        double coast = w.shoreline.lon_at(lat);
        for (int j = 0; j < n; ++j) {
            double lon = bounds.lon_min + lon_span * j / (n - 1);
            if (lon > coast + land_strip_deg) continue;  // interior landmass: not meshed
            MeshNode nd;
            nd.lon = lon;
            nd.lat = lat;
            double offshore = coast - lon;  // degrees, positive over water
            nd.depth = offshore >= 0 ? w.shelf_slope * offshore : land_elev_slope * offshore;
            node_id[static_cast<size_t>(i) * n + j] = static_cast<int>(w.mesh.nodes.size());
            w.mesh.nodes.push_back(nd);
        }
    }
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j + 1 < n; ++j) {
            int a = node_id[static_cast<size_t>(i) * n + j];
            int b = node_id[static_cast<size_t>(i) * n + j + 1];
            int c = node_id[static_cast<size_t>(i + 1) * n + j];
            int d = node_id[static_cast<size_t>(i + 1) * n + j + 1];
            if (a < 0 || b < 0 || c < 0 || d < 0) continue;
            w.mesh.triangles.push_back({a, b, d});
            w.mesh.triangles.push_back({a, d, c});
        }
    validate_mesh(w.mesh);
    return w;
}

struct SurgeOracleParams {
    double kappa = 2.5e-4;     // s^2/m, overall scale
    double d0 = 5.0;           // m, depth damping floor
    double max_dist_deg = 0.5; // cells farther from land than this stay dry
};

// Physics-inspired label generator: quadratic wind-stress proxy with depth
// damping. For each near-coast water cell,
//   zeta = kappa * max_t [ |W|^2 * max(0, W . n_hat) ] / (depth + d0)
// where n_hat is the unit vector toward the nearest land cell and W the wind
// vector in physical units. Land cells and cells far from land get 0.
inline SurgeField synth_surge(const FeatureTensor& features, const GridSpec& grid,
                              const SurgeOracleParams& params = {}) {
    if (features.c != kNumChannels)
        throw ValidationError("synth_surge: expected a 41-channel feature tensor");
    const int res = grid.resolution;
    SurgeField out(res, res);

    std::vector<std::pair<int, int>> land_cells;
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j)
            if (features.at(kChanLandMask, i, j) > 0.5f) land_cells.emplace_back(i, j);
    if (land_cells.empty()) return out;

    const double cell = grid.cell_size();
    const double coslat = std::cos(grid.center_lat * kDegToRad);
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            if (features.at(kChanLandMask, i, j) > 0.5f) continue;
            // nearest land cell in plain grid-degree distance
            double best = std::numeric_limits<double>::infinity();
            int bi = -1, bj = -1;
            for (const auto& [li, lj] : land_cells) {
                double dd = static_cast<double>(li - i) * (li - i) +
                            static_cast<double>(lj - j) * (lj - j);
                if (dd < best) {
                    best = dd;
                    bi = li;
                    bj = lj;
                }
            }
            double dist_deg = std::sqrt(best) * cell;
            if (dist_deg > params.max_dist_deg) continue;
            // unit normal toward land in local east/north meters
            double nx = (bj - j) * cell * coslat;
            double ny = (bi - i) * cell;
            double nn = std::hypot(nx, ny);
            if (nn == 0) continue;
            nx /= nn;
            ny /= nn;
            double peak = 0;
            for (int k = 0; k < kNumTimeSlices; ++k) {
                double u = features.at(kChanWindU + k, i, j);
                double v = features.at(kChanWindV + k, i, j);
                double onshore = u * nx + v * ny;
                if (onshore <= 0) continue;
                peak = std::max(peak, (u * u + v * v) * onshore);
            }
            double depth = std::max(0.0, static_cast<double>(features.at(kChanBathymetry, i, j)));
            out.at(i, j) = static_cast<float>(params.kappa * peak / (depth + params.d0));
        }
    return out;
}

struct ToyTrackOptions {
    int count = 32;
    std::vector<Basin> basins{Basin::NA, Basin::WP};
    DomainBounds bounds;  // must match the toy world the tracks will hit
    double t_step = 3.0;
    double t_end = 96.0;
};

// Seeded synthetic storms marching east across the toy domain toward the
// shoreline. Every storm peaks above the default 33 m/s intensity floor.
inline std::vector<Storm> make_toy_tracks(uint64_t seed, const ToyTrackOptions& opt = {}) {
    Rng rng(seed ^ 0x746f79747261636bULL);
    std::vector<Storm> storms;
    storms.reserve(opt.count);
    for (int s = 0; s < opt.count; ++s) {
        Storm storm;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "TOY%04d", s);
        storm.id = buf;
        storm.basin = opt.basins[s % opt.basins.size()];

        const double lat0 = rng.uniform(opt.bounds.lat_min + 1.8, opt.bounds.lat_max - 1.8);
        const double lat_drift = rng.uniform(-0.01, 0.01);      // deg/h
        const double lon0 = opt.bounds.lon_min + rng.uniform(0.2, 0.8);
        const double speed = rng.uniform(0.10, 0.16);           // deg/h eastward
        const double vpeak = rng.uniform(36, 60);
        const double t_peak = rng.uniform(30, 60);
        const double r_max = rng.uniform(25, 50);
        const double b_target = rng.uniform(1.1, 1.9);

        for (double t = 0; t <= opt.t_end + 1e-9; t += opt.t_step) {
            TrackPoint p;
            p.t = t;
            p.lat = lat0 + lat_drift * t;
            p.lon = lon0 + speed * t;
            // intensity ramps to the peak and decays after landfall-ish times
            double shape = std::exp(-std::pow((t - t_peak) / 40.0, 2.0));
            p.v_max = std::max(18.0, vpeak * shape);
            p.r_max = r_max;
            double dp = p.v_max * p.v_max * kAirDensity * M_E / (100.0 * b_target);
            p.p_min = std::max(860.0, kAmbientPressureHpa - dp);
            storm.points.push_back(p);
        }
        storms.push_back(std::move(storm));
    }
    return storms;
}

inline std::string tracks_to_csv(const std::vector<Storm>& storms) {
    std::string out = "storm_id,basin,t_hours,lat,lon,rmax_km,pmin_hpa,vmax_ms\n";
    char buf[256];
    for (const auto& s : storms)
        for (const auto& p : s.points) {
            std::snprintf(buf, sizeof(buf), "%s,%s,%.6g,%.10g,%.10g,%.10g,%.10g,%.10g\n",
                          s.id.c_str(), basin_name(s.basin), p.t, p.lat, p.lon, p.r_max, p.p_min,
                          p.v_max);
            out += buf;
        }
    return out;
}

}  // namespace surge
