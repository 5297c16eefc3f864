#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "surge/errors.hpp"
#include "surge/grid.hpp"
#include "surge/gridding.hpp"
#include "surge/tracks.hpp"

namespace surge {

// Root mean squared error over the masked cells (all cells when no mask).
inline double rmse(const SurgeField& pred, const SurgeField& target, const Mask2D* mask = nullptr) {
    if (pred.h != target.h || pred.w != target.w) throw ShapeError("rmse: field shape mismatch");
    double sq = 0;
    size_t n = 0;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        if (mask && !mask->v[i]) continue;
        double d = static_cast<double>(pred.v[i]) - target.v[i];
        sq += d * d;
        ++n;
    }
    if (n == 0) throw MetricError("rmse: empty mask");
    return std::sqrt(sq / static_cast<double>(n));
}

// One evaluated storm: squared-error sums so reports can pool exactly.
struct StormErrors {
    std::string storm_id;
    Basin basin = Basin::NA;
    double sq_coast = 0, sq_all = 0;
    size_t n_coast = 0, n_all = 0;
};

inline StormErrors storm_errors(const std::string& id, Basin basin, const SurgeField& pred,
                                const SurgeField& target, const Mask2D& coastal) {
    StormErrors e;
    e.storm_id = id;
    e.basin = basin;
    for (size_t i = 0; i < pred.v.size(); ++i) {
        double d = static_cast<double>(pred.v[i]) - target.v[i];
        e.sq_all += d * d;
        ++e.n_all;
        if (coastal.v[i]) {
            e.sq_coast += d * d;
            ++e.n_coast;
        }
    }
    return e;
}

struct EvalRow {
    std::string label;  // basin code or "ALL"
    double rmse_near_coast = 0;
    double rmse_all = 0;
    size_t n_storms = 0;
};

struct EvalReport {
    std::string model_id;
    std::vector<EvalRow> rows;  // six basins in enum order, then overall
};

// Pools squared errors across storms per basin (never averages RMSEs).
// Basins with no storms get an empty-marked row (n_storms == 0).
inline EvalReport aggregate_report(const std::string& model_id,
                                   const std::vector<StormErrors>& errors) {
    EvalReport rep;
    rep.model_id = model_id;
    double sq_coast = 0, sq_all = 0;
    size_t n_coast = 0, n_all = 0;
    for (int b = 0; b < kNumBasins; ++b) {
        EvalRow row;
        row.label = basin_name(static_cast<Basin>(b));
        double bc = 0, ba = 0;
        size_t nc = 0, na = 0;
        for (const auto& e : errors) {
            if (e.basin != static_cast<Basin>(b)) continue;
            bc += e.sq_coast;
            ba += e.sq_all;
            nc += e.n_coast;
            na += e.n_all;
            ++row.n_storms;
        }
        if (row.n_storms > 0) {
            row.rmse_near_coast = nc ? std::sqrt(bc / nc) : 0;
            row.rmse_all = std::sqrt(ba / na);
        }
        rep.rows.push_back(row);
        sq_coast += bc;
        sq_all += ba;
        n_coast += nc;
        n_all += na;
    }
    EvalRow overall;
    overall.label = "ALL";
    overall.n_storms = errors.size();
    if (n_all) overall.rmse_all = std::sqrt(sq_all / n_all);
    if (n_coast) overall.rmse_near_coast = std::sqrt(sq_coast / n_coast);
    rep.rows.push_back(overall);
    return rep;
}

// One basin row of the paired local-vs-global comparison report.
struct LocalGlobalRow {
    std::string basin;
    bool populated = false;
    double local_coast = 0, local_all = 0, global_coast = 0, global_all = 0;
};

inline std::vector<LocalGlobalRow> compare_local_global(
    const std::map<Basin, std::vector<StormErrors>>& local_errors,
    const std::vector<StormErrors>& global_errors) {
    std::vector<LocalGlobalRow> rows;
    for (int b = 0; b < kNumBasins; ++b) {
        Basin basin = static_cast<Basin>(b);
        LocalGlobalRow row;
        row.basin = basin_name(basin);
        double lc = 0, la = 0, gc = 0, ga = 0;
        size_t lnc = 0, lna = 0, gnc = 0, gna = 0;
        auto it = local_errors.find(basin);
        if (it != local_errors.end())
            for (const auto& e : it->second) {
                lc += e.sq_coast;
                la += e.sq_all;
                lnc += e.n_coast;
                lna += e.n_all;
            }
        for (const auto& e : global_errors) {
            if (e.basin != basin) continue;
            gc += e.sq_coast;
            ga += e.sq_all;
            gnc += e.n_coast;
            gna += e.n_all;
        }
        if (lna > 0 && gna > 0) {
            row.populated = true;
            row.local_coast = lnc ? std::sqrt(lc / lnc) : 0;
            row.local_all = std::sqrt(la / lna);
            row.global_coast = gnc ? std::sqrt(gc / gnc) : 0;
            row.global_all = std::sqrt(ga / gna);
        }
        rows.push_back(row);
    }
    return rows;
}

struct GaugeRecord {
    std::string gauge_id;
    double lat = 0, lon = 0;
    std::string storm_id;
    double observed_max = 0;
    double predicted_max = 0;
};

// Bilinear sample among the four surrounding cell centers. Returns nullopt
// for points outside the window interior.
inline std::optional<double> sample_at_gauge(const SurgeField& field, const GridSpec& grid,
                                             double lat, double lon, bool nearest = false) {
    const int res = grid.resolution;
    const double cell = grid.cell_size();
    double fy = (lat - grid.lat_at(0)) / cell;  // fractional row in cell-center space
    double fx = (lon - grid.lon_at(0)) / cell;
    if (nearest) {
        int i = static_cast<int>(std::lround(fy));
        int j = static_cast<int>(std::lround(fx));
        if (i < 0 || j < 0 || i >= res || j >= res) return std::nullopt;
        return field.at(i, j);
    }
    if (fy < 0 || fx < 0 || fy > res - 1 || fx > res - 1) return std::nullopt;
    int i0 = std::min(static_cast<int>(std::floor(fy)), res - 2);
    int j0 = std::min(static_cast<int>(std::floor(fx)), res - 2);
    double ay = fy - i0, ax = fx - j0;
    double v00 = field.at(i0, j0), v01 = field.at(i0, j0 + 1);
    double v10 = field.at(i0 + 1, j0), v11 = field.at(i0 + 1, j0 + 1);
    return (1 - ay) * ((1 - ax) * v00 + ax * v01) + ay * ((1 - ax) * v10 + ax * v11);
}

struct GaugeRmse {
    double pooled = 0;           // every record weighted equally
    double per_storm_equal = 0;  // every storm weighted equally
};

inline GaugeRmse storm_weighted_rmse(const std::vector<GaugeRecord>& records) {
    if (records.empty()) throw MetricError("storm_weighted_rmse: no records");
    double sq = 0;
    std::map<std::string, std::pair<double, size_t>> per_storm;
    for (const auto& r : records) {
        double d = r.predicted_max - r.observed_max;
        sq += d * d;
        auto& [s, n] = per_storm[r.storm_id];
        s += d * d;
        ++n;
    }
    GaugeRmse out;
    out.pooled = std::sqrt(sq / records.size());
    double mse_sum = 0;
    for (const auto& [id, sn] : per_storm) mse_sum += sn.first / sn.second;
    out.per_storm_equal = std::sqrt(mse_sum / per_storm.size());
    return out;
}

}  // namespace surge
