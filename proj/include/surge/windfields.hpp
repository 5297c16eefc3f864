#pragma once

#include <cmath>

#include "surge/errors.hpp"
#include "surge/grid.hpp"
#include "surge/tracks.hpp"

namespace surge {

constexpr double kAmbientPressureHpa = 1013.25;
constexpr double kAirDensity = 1.15;          // kg/m^3
constexpr double kEarthOmega = 7.292e-5;      // s^-1
constexpr double kEarthRadiusM = 6.371e6;
constexpr double kDegToRad = M_PI / 180.0;

struct HollandParams {
    double p_c = 950;                  // hPa
    double p_n = kAmbientPressureHpa;  // hPa
    double r_max = 30;                 // km
    double v_max = 40;                 // m/s
    double b = 1.5;
    double rho_air = kAirDensity;
    double f = 0;                      // Coriolis, signed by hemisphere
    double inflow_deg = 0;             // rotation of the wind toward the eye
};

// Shape parameter from the calibration identity v_max^2 = B * dp / (rho * e),
// dp in Pa. Clamped to the model's validity range [1.0, 2.5].
inline double holland_b(double p_c, double p_n, double v_max, double rho_air = kAirDensity) {
    if (p_n <= p_c) throw ValidationError("holland_b: ambient pressure must exceed central pressure");
    double dp_pa = 100.0 * (p_n - p_c);
    double b = v_max * v_max * rho_air * M_E / dp_pa;
    return std::clamp(b, 1.0, 2.5);
}

// p(r) = p_c + dp * exp(-(r_max/r)^B), hPa; r in km.
inline double pressure_at(double r_km, const HollandParams& p) {
    if (r_km <= 0) return p.p_c;
    double x = std::pow(p.r_max / r_km, p.b);
    return p.p_c + (p.p_n - p.p_c) * std::exp(-x);
}

// Gradient wind speed, m/s:
//   V(r) = sqrt((r_max/r)^B * B*dp/rho * e^{-(r_max/r)^B} + r^2 f^2 / 4) - r|f|/2
// with dp in Pa and r in meters inside the Coriolis terms.
inline double gradient_wind_speed(double r_km, const HollandParams& p) {
    if (r_km <= 0) throw ValidationError("gradient_wind_speed: r must be > 0");
    double x = std::pow(p.r_max / r_km, p.b);
    double dp_pa = 100.0 * (p.p_n - p.p_c);
    double cyclo = x > 700.0 ? 0.0 : x * p.b * dp_pa / p.rho_air * std::exp(-x);
    double r_m = r_km * 1000.0;
    double rf2 = r_m * std::fabs(p.f) / 2.0;
    double v = std::sqrt(cyclo + rf2 * rf2) - rf2;
    return std::max(v, 0.0);
}

// Local equirectangular offsets (meters east, north) from the eye to a point.
inline void local_offset_m(double lat, double lon, double eye_lat, double eye_lon, double& dx,
                           double& dy) {
    double dlon = lon - eye_lon;
    if (dlon > 180.0) dlon -= 360.0;
    if (dlon < -180.0) dlon += 360.0;
    dx = kEarthRadiusM * std::cos(eye_lat * kDegToRad) * dlon * kDegToRad;
    dy = kEarthRadiusM * (lat - eye_lat) * kDegToRad;
}

// Wind vector (u east, v north). Tangential flow: counterclockwise in the
// northern hemisphere, clockwise in the southern; the inflow angle rotates
// the vector toward the eye.
inline void wind_vector_at(double lat, double lon, double eye_lat, double eye_lon,
                           const HollandParams& p, double& u, double& v) {
    double dx, dy;
    local_offset_m(lat, lon, eye_lat, eye_lon, dx, dy);
    double r_m = std::hypot(dx, dy);
    if (r_m == 0) {
        u = v = 0;
        return;
    }
    double speed = gradient_wind_speed(r_m / 1000.0, p);
    double rx = dx / r_m, ry = dy / r_m;
    // +90 deg rotation of the outward radial gives CCW tangential flow.
    double tx, ty;
    bool northern = eye_lat >= 0;
    if (northern) {
        tx = -ry;
        ty = rx;
    } else {
        tx = ry;
        ty = -rx;
    }
    if (p.inflow_deg != 0) {
        // Rotating toward the inward radial is CCW in the NH, CW in the SH.
        double a = p.inflow_deg * kDegToRad * (northern ? 1.0 : -1.0);
        double ca = std::cos(a), sa = std::sin(a);
        double ntx = ca * tx - sa * ty;
        double nty = sa * tx + ca * ty;
        tx = ntx;
        ty = nty;
    }
    u = speed * tx;
    v = speed * ty;
}

inline double coriolis_at(double lat) { return 2.0 * kEarthOmega * std::sin(lat * kDegToRad); }

// Track point -> Holland parameters. The central pressure is kept at least
// 1 hPa below ambient so degenerate weak points stay evaluable.
inline HollandParams holland_from_track_point(const TrackPoint& tp,
                                              double p_ambient = kAmbientPressureHpa,
                                              double rho_air = kAirDensity,
                                              double inflow_deg = 0) {
    HollandParams p;
    p.p_n = p_ambient;
    p.p_c = std::min(tp.p_min, p_ambient - 1.0);
    p.r_max = tp.r_max;
    p.v_max = tp.v_max;
    p.rho_air = rho_air;
    p.b = holland_b(p.p_c, p.p_n, tp.v_max, rho_air);
    p.f = coriolis_at(tp.lat);
    p.inflow_deg = inflow_deg;
    return p;
}

struct WindSnapshot {
    Field2D pressure;  // hPa
    Field2D u;         // m/s east
    Field2D v;         // m/s north
};

// Pressure and wind at every cell center for one track point.
inline WindSnapshot field_snapshot(const TrackPoint& tp, const GridSpec& grid,
                                   double p_ambient = kAmbientPressureHpa,
                                   double rho_air = kAirDensity, double inflow_deg = 0) {
    HollandParams p = holland_from_track_point(tp, p_ambient, rho_air, inflow_deg);
    const int res = grid.resolution;
    WindSnapshot out{Field2D(res, res), Field2D(res, res), Field2D(res, res)};
    for (int i = 0; i < res; ++i) {
        const double lat = grid.lat_at(i);
        for (int j = 0; j < res; ++j) {
            const double lon = grid.lon_at(j);
            double dx, dy;
            local_offset_m(lat, lon, tp.lat, tp.lon, dx, dy);
            double r_km = std::hypot(dx, dy) / 1000.0;
            out.pressure.at(i, j) = static_cast<float>(pressure_at(r_km, p));
            double u, v;
            wind_vector_at(lat, lon, tp.lat, tp.lon, p, u, v);
            out.u.at(i, j) = static_cast<float>(u);
            out.v.at(i, j) = static_cast<float>(v);
        }
    }
    return out;
}

}  // namespace surge
