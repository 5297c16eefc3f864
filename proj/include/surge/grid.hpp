#pragma once

#include <cstdint>
#include <vector>

#include "surge/errors.hpp"
#include "surge/tracks.hpp"

namespace surge {

// Landfall-centered square lat-lon window. Row index increases northward,
// column index eastward; cell centers at center + extent*((i+0.5)/res - 0.5).
struct GridSpec {
    double center_lat = 0;
    double center_lon = 0;
    double extent = 2.5;  // degrees, full width
    int resolution = 128;

    double lat_at(int row) const {
        return center_lat + extent * ((row + 0.5) / resolution - 0.5);
    }
    double lon_at(int col) const {
        return center_lon + extent * ((col + 0.5) / resolution - 0.5);
    }
    double cell_size() const { return extent / resolution; }
};

inline bool is_power_of_two(int x) { return x > 0 && (x & (x - 1)) == 0; }

inline GridSpec build_grid(const LandfallEvent& landfall, double extent = 2.5,
                           int resolution = 128) {
    if (extent <= 0) throw ConfigError("build_grid: extent must be > 0");
    if (resolution < 8 || !is_power_of_two(resolution))
        throw ConfigError("build_grid: resolution must be a power of two >= 8");
    return GridSpec{landfall.lat, landfall.lon, extent, resolution};
}

struct Field2D {
    int h = 0, w = 0;
    std::vector<float> v;

    Field2D() = default;
    Field2D(int h_, int w_, float fill = 0.f)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill) {}

    float& at(int i, int j) { return v[static_cast<size_t>(i) * w + j]; }
    float at(int i, int j) const { return v[static_cast<size_t>(i) * w + j]; }
};

struct Mask2D {
    int h = 0, w = 0;
    std::vector<uint8_t> v;

    Mask2D() = default;
    Mask2D(int h_, int w_, bool fill = false)
        : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, fill ? 1 : 0) {}

    uint8_t& at(int i, int j) { return v[static_cast<size_t>(i) * w + j]; }
    uint8_t at(int i, int j) const { return v[static_cast<size_t>(i) * w + j]; }
};

// Maximum water elevation in meters; the regression target and prediction.
using SurgeField = Field2D;

// C x H x W feature stack, channel-major.
struct FeatureTensor {
    int c = 0, h = 0, w = 0;
    std::vector<float> v;

    FeatureTensor() = default;
    FeatureTensor(int c_, int h_, int w_)
        : c(c_), h(h_), w(w_), v(static_cast<size_t>(c_) * h_ * w_, 0.f) {}

    float& at(int ch, int i, int j) {
        return v[(static_cast<size_t>(ch) * h + i) * w + j];
    }
    float at(int ch, int i, int j) const {
        return v[(static_cast<size_t>(ch) * h + i) * w + j];
    }
};

// Channel layout for the 41-feature stack: 13 time slices each of pressure,
// east wind and north wind, then bathymetry and the land mask.
constexpr int kNumTimeSlices = 13;
constexpr int kChanPressure = 0;
constexpr int kChanWindU = kNumTimeSlices;
constexpr int kChanWindV = 2 * kNumTimeSlices;
constexpr int kChanBathymetry = 3 * kNumTimeSlices;
constexpr int kChanLandMask = 3 * kNumTimeSlices + 1;
constexpr int kNumChannels = 3 * kNumTimeSlices + 2;  // 41
constexpr double kWindowStartH = -24.0;
constexpr double kWindowEndH = 12.0;
constexpr double kWindowStepH = 3.0;

}  // namespace surge
