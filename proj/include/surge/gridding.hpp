#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "surge/errors.hpp"
#include "surge/grid.hpp"
#include "surge/tracks.hpp"
#include "surge/windfields.hpp"

namespace surge {

struct MeshNode {
    double lon = 0, lat = 0;
    double depth = 0;  // meters, positive down
};

struct Mesh {
    std::vector<MeshNode> nodes;
    std::vector<std::array<int, 3>> triangles;
};

namespace detail {

inline double tri_area2(const Mesh& m, const std::array<int, 3>& t) {
    const auto& a = m.nodes[t[0]];
    const auto& b = m.nodes[t[1]];
    const auto& c = m.nodes[t[2]];
    return (b.lon - a.lon) * (c.lat - a.lat) - (c.lon - a.lon) * (b.lat - a.lat);
}

}  // namespace detail

inline void validate_mesh(const Mesh& m) {
    for (const auto& t : m.triangles) {
        for (int k : t)
            if (k < 0 || k >= static_cast<int>(m.nodes.size()))
                throw ValidationError("mesh: triangle node index out of range");
        if (detail::tri_area2(m, t) == 0.0) throw ValidationError("mesh: degenerate triangle");
    }
}

// Barycentric weights of (lon, lat) in triangle ti. Returns false when the
// point is outside. Weights are non-negative and sum to 1 on success.
inline bool barycentric(const Mesh& m, int ti, double lon, double lat, double& w0, double& w1,
                        double& w2) {
    const auto& t = m.triangles[ti];
    const auto& a = m.nodes[t[0]];
    const auto& b = m.nodes[t[1]];
    const auto& c = m.nodes[t[2]];
    double det = (b.lon - a.lon) * (c.lat - a.lat) - (c.lon - a.lon) * (b.lat - a.lat);
    w0 = ((b.lon - lon) * (c.lat - lat) - (c.lon - lon) * (b.lat - lat)) / det;
    w1 = ((c.lon - lon) * (a.lat - lat) - (a.lon - lon) * (c.lat - lat)) / det;
    w2 = ((a.lon - lon) * (b.lat - lat) - (b.lon - lon) * (a.lat - lat)) / det;
    return w0 >= 0 && w1 >= 0 && w2 >= 0;
}

// Uniform-bucket index over triangle bounding boxes. Buckets keep triangle
// ids in ascending order so the first containing triangle matches a plain
// ascending scan, making indexed lookups bit-compatible with brute force.
class TriangleIndex {
public:
    TriangleIndex() = default;

    explicit TriangleIndex(const Mesh& mesh) : mesh_(&mesh) {
        const auto& nodes = mesh.nodes;
        if (mesh.triangles.empty() || nodes.empty()) return;
        lon0_ = lat0_ = std::numeric_limits<double>::infinity();
        double lon1 = -lon0_, lat1 = -lat0_;
        std::vector<double> diags;
        diags.reserve(mesh.triangles.size());
        boxes_.reserve(mesh.triangles.size());
        for (const auto& t : mesh.triangles) {
            Box b;
            b.lon0 = std::min({nodes[t[0]].lon, nodes[t[1]].lon, nodes[t[2]].lon});
            b.lon1 = std::max({nodes[t[0]].lon, nodes[t[1]].lon, nodes[t[2]].lon});
            b.lat0 = std::min({nodes[t[0]].lat, nodes[t[1]].lat, nodes[t[2]].lat});
            b.lat1 = std::max({nodes[t[0]].lat, nodes[t[1]].lat, nodes[t[2]].lat});
            boxes_.push_back(b);
            diags.push_back(std::hypot(b.lon1 - b.lon0, b.lat1 - b.lat0));
            lon0_ = std::min(lon0_, b.lon0);
            lat0_ = std::min(lat0_, b.lat0);
            lon1 = std::max(lon1, b.lon1);
            lat1 = std::max(lat1, b.lat1);
        }
        std::nth_element(diags.begin(), diags.begin() + diags.size() / 2, diags.end());
        double median = diags[diags.size() / 2];
        bucket_ = std::max(median * 2.0, 1e-9);
        cols_ = std::max(1, static_cast<int>(std::ceil((lon1 - lon0_) / bucket_)));
        rows_ = std::max(1, static_cast<int>(std::ceil((lat1 - lat0_) / bucket_)));
        buckets_.assign(static_cast<size_t>(rows_) * cols_, {});
        auto col_of = [&](double lon) {
            return std::clamp(static_cast<int>((lon - lon0_) / bucket_), 0, cols_ - 1);
        };
        auto row_of = [&](double lat) {
            return std::clamp(static_cast<int>((lat - lat0_) / bucket_), 0, rows_ - 1);
        };
        for (int ti = 0; ti < static_cast<int>(boxes_.size()); ++ti) {
            const Box& b = boxes_[ti];
            int j0 = col_of(b.lon0), j1 = col_of(b.lon1);
            int i0 = row_of(b.lat0), i1 = row_of(b.lat1);
            for (int i = i0; i <= i1; ++i)
                for (int j = j0; j <= j1; ++j)
                    buckets_[static_cast<size_t>(i) * cols_ + j].push_back(ti);
        }
    }

    // Every triangle whose bbox contains the point, ascending by id.
    std::vector<int> candidates(double lon, double lat) const {
        std::vector<int> out;
        if (buckets_.empty()) return out;
        if (lon < lon0_ || lat < lat0_) return out;
        int i = static_cast<int>((lat - lat0_) / bucket_);
        int j = static_cast<int>((lon - lon0_) / bucket_);
        if (i >= rows_ || j >= cols_) return out;
        for (int ti : buckets_[static_cast<size_t>(i) * cols_ + j]) {
            const Box& b = boxes_[ti];
            if (lon >= b.lon0 && lon <= b.lon1 && lat >= b.lat0 && lat <= b.lat1)
                out.push_back(ti);
        }
        return out;
    }

    // First containing triangle in ascending id order, or -1.
    int locate(double lon, double lat, double& w0, double& w1, double& w2) const {
        if (buckets_.empty()) return -1;
        if (lon < lon0_ || lat < lat0_) return -1;
        int i = static_cast<int>((lat - lat0_) / bucket_);
        int j = static_cast<int>((lon - lon0_) / bucket_);
        if (i >= rows_ || j >= cols_) return -1;
        for (int ti : buckets_[static_cast<size_t>(i) * cols_ + j]) {
            const Box& b = boxes_[ti];
            if (lon < b.lon0 || lon > b.lon1 || lat < b.lat0 || lat > b.lat1) continue;
            if (barycentric(*mesh_, ti, lon, lat, w0, w1, w2)) return ti;
        }
        return -1;
    }

private:
    struct Box {
        double lon0 = 0, lon1 = 0, lat0 = 0, lat1 = 0;
    };

    const Mesh* mesh_ = nullptr;
    std::vector<Box> boxes_;
    std::vector<std::vector<int>> buckets_;
    double lon0_ = 0, lat0_ = 0, bucket_ = 1;
    int rows_ = 0, cols_ = 0;
};

inline TriangleIndex build_spatial_index(const Mesh& mesh) { return TriangleIndex(mesh); }

struct GriddedField {
    Field2D field;
    Mask2D coverage;
};

// Barycentric interpolation of a nodal scalar field onto the grid. Cells
// outside every triangle get field 0 and coverage false.
inline GriddedField interpolate_to_grid(const Mesh& mesh, const TriangleIndex& index,
                                        const std::vector<double>& nodal_values,
                                        const GridSpec& grid) {
    if (nodal_values.size() != mesh.nodes.size())
        throw ValidationError("interpolate_to_grid: nodal value count != node count");
    const int res = grid.resolution;
    GriddedField out{Field2D(res, res), Mask2D(res, res)};
    for (int i = 0; i < res; ++i) {
        const double lat = grid.lat_at(i);
        for (int j = 0; j < res; ++j) {
            const double lon = grid.lon_at(j);
            double w0, w1, w2;
            int ti = index.locate(lon, lat, w0, w1, w2);
            if (ti < 0) continue;
            const auto& t = mesh.triangles[ti];
            out.field.at(i, j) = static_cast<float>(
                w0 * nodal_values[t[0]] + w1 * nodal_values[t[1]] + w2 * nodal_values[t[2]]);
            out.coverage.at(i, j) = 1;
        }
    }
    return out;
}

inline std::vector<double> mesh_depths(const Mesh& mesh) {
    std::vector<double> d(mesh.nodes.size());
    for (size_t i = 0; i < d.size(); ++i) d[i] = mesh.nodes[i].depth;
    return d;
}

// Land rule: a cell is land when the mesh does not cover it or the
// interpolated depth is <= 0.
inline Mask2D land_mask_from(const GriddedField& depth) {
    Mask2D land(depth.field.h, depth.field.w);
    for (size_t i = 0; i < land.v.size(); ++i)
        land.v[i] = (!depth.coverage.v[i] || depth.field.v[i] <= 0.f) ? 1 : 0;
    return land;
}

// Chebyshev dilation: true iff some land cell lies within distance k.
inline Mask2D dilate_mask(const Mask2D& land, int k = 3) {
    if (k < 0) throw ConfigError("dilate_mask: k must be >= 0");
    Mask2D out(land.h, land.w);
    for (int i = 0; i < land.h; ++i)
        for (int j = 0; j < land.w; ++j) {
            uint8_t hit = 0;
            for (int di = std::max(0, i - k); di <= std::min(land.h - 1, i + k) && !hit; ++di)
                for (int dj = std::max(0, j - k); dj <= std::min(land.w - 1, j + k); ++dj)
                    if (land.at(di, dj)) {
                        hit = 1;
                        break;
                    }
            out.at(i, j) = hit;
        }
    return out;
}

struct AssembleOptions {
    double p_ambient = kAmbientPressureHpa;
    double rho_air = kAirDensity;
    double inflow_deg = 0;
    // When set, window times outside the track are clamped to its endpoints
    // instead of failing.
    bool pad_short_tracks = false;
};

// The 41-channel feature stack: 13 pressure slices, 13 east-wind, 13
// north-wind (t = -24..+12 h around landfall, 3 h step), bathymetry, land.
inline FeatureTensor assemble_features(const Storm& storm, const LandfallEvent& landfall,
                                       const Mesh& mesh, const TriangleIndex& index,
                                       const GridSpec& grid, const AssembleOptions& opt = {}) {
    const int res = grid.resolution;
    const double t0 = landfall.t + kWindowStartH;
    const double t1 = landfall.t + kWindowEndH;
    if (!opt.pad_short_tracks && (t0 < storm.t_first() - 1e-9 || t1 > storm.t_last() + 1e-9))
        throw ValidationError("assemble_features: storm '" + storm.id +
                              "' does not cover the forcing window");

    GriddedField depth = interpolate_to_grid(mesh, index, mesh_depths(mesh), grid);
    Mask2D land = land_mask_from(depth);

    FeatureTensor ft(kNumChannels, res, res);
    for (int k = 0; k < kNumTimeSlices; ++k) {
        double t = landfall.t + kWindowStartH + k * kWindowStepH;
        t = std::clamp(t, storm.t_first(), storm.t_last());
        TrackPoint tp = interpolate_track(storm, t);
        WindSnapshot snap = field_snapshot(tp, grid, opt.p_ambient, opt.rho_air, opt.inflow_deg);
        std::copy(snap.pressure.v.begin(), snap.pressure.v.end(),
                  ft.v.begin() + static_cast<size_t>(kChanPressure + k) * res * res);
        std::copy(snap.u.v.begin(), snap.u.v.end(),
                  ft.v.begin() + static_cast<size_t>(kChanWindU + k) * res * res);
        std::copy(snap.v.v.begin(), snap.v.v.end(),
                  ft.v.begin() + static_cast<size_t>(kChanWindV + k) * res * res);
    }
    for (int i = 0; i < res; ++i)
        for (int j = 0; j < res; ++j) {
            bool is_land = land.at(i, j) != 0;
            ft.at(kChanBathymetry, i, j) = is_land ? 0.f : depth.field.at(i, j);
            ft.at(kChanLandMask, i, j) = is_land ? 1.f : 0.f;
        }
    for (float x : ft.v)
        if (!std::isfinite(x)) throw NumericError("assemble_features: non-finite feature value");
    return ft;
}

struct NormStats {
    double p_ref = kAmbientPressureHpa;
    double p_scale = 50.0;
    double w_scale = 50.0;
    double depth_ref = 10000.0;
};

inline FeatureTensor normalize_features(const FeatureTensor& t, const NormStats& s = {}) {
    FeatureTensor out = t;
    const size_t plane = static_cast<size_t>(t.h) * t.w;
    const double dscale = std::log1p(s.depth_ref);
    for (int ch = 0; ch < t.c; ++ch) {
        float* p = &out.v[ch * plane];
        if (ch < kChanWindU) {
            for (size_t i = 0; i < plane; ++i)
                p[i] = static_cast<float>((p[i] - s.p_ref) / s.p_scale);
        } else if (ch < kChanBathymetry) {
            for (size_t i = 0; i < plane; ++i) p[i] = static_cast<float>(p[i] / s.w_scale);
        } else if (ch == kChanBathymetry) {
            for (size_t i = 0; i < plane; ++i) {
                double d = p[i];
                p[i] = static_cast<float>(std::copysign(std::log1p(std::fabs(d)) / dscale, d));
            }
        }
        // land mask channel unchanged
    }
    return out;
}

inline FeatureTensor denormalize_features(const FeatureTensor& t, const NormStats& s = {}) {
    FeatureTensor out = t;
    const size_t plane = static_cast<size_t>(t.h) * t.w;
    const double dscale = std::log1p(s.depth_ref);
    for (int ch = 0; ch < t.c; ++ch) {
        float* p = &out.v[ch * plane];
        if (ch < kChanWindU) {
            for (size_t i = 0; i < plane; ++i)
                p[i] = static_cast<float>(p[i] * s.p_scale + s.p_ref);
        } else if (ch < kChanBathymetry) {
            for (size_t i = 0; i < plane; ++i) p[i] = static_cast<float>(p[i] * s.w_scale);
        } else if (ch == kChanBathymetry) {
            for (size_t i = 0; i < plane; ++i) {
                double d = p[i];
                p[i] = static_cast<float>(std::copysign(std::expm1(std::fabs(d) * dscale), d));
            }
        }
    }
    return out;
}

// Regression target: interpolated nodal peak elevation, with land cells,
// uncovered cells and dry (NaN) nodes mapped to 0 m.
inline SurgeField grid_target(const Mesh& mesh, const TriangleIndex& index,
                              const std::vector<double>& nodal_max_elev, const GridSpec& grid,
                              const Mask2D& land) {
    GriddedField gf = interpolate_to_grid(mesh, index, nodal_max_elev, grid);
    SurgeField out(grid.resolution, grid.resolution);
    for (size_t i = 0; i < out.v.size(); ++i) {
        float val = gf.field.v[i];
        if (!gf.coverage.v[i] || land.v[i] || !std::isfinite(val)) val = 0.f;
        out.v[i] = val;
    }
    return out;
}

// ADCIRC-style fort.14 text mesh: title line, "NE NP" counts, NP node lines
// "id lon lat depth", NE element lines "id 3 n1 n2 n3" (1-based).
inline Mesh read_fort14(std::istream& in) {
    std::string title;
    if (!std::getline(in, title)) throw ParseError("fort.14: empty file");
    int ne = 0, np = 0;
    {
        std::string line;
        if (!std::getline(in, line)) throw ParseError("fort.14: missing counts line");
        std::istringstream ls(line);
        if (!(ls >> ne >> np) || ne < 0 || np < 0) throw ParseError("fort.14: bad counts line");
    }
    Mesh m;
    m.nodes.resize(np);
    std::string line;
    for (int i = 0; i < np; ++i) {
        if (!std::getline(in, line)) throw ParseError("fort.14: truncated node table");
        std::istringstream ls(line);
        int id;
        MeshNode nd;
        if (!(ls >> id >> nd.lon >> nd.lat >> nd.depth))
            throw ParseError("fort.14: bad node line " + std::to_string(i + 3));
        if (id < 1 || id > np) throw ParseError("fort.14: node id out of range");
        m.nodes[id - 1] = nd;
    }
    m.triangles.resize(ne);
    for (int i = 0; i < ne; ++i) {
        if (!std::getline(in, line)) throw ParseError("fort.14: truncated element table");
        std::istringstream ls(line);
        int id, nnodes, a, b, c;
        if (!(ls >> id >> nnodes >> a >> b >> c) || nnodes != 3)
            throw ParseError("fort.14: bad element line " + std::to_string(i + 3 + np));
        if (id < 1 || id > ne) throw ParseError("fort.14: element id out of range");
        m.triangles[id - 1] = {a - 1, b - 1, c - 1};
    }
    validate_mesh(m);
    return m;
}

inline Mesh read_fort14_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open mesh file: " + path);
    return read_fort14(in);
}

inline void write_fort14(std::ostream& out, const Mesh& m, const std::string& title = "mesh") {
    out << title << "\n" << m.triangles.size() << " " << m.nodes.size() << "\n";
    out.precision(12);
    for (size_t i = 0; i < m.nodes.size(); ++i)
        out << (i + 1) << " " << m.nodes[i].lon << " " << m.nodes[i].lat << " "
            << m.nodes[i].depth << "\n";
    for (size_t i = 0; i < m.triangles.size(); ++i)
        out << (i + 1) << " 3 " << (m.triangles[i][0] + 1) << " " << (m.triangles[i][1] + 1)
            << " " << (m.triangles[i][2] + 1) << "\n";
}

// Nodal scalar field: one value per node line; "NaN" marks dry nodes.
inline std::vector<double> read_nodal_field(std::istream& in, size_t n_nodes) {
    std::vector<double> out;
    out.reserve(n_nodes);
    std::string line;
    while (std::getline(in, line) && out.size() < n_nodes) {
        if (line.empty()) continue;
        if (line.find("NaN") != std::string::npos || line.find("nan") != std::string::npos) {
            out.push_back(std::numeric_limits<double>::quiet_NaN());
        } else {
            try {
                out.push_back(std::stod(line));
            } catch (const std::exception&) {
                throw ParseError("nodal field: bad value line " + std::to_string(out.size() + 1));
            }
        }
    }
    if (out.size() != n_nodes)
        throw ParseError("nodal field: expected " + std::to_string(n_nodes) + " values, got " +
                         std::to_string(out.size()));
    return out;
}

// Land raster over the mesh bounding box (slightly inset so edge cells stay
// strictly inside the hull), used by landfall detection.
inline LandRaster land_raster_from_mesh(const Mesh& mesh, const TriangleIndex& index,
                                        double cell_deg = 0.05) {
    double lon0 = std::numeric_limits<double>::infinity(), lat0 = lon0;
    double lon1 = -lon0, lat1 = -lat0;
    for (const auto& n : mesh.nodes) {
        lon0 = std::min(lon0, n.lon);
        lon1 = std::max(lon1, n.lon);
        lat0 = std::min(lat0, n.lat);
        lat1 = std::max(lat1, n.lat);
    }
    const double eps = cell_deg * 0.5;
    lon0 += eps;
    lat0 += eps;
    lon1 -= eps;
    lat1 -= eps;
    LandRaster r;
    r.lon0 = lon0;
    r.lat0 = lat0;
    r.dlon = r.dlat = cell_deg;
    r.cols = std::max(1, static_cast<int>(std::ceil((lon1 - lon0) / cell_deg)));
    r.rows = std::max(1, static_cast<int>(std::ceil((lat1 - lat0) / cell_deg)));
    r.land.assign(static_cast<size_t>(r.rows) * r.cols, 0);
    for (int i = 0; i < r.rows; ++i)
        for (int j = 0; j < r.cols; ++j) {
            double lat = lat0 + (i + 0.5) * cell_deg;
            double lon = lon0 + (j + 0.5) * cell_deg;
            double w0, w1, w2;
            int ti = index.locate(lon, lat, w0, w1, w2);
            bool is_land = true;
            if (ti >= 0) {
                const auto& t = mesh.triangles[ti];
                double depth = w0 * mesh.nodes[t[0]].depth + w1 * mesh.nodes[t[1]].depth +
                               w2 * mesh.nodes[t[2]].depth;
                is_land = depth <= 0.0;
            }
            r.land[static_cast<size_t>(i) * r.cols + j] = is_land ? 1 : 0;
        }
    return r;
}

}  // namespace surge
