#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "surge/gridding.hpp"
#include "surge/rng.hpp"

using namespace surge;

namespace {

// Structured triangulated mesh over [lon0,lon0+span] x [lat0,lat0+span] with
// optional interior jitter; depth = a linear ramp in longitude.
Mesh structured_mesh(int n, double lon0 = 0.0, double lat0 = 0.0, double span = 1.0,
                     double jitter = 0.0, uint64_t seed = 0) {
    Rng rng(seed);
    Mesh m;
    double step = span / (n - 1);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            MeshNode nd;
            nd.lon = lon0 + j * step;
            nd.lat = lat0 + i * step;
            if (jitter > 0 && i > 0 && i < n - 1 && j > 0 && j < n - 1) {
                nd.lon += rng.uniform(-jitter, jitter) * step;
                nd.lat += rng.uniform(-jitter, jitter) * step;
            }
            nd.depth = 10.0 + 5.0 * (nd.lon - lon0);
            m.nodes.push_back(nd);
        }
    for (int i = 0; i + 1 < n; ++i)
        for (int j = 0; j + 1 < n; ++j) {
            int a = i * n + j, b = a + 1, c = a + n, d = c + 1;
            m.triangles.push_back({a, b, d});
            m.triangles.push_back({a, d, c});
        }
    return m;
}

// Ascending scan over every triangle: the reference for TriangleIndex.
int brute_locate(const Mesh& m, double lon, double lat, double& w0, double& w1, double& w2) {
    for (int ti = 0; ti < static_cast<int>(m.triangles.size()); ++ti)
        if (barycentric(m, ti, lon, lat, w0, w1, w2)) return ti;
    return -1;
}

Mask2D brute_dilate(const Mask2D& land, int k) {
    Mask2D out(land.h, land.w);
    for (int i = 0; i < land.h; ++i)
        for (int j = 0; j < land.w; ++j) {
            uint8_t hit = 0;
            for (int di = 0; di < land.h; ++di)
                for (int dj = 0; dj < land.w; ++dj)
                    if (land.at(di, dj) && std::max(std::abs(di - i), std::abs(dj - j)) <= k)
                        hit = 1;
            out.at(i, j) = hit;
        }
    return out;
}

Storm straight_storm() {
    Storm s;
    s.id = "T";
    s.basin = Basin::NA;
    for (int k = 0; k <= 20; ++k) {
        TrackPoint p;
        p.t = 3.0 * k;
        p.lat = 0.5;
        p.lon = -2.0 + 0.15 * p.t;
        p.r_max = 30;
        p.p_min = 970;
        p.v_max = 40;
        s.points.push_back(p);
    }
    return s;
}

}  // namespace

TEST_CASE("grid spec cell arithmetic") {
    GridSpec g = build_grid(LandfallEvent{0, 10.0, -40.0}, 2.5, 128);
    CHECK(g.cell_size() == Catch::Approx(2.5 / 128));
    // row 0 is the southernmost row of cell centers
    CHECK(g.lat_at(0) == Catch::Approx(10.0 + 2.5 * (0.5 / 128 - 0.5)));
    CHECK(g.lat_at(127) == Catch::Approx(10.0 + 2.5 * (127.5 / 128 - 0.5)));
    CHECK(g.lon_at(64) == Catch::Approx(-40.0 + 2.5 * (64.5 / 128 - 0.5)));
    // centers are symmetric about the landfall point
    CHECK(g.lat_at(0) + g.lat_at(127) == Catch::Approx(2 * 10.0));

    REQUIRE_THROWS_AS(build_grid(LandfallEvent{0, 10, -40}, 2.5, 96), ConfigError);
    REQUIRE_THROWS_AS(build_grid(LandfallEvent{0, 10, -40}, 2.5, 4), ConfigError);
    CHECK_NOTHROW(build_grid(LandfallEvent{0, 10, -40}, 2.5, 8));
}

TEST_CASE("barycentric weights partition unity and flag outsiders") {
    Mesh m;
    m.nodes = {{0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
    m.triangles = {{0, 1, 2}};
    double w0, w1, w2;
    REQUIRE(barycentric(m, 0, 0.25, 0.25, w0, w1, w2));
    CHECK(w0 == Catch::Approx(0.5));
    CHECK(w1 == Catch::Approx(0.25));
    CHECK(w2 == Catch::Approx(0.25));
    CHECK(w0 + w1 + w2 == Catch::Approx(1.0).epsilon(1e-12));
    // vertices give unit weights
    REQUIRE(barycentric(m, 0, 1.0, 0.0, w0, w1, w2));
    CHECK(w1 == Catch::Approx(1.0));
    // outside
    CHECK(!barycentric(m, 0, 0.8, 0.8, w0, w1, w2));
    CHECK(!barycentric(m, 0, -0.1, 0.5, w0, w1, w2));
}

TEST_CASE("validate_mesh rejects bad indices and degenerate triangles") {
    Mesh m;
    m.nodes = {{0, 0, 1}, {1, 0, 1}, {0, 1, 1}};
    m.triangles = {{0, 1, 2}};
    CHECK_NOTHROW(validate_mesh(m));
    m.triangles = {{0, 1, 3}};
    REQUIRE_THROWS_AS(validate_mesh(m), ValidationError);
    m.nodes.push_back({2, 0, 1});  // collinear with 0 and 1
    m.triangles = {{0, 1, 3}};
    REQUIRE_THROWS_AS(validate_mesh(m), ValidationError);
}

TEST_CASE("index candidates are a superset of the containing triangles") {
    Rng rng(31);
    Mesh m = structured_mesh(9, 0, 0, 1.0, 0.35, 7);
    TriangleIndex idx(m);
    for (int trial = 0; trial < 500; ++trial) {
        double lon = rng.uniform(-0.1, 1.1), lat = rng.uniform(-0.1, 1.1);
        auto cand = idx.candidates(lon, lat);
        double w0, w1, w2;
        for (int ti = 0; ti < static_cast<int>(m.triangles.size()); ++ti) {
            if (barycentric(m, ti, lon, lat, w0, w1, w2)) {
                REQUIRE(std::find(cand.begin(), cand.end(), ti) != cand.end());
            }
        }
        REQUIRE(std::is_sorted(cand.begin(), cand.end()));
    }
}

TEST_CASE("indexed locate is bit-identical to the brute-force scan") {
    Rng rng(32);
    for (int mesh_trial = 0; mesh_trial < 50; ++mesh_trial) {
        int n = 4 + rng.below(6);
        Mesh m = structured_mesh(n, rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(0.5, 3.0),
                                 0.3, 100 + mesh_trial);
        TriangleIndex idx(m);
        for (int q = 0; q < 60; ++q) {
            double lon = m.nodes.front().lon + rng.uniform(-0.2, 3.4);
            double lat = m.nodes.front().lat + rng.uniform(-0.2, 3.4);
            double a0, a1, a2, b0, b1, b2;
            int ta = idx.locate(lon, lat, a0, a1, a2);
            int tb = brute_locate(m, lon, lat, b0, b1, b2);
            REQUIRE(ta == tb);
            if (ta >= 0) {
                REQUIRE(a0 == b0);
                REQUIRE(a1 == b1);
                REQUIRE(a2 == b2);
            }
        }
    }
}

TEST_CASE("interpolation reproduces linear fields exactly inside the mesh") {
    Mesh m = structured_mesh(9, -0.5, 9.5, 1.2, 0.3, 9);
    TriangleIndex idx(m);
    GridSpec g = build_grid(LandfallEvent{0, 10.0, 0.0}, 0.8, 32);

    double a = 2.0, b = -3.0, c = 0.7;
    std::vector<double> nodal(m.nodes.size());
    for (size_t i = 0; i < nodal.size(); ++i)
        nodal[i] = a + b * m.nodes[i].lon + c * m.nodes[i].lat;
    auto gf = interpolate_to_grid(m, idx, nodal, g);

    int covered = 0;
    for (int i = 0; i < g.resolution; ++i)
        for (int j = 0; j < g.resolution; ++j) {
            if (!gf.coverage.at(i, j)) {
                REQUIRE(gf.field.at(i, j) == 0.f);
                continue;
            }
            ++covered;
            double expect = a + b * g.lon_at(j) + c * g.lat_at(i);
            REQUIRE(std::fabs(gf.field.at(i, j) - expect) <= 1e-6 * std::max(1.0, std::fabs(expect)));
        }
    REQUIRE(covered > 100);

    std::vector<double> wrong(m.nodes.size() + 1, 0.0);
    REQUIRE_THROWS_AS(interpolate_to_grid(m, idx, wrong, g), ValidationError);
}

TEST_CASE("land rule: uncovered or non-positive interpolated depth") {
    GriddedField gf{Field2D(2, 2), Mask2D(2, 2)};
    gf.field.at(0, 0) = 5.f;
    gf.coverage.at(0, 0) = 1;  // wet
    gf.field.at(0, 1) = -1.f;
    gf.coverage.at(0, 1) = 1;  // land by depth
    gf.field.at(1, 0) = 0.f;
    gf.coverage.at(1, 0) = 1;  // land by depth (<= 0)
    gf.field.at(1, 1) = 9.f;
    gf.coverage.at(1, 1) = 0;  // land by coverage
    auto land = land_mask_from(gf);
    CHECK(land.at(0, 0) == 0);
    CHECK(land.at(0, 1) == 1);
    CHECK(land.at(1, 0) == 1);
    CHECK(land.at(1, 1) == 1);
}

TEST_CASE("dilation of a single cell is a clipped square") {
    Mask2D land(7, 7);
    land.at(3, 3) = 1;
    auto d1 = dilate_mask(land, 1);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 7; ++j)
            CHECK(d1.at(i, j) == ((std::abs(i - 3) <= 1 && std::abs(j - 3) <= 1) ? 1 : 0));
    auto d0 = dilate_mask(land, 0);
    CHECK(d0.v == land.v);
    auto d9 = dilate_mask(land, 9);
    for (uint8_t x : d9.v) CHECK(x == 1);
    REQUIRE_THROWS_AS(dilate_mask(land, -1), ConfigError);
}

TEST_CASE("dilation matches brute-force Chebyshev and grows with k") {
    Rng rng(33);
    for (int trial = 0; trial < 20; ++trial) {
        Mask2D land(16, 16);
        for (auto& x : land.v) x = rng.uniform() < 0.15 ? 1 : 0;
        Mask2D prev = land;
        for (int k = 0; k <= 4; ++k) {
            auto fast = dilate_mask(land, k);
            auto ref = brute_dilate(land, k);
            REQUIRE(fast.v == ref.v);
            for (size_t i = 0; i < fast.v.size(); ++i) REQUIRE(fast.v[i] >= prev.v[i]);
            prev = fast;
        }
    }
}

TEST_CASE("normalization hand values and round trip") {
    FeatureTensor t(kNumChannels, 2, 2);
    std::fill(t.v.begin(), t.v.end(), 0.f);
    t.at(kChanPressure, 0, 0) = 963.25f;       // (p - 1013.25)/50 = -1
    t.at(kChanWindU, 0, 0) = 25.f;             // 0.5
    t.at(kChanWindV + 12, 1, 1) = -50.f;       // -1
    t.at(kChanBathymetry, 0, 0) = 100.f;       // log1p(100)/log1p(1e4)
    t.at(kChanBathymetry, 0, 1) = 10000.f;     // 1
    t.at(kChanLandMask, 0, 0) = 1.f;

    auto n = normalize_features(t);
    CHECK(n.at(kChanPressure, 0, 0) == Catch::Approx(-1.0));
    CHECK(n.at(kChanWindU, 0, 0) == Catch::Approx(0.5));
    CHECK(n.at(kChanWindV + 12, 1, 1) == Catch::Approx(-1.0));
    CHECK(n.at(kChanBathymetry, 0, 0) ==
          Catch::Approx(std::log1p(100.0) / std::log1p(10000.0)).epsilon(1e-6));
    CHECK(n.at(kChanBathymetry, 0, 1) == Catch::Approx(1.0));
    CHECK(n.at(kChanLandMask, 0, 0) == 1.f);  // untouched
    // zero-pressure cells map to -1013.25/50, not 0: normalization is affine
    CHECK(n.at(kChanPressure, 1, 1) == Catch::Approx(-1013.25 / 50));

    auto back = denormalize_features(n);
    for (size_t i = 0; i < t.v.size(); ++i)
        REQUIRE(std::fabs(back.v[i] - t.v[i]) <= 1e-3 * std::max(1.f, std::fabs(t.v[i])));
}

TEST_CASE("grid_target zeroes land, uncovered cells and dry nodes") {
    Mesh m = structured_mesh(5, 0, 0, 1.0);
    TriangleIndex idx(m);
    GridSpec g = build_grid(LandfallEvent{0, 0.5, 0.5}, 0.5, 8);

    std::vector<double> elev(m.nodes.size(), 2.0);
    Mask2D land(8, 8);
    land.at(0, 0) = 1;
    auto tgt = grid_target(m, idx, elev, g, land);
    CHECK(tgt.at(0, 0) == 0.f);
    CHECK(tgt.at(4, 4) == Catch::Approx(2.0));

    // a dry (NaN) node zeroes the cells it influences rather than poisoning them
    elev[2 * 5 + 2] = std::numeric_limits<double>::quiet_NaN();
    auto tgt2 = grid_target(m, idx, elev, g, land);
    for (float x : tgt2.v) REQUIRE(std::isfinite(x));
}

TEST_CASE("fort.14 round trip preserves the mesh") {
    Mesh m = structured_mesh(6, -3, 12, 1.5, 0.25, 41);
    std::ostringstream os;
    write_fort14(os, m, "toy");
    std::istringstream is(os.str());
    Mesh back = read_fort14(is);
    REQUIRE(back.nodes.size() == m.nodes.size());
    REQUIRE(back.triangles.size() == m.triangles.size());
    for (size_t i = 0; i < m.nodes.size(); ++i) {
        REQUIRE(back.nodes[i].lon == Catch::Approx(m.nodes[i].lon).epsilon(1e-10));
        REQUIRE(back.nodes[i].lat == Catch::Approx(m.nodes[i].lat).epsilon(1e-10));
        REQUIRE(back.nodes[i].depth == Catch::Approx(m.nodes[i].depth).epsilon(1e-10));
    }
    REQUIRE(back.triangles == m.triangles);
}

TEST_CASE("fort.14 parser rejects malformed input") {
    std::istringstream empty("");
    REQUIRE_THROWS_AS(read_fort14(empty), ParseError);
    std::istringstream no_counts("title\n");
    REQUIRE_THROWS_AS(read_fort14(no_counts), ParseError);
    std::istringstream truncated("title\n1 3\n1 0 0 5\n2 1 0 5\n");
    REQUIRE_THROWS_AS(read_fort14(truncated), ParseError);
    std::istringstream bad_elem("title\n1 3\n1 0 0 5\n2 1 0 5\n3 0 1 5\n1 4 1 2 3\n");
    REQUIRE_THROWS_AS(read_fort14(bad_elem), ParseError);
    REQUIRE_THROWS_AS(read_fort14_file("/nonexistent/mesh.14"), FormatError);
}

TEST_CASE("nodal field reader handles dry markers and bad counts") {
    std::istringstream ok("1.5\nNaN\n-0.25\n");
    auto vals = read_nodal_field(ok, 3);
    REQUIRE(vals.size() == 3);
    CHECK(vals[0] == 1.5);
    CHECK(std::isnan(vals[1]));
    CHECK(vals[2] == -0.25);

    std::istringstream few("1.0\n");
    REQUIRE_THROWS_AS(read_nodal_field(few, 3), ParseError);
    std::istringstream junk("1.0\npotato\n2.0\n");
    REQUIRE_THROWS_AS(read_nodal_field(junk, 3), ParseError);
}

TEST_CASE("assembled features have the documented channel layout") {
    // ocean mesh west of lon 0.2, depth ramp; storm crosses it heading east
    Mesh m = structured_mesh(9, -2.5, -0.5, 2.0, 0.0, 0);
    TriangleIndex idx(m);
    Storm s = straight_storm();
    LandfallEvent lf{30.0, 0.5, -2.0 + 0.15 * 30.0};
    GridSpec g = build_grid(lf, 1.5, 16);

    auto ft = assemble_features(s, lf, m, idx, g);
    REQUIRE(ft.c == kNumChannels);
    REQUIRE(ft.c == 41);
    REQUIRE(ft.h == 16);
    REQUIRE(ft.w == 16);
    for (float x : ft.v) REQUIRE(std::isfinite(x));

    // the pressure slice at landfall time matches a directly computed snapshot
    TrackPoint at_lf = interpolate_track(s, lf.t);
    auto snap = field_snapshot(at_lf, g);
    int k_lf = (0 - kWindowStartH) / kWindowStepH;  // offset of t = landfall
    for (int i = 0; i < 16; i += 3)
        for (int j = 0; j < 16; j += 3) {
            REQUIRE(ft.at(kChanPressure + k_lf, i, j) == snap.pressure.at(i, j));
            REQUIRE(ft.at(kChanWindU + k_lf, i, j) == snap.u.at(i, j));
            REQUIRE(ft.at(kChanWindV + k_lf, i, j) == snap.v.at(i, j));
        }

    // land/bathymetry consistency: land cells carry zero depth
    for (int i = 0; i < 16; ++i)
        for (int j = 0; j < 16; ++j) {
            if (ft.at(kChanLandMask, i, j) == 1.f) {
                REQUIRE(ft.at(kChanBathymetry, i, j) == 0.f);
            } else {
                REQUIRE(ft.at(kChanBathymetry, i, j) > 0.f);
            }
        }

    // deterministic rebuild is bit-identical
    auto ft2 = assemble_features(s, lf, m, idx, g);
    REQUIRE(ft.v == ft2.v);
}

TEST_CASE("assemble_features enforces window coverage unless padding is on") {
    Mesh m = structured_mesh(5, -2.5, -0.5, 2.0);
    TriangleIndex idx(m);
    Storm s = straight_storm();
    LandfallEvent early{10.0, 0.5, -0.5};  // window starts at t = -14 < t_first
    GridSpec g = build_grid(early, 1.5, 8);
    REQUIRE_THROWS_AS(assemble_features(s, early, m, idx, g), ValidationError);
    AssembleOptions pad;
    pad.pad_short_tracks = true;
    CHECK_NOTHROW(assemble_features(s, early, m, idx, g, pad));
}

TEST_CASE("land raster from a mesh marks uncovered and shallow cells as land") {
    // depth ramp crosses zero inside the mesh: depth = 10 + 5*(lon - lon0),
    // with lon0 = -3 the zero line sits at lon = -5 (outside), so make one
    Mesh m = structured_mesh(9, 0, 0, 2.0);
    for (auto& n : m.nodes) n.depth = (n.lon - 1.0) * 10.0;  // land west of lon 1
    TriangleIndex idx(m);
    auto raster = land_raster_from_mesh(m, idx, 0.1);
    REQUIRE(raster.rows > 0);
    REQUIRE(raster.cols > 0);
    CHECK(raster.is_land(1.0, 0.3));
    CHECK(!raster.is_land(1.0, 1.7));
    // outside the raster counts as ocean
    CHECK(!raster.is_land(50.0, 50.0));
}
