#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "surge/errors.hpp"
#include "surge/grid.hpp"
#include "surge/gridding.hpp"
#include "surge/models.hpp"
#include "surge/oracle.hpp"
#include "surge/tracks.hpp"
#include "surge/trainer.hpp"

namespace surge {

namespace fs = std::filesystem;
using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Binary tensor files: magic "SRGT", version u32, dtype u8 (0 = f32),
// ndim u8, dims u32 little-endian, payload row-major little-endian.
// ---------------------------------------------------------------------------

constexpr uint32_t kTensorVersion = 1;

namespace detail {

inline void put_u32(std::string& buf, uint32_t v) {
    buf.push_back(static_cast<char>(v & 0xff));
    buf.push_back(static_cast<char>((v >> 8) & 0xff));
    buf.push_back(static_cast<char>((v >> 16) & 0xff));
    buf.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline uint32_t get_u32(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace detail

inline void write_tensor(const std::string& path, const std::vector<uint32_t>& dims,
                         const float* data) {
    std::string buf = "SRGT";
    detail::put_u32(buf, kTensorVersion);
    buf.push_back(0);  // dtype f32
    buf.push_back(static_cast<char>(dims.size()));
    uint64_t count = 1;
    for (uint32_t d : dims) {
        detail::put_u32(buf, d);
        count *= d;
    }
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t bits;
        static_assert(sizeof(float) == 4);
        std::memcpy(&bits, &data[i], 4);
        detail::put_u32(buf, bits);
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open for writing: " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw FormatError("write failed: " + path);
}

struct RawTensor {
    std::vector<uint32_t> dims;
    std::vector<float> data;
};

inline RawTensor read_tensor(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open tensor file: " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 10) throw FormatError(path + ": truncated header (offset 0)");
    if (std::memcmp(buf.data(), "SRGT", 4) != 0)
        throw FormatError(path + ": bad magic (offset 0)");
    uint32_t version = detail::get_u32(&buf[4]);
    if (version != kTensorVersion)
        throw FormatError(path + ": unsupported version " + std::to_string(version) + " (offset 4)");
    if (buf[8] != 0) throw FormatError(path + ": unsupported dtype code (offset 8)");
    unsigned ndim = buf[9];
    size_t off = 10;
    if (buf.size() < off + 4ull * ndim)
        throw FormatError(path + ": truncated dims (offset " + std::to_string(off) + ")");
    RawTensor t;
    uint64_t count = 1;
    for (unsigned i = 0; i < ndim; ++i) {
        t.dims.push_back(detail::get_u32(&buf[off]));
        count *= t.dims.back();
        off += 4;
    }
    if (buf.size() != off + 4ull * count)
        throw FormatError(path + ": payload length mismatch (offset " + std::to_string(off) + ")");
    t.data.resize(count);
    for (uint64_t i = 0; i < count; ++i) {
        uint32_t bits = detail::get_u32(&buf[off + 4 * i]);
        std::memcpy(&t.data[i], &bits, 4);
    }
    return t;
}

inline void write_feature_tensor(const std::string& path, const FeatureTensor& t) {
    write_tensor(path, {static_cast<uint32_t>(t.c), static_cast<uint32_t>(t.h),
                        static_cast<uint32_t>(t.w)}, t.v.data());
}

inline FeatureTensor read_feature_tensor(const std::string& path) {
    RawTensor raw = read_tensor(path);
    if (raw.dims.size() != 3) throw FormatError(path + ": expected a 3-D feature tensor");
    FeatureTensor t(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]),
                    static_cast<int>(raw.dims[2]));
    t.v = std::move(raw.data);
    return t;
}

inline void write_field(const std::string& path, const Field2D& f) {
    write_tensor(path, {static_cast<uint32_t>(f.h), static_cast<uint32_t>(f.w)}, f.v.data());
}

inline Field2D read_field(const std::string& path) {
    RawTensor raw = read_tensor(path);
    if (raw.dims.size() != 2) throw FormatError(path + ": expected a 2-D field");
    Field2D f(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]));
    f.v = std::move(raw.data);
    return f;
}

// ---------------------------------------------------------------------------
// Checkpoints: manifest.json + one tensor file per parameter.
// ---------------------------------------------------------------------------

inline void save_checkpoint(const std::string& dir, const ModelParameters& mp,
                            const json& extra = json::object()) {
    fs::create_directories(dir);
    json manifest;
    manifest["arch"] = mp.config.arch;
    manifest["depth"] = mp.config.depth;
    manifest["base_width"] = mp.config.base_width;
    manifest["in_channels"] = mp.config.in_channels;
    manifest["out_channels"] = mp.config.out_channels;
    manifest["fingerprint"] = mp.fingerprint();
    manifest["extra"] = extra;
    json params = json::array();
    for (const auto& p : mp.params) {
        params.push_back({{"name", p.name},
                          {"dims", {p.value.n, p.value.c, p.value.h, p.value.w}}});
        write_tensor(dir + "/" + p.name + ".srgt",
                     {static_cast<uint32_t>(p.value.n), static_cast<uint32_t>(p.value.c),
                      static_cast<uint32_t>(p.value.h), static_cast<uint32_t>(p.value.w)},
                     p.value.v.data());
    }
    manifest["params"] = params;
    std::ofstream out(dir + "/manifest.json");
    out << manifest.dump(2) << "\n";
}

inline ModelParameters load_checkpoint(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw FormatError("cannot open checkpoint manifest: " + dir);
    json manifest = json::parse(in, nullptr, false);
    if (manifest.is_discarded()) throw FormatError("checkpoint manifest is not valid JSON: " + dir);
    ModelParameters mp;
    mp.config.arch = manifest.at("arch").get<std::string>();
    mp.config.depth = manifest.at("depth").get<int>();
    mp.config.base_width = manifest.at("base_width").get<int>();
    mp.config.in_channels = manifest.at("in_channels").get<int>();
    mp.config.out_channels = manifest.at("out_channels").get<int>();
    if (manifest.at("fingerprint").get<uint64_t>() != mp.fingerprint())
        throw FormatError("checkpoint fingerprint does not match its architecture config");
    for (const auto& pj : manifest.at("params")) {
        NamedParam p;
        p.name = pj.at("name").get<std::string>();
        RawTensor raw = read_tensor(dir + "/" + p.name + ".srgt");
        auto dims = pj.at("dims");
        if (raw.dims.size() != 4 || static_cast<int>(raw.dims[0]) != dims[0].get<int>() ||
            static_cast<int>(raw.dims[1]) != dims[1].get<int>() ||
            static_cast<int>(raw.dims[2]) != dims[2].get<int>() ||
            static_cast<int>(raw.dims[3]) != dims[3].get<int>())
            throw FormatError("checkpoint tensor shape mismatch for " + p.name);
        p.value = Tensor4<float>(static_cast<int>(raw.dims[0]), static_cast<int>(raw.dims[1]),
                                 static_cast<int>(raw.dims[2]), static_cast<int>(raw.dims[3]));
        p.value.v = std::move(raw.data);
        mp.params.push_back(std::move(p));
    }
    return mp;
}

// ---------------------------------------------------------------------------
// Dataset manifest and build orchestration.
// ---------------------------------------------------------------------------

struct ManifestStorm {
    std::string id;
    Basin basin = Basin::NA;
    LandfallEvent landfall;
    GridSpec grid;
    std::string features_path;
    std::string target_path;
    std::string split;  // train | val | test
};

struct SkippedStorm {
    std::string id;
    std::string reason;
};

struct DatasetManifest {
    double extent = 2.5;
    int resolution = 128;
    uint64_t split_seed = 0;
    std::optional<uint64_t> toy_seed;
    std::vector<ManifestStorm> storms;
    std::vector<SkippedStorm> skipped;
};

inline json manifest_to_json(const DatasetManifest& m) {
    json j;
    j["extent"] = m.extent;
    j["resolution"] = m.resolution;
    j["split_seed"] = m.split_seed;
    if (m.toy_seed) j["toy_seed"] = *m.toy_seed;
    j["storms"] = json::array();
    for (const auto& s : m.storms) {
        j["storms"].push_back({{"id", s.id},
                               {"basin", basin_name(s.basin)},
                               {"landfall", {{"t", s.landfall.t}, {"lat", s.landfall.lat}, {"lon", s.landfall.lon}}},
                               {"grid",
                                {{"center_lat", s.grid.center_lat},
                                 {"center_lon", s.grid.center_lon},
                                 {"extent", s.grid.extent},
                                 {"resolution", s.grid.resolution}}},
                               {"features", s.features_path},
                               {"target", s.target_path},
                               {"split", s.split}});
    }
    j["skipped"] = json::array();
    for (const auto& s : m.skipped) j["skipped"].push_back({{"id", s.id}, {"reason", s.reason}});
    return j;
}

inline DatasetManifest manifest_from_json(const json& j) {
    DatasetManifest m;
    m.extent = j.at("extent").get<double>();
    m.resolution = j.at("resolution").get<int>();
    m.split_seed = j.at("split_seed").get<uint64_t>();
    if (j.contains("toy_seed")) m.toy_seed = j.at("toy_seed").get<uint64_t>();
    for (const auto& sj : j.at("storms")) {
        ManifestStorm s;
        s.id = sj.at("id").get<std::string>();
        auto b = basin_from_string(sj.at("basin").get<std::string>());
        if (!b) throw FormatError("manifest: unknown basin for storm " + s.id);
        s.basin = *b;
        s.landfall.t = sj.at("landfall").at("t").get<double>();
        s.landfall.lat = sj.at("landfall").at("lat").get<double>();
        s.landfall.lon = sj.at("landfall").at("lon").get<double>();
        s.grid.center_lat = sj.at("grid").at("center_lat").get<double>();
        s.grid.center_lon = sj.at("grid").at("center_lon").get<double>();
        s.grid.extent = sj.at("grid").at("extent").get<double>();
        s.grid.resolution = sj.at("grid").at("resolution").get<int>();
        s.features_path = sj.at("features").get<std::string>();
        s.target_path = sj.at("target").get<std::string>();
        s.split = sj.at("split").get<std::string>();
        m.storms.push_back(std::move(s));
    }
    if (j.contains("skipped"))
        for (const auto& sj : j.at("skipped"))
            m.skipped.push_back({sj.at("id").get<std::string>(), sj.at("reason").get<std::string>()});
    return m;
}

inline void save_manifest(const std::string& path, const DatasetManifest& m) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write manifest: " + path);
    out << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open manifest: " + path);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw FormatError("manifest is not valid JSON: " + path);
    return manifest_from_json(j);
}

inline int worker_threads() {
    if (const char* env = std::getenv("SURGE_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

struct BuildOptions {
    std::string tracks_path;
    std::optional<std::string> mesh_path;
    std::optional<std::string> elev_path;  // nodal peak elevation, mesh mode
    std::optional<uint64_t> toy_seed;
    std::string out_dir;
    double extent = 2.5;
    int resolution = 128;
    double min_vmax = 33.0;
    uint64_t split_seed = 0;
    SplitFractions fractions;
    bool pad_short_tracks = false;
    int threads = 0;  // 0: SURGE_THREADS or hardware default
};

// Per storm: landfall detection, grid construction, feature assembly and
// target gridding (synthetic-oracle labels in toy mode). Storms that fail a
// precondition land in the skip report instead of aborting the build.
inline DatasetManifest build_dataset(const BuildOptions& opt) {
    if (!opt.toy_seed && !opt.mesh_path)
        throw ConfigError("build_dataset: either a mesh or a toy seed is required");
    std::ifstream tracks_in(opt.tracks_path);
    if (!tracks_in) throw FormatError("cannot open tracks file: " + opt.tracks_path);
    std::vector<Storm> storms = parse_track_file(tracks_in);

    Mesh mesh;
    std::vector<double> nodal_elev;
    if (opt.toy_seed) {
        mesh = synth_world(*opt.toy_seed).mesh;
    } else {
        mesh = read_fort14_file(*opt.mesh_path);
        if (!opt.elev_path)
            throw ConfigError("build_dataset: mesh mode needs a nodal elevation file");
        std::ifstream elev_in(*opt.elev_path);
        if (!elev_in) throw FormatError("cannot open nodal field: " + *opt.elev_path);
        nodal_elev = read_nodal_field(elev_in, mesh.nodes.size());
    }
    TriangleIndex index = build_spatial_index(mesh);
    LandRaster raster = land_raster_from_mesh(mesh, index);

    fs::create_directories(opt.out_dir);

    DatasetManifest manifest;
    manifest.extent = opt.extent;
    manifest.resolution = opt.resolution;
    manifest.split_seed = opt.split_seed;
    manifest.toy_seed = opt.toy_seed;

    struct Outcome {
        std::optional<ManifestStorm> ok;
        std::optional<SkippedStorm> skip;
    };
    std::vector<Outcome> outcomes(storms.size());

    auto process = [&](size_t si) {
        const Storm& s = storms[si];
        try {
            if (s.peak_vmax() < opt.min_vmax) {
                outcomes[si].skip = SkippedStorm{s.id, "below intensity threshold"};
                return;
            }
            auto landfall = detect_landfall(s, raster);
            if (!landfall) {
                outcomes[si].skip = SkippedStorm{s.id, "no landfall"};
                return;
            }
            GridSpec grid = build_grid(*landfall, opt.extent, opt.resolution);
            AssembleOptions aopt;
            aopt.pad_short_tracks = opt.pad_short_tracks;
            FeatureTensor features = assemble_features(s, *landfall, mesh, index, grid, aopt);
            SurgeField target;
            if (opt.toy_seed) {
                target = synth_surge(features, grid);
            } else {
                GriddedField depth = interpolate_to_grid(mesh, index, mesh_depths(mesh), grid);
                target = grid_target(mesh, index, nodal_elev, grid, land_mask_from(depth));
            }
            ManifestStorm ms;
            ms.id = s.id;
            ms.basin = s.basin;
            ms.landfall = *landfall;
            ms.grid = grid;
            ms.features_path = s.id + "_features.srgt";
            ms.target_path = s.id + "_target.srgt";
            write_feature_tensor(opt.out_dir + "/" + ms.features_path, features);
            write_field(opt.out_dir + "/" + ms.target_path, target);
            outcomes[si].ok = std::move(ms);
        } catch (const Error& e) {
            outcomes[si].skip = SkippedStorm{s.id, e.what()};
        }
    };

    int n_threads = opt.threads > 0 ? opt.threads : worker_threads();
    if (n_threads <= 1 || storms.size() <= 1) {
        for (size_t i = 0; i < storms.size(); ++i) process(i);
    } else {
        std::atomic<size_t> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < n_threads; ++t)
            pool.emplace_back([&] {
                for (size_t i = next.fetch_add(1); i < storms.size(); i = next.fetch_add(1))
                    process(i);
            });
        for (auto& th : pool) th.join();
    }

    std::vector<std::string> ok_ids;
    for (auto& o : outcomes) {
        if (o.ok) {
            ok_ids.push_back(o.ok->id);
        } else if (o.skip) {
            manifest.skipped.push_back(*o.skip);
        }
    }
    if (ok_ids.empty()) throw ValidationError("build_dataset: no storm survived preprocessing");

    Split split = split_dataset(ok_ids, opt.split_seed, opt.fractions);
    auto tag_of = [&](const std::string& id) -> std::string {
        for (const auto& x : split.val)
            if (x == id) return "val";
        for (const auto& x : split.test)
            if (x == id) return "test";
        return "train";
    };
    for (auto& o : outcomes)
        if (o.ok) {
            o.ok->split = tag_of(o.ok->id);
            manifest.storms.push_back(std::move(*o.ok));
        }
    save_manifest(opt.out_dir + "/manifest.json", manifest);
    return manifest;
}

// Loads one split into memory as training samples (features normalized,
// targets in meters).
inline std::vector<TrainSample> load_samples(const DatasetManifest& manifest,
                                             const std::string& dir, const std::string& split,
                                             std::optional<Basin> basin = std::nullopt,
                                             const NormStats& stats = {}) {
    std::vector<TrainSample> out;
    for (const auto& s : manifest.storms) {
        if (s.split != split) continue;
        if (basin && s.basin != *basin) continue;
        FeatureTensor ft = read_feature_tensor(dir + "/" + s.features_path);
        Field2D tgt = read_field(dir + "/" + s.target_path);
        FeatureTensor norm = normalize_features(ft, stats);
        TrainSample ts;
        ts.id = s.id;
        ts.basin = s.basin;
        ts.features = Tensor4<float>(1, norm.c, norm.h, norm.w);
        ts.features.v = std::move(norm.v);
        ts.target = Tensor4<float>(1, 1, tgt.h, tgt.w);
        ts.target.v = std::move(tgt.v);
        out.push_back(std::move(ts));
    }
    return out;
}

inline void write_history_csv(const std::string& path, const std::vector<HistoryRow>& history) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write history: " + path);
    out << "epoch,step,lr,train_loss,val_loss\n";
    for (const auto& r : history)
        out << r.epoch << "," << r.step << "," << r.lr << "," << r.train_loss << ","
            << r.val_loss << "\n";
}

}  // namespace surge
