#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <unistd.h>
#include <fstream>

#include "surge/io.hpp"

using namespace surge;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("surge_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string str(const std::string& name = "") const { return (path / name).string(); }
};

std::vector<unsigned char> slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void spit(const std::string& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

std::string toy_tracks_csv(int count, uint64_t seed) {
    ToyTrackOptions opt;
    opt.count = count;
    return tracks_to_csv(make_toy_tracks(seed, opt));
}

int run_cli(const std::string& args) {
    const char* bin = std::getenv("SURGE_BIN");
    std::string cmd = std::string(bin ? bin : "../surge") + " " + args + " >/dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("tensor files have the documented byte layout") {
    TempDir td;
    Field2D f(2, 2);
    f.v = {1.0f, 0.0f, -2.0f, 0.5f};
    write_field(td.str("t.srgt"), f);

    auto bytes = slurp(td.str("t.srgt"));
    REQUIRE(bytes.size() == 4 + 4 + 1 + 1 + 8 + 16);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "SRGT");
    CHECK(bytes[4] == 1);  // version 1, little-endian
    CHECK(bytes[5] == 0);
    CHECK(bytes[6] == 0);
    CHECK(bytes[7] == 0);
    CHECK(bytes[8] == 0);  // dtype f32
    CHECK(bytes[9] == 2);  // ndim
    CHECK(bytes[10] == 2);  // dims: 2, 2
    CHECK(bytes[14] == 2);
    // payload: 1.0f = 0x3F800000 little-endian
    CHECK(bytes[18] == 0x00);
    CHECK(bytes[19] == 0x00);
    CHECK(bytes[20] == 0x80);
    CHECK(bytes[21] == 0x3F);
    // -2.0f = 0xC0000000
    CHECK(bytes[29] == 0xC0);
}

TEST_CASE("tensors round-trip bitwise") {
    TempDir td;
    Rng rng(51);
    FeatureTensor ft(kNumChannels, 6, 6);
    for (auto& v : ft.v) v = static_cast<float>(rng.uniform(-1e4, 1e4));
    ft.v[0] = -0.0f;
    ft.v[1] = 1e-40f;  // subnormal survives too
    write_feature_tensor(td.str("f.srgt"), ft);
    auto back = read_feature_tensor(td.str("f.srgt"));
    REQUIRE(back.c == ft.c);
    REQUIRE(back.h == ft.h);
    REQUIRE(back.w == ft.w);
    REQUIRE(std::memcmp(back.v.data(), ft.v.data(), ft.v.size() * 4) == 0);

    Field2D f2(5, 3);
    for (auto& v : f2.v) v = static_cast<float>(rng.uniform(-1, 1));
    write_field(td.str("g.srgt"), f2);
    auto fb = read_field(td.str("g.srgt"));
    REQUIRE(fb.h == 5);
    REQUIRE(fb.w == 3);
    REQUIRE(fb.v == f2.v);
}

TEST_CASE("corrupted tensor files are rejected with FormatError") {
    TempDir td;
    Field2D f(2, 2);
    f.v = {1, 2, 3, 4};
    write_field(td.str("ok.srgt"), f);
    auto good = slurp(td.str("ok.srgt"));

    auto bad = good;
    bad[0] = 'X';
    spit(td.str("magic.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("magic.srgt")), FormatError);

    bad = good;
    bad[4] = 9;
    spit(td.str("ver.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("ver.srgt")), FormatError);

    bad = good;
    bad[8] = 7;
    spit(td.str("dtype.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("dtype.srgt")), FormatError);

    bad = good;
    bad.resize(6);
    spit(td.str("trunc.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("trunc.srgt")), FormatError);

    bad = good;
    bad.pop_back();
    spit(td.str("short.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("short.srgt")), FormatError);

    bad = good;
    bad.push_back(0);
    spit(td.str("long.srgt"), bad);
    REQUIRE_THROWS_AS(read_tensor(td.str("long.srgt")), FormatError);

    REQUIRE_THROWS_AS(read_tensor(td.str("missing.srgt")), FormatError);
    // wrong rank for the typed readers
    REQUIRE_THROWS_AS(read_feature_tensor(td.str("ok.srgt")), FormatError);
}

TEST_CASE("checkpoints round-trip bitwise and validate their fingerprint") {
    TempDir td;
    ModelConfig cfg;
    cfg.depth = 1;
    cfg.base_width = 2;
    cfg.in_channels = 3;
    auto mp = build_model(cfg, 77);
    json extra;
    extra["note"] = "test";
    save_checkpoint(td.str("ckpt"), mp, extra);

    auto back = load_checkpoint(td.str("ckpt"));
    REQUIRE(back.config.canonical() == mp.config.canonical());
    REQUIRE(back.params.size() == mp.params.size());
    for (size_t i = 0; i < mp.params.size(); ++i) {
        REQUIRE(back.params[i].name == mp.params[i].name);
        REQUIRE(back.params[i].value.v == mp.params[i].value.v);
    }

    // tampering with the recorded architecture breaks the fingerprint
    std::ifstream in(td.str("ckpt") + "/manifest.json");
    json manifest = json::parse(in);
    in.close();
    manifest["base_width"] = 4;
    std::ofstream out(td.str("ckpt") + "/manifest.json");
    out << manifest.dump(2);
    out.close();
    REQUIRE_THROWS_AS(load_checkpoint(td.str("ckpt")), FormatError);

    REQUIRE_THROWS_AS(load_checkpoint(td.str("nowhere")), FormatError);
}

TEST_CASE("dataset manifests survive a JSON round trip") {
    DatasetManifest m;
    m.extent = 2.0;
    m.resolution = 32;
    m.split_seed = 42;
    m.toy_seed = 7;
    ManifestStorm s;
    s.id = "TOY0001";
    s.basin = Basin::WP;
    s.landfall = LandfallEvent{36.5, 14.25, -4.125};
    s.grid = GridSpec{14.25, -4.125, 2.0, 32};
    s.features_path = "TOY0001_features.srgt";
    s.target_path = "TOY0001_target.srgt";
    s.split = "val";
    m.storms.push_back(s);
    m.skipped.push_back({"TOY0002", "no landfall"});

    auto back = manifest_from_json(manifest_to_json(m));
    REQUIRE(back.storms.size() == 1);
    CHECK(back.extent == m.extent);
    CHECK(back.resolution == m.resolution);
    CHECK(back.split_seed == m.split_seed);
    REQUIRE(back.toy_seed);
    CHECK(*back.toy_seed == 7);
    CHECK(back.storms[0].id == s.id);
    CHECK(back.storms[0].basin == Basin::WP);
    CHECK(back.storms[0].landfall.t == s.landfall.t);
    CHECK(back.storms[0].grid.center_lon == s.grid.center_lon);
    CHECK(back.storms[0].split == "val");
    REQUIRE(back.skipped.size() == 1);
    CHECK(back.skipped[0].reason == "no landfall");

    json broken = manifest_to_json(m);
    broken["storms"][0]["basin"] = "XX";
    REQUIRE_THROWS_AS(manifest_from_json(broken), FormatError);
}

TEST_CASE("toy dataset builds deterministically with splits and skip reports") {
    TempDir td;
    {
        std::ofstream t(td.str("tracks.csv"));
        t << toy_tracks_csv(10, 3);
        // one hopeless storm that never reaches land
        t << "WEAKY,NA,0,15,-9.9,30,1000,20\nWEAKY,NA,3,15,-9.8,30,1000,20\n";
    }
    BuildOptions opt;
    opt.tracks_path = td.str("tracks.csv");
    opt.toy_seed = 3;
    opt.out_dir = td.str("ds");
    opt.resolution = 16;
    opt.split_seed = 1;
    opt.threads = 2;

    auto m1 = build_dataset(opt);
    REQUIRE(m1.storms.size() == 10);
    REQUIRE(m1.skipped.size() == 1);
    CHECK(m1.skipped[0].id == "WEAKY");

    size_t n_train = 0, n_val = 0, n_test = 0;
    for (const auto& s : m1.storms) {
        CHECK(fs::exists(td.str("ds/" + s.features_path)));
        CHECK(fs::exists(td.str("ds/" + s.target_path)));
        if (s.split == "train") ++n_train;
        if (s.split == "val") ++n_val;
        if (s.split == "test") ++n_test;
    }
    CHECK(n_train == 8);
    CHECK(n_val == 1);
    CHECK(n_test == 1);
    CHECK(fs::exists(td.str("ds/manifest.json")));

    // a second single-threaded build is byte-identical
    BuildOptions opt2 = opt;
    opt2.out_dir = td.str("ds2");
    opt2.threads = 1;
    auto m2 = build_dataset(opt2);
    REQUIRE(m2.storms.size() == m1.storms.size());
    for (size_t i = 0; i < m1.storms.size(); ++i) {
        REQUIRE(m1.storms[i].id == m2.storms[i].id);
        REQUIRE(m1.storms[i].split == m2.storms[i].split);
        REQUIRE(slurp(td.str("ds/" + m1.storms[i].features_path)) ==
                slurp(td.str("ds2/" + m2.storms[i].features_path)));
        REQUIRE(slurp(td.str("ds/" + m1.storms[i].target_path)) ==
                slurp(td.str("ds2/" + m2.storms[i].target_path)));
    }

    // reload the manifest and pull samples
    auto loaded = load_manifest(td.str("ds/manifest.json"));
    auto train = load_samples(loaded, td.str("ds"), "train");
    REQUIRE(train.size() == 8);
    REQUIRE(train[0].features.c == kNumChannels);
    REQUIRE(train[0].features.h == 16);
    REQUIRE(train[0].target.c == 1);
    // features come back normalized: pressure near 0, not near 1000
    float p0 = train[0].features.at(0, 0, 8, 8);
    CHECK(std::fabs(p0) < 5.0f);

    auto na_only = load_samples(loaded, td.str("ds"), "train", Basin::NA);
    for (const auto& s : na_only) CHECK(s.basin == Basin::NA);
    REQUIRE(na_only.size() < train.size());
}

TEST_CASE("build_dataset validates its configuration") {
    TempDir td;
    BuildOptions opt;
    opt.tracks_path = td.str("missing.csv");
    opt.toy_seed = 1;
    opt.out_dir = td.str("ds");
    REQUIRE_THROWS_AS(build_dataset(opt), FormatError);

    {
        std::ofstream t(td.str("tracks.csv"));
        t << toy_tracks_csv(2, 3);
    }
    opt.tracks_path = td.str("tracks.csv");
    opt.toy_seed.reset();
    REQUIRE_THROWS_AS(build_dataset(opt), ConfigError);  // neither mesh nor toy seed

    // nothing survives an absurd intensity threshold
    opt.toy_seed = 3;
    opt.min_vmax = 1000.0;
    REQUIRE_THROWS_AS(build_dataset(opt), ValidationError);
}

TEST_CASE("history CSV layout") {
    TempDir td;
    std::vector<HistoryRow> h{{0, 10, 1e-3, 0.5, 0.6}, {1, 20, 5e-4, 0.25, 0.3}};
    write_history_csv(td.str("h.csv"), h);
    std::ifstream in(td.str("h.csv"));
    std::string line;
    std::getline(in, line);
    CHECK(line == "epoch,step,lr,train_loss,val_loss");
    std::getline(in, line);
    CHECK(line.substr(0, 5) == "0,10,");
    std::getline(in, line);
    CHECK(line.substr(0, 5) == "1,20,");
}

TEST_CASE("CLI exit codes: usage, data, and numeric failures") {
    TempDir td;
    // 1: bad usage
    CHECK(run_cli("definitely-not-a-command") == 1);
    CHECK(run_cli("train") == 1);  // missing required options

    // 0: success
    CHECK(run_cli("make-toy-tracks --seed 3 --count 4 --out " + td.str("t.csv")) == 0);
    REQUIRE(fs::exists(td.str("t.csv")));

    // 2: malformed data
    {
        std::ofstream bad(td.str("bad.csv"));
        bad << "storm_id,basin,t_hours,lat,lon,rmax_km,pmin_hpa,vmax_ms\nA,NA,zero,1,2,3,4,5\n";
    }
    CHECK(run_cli("pack-runs --tracks " + td.str("bad.csv") + " --out " + td.str("runs.json")) == 2);

    // end-to-end through the CLI: build a tiny dataset, then train 1 epoch
    CHECK(run_cli("build-dataset --tracks " + td.str("t.csv") + " --toy-seed 3 --res 16 --out " +
                  td.str("ds")) == 0);
    REQUIRE(fs::exists(td.str("ds/manifest.json")));
    CHECK(run_cli("train --manifest " + td.str("ds/manifest.json") + " --depth 1 --base-width 2 "
                  "--epochs 1 --batch 2 --ckpt " + td.str("ckpt")) == 0);
    REQUIRE(fs::exists(td.str("ckpt/manifest.json")));
    CHECK(run_cli("evaluate --manifest " + td.str("ds/manifest.json") + " --ckpt " +
                  td.str("ckpt") + " --report " + td.str("report.json")) == 0);
    REQUIRE(fs::exists(td.str("report.json")));

    // 3: numeric blow-up from a pathological learning rate
    CHECK(run_cli("train --manifest " + td.str("ds/manifest.json") + " --depth 1 --base-width 2 "
                  "--epochs 3 --batch 2 --lr 1e20 --ckpt " + td.str("ckpt2")) == 3);
}
