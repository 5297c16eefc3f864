// surge: command-line surface for the peak storm-surge surrogate pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure (NaN loss).

#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "surge/evaluation.hpp"
#include "surge/io.hpp"
#include "surge/models.hpp"
#include "surge/oracle.hpp"
#include "surge/tracks.hpp"
#include "surge/trainer.hpp"

namespace {

using namespace surge;

std::optional<Basin> parse_basin_flag(const std::string& s) {
    if (s.empty()) return std::nullopt;
    auto b = basin_from_string(s);
    if (!b) throw ConfigError("unknown basin code: " + s);
    return b;
}

std::vector<StormErrors> evaluate_split(const ModelParameters& model,
                                        const DatasetManifest& manifest, const std::string& dir,
                                        const std::string& split, int dilation_px) {
    std::vector<StormErrors> errors;
    for (const auto& s : manifest.storms) {
        if (s.split != split) continue;
        FeatureTensor raw = read_feature_tensor(dir + "/" + s.features_path);
        Field2D target = read_field(dir + "/" + s.target_path);
        Mask2D land(raw.h, raw.w);
        for (int i = 0; i < raw.h; ++i)
            for (int j = 0; j < raw.w; ++j) land.at(i, j) = raw.at(kChanLandMask, i, j) > 0.5f;
        Mask2D coastal = dilate_mask(land, dilation_px);

        FeatureTensor norm = normalize_features(raw);
        Tensor4<float> x(1, norm.c, norm.h, norm.w);
        x.v = std::move(norm.v);
        Tensor4<float> pred_t = predict(model, x);
        SurgeField pred(raw.h, raw.w);
        pred.v = pred_t.v;
        errors.push_back(storm_errors(s.id, s.basin, pred, target, coastal));
    }
    return errors;
}

void write_report_csv(const std::string& path, const EvalReport& rep) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write report: " + path);
    out << "basin,rmse_near_coast,rmse_all,n_storms\n";
    for (const auto& r : rep.rows) {
        out << r.label << ",";
        if (r.n_storms > 0)
            out << r.rmse_near_coast << "," << r.rmse_all;
        else
            out << ",";
        out << "," << r.n_storms << "\n";
    }
}

int cmd_make_toy_tracks(uint64_t seed, int count, const std::string& basins_csv,
                        const std::string& out_path) {
    ToyTrackOptions opt;
    opt.count = count;
    if (!basins_csv.empty()) {
        opt.basins.clear();
        std::istringstream ss(basins_csv);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            auto b = basin_from_string(tok);
            if (!b) throw ConfigError("unknown basin code: " + tok);
            opt.basins.push_back(*b);
        }
        if (opt.basins.empty()) throw ConfigError("--basins: empty list");
    }
    std::string csv = tracks_to_csv(make_toy_tracks(seed, opt));
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        std::ofstream out(out_path);
        if (!out) throw FormatError("cannot write: " + out_path);
        out << csv;
    }
    return 0;
}

int cmd_pack_runs(const std::string& tracks_path, const std::string& out_path) {
    std::ifstream in(tracks_path);
    if (!in) throw FormatError("cannot open tracks file: " + tracks_path);
    auto storms = parse_track_file(in);
    auto runs = pack_runs(storms);
    std::ostringstream out;
    out << "run_id,basin,storm_id\n";
    for (const auto& r : runs)
        for (const auto& [basin, id] : r.storms)
            out << r.run_id << "," << basin_name(basin) << "," << id << "\n";
    if (out_path.empty() || out_path == "-") {
        std::cout << out.str();
    } else {
        std::ofstream f(out_path);
        if (!f) throw FormatError("cannot write: " + out_path);
        f << out.str();
    }
    std::cerr << storms.size() << " storms packed into " << runs.size() << " runs\n";
    return 0;
}

GridSpec parse_grid_flag(const std::string& s) {
    GridSpec g;
    if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%d", &g.center_lat, &g.center_lon, &g.extent,
                    &g.resolution) != 4)
        throw ConfigError("--grid expects center_lat,center_lon,extent,resolution");
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"peak storm-surge surrogate pipeline"};
    app.require_subcommand(1);

    // make-toy-tracks
    auto* mtt = app.add_subcommand("make-toy-tracks", "emit a seeded synthetic tracks CSV");
    uint64_t mtt_seed = 0;
    int mtt_count = 32;
    std::string mtt_basins, mtt_out;
    mtt->add_option("--seed", mtt_seed);
    mtt->add_option("--count", mtt_count);
    mtt->add_option("--basins", mtt_basins, "comma-separated basin codes (default NA,WP)");
    mtt->add_option("--out", mtt_out, "output path (default stdout)");

    // pack-runs
    auto* pr = app.add_subcommand("pack-runs", "pack storms into simulation runs");
    std::string pr_tracks, pr_out;
    pr->add_option("--tracks", pr_tracks)->required();
    pr->add_option("--out", pr_out);

    // build-dataset
    auto* bd = app.add_subcommand("build-dataset", "build feature/target tensors and a manifest");
    surge::BuildOptions bopt;
    std::string bd_mesh, bd_elev;
    int64_t bd_toy_seed = -1;
    std::string bd_window = "-24:12:3";
    bd->add_option("--tracks", bopt.tracks_path)->required();
    bd->add_option("--mesh", bd_mesh, "fort.14 mesh path");
    bd->add_option("--elev", bd_elev, "nodal peak elevation file (mesh mode)");
    bd->add_option("--toy-seed", bd_toy_seed, "build against the synthetic toy world");
    bd->add_option("--out", bopt.out_dir)->required();
    bd->add_option("--extent", bopt.extent);
    bd->add_option("--res", bopt.resolution);
    bd->add_option("--window", bd_window, "forcing window (fixed at -24:12:3)");
    bd->add_option("--min-vmax", bopt.min_vmax);
    bd->add_option("--split-seed", bopt.split_seed);
    bd->add_flag("--pad-short-tracks", bopt.pad_short_tracks);

    // train
    auto* tr = app.add_subcommand("train", "train a model from a dataset manifest");
    std::string tr_manifest, tr_arch = "unet", tr_basin, tr_ckpt = "ckpt", tr_history;
    surge::TrainConfig tcfg;
    surge::ModelConfig mcfg;
    tr->add_option("--manifest", tr_manifest)->required();
    tr->add_option("--arch", tr_arch, "unet | cnn");
    tr->add_option("--depth", mcfg.depth);
    tr->add_option("--base-width", mcfg.base_width);
    tr->add_option("--lr", tcfg.lr_max);
    tr->add_option("--epochs", tcfg.epochs);
    tr->add_option("--batch", tcfg.batch_size);
    tr->add_option("--seed", tcfg.seed);
    tr->add_option("--basin", tr_basin, "train a local model on one basin");
    tr->add_option("--ckpt", tr_ckpt, "checkpoint output directory");
    tr->add_option("--history", tr_history, "training history CSV path");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "per-basin RMSE report on the test split");
    std::string ev_manifest, ev_ckpt, ev_report = "report.csv";
    ev->add_option("--manifest", ev_manifest)->required();
    ev->add_option("--ckpt", ev_ckpt)->required();
    ev->add_option("--report", ev_report);

    // compare-local-global
    auto* cl = app.add_subcommand("compare-local-global", "paired per-basin local-vs-global RMSE report");
    std::string cl_manifest, cl_global, cl_local_dir, cl_out = "local_vs_global.csv";
    cl->add_option("--manifest", cl_manifest)->required();
    cl->add_option("--global-ckpt", cl_global)->required();
    cl->add_option("--local-ckpt-dir", cl_local_dir, "directory with <BASIN>/ checkpoints")
        ->required();
    cl->add_option("--out", cl_out);

    // predict
    auto* pd = app.add_subcommand("predict", "run one feature tensor through a checkpoint");
    std::string pd_ckpt, pd_features, pd_out;
    pd->add_option("--ckpt", pd_ckpt)->required();
    pd->add_option("--features", pd_features)->required();
    pd->add_option("--out", pd_out)->required();

    // gauges
    auto* gg = app.add_subcommand("gauges", "sample a surge field at tidal-gauge locations");
    std::string gg_field, gg_grid, gg_gauges, gg_out = "scatter.csv", gg_model = "model";
    bool gg_nearest = false;
    gg->add_option("--field", gg_field)->required();
    gg->add_option("--grid", gg_grid, "center_lat,center_lon,extent,resolution")->required();
    gg->add_option("--gauges", gg_gauges, "CSV gauge_id,lat,lon,storm_id,observed_max_m")
        ->required();
    gg->add_option("--out", gg_out);
    gg->add_option("--model", gg_model, "model label written to the scatter CSV");
    gg->add_flag("--nearest", gg_nearest, "nearest-cell sampling instead of bilinear");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e);
        return 0;
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (*mtt) return cmd_make_toy_tracks(mtt_seed, mtt_count, mtt_basins, mtt_out);
        if (*pr) return cmd_pack_runs(pr_tracks, pr_out);

        if (*bd) {
            if (bd_toy_seed >= 0) bopt.toy_seed = static_cast<uint64_t>(bd_toy_seed);
            if (!bd_mesh.empty()) bopt.mesh_path = bd_mesh;
            if (!bd_elev.empty()) bopt.elev_path = bd_elev;
            if (bd_window != "-24:12:3")
                throw surge::ConfigError("only the -24:12:3 forcing window is supported");
            auto manifest = surge::build_dataset(bopt);
            std::cerr << manifest.storms.size() << " storms built, " << manifest.skipped.size()
                      << " skipped -> " << bopt.out_dir << "/manifest.json\n";
            return 0;
        }

        if (*tr) {
            auto manifest = surge::load_manifest(tr_manifest);
            std::string dir = std::filesystem::path(tr_manifest).parent_path().string();
            if (dir.empty()) dir = ".";
            tcfg.basin = parse_basin_flag(tr_basin);
            auto train_set = surge::load_samples(manifest, dir, "train", tcfg.basin);
            auto val_set = surge::load_samples(manifest, dir, "val", tcfg.basin);
            if (train_set.empty()) throw surge::ValidationError("train: empty training split");
            mcfg.arch = tr_arch;
            mcfg.in_channels = train_set.front().features.c;
            auto model = surge::build_model(mcfg, tcfg.seed);
            auto result = surge::train(tcfg, train_set, val_set, std::move(model));
            surge::json extra;
            extra["seed"] = tcfg.seed;
            extra["train_config"] = tcfg.canonical();
            extra["train_config_hash"] = surge::fnv1a(tcfg.canonical());
            extra["best_val_loss"] = result.best_val_loss;
            surge::save_checkpoint(tr_ckpt, result.best, extra);
            if (!tr_history.empty()) surge::write_history_csv(tr_history, result.history);
            std::cerr << "best val loss " << result.best_val_loss << " -> " << tr_ckpt << "\n";
            return 0;
        }

        if (*ev) {
            auto manifest = surge::load_manifest(ev_manifest);
            std::string dir = std::filesystem::path(ev_manifest).parent_path().string();
            if (dir.empty()) dir = ".";
            auto model = surge::load_checkpoint(ev_ckpt);
            auto errors = evaluate_split(model, manifest, dir, "test", 3);
            auto report = surge::aggregate_report(ev_ckpt, errors);
            write_report_csv(ev_report, report);
            std::cerr << "report -> " << ev_report << "\n";
            return 0;
        }

        if (*cl) {
            auto manifest = surge::load_manifest(cl_manifest);
            std::string dir = std::filesystem::path(cl_manifest).parent_path().string();
            if (dir.empty()) dir = ".";
            auto global_model = surge::load_checkpoint(cl_global);
            auto global_errors = evaluate_split(global_model, manifest, dir, "test", 3);
            std::map<surge::Basin, std::vector<surge::StormErrors>> local_errors;
            for (int b = 0; b < surge::kNumBasins; ++b) {
                auto basin = static_cast<surge::Basin>(b);
                std::string ck = cl_local_dir + "/" + surge::basin_name(basin);
                if (!std::filesystem::exists(ck + "/manifest.json")) continue;
                auto local_model = surge::load_checkpoint(ck);
                auto errs = evaluate_split(local_model, manifest, dir, "test", 3);
                std::vector<surge::StormErrors> own;
                for (auto& e : errs)
                    if (e.basin == basin) own.push_back(e);
                local_errors.emplace(basin, std::move(own));
            }
            auto rows = surge::compare_local_global(local_errors, global_errors);
            std::ofstream out(cl_out);
            if (!out) throw surge::FormatError("cannot write: " + cl_out);
            out << "basin,local_coast,local_all,global_coast,global_all\n";
            for (const auto& r : rows) {
                out << r.basin << ",";
                if (r.populated)
                    out << r.local_coast << "," << r.local_all << "," << r.global_coast << ","
                        << r.global_all;
                else
                    out << ",,,";
                out << "\n";
            }
            std::cerr << "comparison -> " << cl_out << "\n";
            return 0;
        }

        if (*pd) {
            auto model = surge::load_checkpoint(pd_ckpt);
            auto raw = surge::read_feature_tensor(pd_features);
            auto norm = surge::normalize_features(raw);
            surge::Tensor4<float> x(1, norm.c, norm.h, norm.w);
            x.v = std::move(norm.v);
            auto pred = surge::predict(model, x);
            surge::Field2D field(raw.h, raw.w);
            field.v = pred.v;
            surge::write_field(pd_out, field);
            std::cerr << "prediction -> " << pd_out << "\n";
            return 0;
        }

        if (*gg) {
            auto field = surge::read_field(gg_field);
            auto grid = parse_grid_flag(gg_grid);
            if (grid.resolution != field.h || field.h != field.w)
                throw surge::ConfigError("--grid resolution does not match the field");
            std::ifstream in(gg_gauges);
            if (!in) throw surge::FormatError("cannot open gauges file: " + gg_gauges);
            std::ofstream out(gg_out);
            if (!out) throw surge::FormatError("cannot write: " + gg_out);
            out << "observed,predicted,model,storm_id\n";
            std::string line;
            int line_no = 0, excluded = 0;
            while (std::getline(in, line)) {
                ++line_no;
                if (line.empty() || line.rfind("gauge_id,", 0) == 0) continue;
                auto f = surge::detail::split_csv_line(line);
                if (f.size() != 5)
                    throw surge::ParseError("gauges line " + std::to_string(line_no) +
                                            ": expected 5 fields");
                double lat = surge::detail::parse_num(f[1], line_no, "lat");
                double lon = surge::detail::parse_num(f[2], line_no, "lon");
                double obs = surge::detail::parse_num(f[4], line_no, "observed_max_m");
                auto v = surge::sample_at_gauge(field, grid, lat, lon, gg_nearest);
                if (!v) {
                    ++excluded;
                    std::cerr << "gauge " << f[0] << " outside the window, excluded\n";
                    continue;
                }
                out << obs << "," << *v << "," << gg_model << "," << f[3] << "\n";
            }
            std::cerr << "scatter -> " << gg_out << " (" << excluded << " excluded)\n";
            return 0;
        }
    } catch (const surge::NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const surge::ConfigError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const surge::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
