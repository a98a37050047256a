// Command-line front end: dataset splitting, training, inference, metric
// evaluation, and classical thresholding baselines. Exit codes: 0 success,
// 1 configuration, 2 data/IO, 3 numeric failure.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>

#include "amsdb/checkpoint.hpp"
#include "amsdb/fsio.hpp"
#include "amsdb/metrics.hpp"
#include "amsdb/report.hpp"
#include "amsdb/synth.hpp"
#include "amsdb/threshold.hpp"
#include "amsdb/trainer.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using namespace amsdb;
using json = nlohmann::json;

namespace {

std::string default_out_dir() {
    const char* env = std::getenv("AMSDB_OUT_DIR");
    return (env != nullptr && *env != '\0') ? env : ".";
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
}

std::string stem_of(const std::string& path) {
    return fs::path(path).stem().string();
}

bool is_image_file(const fs::path& p) {
    const std::string ext = p.extension().string();
    return ext == ".png" || ext == ".pgm" || ext == ".ppm";
}

// ---- train ----

struct TrainArgs {
    std::string manifest, out_dir = default_out_dir();
    std::string checkpoint, log_csv, report_json;
    std::vector<i64> dims{16, 32}, depths{1, 1};
    i64 in_channels = 3, state_dim = 8, expand = 2;
    std::string skip_mode = "dog_residual";
    int dog_scales = 3;
    float dog_sigma0 = 0.8f;
    TrainConfig tc;
};

json train_config_json(const TrainArgs& a) {
    return json{{"manifest", a.manifest},
                {"dims", a.dims},
                {"depths", a.depths},
                {"in_channels", a.in_channels},
                {"state_dim", a.state_dim},
                {"expand", a.expand},
                {"skip_mode", a.skip_mode},
                {"dog_scales", a.dog_scales},
                {"dog_sigma0", a.dog_sigma0},
                {"batch", a.tc.batch},
                {"steps", a.tc.steps},
                {"lr", a.tc.lr},
                {"seed", a.tc.seed},
                {"patch", a.tc.patch},
                {"stride", a.tc.stride},
                {"val_fraction", a.tc.val_fraction},
                {"val_every", a.tc.val_every},
                {"log_every", a.tc.log_every},
                {"augment", a.tc.augment},
                {"jitter", a.tc.jitter}};
}

void run_train(const TrainArgs& a) {
    ModelConfig mc;
    mc.in_channels = a.in_channels;
    mc.dims = a.dims;
    mc.depths = a.depths;
    mc.state_dim = a.state_dim;
    mc.expand = a.expand;
    mc.skip_mode = skip_mode_from_name(a.skip_mode);
    mc.dog_scales = a.dog_scales;
    mc.dog_sigma0 = a.dog_sigma0;

    ensure_dir(a.out_dir);
    const std::string ckpt_path =
        a.checkpoint.empty() ? a.out_dir + "/model.amsdb" : a.checkpoint;
    const std::string csv_path =
        a.log_csv.empty() ? a.out_dir + "/train_log.csv" : a.log_csv;
    const std::string report_path = a.report_json.empty()
                                        ? a.out_dir + "/train_report.json"
                                        : a.report_json;

    const DatasetIndex index = parse_manifest(a.manifest);
    const std::vector<LoadedPair> data = load_all(index, a.tc.patch);

    Rng master(a.tc.seed);
    Rng model_rng = master.fork(1);
    Rng train_rng = master.fork(2);
    Model model(mc, model_rng);
    Adam adam(model.parameters(), AdamConfig{a.tc.lr, 0.9f, 0.999f, 1e-8f});
    const TrainStats stats = train_loop(model, adam, data, a.tc, train_rng);

    save_checkpoint(ckpt_path,
                    checkpoint_from_model(model, a.tc.steps, a.tc.seed, &adam));

    std::string csv = "step,loss,val_fm\n";
    for (const auto& r : stats.rows) {
        char buf[96];
        if (r.has_val)
            std::snprintf(buf, sizeof(buf), "%lld,%.6f,%.4f\n",
                          static_cast<long long>(r.step),
                          static_cast<double>(r.loss), r.val_fm);
        else
            std::snprintf(buf, sizeof(buf), "%lld,%.6f,\n",
                          static_cast<long long>(r.step),
                          static_cast<double>(r.loss));
        csv += buf;
    }
    atomic_write_file(csv_path, csv);

    json report{{"config", train_config_json(a)},
                {"result",
                 {{"checkpoint", ckpt_path},
                  {"train_patches", stats.train_patches},
                  {"val_patches", stats.val_patches},
                  {"param_count", model.param_count()},
                  {"final_loss", stats.rows.empty()
                                     ? 0.0
                                     : static_cast<double>(
                                           stats.rows.back().loss)}}}};
    atomic_write_file(report_path, report.dump(2) + "\n");

    std::printf("checkpoint: %s\n", ckpt_path.c_str());
    std::printf("log: %s\n", csv_path.c_str());
    if (!stats.rows.empty())
        std::printf("final loss: %.6f\n",
                    static_cast<double>(stats.rows.back().loss));
}

// ---- infer ----

struct InferArgs {
    std::string checkpoint, out_dir = default_out_dir();
    std::vector<std::string> images;
    i64 patch = 128, stride = 64;
};

void run_infer(const InferArgs& a) {
    const Checkpoint ck = load_checkpoint(a.checkpoint);
    Rng tmp(0);
    Model model(ck.config, tmp);
    try {
        apply_to_model(ck, model);
    } catch (const DataError& e) {
        // Parameter-level mismatches are a configuration problem here.
        throw ConfigError(std::string("incompatible checkpoint: ") + e.what());
    }
    ensure_dir(a.out_dir);
    for (const auto& path : a.images) {
        const Image img = read_image(path);
        const Mask m = infer_image(model, img, a.patch, a.stride);
        const Image out = mask_to_image(m);
        const std::string stem = a.out_dir + "/" + stem_of(path);
        write_image(stem + ".png", out);
        write_image(stem + ".pgm", out);
        std::printf("%s -> %s.png\n", path.c_str(), stem.c_str());
    }
}

// ---- eval ----

struct EvalArgs {
    std::string pred_dir, gt_dir, out_dir = default_out_dir();
};

std::map<std::string, std::string> list_images(const std::string& dir,
                                               bool strip_gt_suffix) {
    if (!fs::is_directory(dir)) throw DataError(dir + " is not a directory");
    std::map<std::string, std::string> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file() || !is_image_file(e.path())) continue;
        std::string stem = e.path().stem().string();
        if (strip_gt_suffix && stem.size() > 3 &&
            stem.compare(stem.size() - 3, 3, "_gt") == 0)
            stem.resize(stem.size() - 3);
        out[stem] = e.path().string();  // ties: last in iteration order
    }
    return out;
}

void run_eval(const EvalArgs& a) {
    const auto preds = list_images(a.pred_dir, false);
    const auto gts = list_images(a.gt_dir, true);
    std::string unpaired;
    for (const auto& [stem, path] : preds)
        if (gts.find(stem) == gts.end())
            unpaired += (unpaired.empty() ? "" : ", ") + stem;
    for (const auto& [stem, path] : gts)
        if (preds.find(stem) == preds.end())
            unpaired += (unpaired.empty() ? "" : ", ") + stem;
    if (!unpaired.empty())
        throw DataError("unpaired images: " + unpaired);
    if (preds.empty()) throw DataError("no images found in " + a.pred_dir);

    std::vector<EvalRow> rows;
    for (const auto& [stem, path] : preds) {
        const Mask pred = mask_from_image(read_image(path));
        const Mask gt = mask_from_image(read_image(gts.at(stem)));
        rows.push_back({stem, evaluate_pair(pred, gt)});
    }
    const EvalSummary summary = summarize(std::move(rows));
    ensure_dir(a.out_dir);
    write_eval_report(a.out_dir + "/report.txt", a.out_dir + "/report.json",
                      {{"pred_dir", a.pred_dir}, {"gt_dir", a.gt_dir}},
                      summary);
    std::printf("images: %zu (defined: %lld)\n", summary.rows.size(),
                static_cast<long long>(summary.defined_rows));
    if (summary.mean.defined)
        std::printf("mean: psnr=%.4f fmeasure=%.4f pseudo_fmeasure=%.4f\n",
                    summary.mean.psnr, summary.mean.fmeasure,
                    summary.mean.pseudo_fmeasure);
    std::printf("report: %s/report.txt\n", a.out_dir.c_str());
}

// ---- baseline ----

struct BaselineArgs {
    std::string method, out_dir = default_out_dir();
    std::vector<std::string> images;
    i64 window = 25;
    double k = 0.2, t_percent = 15.0;
};

void run_baseline(const BaselineArgs& a) {
    ensure_dir(a.out_dir);
    for (const auto& path : a.images) {
        const Image gray = to_gray(read_image(path));
        Mask m;
        if (a.method == "otsu") {
            auto [t, mask] = otsu(gray);
            m = std::move(mask);
            std::printf("%s: otsu threshold bin %d\n", path.c_str(), t);
        } else if (a.method == "sauvola") {
            m = sauvola(gray, a.window, a.k);
        } else if (a.method == "bradley") {
            m = bradley(gray, a.window, a.t_percent);
        } else {
            throw ConfigError("unknown method '" + a.method +
                              "' (otsu, sauvola, bradley)");
        }
        const Image out = mask_to_image(m);
        const std::string stem = a.out_dir + "/" + stem_of(path);
        write_image(stem + ".png", out);
        write_image(stem + ".pgm", out);
        std::printf("%s -> %s.png\n", path.c_str(), stem.c_str());
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"document image binarisation toolkit"};
    app.require_subcommand(1);

    // split
    auto sp = std::make_shared<std::pair<std::string, std::string>>();
    auto sp_out = std::make_shared<std::string>(default_out_dir());
    CLI::App* split = app.add_subcommand("split", "leave-one-year-out split");
    split->add_option("--manifest", sp->first, "dataset manifest")->required();
    split->add_option("--year", sp->second, "held-out year")->required();
    split->add_option("--out-dir", *sp_out, "output directory");
    split->callback([sp, sp_out] {
        const DatasetIndex index = parse_manifest(sp->first);
        auto [train, test] = leave_one_out_split(index, sp->second);
        ensure_dir(*sp_out);
        write_manifest(*sp_out + "/train.manifest", train);
        write_manifest(*sp_out + "/test.manifest", test);
        std::printf("train: %zu entries -> %s/train.manifest\n",
                    train.entries.size(), sp_out->c_str());
        std::printf("test:  %zu entries -> %s/test.manifest\n",
                    test.entries.size(), sp_out->c_str());
    });

    // synth
    struct SynthArgs {
        std::string out_dir = default_out_dir();
        i64 count = 8, size = 128;
        std::uint64_t seed = 42;
    };
    auto sy = std::make_shared<SynthArgs>();
    CLI::App* synth = app.add_subcommand("synth", "write a synthetic corpus");
    synth->add_option("--out-dir", sy->out_dir, "output directory");
    synth->add_option("--count", sy->count, "number of pairs");
    synth->add_option("--size", sy->size, "image size");
    synth->add_option("--seed", sy->seed, "rng seed");
    synth->callback([sy] {
        ensure_dir(sy->out_dir);
        const DatasetIndex index =
            write_synth_corpus(sy->out_dir, sy->count, sy->size, sy->seed);
        std::printf("%zu pairs -> %s/manifest.tsv\n", index.entries.size(),
                    sy->out_dir.c_str());
    });

    // train
    auto ta = std::make_shared<TrainArgs>();
    CLI::App* train = app.add_subcommand("train", "train a model");
    train->add_option("--manifest", ta->manifest)->required();
    train->add_option("--out-dir", ta->out_dir);
    train->add_option("--checkpoint", ta->checkpoint,
                      "checkpoint path (default <out-dir>/model.amsdb)");
    train->add_option("--log", ta->log_csv,
                      "loss log path (default <out-dir>/train_log.csv)");
    train->add_option("--dims", ta->dims, "stage dims")->delimiter(',');
    train->add_option("--depths", ta->depths, "blocks per stage")
        ->delimiter(',');
    train->add_option("--in-channels", ta->in_channels);
    train->add_option("--state-dim", ta->state_dim);
    train->add_option("--expand", ta->expand);
    train->add_option("--skip-mode", ta->skip_mode,
                      "plain | dog | dog_residual");
    train->add_option("--dog-scales", ta->dog_scales);
    train->add_option("--dog-sigma0", ta->dog_sigma0);
    train->add_option("--batch", ta->tc.batch);
    train->add_option("--steps", ta->tc.steps);
    train->add_option("--lr", ta->tc.lr);
    train->add_option("--seed", ta->tc.seed);
    train->add_option("--patch", ta->tc.patch);
    train->add_option("--stride", ta->tc.stride);
    train->add_option("--val-fraction", ta->tc.val_fraction);
    train->add_option("--val-every", ta->tc.val_every);
    train->add_option("--log-every", ta->tc.log_every);
    train->add_flag("--augment,!--no-augment", ta->tc.augment,
                    "random crop/flip/rotation augmentation");
    train->add_option("--jitter", ta->tc.jitter);
    train->callback([ta] { run_train(*ta); });

    // infer
    auto ia = std::make_shared<InferArgs>();
    CLI::App* infer = app.add_subcommand("infer", "binarise images");
    infer->add_option("--checkpoint", ia->checkpoint)->required();
    infer->add_option("--images", ia->images, "input images")
        ->required()
        ->expected(-1);
    infer->add_option("--out-dir", ia->out_dir);
    infer->add_option("--patch", ia->patch);
    infer->add_option("--stride", ia->stride);
    infer->callback([ia] { run_infer(*ia); });

    // eval
    auto ea = std::make_shared<EvalArgs>();
    CLI::App* eval = app.add_subcommand("eval", "compare predictions to gt");
    eval->add_option("--pred-dir", ea->pred_dir)->required();
    eval->add_option("--gt-dir", ea->gt_dir)->required();
    eval->add_option("--out-dir", ea->out_dir);
    eval->callback([ea] { run_eval(*ea); });

    // baseline
    auto ba = std::make_shared<BaselineArgs>();
    CLI::App* baseline =
        app.add_subcommand("baseline", "classical thresholding");
    baseline->add_option("--method", ba->method, "otsu | sauvola | bradley")
        ->required();
    baseline->add_option("--images", ba->images)->required()->expected(-1);
    baseline->add_option("--out-dir", ba->out_dir);
    baseline->add_option("--window", ba->window);
    baseline->add_option("--k", ba->k);
    baseline->add_option("--t-percent", ba->t_percent);
    baseline->callback([ba] { run_baseline(*ba); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "unexpected error: %s\n", e.what());
        return 1;
    }
    return 0;
}
