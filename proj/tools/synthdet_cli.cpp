#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "synthdet/harness/experiment.hpp"

namespace fs = std::filesystem;
using namespace synthdet;

namespace {

detector::DetectorModel load_model(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("checkpoint does not exist: " + path);
    return detector::load_checkpoint(path);
}

DatasetManifest load_manifest_checked(const std::string& path) {
    if (!fs::exists(path)) throw ValidationError("manifest does not exist: " + path);
    return load_manifest(path);
}

std::vector<double> parse_levels(const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw ValidationError("cannot parse level '" + item + "'");
        }
    }
    return out;
}

void print_report_summary(const metrics::EvaluationReport& report) {
    for (const auto& [source, sr] : report.sources) {
        std::cout << "  " << source << ": ap=" << sr.ap
                  << " acc_oracle=" << sr.accuracy_oracle
                  << " acc_uncal=" << sr.accuracy_uncalibrated;
        if (sr.accuracy_two_shot) std::cout << " acc_two_shot=" << *sr.accuracy_two_shot;
        std::cout << "\n";
    }
    std::cout << "  mAP=" << report.map << "\n";
    for (const auto& w : report.warnings) std::cout << "  warning: " << w << "\n";
}

struct DataArgs {
    std::string kind = "decoder_nearest";
    int n = 100;
    int size = 256;
    uint64_t seed = 0;
    int instances = 20;
    std::string out;
    std::string manifest;
    int per_source = 0;
    std::string name = "sample";
};

struct TrainArgs {
    std::string manifest;
    std::string val_manifest;
    std::string preset = "blur_jpeg_05";
    std::string backbone = "tiny_cnn";
    bool pretrained = false;
    int input_size = 224;
    uint64_t seed = 0;
    std::string out = "checkpoint.ckpt";
    detector::TrainSchedule schedule;
};

struct EvalArgs {
    std::string manifest;
    std::string checkpoint;
    std::string resize_mode = "none";
    std::vector<std::string> calibrate;
    uint64_t seed = 0;
    std::string out;
    std::string pr_dir;
};

struct RobustnessArgs {
    std::string manifest;
    std::string checkpoint;
    std::string kind = "blur";
    std::string levels;
    std::string resize_mode = "none";
    std::string out_dir = ".";
};

struct SpectrumArgs {
    std::string manifest;
    std::string source;
    std::string label = "fake";
    size_t n = 2000;
    uint64_t seed = 0;
    std::string out_dir = ".";
};

struct DipArgs {
    std::string manifest;
    std::string out_dir;
    uint64_t seed = 0;
    int stages = 3;
    int width = 16;
    int latent_ch = 8;
    std::string lrs;
    int iters_per_stage = 2000;
    std::string snapshots;
};

struct RankArgs {
    std::string manifest;
    std::string checkpoint;
    std::string percentiles = "0,25,50,75,100";
    bool include_reals = false;
    std::string resize_mode = "none";
    std::string out_dir = ".";
};

int run_data(const DataArgs& a) {
    if (!a.manifest.empty()) {
        DatasetManifest m = load_manifest_checked(a.manifest);
        if (a.per_source > 0) {
            RandomStream rng(a.seed);
            std::map<std::string, std::vector<ImageRecord>> groups;
            for (const auto& r : m.records)
                groups[r.source_id + "/" + to_string(r.split) + "/" + to_string(r.label)].push_back(r);
            DatasetManifest sampled = m;
            sampled.records.clear();
            for (auto& [key, recs] : groups) {
                for (size_t i = recs.size(); i > 1; --i)
                    std::swap(recs[i - 1], recs[rng.uniform_int(0, static_cast<int>(i) - 1)]);
                recs.resize(std::min(recs.size(), static_cast<size_t>(a.per_source)));
                std::sort(recs.begin(), recs.end(),
                          [](const ImageRecord& x, const ImageRecord& y) { return x.id < y.id; });
                sampled.records.insert(sampled.records.end(), recs.begin(), recs.end());
            }
            validate_manifest(sampled);
            const fs::path out = m.dir / (a.name + ".jsonl");
            save_manifest(sampled, out);
            std::cout << "sampled " << sampled.records.size() << " of " << m.records.size()
                      << " records -> " << out.string() << "\n";
        } else {
            std::cout << "manifest ok: " << m.records.size() << " records, " << m.sources.size()
                      << " sources, balanced=" << (m.balanced ? "true" : "false") << "\n";
        }
        return 0;
    }
    if (a.out.empty()) throw ValidationError("data: --out is required for toy generation");
    DatasetManifest m = synth_toy_corpus(a.out, toy_kind_from_string(a.kind), a.n, a.size, a.seed,
                                         a.instances);
    std::cout << "wrote " << m.records.size() << " records -> "
              << (fs::path(a.out) / "manifest.jsonl").string() << "\n";
    return 0;
}

int run_train(const TrainArgs& a) {
    DatasetManifest train_m = load_manifest_checked(a.manifest);
    DatasetManifest val_m = a.val_manifest.empty() ? train_m : load_manifest_checked(a.val_manifest);
    AugmentationPolicy policy = policy_preset(a.preset);
    policy.crop_size = a.input_size;
    detector::BackboneSpec spec{a.backbone, a.pretrained, a.input_size};
    detector::DetectorModel model = detector::build_model(spec, hash_combine(mix64(a.seed), "model"));
    detector::TrainHistory history =
        detector::train(model, train_m, val_m, policy, a.schedule, hash_combine(mix64(a.seed), "train"));
    detector::CheckpointMeta meta;
    meta.policy_preset = a.preset;
    meta.manifest_hash = harness::detail::hex64(
        harness::detail::hash_file(fs::path(a.manifest)));
    meta.schedule = a.schedule;
    detector::save_checkpoint(model, meta, a.out);
    std::cout << "trained " << history.total_epochs << " epochs (" << history.termination_reason
              << "), best val accuracy " << history.best_val_accuracy << " at epoch "
              << history.best_epoch << "\n"
              << "checkpoint -> " << a.out << "\n";
    return 0;
}

int run_eval(const EvalArgs& a) {
    DatasetManifest m = load_manifest_checked(a.manifest);
    detector::DetectorModel model = load_model(a.checkpoint);
    metrics::Scorer scorer = [&](const Image& im) { return detector::score(model, {im})[0]; };

    metrics::EvaluateOptions opts;
    opts.resize_mode = metrics::resize_mode_from_string(a.resize_mode);
    if (!a.calibrate.empty()) {
        RandomStream rng(hash_combine(mix64(a.seed), "calibrate"));
        opts.calibration = metrics::two_shot_calibrate(
            scorer, read_image(a.calibrate[0]), read_image(a.calibrate[1]), 128, rng,
            fs::path(a.calibrate[0]).filename().string(),
            fs::path(a.calibrate[1]).filename().string());
    }
    metrics::EvaluationReport report = metrics::evaluate(scorer, m, opts);
    print_report_summary(report);
    if (!a.out.empty()) {
        std::ofstream f(a.out, std::ios::trunc);
        if (!f) throw StageError("cannot write report: " + a.out);
        f << metrics::report_to_json(report).dump(2) << "\n";
        std::cout << "report -> " << a.out << "\n";
    }
    if (!a.pr_dir.empty()) {
        metrics::write_pr_csv(report, a.pr_dir);
        std::cout << "pr curves -> " << a.pr_dir << "\n";
    }
    return 0;
}

int run_robustness(const RobustnessArgs& a) {
    DatasetManifest m = load_manifest_checked(a.manifest);
    detector::DetectorModel model = load_model(a.checkpoint);
    const auto kind = robustness::perturbation_kind_from_string(a.kind);
    robustness::PerturbationGrid grid = kind == robustness::PerturbationKind::blur
                                            ? robustness::default_blur_grid()
                                            : robustness::default_jpeg_grid();
    if (!a.levels.empty()) grid.levels = parse_levels(a.levels);
    robustness::RobustnessOptions opts;
    opts.resize_mode = metrics::resize_mode_from_string(a.resize_mode);
    robustness::RobustnessCurve curve = robustness::robustness_sweep(model, m, grid, opts);
    fs::create_directories(a.out_dir);
    const std::string stem = robustness::curve_stem(curve);
    robustness::write_curve_csv(curve, fs::path(a.out_dir) / (stem + ".csv"));
    robustness::write_curve_png(curve, fs::path(a.out_dir) / (stem + ".png"));
    for (const auto& p : curve.points)
        std::cout << "  " << robustness::level_label(grid, p.level) << ": ap=" << p.ap
                  << " acc_oracle=" << p.accuracy_oracle << "\n";
    std::cout << "curve -> " << (fs::path(a.out_dir) / (stem + ".csv")).string() << "\n";
    return 0;
}

int run_spectrum(const SpectrumArgs& a) {
    DatasetManifest m = load_manifest_checked(a.manifest);
    std::vector<Image> images;
    for (const auto& rec : m.records) {
        if (rec.source_id != a.source) continue;
        if (a.label == "fake" && rec.label != Label::fake) continue;
        if (a.label == "real" && rec.label != Label::real) continue;
        images.push_back(preprocess_image(read_image(m.resolve(rec)), m.sources.at(rec.source_id)));
    }
    if (images.empty())
        throw ValidationError("no images match source '" + a.source + "' with label " + a.label);
    spectra::SpectrumMap map = spectra::average_spectrum(images, a.n, a.seed, a.source);
    spectra::validate_spectrum(map);
    fs::create_directories(a.out_dir);
    const std::string stem = "spectrum_" + a.source + "_" + a.label;
    spectra::write_spectrum_png(map, fs::path(a.out_dir) / (stem + ".png"));
    spectra::write_spectrum_raw(map, fs::path(a.out_dir) / stem);
    std::cout << "averaged " << map.n_averaged << " spectra, half-band peak ratio "
              << spectra::halfband_peak_ratio(map) << "\n"
              << "map -> " << (fs::path(a.out_dir) / (stem + ".png")).string() << "\n";
    return 0;
}

int run_dip(const DipArgs& a) {
    DatasetManifest m = load_manifest_checked(a.manifest);
    dip::DipConfig config;
    config.stages = a.stages;
    config.width = a.width;
    config.latent_ch = a.latent_ch;
    if (!a.lrs.empty()) config.lr_stages = parse_levels(a.lrs);
    config.iters_per_stage = a.iters_per_stage;
    if (!a.snapshots.empty()) {
        config.snapshot_iters.clear();
        for (double v : parse_levels(a.snapshots))
            config.snapshot_iters.push_back(static_cast<int>(v));
    }
    config.seed = a.seed;
    if (a.out_dir.empty()) throw ValidationError("dip: --out is required");
    DatasetManifest built = dip::build_dip_dataset(m, config, a.out_dir,
                                                   static_cast<int>(config.snapshot_iters.size()));
    std::cout << "dip dataset: " << built.records.size() << " records -> "
              << (fs::path(a.out_dir) / "manifest.jsonl").string() << "\n";
    return 0;
}

int run_rank(const RankArgs& a) {
    DatasetManifest m = load_manifest_checked(a.manifest);
    detector::DetectorModel model = load_model(a.checkpoint);
    harness::RankGallery gallery =
        harness::rank_images(model, m, parse_levels(a.percentiles), a.include_reals,
                             metrics::resize_mode_from_string(a.resize_mode));
    harness::write_gallery(gallery, m, a.out_dir);
    for (const auto& w : gallery.warnings) std::cout << "  warning: " << w << "\n";
    std::cout << "gallery -> " << (fs::path(a.out_dir) / "gallery.html").string() << "\n";
    return 0;
}

int run_report(const std::string& config_path, const std::string& out_override) {
    harness::ExperimentConfig config = harness::load_experiment_config(config_path);
    if (!out_override.empty()) {
        config.output_dir = out_override;
        harness::validate_experiment_config(config);
    }
    harness::ReportBundle bundle = harness::run_experiment(config);
    std::cout << "bundle -> " << bundle.dir.string() << "\n";
    for (const auto& [name, report] : bundle.evals) {
        std::cout << name << ":\n";
        print_report_summary(report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthdet: train and probe a real-vs-CNN-generated image detector"};
    app.require_subcommand(1);

    DataArgs data;
    auto* cmd_data = app.add_subcommand(
        "data", "generate a toy corpus, or validate/subsample an existing manifest");
    cmd_data->add_option("--kind", data.kind, "toy kind: decoder_nearest|decoder_bilinear|dead_leaves");
    cmd_data->add_option("--n", data.n, "toy corpus size");
    cmd_data->add_option("--size", data.size, "toy image side (multiple of 8, >= 224)");
    cmd_data->add_option("--seed", data.seed, "random seed");
    cmd_data->add_option("--instances", data.instances, "distinct toy generator instances");
    cmd_data->add_option("--out", data.out, "output directory for the toy corpus");
    cmd_data->add_option("--manifest", data.manifest, "existing manifest to validate or sample");
    cmd_data->add_option("--per-source", data.per_source,
                         "subsample: records kept per source/split/label group");
    cmd_data->add_option("--name", data.name, "subsample manifest name (written next to the input)");

    TrainArgs train;
    auto* cmd_train = app.add_subcommand("train", "train a detector on a manifest");
    cmd_train->add_option("--manifest", train.manifest, "training manifest")->required();
    cmd_train->add_option("--val-manifest", train.val_manifest, "validation manifest (default: same)");
    cmd_train->add_option("--preset", train.preset,
                          "augmentation preset: no_aug|blur_only|jpeg_only|blur_jpeg_05|blur_jpeg_01");
    cmd_train->add_option("--backbone", train.backbone, "backbone: tiny_cnn|resnet50");
    cmd_train->add_flag("--pretrained", train.pretrained, "use pretrained-style normalization");
    cmd_train->add_option("--input-size", train.input_size, "crop size fed to the model");
    cmd_train->add_option("--seed", train.seed, "random seed");
    cmd_train->add_option("--out", train.out, "checkpoint path");
    cmd_train->add_option("--batch-size", train.schedule.batch_size, "batch size");
    cmd_train->add_option("--lr", train.schedule.lr_initial, "initial learning rate");
    cmd_train->add_option("--patience", train.schedule.plateau_patience, "plateau patience epochs");
    cmd_train->add_option("--max-epochs", train.schedule.max_epochs, "epoch cap");

    EvalArgs eval;
    auto* cmd_eval = app.add_subcommand("eval", "score a test split and report AP/accuracy");
    cmd_eval->add_option("--manifest", eval.manifest, "evaluation manifest")->required();
    cmd_eval->add_option("--checkpoint", eval.checkpoint, "trained checkpoint")->required();
    cmd_eval->add_option("--resize-mode", eval.resize_mode, "none|256 (resize short side first)");
    cmd_eval->add_option("--calibrate", eval.calibrate,
                         "two-shot calibration pair: real.png fake.png")
        ->expected(2);
    cmd_eval->add_option("--seed", eval.seed, "seed for calibration crops");
    cmd_eval->add_option("--out", eval.out, "write the JSON report here");
    cmd_eval->add_option("--pr-dir", eval.pr_dir, "write per-source PR curves as CSV here");

    RobustnessArgs rob;
    auto* cmd_rob = app.add_subcommand("robustness", "sweep a perturbation and plot AP vs level");
    cmd_rob->add_option("--manifest", rob.manifest, "evaluation manifest")->required();
    cmd_rob->add_option("--checkpoint", rob.checkpoint, "trained checkpoint")->required();
    cmd_rob->add_option("--kind", rob.kind, "blur|jpeg");
    cmd_rob->add_option("--levels", rob.levels, "comma-separated levels, first must be 0");
    cmd_rob->add_option("--resize-mode", rob.resize_mode, "none|256");
    cmd_rob->add_option("--out", rob.out_dir, "output directory");

    SpectrumArgs spec;
    auto* cmd_spec = app.add_subcommand("spectrum", "average high-pass residual spectra");
    cmd_spec->add_option("--manifest", spec.manifest, "source manifest")->required();
    cmd_spec->add_option("--source", spec.source, "source id to average")->required();
    cmd_spec->add_option("--label", spec.label, "fake|real|all");
    cmd_spec->add_option("--n", spec.n, "max images to average");
    cmd_spec->add_option("--seed", spec.seed, "subset seed");
    cmd_spec->add_option("--out", spec.out_dir, "output directory");

    DipArgs dip_args;
    auto* cmd_dip = app.add_subcommand("dip", "reconstruct reals with a deep image prior");
    cmd_dip->add_option("--manifest", dip_args.manifest, "manifest with real targets")->required();
    cmd_dip->add_option("--out", dip_args.out_dir, "output dataset directory")->required();
    cmd_dip->add_option("--seed", dip_args.seed, "random seed");
    cmd_dip->add_option("--stages", dip_args.stages, "upsampling stages");
    cmd_dip->add_option("--width", dip_args.width, "channels per hidden layer");
    cmd_dip->add_option("--latent", dip_args.latent_ch, "latent noise channels");
    cmd_dip->add_option("--lrs", dip_args.lrs, "comma-separated decreasing stage learning rates");
    cmd_dip->add_option("--iters-per-stage", dip_args.iters_per_stage, "iterations per lr stage");
    cmd_dip->add_option("--snapshots", dip_args.snapshots, "comma-separated snapshot iterations");

    RankArgs rank;
    auto* cmd_rank = app.add_subcommand("rank", "pick percentile images by fakeness score");
    cmd_rank->add_option("--manifest", rank.manifest, "evaluation manifest")->required();
    cmd_rank->add_option("--checkpoint", rank.checkpoint, "trained checkpoint")->required();
    cmd_rank->add_option("--percentiles", rank.percentiles, "comma-separated percentiles");
    cmd_rank->add_flag("--include-reals", rank.include_reals, "also rank reals and fakes together");
    cmd_rank->add_option("--resize-mode", rank.resize_mode, "none|256");
    cmd_rank->add_option("--out", rank.out_dir, "gallery directory");

    std::string report_config, report_out;
    auto* cmd_report = app.add_subcommand(
        "report", std::string("run a full experiment from a config file (cache root: $") +
                      harness::kCacheEnvVar + ", default <output_dir>/cache)");
    cmd_report->add_option("--config", report_config, "experiment config JSON")->required();
    cmd_report->add_option("--out", report_out, "override the config's output_dir");

    try {
        app.parse(argc, argv);
        if (*cmd_data) return run_data(data);
        if (*cmd_train) return run_train(train);
        if (*cmd_eval) return run_eval(eval);
        if (*cmd_rob) return run_robustness(rob);
        if (*cmd_spec) return run_spectrum(spec);
        if (*cmd_dip) return run_dip(dip_args);
        if (*cmd_rank) return run_rank(rank);
        if (*cmd_report) return run_report(report_config, report_out);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 2;
    } catch (const StageError& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "stage failure: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
