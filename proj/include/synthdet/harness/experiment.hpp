#pragma once

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "synthdet/augment/policy.hpp"
#include "synthdet/corpus/toy.hpp"
#include "synthdet/detector/checkpoint.hpp"
#include "synthdet/detector/train.hpp"
#include "synthdet/dip/dip.hpp"
#include "synthdet/harness/rank.hpp"
#include "synthdet/metrics/evaluate.hpp"
#include "synthdet/robustness/robustness.hpp"
#include "synthdet/spectra/spectrum.hpp"

namespace synthdet::harness {

inline constexpr const char* kCacheEnvVar = "SYNTHDET_CACHE";

struct ToySourceSpec {
    ToyKind kind = ToyKind::decoder_nearest;
    int n = 100;
    int size = 256;
    int instances = 20;
};

struct EvalTarget {
    std::string name;
    std::filesystem::path manifest_path;   // empty and no toy spec: the training corpus
    std::optional<ToySourceSpec> toy;
};

struct SpectraTarget {
    std::string corpus;          // "train" or an eval target name
    std::string source_id;
    std::string label = "fake";  // fake | real | all
    size_t n_max = 2000;
};

struct DipStage {
    std::filesystem::path targets_manifest;
    int max_targets = 5;
    dip::DipConfig config;
};

struct ExperimentConfig {
    uint64_t seed = 0;
    std::filesystem::path output_dir;

    std::filesystem::path train_manifest;  // exactly one of this or train_toy
    std::optional<ToySourceSpec> train_toy;
    std::string preset = "blur_jpeg_05";
    detector::BackboneSpec backbone{"tiny_cnn", false, 224};
    detector::TrainSchedule schedule;

    std::vector<EvalTarget> evals;
    metrics::ResizeMode resize_mode = metrics::ResizeMode::none;
    std::optional<std::pair<std::filesystem::path, std::filesystem::path>> calibration_pair;
    std::vector<robustness::PerturbationGrid> robustness_grids;
    std::vector<SpectraTarget> spectra_targets;
    std::optional<DipStage> dip_stage;
    std::vector<double> rank_percentiles = {0, 25, 50, 75, 100};
    bool rank_include_reals = false;
};

namespace detail {

inline nlohmann::json toy_to_json(const ToySourceSpec& t) {
    return {{"kind", to_string(t.kind)}, {"n", t.n}, {"size", t.size}, {"instances", t.instances}};
}

inline ToySourceSpec toy_from_json(const nlohmann::json& j) {
    ToySourceSpec t;
    t.kind = toy_kind_from_string(j.at("kind").get<std::string>());
    t.n = j.at("n").get<int>();
    t.size = j.value("size", 256);
    t.instances = j.value("instances", 20);
    return t;
}

inline void schedule_overrides(detector::TrainSchedule& s, const nlohmann::json& j) {
    s.beta1 = j.value("beta1", s.beta1);
    s.beta2 = j.value("beta2", s.beta2);
    s.batch_size = j.value("batch_size", s.batch_size);
    s.lr_initial = j.value("lr_initial", s.lr_initial);
    s.drop_factor = j.value("drop_factor", s.drop_factor);
    s.plateau_patience = j.value("plateau_patience", s.plateau_patience);
    s.plateau_threshold = j.value("plateau_threshold", s.plateau_threshold);
    s.lr_min = j.value("lr_min", s.lr_min);
    s.max_epochs = j.value("max_epochs", s.max_epochs);
}

inline nlohmann::json grid_to_json(const robustness::PerturbationGrid& g) {
    return {{"kind", robustness::to_string(g.kind)}, {"levels", g.levels}};
}

inline std::string hex64(uint64_t h) {
    std::ostringstream os;
    os << std::hex << std::setfill('0') << std::setw(16) << h;
    return os.str();
}

inline uint64_t hash_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw StageError("cannot hash missing file: " + path.string());
    uint64_t h = kFnvOffset;
    char buf[65536];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0)
        h = fnv1a64(buf, static_cast<size_t>(f.gcount()), h);
    return h;
}

}  // namespace detail

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    nlohmann::json train;
    if (c.train_toy)
        train["toy"] = detail::toy_to_json(*c.train_toy);
    else
        train["manifest"] = c.train_manifest.string();
    train["preset"] = c.preset;
    train["backbone"] = {{"architecture", c.backbone.architecture_id},
                         {"pretrained", c.backbone.pretrained},
                         {"input_size", c.backbone.input_size}};
    train["schedule"] = detector::detail::schedule_to_json(c.schedule);

    nlohmann::json evals = nlohmann::json::array();
    for (const auto& e : c.evals) {
        nlohmann::json je = {{"name", e.name}};
        if (e.toy)
            je["toy"] = detail::toy_to_json(*e.toy);
        else if (!e.manifest_path.empty())
            je["manifest"] = e.manifest_path.string();
        evals.push_back(je);
    }

    nlohmann::json options;
    options["resize_mode"] = metrics::to_string(c.resize_mode);
    if (c.calibration_pair)
        options["calibrate"] = {{"real", c.calibration_pair->first.string()},
                                {"fake", c.calibration_pair->second.string()}};
    if (!c.robustness_grids.empty()) {
        nlohmann::json grids = nlohmann::json::array();
        for (const auto& g : c.robustness_grids) grids.push_back(detail::grid_to_json(g));
        options["robustness"] = grids;
    }
    if (!c.spectra_targets.empty()) {
        nlohmann::json sp = nlohmann::json::array();
        for (const auto& t : c.spectra_targets)
            sp.push_back({{"corpus", t.corpus},
                          {"source", t.source_id},
                          {"label", t.label},
                          {"n", t.n_max}});
        options["spectra"] = sp;
    }
    if (c.dip_stage) {
        const auto& d = *c.dip_stage;
        options["dip"] = {{"manifest", d.targets_manifest.string()},
                          {"max_targets", d.max_targets},
                          {"stages", d.config.stages},
                          {"width", d.config.width},
                          {"latent_ch", d.config.latent_ch},
                          {"lr_stages", d.config.lr_stages},
                          {"iters_per_stage", d.config.iters_per_stage},
                          {"snapshot_iters", d.config.snapshot_iters}};
    }
    options["rank"] = {{"percentiles", c.rank_percentiles},
                       {"include_reals", c.rank_include_reals}};

    return {{"seed", c.seed},
            {"output_dir", c.output_dir.string()},
            {"train", train},
            {"eval", evals},
            {"options", options}};
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c;
    c.seed = j.value("seed", 0ull);
    c.output_dir = j.value("output_dir", std::string());

    const auto& train = j.at("train");
    if (train.contains("toy")) c.train_toy = detail::toy_from_json(train.at("toy"));
    if (train.contains("manifest")) c.train_manifest = train.at("manifest").get<std::string>();
    c.preset = train.value("preset", c.preset);
    if (train.contains("backbone")) {
        const auto& b = train.at("backbone");
        c.backbone.architecture_id = b.value("architecture", c.backbone.architecture_id);
        c.backbone.pretrained = b.value("pretrained", c.backbone.pretrained);
        c.backbone.input_size = b.value("input_size", c.backbone.input_size);
    }
    if (train.contains("schedule")) detail::schedule_overrides(c.schedule, train.at("schedule"));

    for (const auto& je : j.value("eval", nlohmann::json::array())) {
        EvalTarget e;
        e.name = je.at("name").get<std::string>();
        if (je.contains("toy")) e.toy = detail::toy_from_json(je.at("toy"));
        if (je.contains("manifest")) e.manifest_path = je.at("manifest").get<std::string>();
        c.evals.push_back(std::move(e));
    }

    if (j.contains("options")) {
        const auto& o = j.at("options");
        c.resize_mode = metrics::resize_mode_from_string(o.value("resize_mode", "none"));
        if (o.contains("calibrate"))
            c.calibration_pair = {{o.at("calibrate").at("real").get<std::string>()},
                                  {o.at("calibrate").at("fake").get<std::string>()}};
        for (const auto& jg : o.value("robustness", nlohmann::json::array())) {
            robustness::PerturbationGrid g;
            g.kind = robustness::perturbation_kind_from_string(jg.at("kind").get<std::string>());
            if (jg.contains("levels"))
                g.levels = jg.at("levels").get<std::vector<double>>();
            else
                g = g.kind == robustness::PerturbationKind::blur ? robustness::default_blur_grid()
                                                                 : robustness::default_jpeg_grid();
            c.robustness_grids.push_back(std::move(g));
        }
        for (const auto& jt : o.value("spectra", nlohmann::json::array())) {
            SpectraTarget t;
            t.corpus = jt.value("corpus", "train");
            t.source_id = jt.at("source").get<std::string>();
            t.label = jt.value("label", "fake");
            t.n_max = jt.value("n", static_cast<size_t>(2000));
            c.spectra_targets.push_back(std::move(t));
        }
        if (o.contains("dip")) {
            const auto& jd = o.at("dip");
            DipStage d;
            d.targets_manifest = jd.at("manifest").get<std::string>();
            d.max_targets = jd.value("max_targets", 5);
            d.config.stages = jd.value("stages", d.config.stages);
            d.config.width = jd.value("width", d.config.width);
            d.config.latent_ch = jd.value("latent_ch", d.config.latent_ch);
            if (jd.contains("lr_stages"))
                d.config.lr_stages = jd.at("lr_stages").get<std::vector<double>>();
            d.config.iters_per_stage = jd.value("iters_per_stage", d.config.iters_per_stage);
            if (jd.contains("snapshot_iters"))
                d.config.snapshot_iters = jd.at("snapshot_iters").get<std::vector<int>>();
            c.dip_stage = std::move(d);
        }
        if (o.contains("rank")) {
            c.rank_percentiles =
                o.at("rank").value("percentiles", std::vector<double>{0, 25, 50, 75, 100});
            c.rank_include_reals = o.at("rank").value("include_reals", false);
        }
    }
    return c;
}

inline void validate_experiment_config(const ExperimentConfig& c) {
    if (c.output_dir.empty()) throw ValidationError("experiment config needs an output_dir");
    if (c.train_toy.has_value() == !c.train_manifest.empty())
        throw ValidationError("experiment train source must be exactly one of toy or manifest");
    if (!c.train_manifest.empty() && !std::filesystem::exists(c.train_manifest))
        throw ValidationError("train manifest does not exist: " + c.train_manifest.string());
    policy_preset(c.preset);
    detector::validate_schedule(c.schedule);
    if (c.backbone.architecture_id != "tiny_cnn" && c.backbone.architecture_id != "resnet50")
        throw ValidationError("unknown backbone: " + c.backbone.architecture_id);

    std::set<std::string> names{"train"};
    for (const auto& e : c.evals) {
        if (e.name.empty()) throw ValidationError("eval target needs a name");
        if (!names.insert(e.name).second)
            throw ValidationError("duplicate eval target name: " + e.name);
        if (e.toy && !e.manifest_path.empty())
            throw ValidationError("eval target '" + e.name + "' must not set both toy and manifest");
        if (!e.manifest_path.empty() && !std::filesystem::exists(e.manifest_path))
            throw ValidationError("eval manifest does not exist: " + e.manifest_path.string());
    }
    if (c.calibration_pair) {
        for (const auto& p : {c.calibration_pair->first, c.calibration_pair->second})
            if (!std::filesystem::exists(p))
                throw ValidationError("calibration image does not exist: " + p.string());
    }
    for (const auto& g : c.robustness_grids) robustness::validate_grid(g);
    for (const auto& t : c.spectra_targets) {
        if (!names.count(t.corpus))
            throw ValidationError("spectra target references unknown corpus: " + t.corpus);
        if (t.label != "fake" && t.label != "real" && t.label != "all")
            throw ValidationError("spectra label must be fake, real, or all");
        if (t.n_max < 1) throw ValidationError("spectra n must be >= 1");
    }
    if (c.dip_stage) {
        dip::validate_dip_config(c.dip_stage->config);
        if (c.dip_stage->max_targets < 1) throw ValidationError("dip max_targets must be >= 1");
        if (!std::filesystem::exists(c.dip_stage->targets_manifest))
            throw ValidationError("dip targets manifest does not exist: " +
                                  c.dip_stage->targets_manifest.string());
    }
    if (c.rank_percentiles.empty()) throw ValidationError("rank needs at least one percentile");
    for (double p : c.rank_percentiles)
        if (!(p >= 0.0 && p <= 100.0)) throw ValidationError("rank percentile outside [0,100]");
}

inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open experiment config: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("experiment config parse error: " + std::string(e.what()));
    }
    ExperimentConfig c;
    try {
        c = config_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("experiment config field error: " + std::string(e.what()));
    }
    validate_experiment_config(c);
    return c;
}

struct ReportBundle {
    std::filesystem::path dir;
    nlohmann::json report;
    detector::TrainHistory history;
    std::map<std::string, metrics::EvaluationReport> evals;
};

inline std::filesystem::path cache_root(const ExperimentConfig& c) {
    if (const char* env = std::getenv(kCacheEnvVar); env && *env) return env;
    return c.output_dir / "cache";
}

namespace detail {

// Toy corpora live under the cache root, keyed by their full generation
// parameters, so identical specs are generated once and reused byte-for-byte.
inline DatasetManifest materialize_toy(const ToySourceSpec& t, uint64_t seed,
                                       const std::filesystem::path& cache) {
    const uint64_t key = hash_combine(mix64(seed), "toy", to_string(t.kind), t.n, t.size, t.instances);
    const std::filesystem::path dir = cache / "corpora" / (std::string(to_string(t.kind)) + "_" + hex64(key));
    const std::filesystem::path manifest = dir / "manifest.jsonl";
    if (std::filesystem::exists(manifest)) return load_manifest(manifest);
    return synth_toy_corpus(dir, t.kind, t.n, t.size, seed, t.instances);
}

template <typename Fn>
void run_stage(const std::string& name, const std::filesystem::path& bundle_dir, Fn&& fn) {
    try {
        fn();
    } catch (const std::exception& e) {
        nlohmann::json marker = {{"failed_stage", name}, {"error", e.what()}};
        std::ofstream mf(bundle_dir / "partial.json", std::ios::trunc);
        if (mf) mf << marker.dump(2) << "\n";
        if (dynamic_cast<const ValidationError*>(&e))
            throw ValidationError("stage '" + name + "' failed: " + e.what());
        throw StageError("stage '" + name + "' failed: " + e.what());
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw StageError("cannot write " + path.string());
    f << text;
}

}  // namespace detail

// Runs data -> train -> evaluate -> robustness -> spectra -> (dip) -> rank,
// writing every artifact under output_dir and indexing them in report.json.
// Deterministic for a fixed config and seed; no timestamps are recorded.
inline ReportBundle run_experiment(const ExperimentConfig& config) {
    validate_experiment_config(config);
    const std::filesystem::path out = config.output_dir;
    std::filesystem::create_directories(out);
    std::filesystem::remove(out / "partial.json");
    const std::filesystem::path cache = cache_root(config);
    std::filesystem::create_directories(cache / "corpora");
    std::filesystem::create_directories(cache / "checkpoints");

    const nlohmann::json resolved = config_to_json(config);
    detail::write_text(out / "config.resolved.json", resolved.dump(2) + "\n");

    ReportBundle bundle;
    bundle.dir = out;
    nlohmann::json report;
    report["config"] = resolved;

    // data
    DatasetManifest train_m;
    std::map<std::string, DatasetManifest> eval_ms;
    std::vector<std::string> eval_order;
    detail::run_stage("data", out, [&] {
        if (config.train_toy)
            train_m = detail::materialize_toy(*config.train_toy,
                                              hash_combine(mix64(config.seed), "train-corpus"), cache);
        else
            train_m = load_manifest(config.train_manifest);

        std::vector<EvalTarget> targets = config.evals;
        if (targets.empty()) targets.push_back({"in_dist", {}, std::nullopt});
        for (const auto& t : targets) {
            if (t.toy)
                eval_ms[t.name] = detail::materialize_toy(
                    *t.toy, hash_combine(mix64(config.seed), "eval-corpus", t.name), cache);
            else if (!t.manifest_path.empty())
                eval_ms[t.name] = load_manifest(t.manifest_path);
            else
                eval_ms[t.name] = train_m;
            eval_order.push_back(t.name);
        }
    });

    // train
    detector::DetectorModel model;
    detail::run_stage("train", out, [&] {
        nlohmann::json key_fields = {
            {"manifest", detail::hex64(detail::hash_file(train_m.dir / "manifest.jsonl"))},
            {"preset", config.preset},
            {"schedule", detector::detail::schedule_to_json(config.schedule)},
            {"backbone", resolved["train"]["backbone"]},
            {"seed", config.seed}};
        const std::string key = detail::hex64(fnv1a64(key_fields.dump()));
        const std::filesystem::path ckpt = cache / "checkpoints" / (key + ".ckpt");
        const std::filesystem::path hist = cache / "checkpoints" / (key + ".history.json");

        detector::CheckpointMeta meta;
        meta.policy_preset = config.preset;
        meta.manifest_hash = key_fields["manifest"].get<std::string>();
        meta.schedule = config.schedule;

        if (std::filesystem::exists(ckpt) && std::filesystem::exists(hist)) {
            model = detector::load_checkpoint(ckpt);
            std::ifstream hf(hist);
            nlohmann::json jh = nlohmann::json::parse(hf);
            bundle.history.total_epochs = jh.at("total_epochs").get<int>();
            bundle.history.termination_reason = jh.at("termination_reason").get<std::string>();
            bundle.history.best_epoch = jh.at("best_epoch").get<int>();
            bundle.history.best_val_accuracy = jh.at("best_val_accuracy").get<double>();
            for (const auto& je : jh.at("epochs"))
                bundle.history.epochs.push_back({je.at("train_loss").get<double>(),
                                                 je.at("val_accuracy").get<double>(),
                                                 je.at("lr").get<double>()});
        } else {
            model = detector::build_model(config.backbone,
                                          hash_combine(mix64(config.seed), "model"));
            AugmentationPolicy policy = policy_preset(config.preset);
            policy.crop_size = config.backbone.input_size;
            bundle.history = detector::train(model, train_m, train_m, policy, config.schedule,
                                             hash_combine(mix64(config.seed), "train"));
            if (config.calibration_pair) {
                metrics::Scorer scorer = [&](const Image& im) {
                    return detector::score(model, {im})[0];
                };
                Image real_im = read_image(config.calibration_pair->first);
                Image fake_im = read_image(config.calibration_pair->second);
                RandomStream cal_rng(hash_combine(mix64(config.seed), "calibrate"));
                metrics::CalibrationResult cal = metrics::two_shot_calibrate(
                    scorer, real_im, fake_im, 128, cal_rng,
                    config.calibration_pair->first.filename().string(),
                    config.calibration_pair->second.filename().string());
                model.calibration_bias = cal.bias;
            }
            detector::save_checkpoint(model, meta, ckpt);
            nlohmann::json jh = {{"total_epochs", bundle.history.total_epochs},
                                 {"termination_reason", bundle.history.termination_reason},
                                 {"best_epoch", bundle.history.best_epoch},
                                 {"best_val_accuracy", bundle.history.best_val_accuracy}};
            jh["epochs"] = nlohmann::json::array();
            for (const auto& e : bundle.history.epochs)
                jh["epochs"].push_back({{"train_loss", e.train_loss},
                                        {"val_accuracy", e.val_accuracy},
                                        {"lr", e.lr}});
            detail::write_text(hist, jh.dump(2) + "\n");
        }
        std::filesystem::copy_file(ckpt, out / "checkpoint.ckpt",
                                   std::filesystem::copy_options::overwrite_existing);
        std::filesystem::copy_file(hist, out / "train_history.json",
                                   std::filesystem::copy_options::overwrite_existing);
        report["train"] = {{"termination_reason", bundle.history.termination_reason},
                           {"total_epochs", bundle.history.total_epochs},
                           {"best_epoch", bundle.history.best_epoch},
                           {"best_val_accuracy", bundle.history.best_val_accuracy},
                           {"checkpoint_key", key}};
    });

    metrics::Scorer scorer = [&model](const Image& im) { return detector::score(model, {im})[0]; };

    // evaluate
    detail::run_stage("evaluate", out, [&] {
        report["evals"] = nlohmann::json::object();
        for (const auto& name : eval_order) {
            metrics::EvaluateOptions opts;
            opts.resize_mode = config.resize_mode;
            if (config.calibration_pair) {
                metrics::CalibrationResult cal;
                cal.bias = model.calibration_bias;
                opts.calibration = cal;
            }
            metrics::EvaluationReport r = metrics::evaluate(scorer, eval_ms.at(name), opts);
            const nlohmann::json jr = metrics::report_to_json(r);
            detail::write_text(out / ("eval_" + name + ".json"), jr.dump(2) + "\n");
            report["evals"][name] = jr;
            bundle.evals[name] = std::move(r);
        }
    });

    // robustness
    if (!config.robustness_grids.empty()) detail::run_stage("robustness", out, [&] {
        report["robustness"] = nlohmann::json::object();
        const DatasetManifest& m = eval_ms.at(eval_order.front());
        for (const auto& grid : config.robustness_grids) {
            robustness::RobustnessOptions opts;
            opts.resize_mode = config.resize_mode;
            robustness::RobustnessCurve curve = robustness::robustness_sweep(model, m, grid, opts);
            const std::string stem = "robustness_" + robustness::to_string(grid.kind);
            robustness::write_curve_csv(curve, out / (stem + ".csv"));
            robustness::write_curve_png(curve, out / (stem + ".png"));
            nlohmann::json points = nlohmann::json::array();
            for (const auto& p : curve.points)
                points.push_back({{"level", p.level},
                                  {"ap", std::isnan(p.ap) ? nlohmann::json() : nlohmann::json(p.ap)},
                                  {"acc_oracle", p.accuracy_oracle}});
            report["robustness"][robustness::to_string(grid.kind)] = {
                {"points", points},
                {"model_fingerprint", curve.model_fingerprint},
                {"eval", eval_order.front()}};
        }
    });

    // spectra
    if (!config.spectra_targets.empty()) detail::run_stage("spectra", out, [&] {
        report["spectra"] = nlohmann::json::object();
        for (const auto& t : config.spectra_targets) {
            const DatasetManifest& m = t.corpus == "train" ? train_m : eval_ms.at(t.corpus);
            std::vector<Image> images;
            for (const auto& rec : m.records) {
                if (rec.source_id != t.source_id) continue;
                if (t.label == "fake" && rec.label != Label::fake) continue;
                if (t.label == "real" && rec.label != Label::real) continue;
                images.push_back(preprocess_image(read_image(m.resolve(rec)),
                                                  m.sources.at(rec.source_id)));
            }
            if (images.empty())
                throw ValidationError("spectra target matched no images: " + t.source_id);
            spectra::SpectrumMap map = spectra::average_spectrum(
                images, t.n_max, hash_combine(mix64(config.seed), "spectra", t.corpus, t.source_id),
                t.source_id);
            spectra::validate_spectrum(map);
            const std::string stem = "spectrum_" + t.corpus + "_" + t.source_id + "_" + t.label;
            spectra::write_spectrum_png(map, out / (stem + ".png"));
            spectra::write_spectrum_raw(map, out / stem);
            report["spectra"][stem] = {{"halfband_peak_ratio", spectra::halfband_peak_ratio(map)},
                                       {"n_averaged", map.n_averaged},
                                       {"h", map.h},
                                       {"w", map.w}};
        }
    });

    // dip
    if (config.dip_stage) detail::run_stage("dip", out, [&] {
        DatasetManifest targets = load_manifest(config.dip_stage->targets_manifest);
        std::vector<ImageRecord> reals;
        for (const auto& rec : targets.records)
            if (rec.label == Label::real &&
                static_cast<int>(reals.size()) < config.dip_stage->max_targets)
                reals.push_back(rec);
        DatasetManifest trimmed = targets;
        trimmed.records = reals;
        dip::DipConfig dc = config.dip_stage->config;
        dc.seed = hash_combine(mix64(config.seed), "dip");
        DatasetManifest built = dip::build_dip_dataset(trimmed, dc, out / "dip",
                                                       static_cast<int>(dc.snapshot_iters.size()));
        long fakes = 0;
        for (const auto& rec : built.records)
            if (rec.label == Label::fake) ++fakes;
        report["dip"] = {{"targets", reals.size()},
                         {"fake_records", fakes},
                         {"real_records", static_cast<long>(built.records.size()) - fakes},
                         {"manifest", "dip/manifest.jsonl"}};
    });

    // rank
    detail::run_stage("rank", out, [&] {
        report["rank"] = nlohmann::json::object();
        for (const auto& name : eval_order) {
            RankGallery g = rank_images(model, eval_ms.at(name), config.rank_percentiles,
                                        config.rank_include_reals, config.resize_mode);
            write_gallery(g, eval_ms.at(name), out / "rank" / name);
            report["rank"][name] = gallery_to_json(g);
        }
    });

    // artifact index; every file under the bundle except the index itself and
    // the cache subtree is listed with its content hash
    nlohmann::json artifacts = nlohmann::json::object();
    for (auto it = std::filesystem::recursive_directory_iterator(out);
         it != std::filesystem::recursive_directory_iterator(); ++it) {
        if (it->is_directory() && std::filesystem::equivalent(it->path(), cache)) {
            it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        const std::string rel = std::filesystem::relative(it->path(), out).generic_string();
        if (rel == "report.json") continue;
        artifacts[rel] = detail::hex64(detail::hash_file(it->path()));
    }
    report["artifacts"] = artifacts;
    detail::write_text(out / "report.json", report.dump(2) + "\n");
    bundle.report = std::move(report);
    return bundle;
}

}  // namespace synthdet::harness
