#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "synthdet/dip/dip.hpp"

using namespace synthdet;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

Image flat_gray(int size, uint8_t v = 128) {
    return Image::filled(size, size, v, v, v);
}

Image gradient_target(int size) {
    Image im(size, size);
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
            for (int c = 0; c < 3; ++c)
                im.at(y, x, c) = static_cast<uint8_t>(40 + (160 * y) / size);
    return im;
}

dip::DipConfig short_config() {
    dip::DipConfig c;
    c.width = 8;
    c.lr_stages = {0.01, 0.001};
    c.iters_per_stage = 30;
    c.snapshot_iters = {1, 30, 60};
    c.seed = 7;
    return c;
}

DatasetManifest real_targets_manifest(const fs::path& dir, int n, int size) {
    DatasetManifest m;
    m.dir = dir;
    m.sources["flats"] = PreprocessRule{PreprocessMode::keep, 256};
    char name[32];
    for (int i = 0; i < n; ++i) {
        std::snprintf(name, sizeof(name), "tgt_%03d.png", i);
        write_png(dir / name, flat_gray(size, static_cast<uint8_t>(90 + 10 * i)));
        m.records.push_back({std::string(name, 7), name, Label::real, "flats", "flat", Split::train});
    }
    validate_manifest(m);
    return m;
}

}  // namespace

TEST_CASE("dip config validation") {
    REQUIRE_NOTHROW(dip::validate_dip_config(dip::DipConfig{}));

    dip::DipConfig c;
    c.lr_stages = {0.01, 0.01};
    REQUIRE_THROWS_AS(dip::validate_dip_config(c), ValidationError);
    c = {};
    c.lr_stages = {0.001, 0.01};
    REQUIRE_THROWS_AS(dip::validate_dip_config(c), ValidationError);
    c = {};
    c.snapshot_iters = {0};
    REQUIRE_THROWS_AS(dip::validate_dip_config(c), ValidationError);
    c = {};
    c.snapshot_iters = {dip::total_iters(c) + 1};
    REQUIRE_THROWS_AS(dip::validate_dip_config(c), ValidationError);
    c = {};
    c.stages = 0;
    REQUIRE_THROWS_AS(dip::validate_dip_config(c), ValidationError);
}

TEST_CASE("dip rejects targets the topology cannot emit") {
    dip::DipConfig c = short_config();
    REQUIRE_THROWS_AS(dip::reconstruct_dip(flat_gray(30), c, "t"), ValidationError);
    REQUIRE_THROWS_AS(dip::reconstruct_dip(Image(4, 4), c, "t"), ValidationError);
}

TEST_CASE("dip full schedule: six snapshots, converged flat target") {
    dip::DipConfig c;
    c.seed = 3;
    dip::DipResult r = dip::reconstruct_dip(flat_gray(32), c, "flat32");

    REQUIRE(r.loss_trace.size() == 6000);
    REQUIRE(r.snapshots.size() == 6);
    for (int k : {1000, 2000, 3000, 4000, 5000, 6000}) REQUIRE(r.snapshots.count(k) == 1);

    for (double l : r.loss_trace) {
        REQUIRE(std::isfinite(l));
        REQUIRE(l >= 0.0);
    }
    REQUIRE(r.loss_trace.back() < 0.05);
    REQUIRE(r.loss_trace.back() < r.loss_trace.front());
    for (int s = 0; s < 3; ++s) {
        const double start = r.loss_trace[static_cast<size_t>(s) * 2000];
        const double end = r.loss_trace[static_cast<size_t>(s) * 2000 + 1999];
        REQUIRE(end <= start + 1e-6);
    }
}

TEST_CASE("dip short run: improvement and stage monotonicity on a gradient target") {
    dip::DipConfig c = short_config();
    dip::DipResult r = dip::reconstruct_dip(gradient_target(32), c, "grad32");
    REQUIRE(r.loss_trace.size() == 60);
    REQUIRE(r.loss_trace.back() < r.loss_trace.front());
    for (int s = 0; s < 2; ++s) {
        const double start = r.loss_trace[static_cast<size_t>(s) * 30];
        const double end = r.loss_trace[static_cast<size_t>(s) * 30 + 29];
        REQUIRE(end <= start + 1e-6);
    }
}

TEST_CASE("dip determinism: identical runs and prefix-stable snapshots") {
    dip::DipConfig c = short_config();
    dip::DipResult a = dip::reconstruct_dip(gradient_target(32), c, "tgt");
    dip::DipResult b = dip::reconstruct_dip(gradient_target(32), c, "tgt");
    REQUIRE(a.loss_trace == b.loss_trace);
    for (const auto& [k, im] : a.snapshots) REQUIRE(im == b.snapshots.at(k));

    dip::DipConfig prefix = c;
    prefix.lr_stages = {c.lr_stages[0]};
    prefix.snapshot_iters = {1, 30};
    dip::DipResult p = dip::reconstruct_dip(gradient_target(32), prefix, "tgt");
    REQUIRE(p.snapshots.at(1) == a.snapshots.at(1));
    REQUIRE(p.snapshots.at(30) == a.snapshots.at(30));
    REQUIRE(std::equal(p.loss_trace.begin(), p.loss_trace.end(), a.loss_trace.begin()));
}

TEST_CASE("dip seeds networks per target id") {
    dip::DipConfig c = short_config();
    c.snapshot_iters = {1};
    c.lr_stages = {0.01};
    c.iters_per_stage = 1;
    Image t = gradient_target(32);
    dip::DipResult a = dip::reconstruct_dip(t, c, "alpha");
    dip::DipResult b = dip::reconstruct_dip(t, c, "beta");
    REQUIRE(!(a.snapshots.at(1) == b.snapshots.at(1)));
}

TEST_CASE("dip aborts on non-finite loss with a diagnostic") {
    dip::DipConfig c = short_config();
    c.lr_stages = {1e30, 1e29};
    c.iters_per_stage = 10;
    c.snapshot_iters = {1};
    REQUIRE_THROWS_AS(dip::reconstruct_dip(gradient_target(32), c, "boom"), StageError);
    try {
        dip::reconstruct_dip(gradient_target(32), c, "boom");
    } catch (const StageError& e) {
        REQUIRE(std::string(e.what()).find("boom") != std::string::npos);
        REQUIRE(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("dip result files follow the documented layout") {
    const fs::path dir = fresh_dir("synthdet_dip_layout");
    dip::DipConfig c = short_config();
    dip::DipResult r = dip::reconstruct_dip(flat_gray(32), c, "t01");
    dip::write_dip_result(r, dir);
    for (int k : {1, 30, 60}) REQUIRE(fs::exists(dir / "t01" / ("iter_" + std::to_string(k) + ".png")));
    std::ifstream csv(dir / "t01" / "loss.csv");
    std::string line;
    REQUIRE(std::getline(csv, line));
    REQUIRE(line == "iteration,loss");
    size_t rows = 0;
    while (std::getline(csv, line)) ++rows;
    REQUIRE(rows == r.loss_trace.size());
}

TEST_CASE("dip dataset: counting, balance, and layout") {
    const fs::path src = fresh_dir("synthdet_dip_src");
    const fs::path out = fresh_dir("synthdet_dip_out");
    DatasetManifest reals = real_targets_manifest(src, 10, 16);

    dip::DipConfig c;
    c.width = 8;
    c.lr_stages = {0.01, 0.001, 0.0001};
    c.iters_per_stage = 2;
    c.snapshot_iters = {1, 2, 3, 4, 5, 6};
    c.seed = 5;

    DatasetManifest m = dip::build_dip_dataset(reals, c, out);
    long fakes = 0, rl = 0;
    for (const auto& rec : m.records) (rec.label == Label::fake ? fakes : rl)++;
    REQUIRE(fakes == 60);
    REQUIRE(rl == 60);
    REQUIRE(m.balanced);
    REQUIRE_NOTHROW(validate_manifest(m));
    REQUIRE(fs::exists(out / "manifest.jsonl"));
    REQUIRE(fs::exists(out / "tgt_000" / "iter_3.png"));
    REQUIRE(fs::exists(out / "tgt_000" / "target.png"));
    REQUIRE(fs::exists(out / "tgt_009" / "loss.csv"));

    REQUIRE_THROWS_AS(dip::build_dip_dataset(reals, c, out, 5), ValidationError);
}

TEST_CASE("dip dataset: fixed seed reproduces manifests and pixels") {
    const fs::path src = fresh_dir("synthdet_dip_det_src");
    const fs::path a = fresh_dir("synthdet_dip_det_a");
    const fs::path b = fresh_dir("synthdet_dip_det_b");
    DatasetManifest reals = real_targets_manifest(src, 2, 16);

    dip::DipConfig c;
    c.width = 8;
    c.lr_stages = {0.01};
    c.iters_per_stage = 6;
    c.snapshot_iters = {1, 2, 3, 4, 5, 6};
    c.seed = 9;

    DatasetManifest ma = dip::build_dip_dataset(reals, c, a);
    DatasetManifest mb = dip::build_dip_dataset(reals, c, b);
    REQUIRE(ma.records.size() == mb.records.size());
    for (size_t i = 0; i < ma.records.size(); ++i) {
        REQUIRE(ma.records[i].id == mb.records[i].id);
        REQUIRE(ma.records[i].path == mb.records[i].path);
        REQUIRE(ma.records[i].label == mb.records[i].label);
    }
    for (const auto& rec : ma.records)
        if (rec.label == Label::fake) REQUIRE(read_image(a / rec.path) == read_image(b / rec.path));
}
