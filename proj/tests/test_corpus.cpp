#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "synthdet/core/imageio.hpp"
#include "synthdet/corpus/manifest.hpp"
#include "synthdet/corpus/preprocess.hpp"
#include "synthdet/corpus/sample.hpp"
#include "synthdet/corpus/toy.hpp"

using namespace synthdet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
    fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

DatasetManifest make_manifest(int nreal, int nfake, bool balanced = true) {
    DatasetManifest m;
    m.balanced = balanced;
    m.sources["toy"] = PreprocessRule{PreprocessMode::keep, 256};
    for (int i = 0; i < nreal; ++i)
        m.records.push_back({"r" + std::to_string(i), "r.png", Label::real, "toy", "cat", Split::train});
    for (int i = 0; i < nfake; ++i)
        m.records.push_back({"f" + std::to_string(i), "f.png", Label::fake, "toy", "cat", Split::train});
    return m;
}

}  // namespace

TEST_CASE("manifest: empty is valid") {
    DatasetManifest m;
    REQUIRE_NOTHROW(validate_manifest(m));
}

TEST_CASE("manifest: balanced group loads") {
    auto m = make_manifest(2, 2);
    REQUIRE_NOTHROW(validate_manifest(m));
}

TEST_CASE("manifest: imbalance names the group") {
    auto m = make_manifest(3, 2);
    try {
        validate_manifest(m);
        FAIL("expected validation error");
    } catch (const ValidationError& e) {
        std::string msg = e.what();
        REQUIRE(msg.find("toy") != std::string::npos);
        REQUIRE(msg.find("train") != std::string::npos);
    }
}

TEST_CASE("manifest: unknown source and duplicate id rejected") {
    auto m = make_manifest(1, 1);
    m.records.push_back({"x", "x.png", Label::real, "nope", "cat", Split::train});
    REQUIRE_THROWS_AS(validate_manifest(m), ValidationError);

    auto m2 = make_manifest(1, 1, false);
    m2.records.push_back(m2.records[0]);
    REQUIRE_THROWS_AS(validate_manifest(m2), ValidationError);
}

TEST_CASE("manifest: save/load round trip") {
    auto dir = temp_dir("synthdet_manifest_rt");
    auto m = make_manifest(2, 2);
    m.metadata = "note";
    save_manifest(m, dir / "m.jsonl");
    auto back = load_manifest(dir / "m.jsonl");
    REQUIRE(back.records.size() == 4);
    REQUIRE(back.balanced);
    REQUIRE(back.metadata == "note");
    REQUIRE(back.sources.at("toy").mode == PreprocessMode::keep);
    REQUIRE(back.dir == dir);
    fs::remove_all(dir);
}

TEST_CASE("manifest: malformed lines rejected with location") {
    auto dir = temp_dir("synthdet_manifest_bad");
    {
        std::ofstream f(dir / "bad.jsonl");
        f << R"({"sources":{"toy":{"mode":"keep","target":256}},"balanced":false,"metadata":""})" << "\n";
        f << "not json\n";
    }
    try {
        load_manifest(dir / "bad.jsonl");
        FAIL("expected error");
    } catch (const ValidationError& e) {
        REQUIRE(std::string(e.what()).find(":2") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("preprocess: keep is identity") {
    Image im = Image::filled(512, 384, 3, 7, 9);
    Image out = preprocess_image(im, {PreprocessMode::keep, 256});
    REQUIRE(out == im);
}

TEST_CASE("preprocess: resize_short_side shape") {
    Image im(128, 160);
    Image out = preprocess_image(im, {PreprocessMode::resize_short_side, 256});
    REQUIRE(out.h == 256);
    REQUIRE(out.w == 320);

    Image tall(160, 128);
    Image out2 = preprocess_image(tall, {PreprocessMode::resize_short_side, 256});
    REQUIRE(out2.h == 320);
    REQUIRE(out2.w == 256);
}

TEST_CASE("preprocess: crop_long_then_resize shape") {
    Image im(480, 640);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x) im.at(y, x, 0) = static_cast<uint8_t>((x >= 80 && x < 560) ? 200 : 0);
    Image out = preprocess_image(im, {PreprocessMode::crop_long_then_resize, 256});
    REQUIRE(out.h == 256);
    REQUIRE(out.w == 256);
    // the central 480x480 window is constant 200 in channel 0
    REQUIRE(static_cast<int>(out.at(128, 128, 0)) == 200);
    REQUIRE(static_cast<int>(out.at(0, 0, 0)) == 200);
}

TEST_CASE("resize: constant image stays constant") {
    Image im = Image::filled(100, 50, 77, 0, 255);
    Image out = resize_bilinear(im, 200, 100);
    for (size_t i = 0; i < out.px.size(); i += 3) {
        REQUIRE(out.px[i] == 77);
        REQUIRE(out.px[i + 2] == 255);
    }
}

TEST_CASE("resize: 2x upscale of a gradient interpolates midpoints") {
    Image im(1, 2);
    im.at(0, 0, 0) = 0;
    im.at(0, 1, 0) = 100;
    Image out = resize_bilinear(im, 1, 4);
    REQUIRE(static_cast<int>(out.at(0, 0, 0)) == 0);
    REQUIRE(static_cast<int>(out.at(0, 1, 0)) == 25);
    REQUIRE(static_cast<int>(out.at(0, 2, 0)) == 75);
    REQUIRE(static_cast<int>(out.at(0, 3, 0)) == 100);
}

TEST_CASE("crop: center offsets and identity") {
    Image im(256, 256);
    im.at(16, 16, 0) = 42;
    Image c = crop(im, 224, CropMode::center);
    REQUIRE(c.at(0, 0, 0) == 42);

    Image exact(224, 224);
    exact.at(3, 5, 1) = 9;
    REQUIRE(crop(exact, 224, CropMode::center) == exact);
    RandomStream r(1);
    REQUIRE(crop(exact, 224, CropMode::random, &r) == exact);
}

TEST_CASE("crop: random is deterministic given the seed") {
    Image im(256, 300);
    RandomStream a(5), b(5);
    for (auto& p : im.px) p = static_cast<uint8_t>(p + 1);
    Image c1 = crop(im, 224, CropMode::random, &a);
    Image c2 = crop(im, 224, CropMode::random, &b);
    REQUIRE(c1 == c2);
}

TEST_CASE("crop: undersized image rejected") {
    Image im(200, 256);
    REQUIRE_THROWS_AS(crop(im, 224, CropMode::center), ValidationError);
}

TEST_CASE("sample_split: fraction 1.0 is the identity") {
    auto m = make_manifest(10, 10);
    auto out = sample_split(m, std::nullopt, 1.0, 7);
    REQUIRE(out.records.size() == m.records.size());
    for (size_t i = 0; i < out.records.size(); ++i) REQUIRE(out.records[i].id == m.records[i].id);
}

TEST_CASE("sample_split: category filter keeps both labels") {
    DatasetManifest m;
    m.sources["toy"] = PreprocessRule{};
    for (int c = 0; c < 20; ++c) {
        std::string cat = "c" + std::to_string(c);
        m.records.push_back({"r" + cat, "r.png", Label::real, "toy", cat, Split::train});
        m.records.push_back({"f" + cat, "f.png", Label::fake, "toy", cat, Split::train});
    }
    auto out = sample_split(m, std::set<std::string>{"c1", "c2"}, 1.0, 0);
    REQUIRE(out.records.size() == 4);
    for (const auto& r : out.records) REQUIRE((r.category == "c1" || r.category == "c2"));
}

TEST_CASE("sample_split: deterministic and idempotent") {
    auto m = make_manifest(200, 200);
    auto a = sample_split(m, std::nullopt, 0.3, 11);
    auto b = sample_split(m, std::nullopt, 0.3, 11);
    REQUIRE(a.records.size() == b.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) REQUIRE(a.records[i].id == b.records[i].id);

    auto twice = sample_split(a, std::nullopt, 0.3, 11);
    REQUIRE(twice.records.size() == a.records.size());
    for (size_t i = 0; i < a.records.size(); ++i) REQUIRE(twice.records[i].id == a.records[i].id);
}

TEST_CASE("sample_split: balanced groups stay balanced") {
    auto m = make_manifest(100, 100);
    auto out = sample_split(m, std::nullopt, 0.25, 3);
    int nr = 0, nf = 0;
    for (const auto& r : out.records) (r.label == Label::real ? nr : nf)++;
    REQUIRE(nr == nf);
    REQUIRE(nr > 0);
    REQUIRE_NOTHROW(validate_manifest(out));
}

TEST_CASE("sample_split: fraction distribution is roughly honored") {
    auto m = make_manifest(500, 500);
    auto out = sample_split(m, std::nullopt, 0.5, 9);
    // 500 pairs, keep probability 0.5: 3 sigma is about 33 pairs
    REQUIRE(out.records.size() / 2 > 500 / 2 - 34);
    REQUIRE(out.records.size() / 2 < 500 / 2 + 34);
}

TEST_CASE("sample_split: rejects bad arguments") {
    auto m = make_manifest(4, 4);
    REQUIRE_THROWS_AS(sample_split(m, std::nullopt, 0.0, 1), ValidationError);
    REQUIRE_THROWS_AS(sample_split(m, std::nullopt, 1.5, 1), ValidationError);
    REQUIRE_THROWS_AS(sample_split(m, std::set<std::string>{}, 0.5, 1), ValidationError);
}

TEST_CASE("sample_split: empty train result is an error") {
    auto m = make_manifest(1, 1);
    bool threw = false;
    for (uint64_t s = 0; s < 64 && !threw; ++s) {
        try {
            auto out = sample_split(m, std::nullopt, 0.01, s);
            (void)out;
        } catch (const ValidationError&) {
            threw = true;
        }
    }
    REQUIRE(threw);
}

TEST_CASE("toy corpus: deterministic files and balanced manifest") {
    auto d1 = temp_dir("synthdet_toy_a");
    auto d2 = temp_dir("synthdet_toy_b");
    auto m1 = synth_toy_corpus(d1, ToyKind::decoder_nearest, 4, 256, 123);
    auto m2 = synth_toy_corpus(d2, ToyKind::decoder_nearest, 4, 256, 123);
    REQUIRE(m1.records.size() == 8);
    REQUIRE(m1.balanced);
    for (const auto& r : m1.records) {
        REQUIRE(file_hash(m1.resolve(r)) == file_hash(d2 / r.path));
    }
    auto loaded = load_manifest(d1 / "manifest.jsonl");
    REQUIRE(loaded.records.size() == 8);
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("toy corpus: dead leaves mean intensity in range") {
    auto dir = temp_dir("synthdet_toy_dl");
    auto m = synth_toy_corpus(dir, ToyKind::dead_leaves, 100, 256, 5);
    REQUIRE(m.records.size() == 100);
    REQUIRE_FALSE(m.balanced);
    for (const auto& r : m.records) {
        Image im = read_image(m.resolve(r));
        double mean = 0;
        for (auto p : im.px) mean += p;
        mean /= static_cast<double>(im.px.size()) * 255.0;
        REQUIRE(mean > 0.2);
        REQUIRE(mean < 0.8);
    }
    fs::remove_all(dir);
}

TEST_CASE("toy corpus: decoder output fills the 8-bit range") {
    auto dir = temp_dir("synthdet_toy_span");
    auto m = synth_toy_corpus(dir, ToyKind::decoder_nearest, 6, 256, 77);
    double span = 0;
    int nfake = 0;
    for (const auto& r : m.records) {
        if (r.label != Label::fake) continue;
        Image im = read_image(m.resolve(r));
        auto [mn, mx] = std::minmax_element(im.px.begin(), im.px.end());
        span += *mx - *mn;
        ++nfake;
    }
    REQUIRE(span / nfake >= 128.0);
    fs::remove_all(dir);
}

TEST_CASE("toy corpus: splits partition records") {
    auto dir = temp_dir("synthdet_toy_split");
    auto m = synth_toy_corpus(dir, ToyKind::decoder_bilinear, 20, 256, 9);
    int tr = 0, va = 0, te = 0;
    for (const auto& r : m.records) {
        if (r.split == Split::train) ++tr;
        if (r.split == Split::val) ++va;
        if (r.split == Split::test) ++te;
    }
    REQUIRE(tr == 28);
    REQUIRE(va == 6);
    REQUIRE(te == 6);
    fs::remove_all(dir);
}
