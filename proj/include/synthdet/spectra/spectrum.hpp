#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <string>
#include <vector>

#include "synthdet/augment/blur.hpp"
#include "synthdet/core/errors.hpp"
#include "synthdet/core/image.hpp"
#include "synthdet/core/imageio.hpp"
#include "synthdet/core/random.hpp"

namespace synthdet::spectra {

// Signed per-channel residual grid in doubles.
struct ResidualGrid {
    int h = 0, w = 0;
    std::vector<double> v;  // h*w*3 interleaved

    ResidualGrid() = default;
    ResidualGrid(int height, int width)
        : h(height), w(width), v(static_cast<size_t>(height) * width * 3, 0.0) {}

    double& at(int y, int x, int c) { return v[(static_cast<size_t>(y) * w + x) * 3 + c]; }
    double at(int y, int x, int c) const { return v[(static_cast<size_t>(y) * w + x) * 3 + c]; }
};

inline Image median_filter3(const Image& im) {
    Image out(im.h, im.w);
    uint8_t window[9];
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c) {
                int k = 0;
                for (int dy = -1; dy <= 1; ++dy)
                    for (int dx = -1; dx <= 1; ++dx)
                        window[k++] = im.at(detail::reflect_index(y + dy, im.h),
                                            detail::reflect_index(x + dx, im.w), c);
                std::nth_element(window, window + 4, window + 9);
                out.at(y, x, c) = window[4];
            }
    return out;
}

// high_pass = median_filter(image) - image, per channel, floating point.
inline ResidualGrid high_pass(const Image& im) {
    const Image med = median_filter3(im);
    ResidualGrid r(im.h, im.w);
    for (int y = 0; y < im.h; ++y)
        for (int x = 0; x < im.w; ++x)
            for (int c = 0; c < 3; ++c)
                r.at(y, x, c) =
                    static_cast<double>(med.at(y, x, c)) - static_cast<double>(im.at(y, x, c));
    return r;
}

struct SpectrumMap {
    int h = 0, w = 0;
    std::vector<double> mag;  // DC-centered magnitudes, h*w
    size_t n_averaged = 0;
    std::string source_id;
    std::string channel_mode = "mean_of_channels";

    double at(int y, int x) const { return mag[static_cast<size_t>(y) * w + x]; }
};

namespace sdetail {

// Per-channel |DFT| of the residual, channels averaged, DC moved to center.
inline std::vector<double> image_spectrum(const Image& im) {
    const ResidualGrid r = high_pass(im);
    const int h = im.h, w = im.w;
    std::vector<double> acc(static_cast<size_t>(h) * w, 0.0);
    cv::Mat plane(h, w, CV_64F);
    for (int c = 0; c < 3; ++c) {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) plane.at<double>(y, x) = r.at(y, x, c);
        cv::Mat freq;
        cv::dft(plane, freq, cv::DFT_COMPLEX_OUTPUT);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const auto z = freq.at<cv::Vec2d>(y, x);
                acc[static_cast<size_t>(y) * w + x] += std::hypot(z[0], z[1]);
            }
    }
    std::vector<double> centered(acc.size());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const int sy = (y + h - h / 2) % h;
            const int sx = (x + w - w / 2) % w;
            centered[static_cast<size_t>(y) * w + x] = acc[static_cast<size_t>(sy) * w + sx] / 3.0;
        }
    return centered;
}

}  // namespace sdetail

inline SpectrumMap average_spectrum(const std::vector<Image>& images, size_t n_max, uint64_t seed,
                                    const std::string& source_id = "") {
    if (images.empty()) throw ValidationError("average_spectrum: no images");
    if (n_max < 1) throw ValidationError("average_spectrum: n_max must be >= 1");
    const int h = images[0].h, w = images[0].w;
    for (const auto& im : images)
        if (im.h != h || im.w != w)
            throw ValidationError("average_spectrum: mixed image dimensions");

    std::vector<size_t> idx(images.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const size_t take = std::min(n_max, images.size());
    if (take < images.size()) {
        RandomStream rng(seed);
        for (size_t i = 0; i < take; ++i) {
            const size_t j = static_cast<size_t>(
                rng.uniform_int(static_cast<long>(i), static_cast<long>(images.size()) - 1));
            std::swap(idx[i], idx[j]);
        }
    }

    SpectrumMap map;
    map.h = h;
    map.w = w;
    map.mag.assign(static_cast<size_t>(h) * w, 0.0);
    map.n_averaged = take;
    map.source_id = source_id;
    for (size_t k = 0; k < take; ++k) {
        const auto spec = sdetail::image_spectrum(images[idx[k]]);
        for (size_t i = 0; i < spec.size(); ++i) map.mag[i] += spec[i];
    }
    const double inv = 1.0 / static_cast<double>(take);
    for (auto& m : map.mag) m *= inv;
    return map;
}

inline double spectrum_median(const SpectrumMap& map) {
    std::vector<double> tmp = map.mag;
    const size_t mid = tmp.size() / 2;
    std::nth_element(tmp.begin(), tmp.begin() + static_cast<long>(mid), tmp.end());
    return tmp[mid];
}

// Largest magnitude on the four half-band lines (rows/cols at center +/- N/4),
// relative to the map median.
inline double halfband_peak_ratio(const SpectrumMap& map) {
    const int cy = map.h / 2, cx = map.w / 2;
    const int qy = map.h / 4, qx = map.w / 4;
    double peak = 0.0;
    for (int x = 0; x < map.w; ++x) {
        peak = std::max(peak, map.at(cy - qy, x));
        peak = std::max(peak, map.at(cy + qy, x));
    }
    for (int y = 0; y < map.h; ++y) {
        peak = std::max(peak, map.at(y, cx - qx));
        peak = std::max(peak, map.at(y, cx + qx));
    }
    return peak / std::max(spectrum_median(map), 1e-300);
}

// Worst relative asymmetry between mag(u,v) and mag(-u,-v).
inline double point_symmetry_error(const SpectrumMap& map) {
    double worst = 0.0;
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x) {
            const int ry = (map.h - (y + map.h - map.h / 2) % map.h) % map.h;
            const int rx = (map.w - (x + map.w - map.w / 2) % map.w) % map.w;
            const int my = (ry + map.h / 2) % map.h;
            const int mx = (rx + map.w / 2) % map.w;
            const double a = map.at(y, x), b = map.at(my, mx);
            const double denom = std::max({std::abs(a), std::abs(b), 1e-12});
            worst = std::max(worst, std::abs(a - b) / denom);
        }
    return worst;
}

inline void validate_spectrum(const SpectrumMap& map) {
    if (map.mag.size() != static_cast<size_t>(map.h) * map.w)
        throw ValidationError("spectrum map size mismatch");
    for (double m : map.mag)
        if (!(m >= 0.0)) throw ValidationError("spectrum map has a negative or NaN magnitude");
    if (point_symmetry_error(map) > 1e-6)
        throw ValidationError("spectrum map violates point symmetry");
}

// log(1 + magnitude), min-max normalized to 8 bits; single-channel grid.
inline std::vector<uint8_t> render_spectrum(const SpectrumMap& map) {
    std::vector<uint8_t> out(map.mag.size(), 0);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    std::vector<double> logm(map.mag.size());
    for (size_t i = 0; i < map.mag.size(); ++i) {
        logm[i] = std::log1p(map.mag[i]);
        lo = std::min(lo, logm[i]);
        hi = std::max(hi, logm[i]);
    }
    if (hi > lo)
        for (size_t i = 0; i < out.size(); ++i)
            out[i] = clamp_u8(255.0 * (logm[i] - lo) / (hi - lo));
    return out;
}

inline void write_spectrum_png(const SpectrumMap& map, const std::filesystem::path& path) {
    const auto gray = render_spectrum(map);
    cv::Mat m(map.h, map.w, CV_8UC1);
    for (int y = 0; y < map.h; ++y)
        for (int x = 0; x < map.w; ++x)
            m.at<uint8_t>(y, x) = gray[static_cast<size_t>(y) * map.w + x];
    std::vector<uint8_t> buf;
    if (!cv::imencode(".png", m, buf, {cv::IMWRITE_PNG_COMPRESSION, 3}))
        throw StageError("failed to encode spectrum image");
    write_bytes(path, buf.data(), buf.size());
}

// Raw map export: JSON sidecar plus a flat float64 grid.
inline void write_spectrum_raw(const SpectrumMap& map, const std::filesystem::path& base) {
    nlohmann::json j = {{"h", map.h},
                        {"w", map.w},
                        {"n_averaged", map.n_averaged},
                        {"source_id", map.source_id},
                        {"channel_mode", map.channel_mode}};
    std::ofstream meta(base.string() + ".json", std::ios::trunc);
    if (!meta) throw StageError("cannot write spectrum sidecar");
    meta << j.dump(2) << "\n";
    std::ofstream raw(base.string() + ".f64", std::ios::binary | std::ios::trunc);
    if (!raw) throw StageError("cannot write spectrum grid");
    raw.write(reinterpret_cast<const char*>(map.mag.data()),
              static_cast<std::streamsize>(map.mag.size() * sizeof(double)));
}

}  // namespace synthdet::spectra
