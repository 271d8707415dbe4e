#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "synthdet/core/errors.hpp"
#include "synthdet/core/hash.hpp"
#include "synthdet/core/image.hpp"

namespace synthdet {

inline Image from_mat_bgr(const cv::Mat& m) {
    Image im(m.rows, m.cols);
    for (int y = 0; y < m.rows; ++y) {
        const auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < m.cols; ++x) {
            im.at(y, x, 0) = row[x][2];
            im.at(y, x, 1) = row[x][1];
            im.at(y, x, 2) = row[x][0];
        }
    }
    return im;
}

inline cv::Mat to_mat_bgr(const Image& im) {
    cv::Mat m(im.h, im.w, CV_8UC3);
    for (int y = 0; y < im.h; ++y) {
        auto* row = m.ptr<cv::Vec3b>(y);
        for (int x = 0; x < im.w; ++x) {
            row[x][2] = im.at(y, x, 0);
            row[x][1] = im.at(y, x, 1);
            row[x][0] = im.at(y, x, 2);
        }
    }
    return m;
}

inline Image read_image(const std::filesystem::path& path) {
    cv::Mat m = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (m.empty()) throw ValidationError("cannot decode image: " + path.string());
    if (m.depth() != CV_8U) throw ValidationError("not an 8-bit image: " + path.string());
    return from_mat_bgr(m);
}

inline std::vector<unsigned char> encode_png(const Image& im) {
    std::vector<unsigned char> buf;
    if (!cv::imencode(".png", to_mat_bgr(im), buf, {cv::IMWRITE_PNG_COMPRESSION, 3}))
        throw StageError("png encode failed");
    return buf;
}

inline void write_bytes(const std::filesystem::path& path, const void* data, size_t len) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw StageError("cannot open for writing: " + path.string());
    f.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!f) throw StageError("write failed: " + path.string());
}

inline void write_png(const std::filesystem::path& path, const Image& im) {
    auto buf = encode_png(im);
    write_bytes(path, buf.data(), buf.size());
}

inline std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ValidationError("cannot open: " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline uint64_t file_hash(const std::filesystem::path& path) {
    auto bytes = read_bytes(path);
    return fnv1a64(bytes.data(), bytes.size());
}

}  // namespace synthdet
