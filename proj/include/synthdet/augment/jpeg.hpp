#pragma once

#include <csetjmp>
#include <cstdio>
#include <cstdlib>
#include <vector>

#include <jpeglib.h>

#include "synthdet/augment/policy.hpp"
#include "synthdet/core/errors.hpp"
#include "synthdet/core/image.hpp"

namespace synthdet {

namespace detail {

struct JpegErrorMgr {
    jpeg_error_mgr pub;
    jmp_buf env;
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    longjmp(err->env, 1);
}

}  // namespace detail

inline std::vector<unsigned char> encode_jpeg(const Image& im, int quality, const JpegCodecConfig& codec) {
    if (quality < 1 || quality > 100) throw ValidationError("jpeg quality must be in [1,100]");
    if (im.h < 1 || im.w < 1) throw ValidationError("empty image");

    jpeg_compress_struct cinfo{};
    detail::JpegErrorMgr jerr{};
    cinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;
    unsigned char* mem = nullptr;
    unsigned long mem_size = 0;
    if (setjmp(jerr.env)) {
        jpeg_destroy_compress(&cinfo);
        if (mem) std::free(mem);
        throw StageError("jpeg encode failed");
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &mem_size);
    cinfo.image_width = static_cast<JDIMENSION>(im.w);
    cinfo.image_height = static_cast<JDIMENSION>(im.h);
    cinfo.input_components = 3;
    cinfo.in_color_space = JCS_RGB;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    int luma = codec.chroma == ChromaSubsampling::s420 ? 2 : 1;
    cinfo.comp_info[0].h_samp_factor = luma;
    cinfo.comp_info[0].v_samp_factor = luma;
    cinfo.comp_info[1].h_samp_factor = 1;
    cinfo.comp_info[1].v_samp_factor = 1;
    cinfo.comp_info[2].h_samp_factor = 1;
    cinfo.comp_info[2].v_samp_factor = 1;
    cinfo.dct_method = codec.flavor == QuantizationFlavor::islow ? JDCT_ISLOW : JDCT_IFAST;
    jpeg_start_compress(&cinfo, TRUE);
    std::vector<uint8_t> row(static_cast<size_t>(im.w) * 3);
    while (cinfo.next_scanline < cinfo.image_height) {
        const uint8_t* src = im.px.data() + static_cast<size_t>(cinfo.next_scanline) * im.w * 3;
        JSAMPROW rows[1] = {const_cast<uint8_t*>(src)};
        jpeg_write_scanlines(&cinfo, rows, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<unsigned char> out(mem, mem + mem_size);
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    return out;
}

inline Image decode_jpeg(const unsigned char* data, size_t len) {
    jpeg_decompress_struct dinfo{};
    detail::JpegErrorMgr jerr{};
    dinfo.err = jpeg_std_error(&jerr.pub);
    jerr.pub.error_exit = detail::jpeg_error_exit;
    if (setjmp(jerr.env)) {
        jpeg_destroy_decompress(&dinfo);
        throw StageError("jpeg decode failed");
    }
    jpeg_create_decompress(&dinfo);
    jpeg_mem_src(&dinfo, data, static_cast<unsigned long>(len));
    jpeg_read_header(&dinfo, TRUE);
    dinfo.out_color_space = JCS_RGB;
    dinfo.dct_method = JDCT_ISLOW;
    jpeg_start_decompress(&dinfo);
    Image im(static_cast<int>(dinfo.output_height), static_cast<int>(dinfo.output_width));
    while (dinfo.output_scanline < dinfo.output_height) {
        uint8_t* dst = im.px.data() + static_cast<size_t>(dinfo.output_scanline) * im.w * 3;
        JSAMPROW rows[1] = {dst};
        jpeg_read_scanlines(&dinfo, rows, 1);
    }
    jpeg_finish_decompress(&dinfo);
    jpeg_destroy_decompress(&dinfo);
    return im;
}

inline Image jpeg_reencode(const Image& im, int quality, const JpegCodecConfig& codec) {
    auto bytes = encode_jpeg(im, quality, codec);
    Image out = decode_jpeg(bytes.data(), bytes.size());
    if (out.h != im.h || out.w != im.w) throw StageError("jpeg round trip changed dimensions");
    return out;
}

}  // namespace synthdet
