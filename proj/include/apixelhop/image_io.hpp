#pragma once

// PNG and JPEG codecs on top of libpng / libjpeg.

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <jpeglib.h>
#include <png.h>

#include "error.hpp"
#include "image.hpp"

namespace apixelhop {

namespace detail {

struct PngReader {
    std::span<const std::uint8_t> bytes;
    std::size_t offset = 0;
};

inline void png_read_mem(png_structp png, png_bytep out, png_size_t len) {
    auto* r = static_cast<PngReader*>(png_get_io_ptr(png));
    if (r->offset + len > r->bytes.size()) png_error(png, "unexpected end of data");
    std::memcpy(out, r->bytes.data() + r->offset, len);
    r->offset += len;
}

inline void png_silent_warning(png_structp, png_const_charp) {}
[[noreturn]] inline void png_silent_error(png_structp png, png_const_charp) { png_longjmp(png, 1); }

// Kept free of non-trivially-destructible locals because libpng longjmps out
// of it on error.
inline bool png_decode_raw(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& rgb, int& width,
                           int& height, std::string& message) {
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_silent_error, png_silent_warning);
    if (!png) {
        message = "png_create_read_struct failed";
        return false;
    }
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        message = "png_create_info_struct failed";
        return false;
    }
    PngReader reader{bytes, 0};
    std::vector<png_bytep>* rows = nullptr;
    if (setjmp(png_jmpbuf(png))) {
        delete rows;
        png_destroy_read_struct(&png, &info, nullptr);
        message = "corrupt PNG stream";
        return false;
    }
    png_set_read_fn(png, &reader, png_read_mem);
    png_read_info(png, info);

    const png_byte color = png_get_color_type(png, info);
    if (png_get_bit_depth(png, info) == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    const std::size_t stride = png_get_rowbytes(png, info);
    if (png_get_channels(png, info) != 3 || stride != static_cast<std::size_t>(width) * 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        message = "unsupported PNG layout";
        return false;
    }
    rgb.resize(stride * static_cast<std::size_t>(height));
    rows = new std::vector<png_bytep>(static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) (*rows)[static_cast<std::size_t>(y)] = rgb.data() + stride * y;
    png_read_image(png, rows->data());
    png_read_end(png, nullptr);
    delete rows;
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

struct JpegError {
    jpeg_error_mgr mgr;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

inline void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegError*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

inline void jpeg_silent(j_common_ptr, int) {}

inline bool jpeg_decode_raw(std::span<const std::uint8_t> bytes, std::vector<std::uint8_t>& rgb, int& width,
                            int& height, std::string& message) {
    jpeg_decompress_struct cinfo;
    JpegError err;
    cinfo.err = jpeg_std_error(&err.mgr);
    err.mgr.error_exit = jpeg_error_exit;
    err.mgr.emit_message = jpeg_silent;
    err.message[0] = '\0';
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        message = err.message;
        return false;
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    rgb.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rgb.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * 3;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return true;
}

inline bool has_png_signature(std::span<const std::uint8_t> b) {
    return b.size() >= 8 && png_sig_cmp(b.data(), 0, 8) == 0;
}

inline bool has_jpeg_signature(std::span<const std::uint8_t> b) {
    return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

} // namespace detail

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::IoError, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Decodes PNG or JPEG (sniffed from the signature) into an RGB raster.
inline RgbImage decode_image(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> rgb;
    int w = 0;
    int h = 0;
    std::string message;
    bool ok = false;
    if (detail::has_png_signature(bytes))
        ok = detail::png_decode_raw(bytes, rgb, w, h, message);
    else if (detail::has_jpeg_signature(bytes))
        ok = detail::jpeg_decode_raw(bytes, rgb, w, h, message);
    else
        message = "not a PNG or JPEG file";
    if (!ok) fail(Errc::DecodeError, message);
    return from_bytes(w, h, 3, rgb);
}

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      std::span<const std::uint8_t> pixels) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, pixels.data(), 0, nullptr)) {
        const std::string msg = image.message;
        png_image_free(&image);
        fail(Errc::IoError, "cannot write " + path.string() + ": " + msg);
    }
}

inline void write_png(const std::filesystem::path& path, const RgbImage& img) {
    const auto bytes = to_bytes(img);
    write_png(path, img.width, img.height, 3, bytes);
}

} // namespace apixelhop
