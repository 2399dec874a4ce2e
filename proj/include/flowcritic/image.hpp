#pragma once

#include "error.hpp"
#include "geometry.hpp"
#include "util.hpp"

#include <png.h>

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

namespace flowcritic {

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;

    friend bool operator==(const Rgb&, const Rgb&) = default;
};

/// 8-bit RGB raster, row-major.
class Image {
public:
    Image() = default;
    Image(int width, int height, Rgb fill = {})
        : width_(width)
        , height_(height)
        , pixels_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill)
    {}

    int width() const { return width_; }
    int height() const { return height_; }
    bool empty() const { return pixels_.empty(); }

    Rgb at(int x, int y) const { return pixels_[index(x, y)]; }
    void set(int x, int y, Rgb c) { pixels_[index(x, y)] = c; }

    void fill_rect(const BoundingBox& box, Rgb c) {
        auto clipped = clamp_to(box, width_, height_);
        if (!clipped) return;
        for (int y = clipped->y; y < clipped->bottom(); ++y) {
            for (int x = clipped->x; x < clipped->right(); ++x) set(x, y, c);
        }
    }

    const std::vector<Rgb>& pixels() const { return pixels_; }

    friend bool operator==(const Image&, const Image&) = default;

private:
    std::size_t index(int x, int y) const {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<Rgb> pixels_;
};

/// Copies `region` (clamped to the image) into a new image.
/// Throws ZeroAreaRegion when the region has no area or lies fully outside.
inline std::pair<Image, BoundingBox> crop(const Image& src, const BoundingBox& region) {
    if (region.w <= 0 || region.h <= 0) {
        throw Error(ErrorCode::ZeroAreaRegion, "crop region has zero area");
    }
    auto clipped = clamp_to(region, src.width(), src.height());
    if (!clipped) throw Error(ErrorCode::ZeroAreaRegion, "crop region lies outside the image");
    Image out(clipped->w, clipped->h);
    for (int y = 0; y < clipped->h; ++y) {
        for (int x = 0; x < clipped->w; ++x) out.set(x, y, src.at(clipped->x + x, clipped->y + y));
    }
    return {std::move(out), *clipped};
}

namespace detail {

struct PngReadBuffer {
    const std::string* data;
    std::size_t offset;
};

inline void png_read_from_buffer(png_structp png, png_bytep out, png_size_t len) {
    auto* buf = static_cast<PngReadBuffer*>(png_get_io_ptr(png));
    if (buf->offset + len > buf->data->size()) png_error(png, "truncated PNG");
    std::memcpy(out, buf->data->data() + buf->offset, len);
    buf->offset += len;
}

inline void png_write_to_string(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), len);
}

inline void png_flush_noop(png_structp) {}

} // namespace detail

inline std::string encode_png(const Image& img) {
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::Io, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::Io, "PNG encoding failed");
    }
    png_set_write_fn(png, &out, detail::png_write_to_string, detail::png_flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width()), static_cast<png_uint_32>(img.height()), 8,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_byte> row(static_cast<std::size_t>(img.width()) * 3);
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            auto c = img.at(x, y);
            row[static_cast<std::size_t>(x) * 3 + 0] = c.r;
            row[static_cast<std::size_t>(x) * 3 + 1] = c.g;
            row[static_cast<std::size_t>(x) * 3 + 2] = c.b;
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
}

inline Image decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw Error(ErrorCode::UnresolvableImage, "not a PNG stream");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw Error(ErrorCode::Io, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::UnresolvableImage, "PNG decoding failed");
    }
    detail::PngReadBuffer buffer{&bytes, 0};
    png_set_read_fn(png, &buffer, detail::png_read_from_buffer);
    png_read_info(png, info);

    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    png_set_expand_gray_1_2_4_to_8(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    auto width = static_cast<int>(png_get_image_width(png, info));
    auto height = static_cast<int>(png_get_image_height(png, info));
    Image img(width, height);
    std::vector<png_byte> row(png_get_rowbytes(png, info));
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x) {
            auto i = static_cast<std::size_t>(x) * 3;
            img.set(x, y, Rgb{row[i], row[i + 1], row[i + 2]});
        }
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

inline Image load_png(const fs::path& path) { return decode_png(read_file(path)); }

inline void save_png(const Image& img, const fs::path& path) { write_file(path, encode_png(img)); }

} // namespace flowcritic
