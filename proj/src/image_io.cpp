#include "lapfield/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <string>

#include <png.h>

#include "lapfield/atomic_file.hpp"

namespace lapfield {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept { std::fclose(f); }
};

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
    auto* text = static_cast<std::string*>(png_get_error_ptr(png));
    if (text) *text = msg;
    longjmp(png_jmpbuf(png), 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

RasterImage read_png(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, FileCloser> fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw ImageIoError("cannot open image: " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ImageIoError("not a PNG file: " + path.string());

    std::string err;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw ImageIoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw ImageIoError("libpng initialisation failed");
    }

    // Everything libpng-owned lives in these; after longjmp only they are touched.
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    png_uint_32 width = 0, height = 0;
    int channels = 0, depth = 0;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ImageIoError("corrupt PNG " + path.string() + ": " + err);
    }

    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color = png_get_color_type(png, info);
    depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
    if (depth == 16) png_set_swap(png);  // host order is little-endian on supported targets
    png_read_update_info(png, info);

    width = png_get_image_width(png, info);
    height = png_get_image_height(png, info);
    channels = png_get_channels(png, info);
    depth = png_get_bit_depth(png, info);

    const std::size_t stride = png_get_rowbytes(png, info);
    pixels.resize(stride * height);
    rows.resize(height);
    for (png_uint_32 r = 0; r < height; ++r) rows[r] = pixels.data() + r * stride;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    if (channels != 1 && channels != 3) throw ImageIoError("unsupported channel count in " + path.string());

    const int h = static_cast<int>(height), w = static_cast<int>(width);
    RasterImage img(h, w, channels);
    for (int r = 0; r < h; ++r) {
        const unsigned char* src = rows[static_cast<std::size_t>(r)];
        for (int c = 0; c < w; ++c) {
            for (int ch = 0; ch < channels; ++ch) {
                const std::size_t k = static_cast<std::size_t>(c) * channels + ch;
                if (depth == 16) {
                    std::uint16_t v;
                    std::memcpy(&v, src + 2 * k, 2);
                    img(r, c, ch) = static_cast<double>(v) * (255.0 / 65535.0);
                } else {
                    img(r, c, ch) = static_cast<double>(src[k]);
                }
            }
        }
    }
    return img;
}

namespace {

void write_to_vector(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<unsigned char>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

}  // namespace

void write_png(const std::filesystem::path& path, const RasterImage& image, PngDepth depth) {
    const int channels = image.channels();
    if (channels != 1 && channels != 3) throw ImageIoError("PNG export supports 1 or 3 channels");
    const int h = image.height(), w = image.width();
    const int bytes = depth == PngDepth::bits16 ? 2 : 1;
    const double scale = depth == PngDepth::bits16 ? 65535.0 / 255.0 : 1.0;
    const double top = depth == PngDepth::bits16 ? 65535.0 : 255.0;

    std::vector<unsigned char> raw(static_cast<std::size_t>(h) * w * channels * bytes);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c)
            for (int ch = 0; ch < channels; ++ch) {
                const double v = std::clamp(image(r, c, ch), 0.0, 255.0);
                const auto q = static_cast<unsigned>(std::clamp(std::round(v * scale), 0.0, top));
                const std::size_t k = ((static_cast<std::size_t>(r) * w + c) * channels + ch) * bytes;
                if (bytes == 2) {
                    raw[k] = static_cast<unsigned char>(q >> 8);  // PNG is big-endian
                    raw[k + 1] = static_cast<unsigned char>(q & 0xFF);
                } else {
                    raw[k] = static_cast<unsigned char>(q);
                }
            }

    std::vector<unsigned char> encoded;
    std::vector<png_bytep> rows(static_cast<std::size_t>(h));
    for (int r = 0; r < h; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + static_cast<std::size_t>(r) * w * channels * bytes;

    std::string err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_fn, png_warning_fn);
    if (!png) throw ImageIoError("libpng initialisation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw ImageIoError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw ImageIoError("PNG encoding failed: " + err);
    }
    png_set_write_fn(png, &encoded, write_to_vector, flush_noop);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), bytes * 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);

    write_bytes_atomically(path, encoded);
}

std::vector<std::filesystem::path> list_png_files(const std::filesystem::path& dir) {
    std::vector<std::filesystem::path> out;
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) throw ImageIoError("not a directory: " + dir.string());
    for (const auto& e : std::filesystem::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext == ".png") out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

RasterImage promote_channels(RasterImage image, int channels) {
    if (image.channels() == channels) return image;
    if (image.channels() != 1) throw InvalidArgument("cannot convert a multi-channel image to a different channel count");
    std::vector<Plane> planes(static_cast<std::size_t>(channels), image.channel(0));
    return RasterImage(std::move(planes));
}

}  // namespace lapfield
