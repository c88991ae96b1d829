// Copyright 2026 the gcodec authors
// SPDX-License-Identifier: Apache-2.0

#include "gcodec/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "gcodec/common.hpp"

namespace gcodec {

namespace {

Tensor from_bytes(const std::vector<unsigned char>& px, int h, int w, int src_channels,
                  int dst_channels) {
    Tensor img(1, dst_channels, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            const unsigned char* p = px.data() + (static_cast<size_t>(y) * w + x) * src_channels;
            for (int c = 0; c < dst_channels; ++c) {
                // replicate gray to RGB; average RGB down to gray
                double v;
                if (src_channels == 1) {
                    v = p[0];
                } else if (dst_channels == 1) {
                    v = (p[0] + p[1] + p[2]) / 3.0;
                } else {
                    v = p[std::min(c, src_channels - 1)];
                }
                img.at(0, c, y, x) = v / 255.0;
            }
        }
    return img;
}

bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
    return tail == suf;
}

Tensor load_png(const std::string& path, int channels) {
    FILE* fp = std::fopen(path.c_str(), "rb");
    if (!fp) throw std::runtime_error("load_png: cannot open " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        if (png) png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw std::runtime_error("load_png: libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        std::fclose(fp);
        throw UnsupportedFormatError("load_png: not a decodable PNG: " + path);
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    png_set_expand(png);          // palettes, low bit depths, tRNS
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    const int ch = static_cast<int>(png_get_channels(png, info));
    std::vector<unsigned char> px(static_cast<size_t>(h) * w * ch);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = px.data() + static_cast<size_t>(y) * w * ch;
    png_read_image(png, rows.data());
    png_destroy_read_struct(&png, &info, nullptr);
    std::fclose(fp);
    return from_bytes(px, h, w, ch, channels);
}

void save_png(const std::vector<unsigned char>& px, int h, int w, int channels,
              const std::string& path) {
    FILE* fp = std::fopen(path.c_str(), "wb");
    if (!fp) throw std::runtime_error("save_png: cannot open " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        if (png) png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw std::runtime_error("save_png: write failed: " + path);
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, w, h, 8,
                 channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y)
        rows[y] = const_cast<png_bytep>(px.data() + static_cast<size_t>(y) * w * channels);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

int read_pnm_token(std::istream& is) {
    // skips whitespace and '#' comments
    for (;;) {
        int c = is.peek();
        if (c == '#') {
            std::string line;
            std::getline(is, line);
        } else if (std::isspace(c)) {
            is.get();
        } else {
            break;
        }
    }
    int v;
    if (!(is >> v)) throw UnsupportedFormatError("pnm: bad header");
    return v;
}

Tensor load_pnm(const std::string& path, int channels) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_pnm: cannot open " + path);
    char m0 = 0, m1 = 0;
    is.get(m0).get(m1);
    if (m0 != 'P' || (m1 != '5' && m1 != '6'))
        throw UnsupportedFormatError("load_pnm: only binary P5/P6 supported: " + path);
    const int src_channels = m1 == '6' ? 3 : 1;
    const int w = read_pnm_token(is);
    const int h = read_pnm_token(is);
    const int maxv = read_pnm_token(is);
    if (maxv != 255) throw UnsupportedFormatError("load_pnm: only 8-bit supported");
    is.get();  // single whitespace after header
    std::vector<unsigned char> px(static_cast<size_t>(h) * w * src_channels);
    is.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!is) throw UnsupportedFormatError("load_pnm: truncated pixel data");
    return from_bytes(px, h, w, src_channels, channels);
}

void save_pnm(const std::vector<unsigned char>& px, int h, int w, int channels,
              const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("save_pnm: cannot open " + path);
    os << (channels == 1 ? "P5" : "P6") << "\n" << w << " " << h << "\n255\n";
    os.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!os) throw std::runtime_error("save_pnm: write failed");
}

std::vector<unsigned char> to_bytes(const Tensor& img) {
    const int c = img.c(), h = img.h(), w = img.w();
    std::vector<unsigned char> px(static_cast<size_t>(h) * w * c);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int ci = 0; ci < c; ++ci) {
                double v = img.at(0, ci, y, x);
                v = std::clamp(v, 0.0, 1.0);
                // round half away from zero
                px[(static_cast<size_t>(y) * w + x) * c + ci] =
                    static_cast<unsigned char>(std::round(v * 255.0));
            }
    return px;
}

}  // namespace

bool is_image_file(const std::string& path) {
    return has_suffix(path, ".png") || has_suffix(path, ".ppm") || has_suffix(path, ".pgm");
}

Tensor load_image(const std::string& path, int channels) {
    if (has_suffix(path, ".png")) return load_png(path, channels);
    if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) return load_pnm(path, channels);
    throw UnsupportedFormatError("load_image: unsupported extension: " + path);
}

void save_image(const Tensor& img, const std::string& path) {
    if (img.n() != 1) throw std::invalid_argument("save_image: expects a single image");
    auto px = to_bytes(img);
    if (has_suffix(path, ".png")) {
        save_png(px, img.h(), img.w(), img.c(), path);
    } else if (has_suffix(path, ".ppm") || has_suffix(path, ".pgm")) {
        save_pnm(px, img.h(), img.w(), img.c(), path);
    } else {
        throw UnsupportedFormatError("save_image: unsupported extension: " + path);
    }
}

namespace {
inline double cubic_kernel(double t) {
    // Catmull-Rom (a = -0.5)
    const double a = -0.5;
    t = std::abs(t);
    if (t <= 1.0) return (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0;
    if (t < 2.0) return a * t * t * t - 5.0 * a * t * t + 8.0 * a * t - 4.0 * a;
    return 0.0;
}
}  // namespace

Tensor resize_bicubic(const Tensor& img, int out_h, int out_w) {
    if (out_h <= 0 || out_w <= 0) throw std::invalid_argument("resize_bicubic: bad output dims");
    const int c = img.c(), h = img.h(), w = img.w();
    const double sy = static_cast<double>(h) / out_h;
    const double sx = static_cast<double>(w) / out_w;
    // horizontal pass then vertical pass
    Tensor tmp(img.n(), c, h, out_w);
    for (int n = 0; n < img.n(); ++n)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < out_w; ++x) {
                    const double src = (x + 0.5) * sx - 0.5;
                    const int i0 = static_cast<int>(std::floor(src)) - 1;
                    double acc = 0.0, wsum = 0.0;
                    for (int i = i0; i < i0 + 4; ++i) {
                        const double kw = cubic_kernel(src - i);
                        const int ii = std::clamp(i, 0, w - 1);
                        acc += kw * img.at(n, ci, y, ii);
                        wsum += kw;
                    }
                    tmp.at(n, ci, y, x) = acc / wsum;
                }
    Tensor out(img.n(), c, out_h, out_w);
    for (int n = 0; n < img.n(); ++n)
        for (int ci = 0; ci < c; ++ci)
            for (int y = 0; y < out_h; ++y) {
                const double src = (y + 0.5) * sy - 0.5;
                const int i0 = static_cast<int>(std::floor(src)) - 1;
                for (int x = 0; x < out_w; ++x) {
                    double acc = 0.0, wsum = 0.0;
                    for (int i = i0; i < i0 + 4; ++i) {
                        const double kw = cubic_kernel(src - i);
                        const int ii = std::clamp(i, 0, h - 1);
                        acc += kw * tmp.at(n, ci, ii, x);
                        wsum += kw;
                    }
                    out.at(n, ci, y, x) = acc / wsum;
                }
            }
    return out;
}

Tensor reflect_pad_to_multiple(const Tensor& img, int multiple) {
    const int h = img.h(), w = img.w();
    const int H = (h + multiple - 1) / multiple * multiple;
    const int W = (w + multiple - 1) / multiple * multiple;
    if (H == h && W == w) return img;
    Tensor out(img.n(), img.c(), H, W);
    auto reflect = [](int i, int n) {
        // reflect without repeating the edge sample; degenerate for n == 1
        if (n == 1) return 0;
        const int period = 2 * n - 2;
        i = i % period;
        if (i < 0) i += period;
        return i < n ? i : period - i;
    };
    for (int n = 0; n < img.n(); ++n)
        for (int c = 0; c < img.c(); ++c)
            for (int y = 0; y < H; ++y)
                for (int x = 0; x < W; ++x)
                    out.at(n, c, y, x) = img.at(n, c, reflect(y, h), reflect(x, w));
    return out;
}

std::vector<Tensor> tile_patches(const Tensor& img, int patch) {
    if (patch <= 0) throw std::invalid_argument("tile_patches: bad patch size");
    std::vector<Tensor> out;
    for (int y = 0; y + patch <= img.h(); y += patch)
        for (int x = 0; x + patch <= img.w(); x += patch) {
            Tensor p(1, img.c(), patch, patch);
            for (int c = 0; c < img.c(); ++c)
                for (int yy = 0; yy < patch; ++yy)
                    for (int xx = 0; xx < patch; ++xx)
                        p.at(0, c, yy, xx) = img.at(0, c, y + yy, x + xx);
            out.push_back(std::move(p));
        }
    return out;
}

}  // namespace gcodec
